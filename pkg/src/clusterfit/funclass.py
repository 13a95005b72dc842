"""Smoothness descriptors and the closed-form rate / sizing calculators.

Every calculator reports a *shape*: unspecified universal constants are exposed
as a caller-supplied ``c`` that defaults to 1.  Logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class CompositionTree:
    """A node ``(s, K)`` of a hierarchical composition model plus its subtrees.

    Leaves (the level-1 base case) have no children; an internal node has
    exactly ``K`` children, one per argument of its outer function.
    """

    s: float
    K: int
    children: tuple["CompositionTree", ...] = ()

    def __post_init__(self):
        if not (self.s > 0) or not math.isfinite(self.s):
            raise ValueError(f"smoothness must be positive and finite, got {self.s}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"arity must be a positive integer, got {self.K}")
        object.__setattr__(self, "children", tuple(self.children))
        if self.children and len(self.children) != self.K:
            raise ValueError(
                f"internal node ({self.s}, {self.K}) needs {self.K} children, "
                f"got {len(self.children)}"
            )

    @property
    def height(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.height for c in self.children)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def node(self, path: Sequence[int]) -> "CompositionTree":
        t = self
        for depth, i in enumerate(path):
            if not (0 <= i < len(t.children)):
                raise IndexError(f"invalid node path {tuple(path)} at depth {depth}")
            t = t.children[i]
        return t

    def walk(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "CompositionTree"]]:
        """Pre-order traversal yielding ``(path, node)``."""
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.walk(path + (i,))

    def leaf_arity(self) -> int:
        """Total number of coordinate slots selected by the leaves."""
        if self.is_leaf:
            return self.K
        return sum(c.leaf_arity() for c in self.children)

    def to_config(self) -> dict:
        out: dict = {"s": float(self.s), "K": int(self.K)}
        if self.children:
            out["children"] = [c.to_config() for c in self.children]
        return out

    @classmethod
    def from_config(cls, cfg) -> "CompositionTree":
        # accepts {"s":..,"K":..,"children":[..]} or a nested [s, K, [children...]] list
        if isinstance(cfg, dict):
            try:
                s, K = cfg["s"], cfg["K"]
            except KeyError as e:
                raise ValueError(f"tree node is missing key {e.args[0]!r}") from None
            kids = cfg.get("children", [])
        else:
            s, K, *rest = cfg
            kids = rest[0] if rest else []
        return cls(float(s), int(K), tuple(cls.from_config(c) for c in kids))

    def __str__(self) -> str:
        head = f"({self.s:g},{self.K})"
        if self.is_leaf:
            return head
        return head + "[" + ",".join(str(c) for c in self.children) + "]"


# -- smoothness regimes ------------------------------------------------------

@dataclass(frozen=True)
class Isotropic:
    s: float
    d: int

    @property
    def ratio(self) -> float:
        return self.s / self.d


@dataclass(frozen=True)
class Anisotropic:
    s_vec: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "s_vec", tuple(float(v) for v in self.s_vec))

    @property
    def d(self) -> int:
        return len(self.s_vec)

    @property
    def ratio(self) -> float:
        return harmonic_mean(self.s_vec) / self.d


@dataclass(frozen=True)
class Composition:
    tree: CompositionTree
    d: int

    @property
    def ratio(self) -> float:
        return gamma_direct(self.tree)


@dataclass(frozen=True)
class Manifold:
    s: float
    d: int
    d_M: int

    @property
    def ratio(self) -> float:
        return self.s / self.d_M


Regime = Union[Isotropic, Anisotropic, Composition, Manifold]


@dataclass(frozen=True)
class RateModel:
    exponent_ratio: float
    log_power: float = 0.0

    def __post_init__(self):
        if not self.exponent_ratio > 0:
            raise ValueError("exponent_ratio must be positive")

    @property
    def rate_exponent(self) -> float:
        """Exponent ``a`` of the nonparametric term ``(nm)^{-a}``."""
        r = self.exponent_ratio
        return 2 * r / (2 * r + 1)


@dataclass(frozen=True)
class SmoothnessSpec:
    regime: Regime
    holder_norm_bound: float = 1.0
    sup_bound: float = 1.0

    def __post_init__(self):
        _validate_regime(self.regime)
        if not (self.holder_norm_bound > 0 and self.sup_bound > 0):
            raise ValueError("holder_norm_bound and sup_bound must be positive")

    @property
    def d(self) -> int:
        return self.regime.d

    @property
    def ratio(self) -> float:
        return self.regime.ratio

    def rate_model(self) -> RateModel:
        r = self.ratio
        return RateModel(r, 16 * r / (2 * r + 1))

    def to_config(self) -> dict:
        reg = self.regime
        out: dict = {"holder_norm_bound": float(self.holder_norm_bound),
                     "sup_bound": float(self.sup_bound)}
        if isinstance(reg, Isotropic):
            out.update(regime="isotropic", s=float(reg.s), d=int(reg.d))
        elif isinstance(reg, Anisotropic):
            out.update(regime="anisotropic", s_vec=list(reg.s_vec))
        elif isinstance(reg, Composition):
            out.update(regime="composition", d=int(reg.d), tree=reg.tree.to_config())
        else:
            out.update(regime="manifold", s=float(reg.s), d=int(reg.d), d_M=int(reg.d_M))
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "SmoothnessSpec":
        kind = _require(cfg, "regime", "smoothness")
        if kind == "isotropic":
            reg: Regime = Isotropic(float(_require(cfg, "s", "smoothness")),
                                    int(_require(cfg, "d", "smoothness")))
        elif kind == "anisotropic":
            reg = Anisotropic(tuple(_require(cfg, "s_vec", "smoothness")))
        elif kind == "composition":
            tree = CompositionTree.from_config(_require(cfg, "tree", "smoothness"))
            reg = Composition(tree, int(cfg.get("d", tree.leaf_arity())))
        elif kind == "manifold":
            reg = Manifold(float(_require(cfg, "s", "smoothness")),
                           int(_require(cfg, "d", "smoothness")),
                           int(_require(cfg, "d_M", "smoothness")))
        else:
            raise ValueError(f"smoothness.regime: unknown regime {kind!r}")
        return cls(reg, float(cfg.get("holder_norm_bound", 1.0)),
                   float(cfg.get("sup_bound", 1.0)))


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ValueError(f"missing key {where}.{key}")
    return cfg[key]


def _validate_regime(reg: Regime) -> None:
    if isinstance(reg, Isotropic):
        if not (reg.s > 0 and reg.d >= 1):
            raise ValueError("isotropic regime needs s > 0 and d >= 1")
    elif isinstance(reg, Anisotropic):
        if len(reg.s_vec) < 2 or min(reg.s_vec) <= 0:
            raise ValueError("anisotropic regime needs d >= 2 positive smoothness entries")
    elif isinstance(reg, Composition):
        if reg.d < 1:
            raise ValueError("composition regime needs d >= 1")
    elif isinstance(reg, Manifold):
        if not (reg.s > 0 and 1 <= reg.d_M <= reg.d):
            raise ValueError("manifold regime needs s > 0 and 1 <= d_M <= d")
    else:
        raise TypeError(f"unknown regime {reg!r}")


# -- closed forms ------------------------------------------------------------

def harmonic_mean(s_vec: Sequence[float]) -> float:
    s = np.asarray(s_vec, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("anisotropic smoothness needs at least two coordinates")
    if np.any(s <= 0):
        raise ValueError("smoothness entries must be positive")
    return float(s.size / np.sum(1.0 / s))


def _ancestor_discount(tree: CompositionTree, path: Sequence[int]) -> list[float]:
    """min(1, s') for each ancestor of the node at ``path``, nearest first."""
    tree.node(path)  # validates the path
    chain = [tree]
    for i in path[:-1]:
        chain.append(chain[-1].children[i])
    return [min(1.0, a.s) for a in reversed(chain)] if path else []


def effective_smoothness(tree: CompositionTree, node_path: Sequence[int] = ()) -> float:
    node = tree.node(node_path)
    v = node.s
    for f in _ancestor_discount(tree, tuple(node_path)):
        v = v * f
    return v


def gamma_direct(tree: CompositionTree) -> float:
    # s_G/K_G first, then ancestor factors nearest-first: the same float ops
    # gamma_recursive performs, so both agree bit for bit.
    best = math.inf
    for path, node in tree.walk():
        v = node.s / node.K
        for f in _ancestor_discount(tree, path):
            v = v * f
        best = min(best, v)
    return best


def gamma_recursive(tree: CompositionTree) -> float:
    own = tree.s / tree.K
    if tree.is_leaf:
        return own
    disc = min(1.0, tree.s)
    return min(own, min(gamma_recursive(c) * disc for c in tree.children))


def minimax_rate(n: int, m: int, ratio: float, c: float = 1.0) -> float:
    """``1/n + c (nm)^{-2r/(2r+1)}``; log factors are left out."""
    if n < 1 or m < 1 or not ratio > 0:
        raise ValueError("need n, m >= 1 and ratio > 0")
    a = 2 * ratio / (2 * ratio + 1)
    return 1.0 / n + c * float(n * m) ** (-a)


def approximation_rate(size: float, ratio: float, c: float = 1.0) -> float:
    """Approximation error shape ``c (LW)^{-2 ratio}`` for a network of size ``LW``."""
    if not (size > 0 and ratio > 0):
        raise ValueError("need size > 0 and ratio > 0")
    return c * float(size) ** (-2 * ratio)


def phase_transition_m(n: float, ratio: float) -> float:
    if n < 1 or not ratio > 0:
        raise ValueError("need n >= 1 and ratio > 0")
    return float(n) ** (1.0 / (2 * ratio))


def network_budget(n: int, m: int, ratio: float, c: float = 1.0) -> int:
    """Size budget ``LW`` for the network class, floored and clamped at 3."""
    nm = n * m
    if nm < 3:
        raise ValueError(f"need nm >= 3, got {nm}")
    if not (ratio > 0 and c > 0):
        raise ValueError("ratio and c must be positive")
    val = c * nm ** (1.0 / (4 * ratio + 2)) * math.log(nm) ** (-4.0 / (2 * ratio + 1))
    return max(3, int(math.floor(val)))
