"""Ground-truth mean functions with hand-certifiable Hölder membership.

Two primitive families cover every regime:

* ``s <= 1``: a kink ``|t - c|^s`` averaged over coordinates.  Exactly Hölder-s
  with constant 1 and no smoother.
* ``s > 1``: a random finite cosine sum, C-infinity, with a Hölder-norm
  certificate computed from its coefficients.

Targets are rebuilt from ``(config, seed)`` alone, so experiments serialize as
plain config and replay bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .funclass import (
    Anisotropic,
    Composition,
    CompositionTree,
    Isotropic,
    Manifold,
    SmoothnessSpec,
)

TRIG_MAX_FREQ = 2  # l1 radius of the frequency set


@dataclass
class TargetFunction:
    spec: SmoothnessSpec
    fn: Callable[[np.ndarray], np.ndarray]
    description: str
    config: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.spec.d

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            if x.shape[0] != self.d:
                raise ValueError(f"expected a point of dimension {self.d}, got {x.shape}")
            return float(self.fn(x[None, :])[0])
        if x.shape[-1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got {x.shape}")
        return self.fn(x.reshape(-1, self.d)).reshape(x.shape[:-1])


# -- primitives ----------------------------------------------------------------
# A primitive maps (N, K) points of [0,1]^K to (N,) values inside ``bounds``.

@dataclass
class _Kink:
    s: float
    centers: np.ndarray

    bounds = (0.0, 1.0)

    def __call__(self, x):
        return np.mean(np.abs(x - self.centers) ** self.s, axis=1)

    def holder_certificate(self) -> float:
        # sup term plus the Hölder quotient, both at most 1
        return 2.0


@dataclass
class _TrigSum:
    s: float
    freqs: np.ndarray  # (T, K) integer frequencies
    coef: np.ndarray   # (T,), sum |coef| == 1
    phase: np.ndarray  # (T,)

    bounds = (-1.0, 1.0)

    def __call__(self, x):
        arg = 2 * np.pi * (x @ self.freqs.T) + self.phase
        return np.cos(arg) @ self.coef

    def holder_certificate(self) -> float:
        # |d^a cos| <= (2 pi)^|a| |k^a|; the top-order Hölder quotient uses
        # min(2A, G|x-y|) <= (2A)^(1-t) G^t |x-y|^t with G the gradient bound.
        K = self.freqs.shape[1]
        top = math.ceil(self.s) - 1
        t = self.s - top
        total = 0.0
        for k, a in zip(self.freqs, self.coef):
            knorm = float(np.linalg.norm(k))
            for order in range(top + 1):
                for alpha in _multi_indices(K, order):
                    A = abs(a) * (2 * np.pi) ** order * float(np.prod(np.abs(k) ** alpha))
                    total += A
                    if order == top:
                        G = A * 2 * np.pi * knorm
                        total += (2 * A) ** (1 - t) * G ** t
        return total


def _multi_indices(K: int, order: int):
    for combo in itertools.combinations_with_replacement(range(K), order):
        alpha = np.zeros(K, dtype=int)
        for j in combo:
            alpha[j] += 1
        yield alpha


def _primitive(s: float, K: int, rng: np.random.Generator):
    if s <= 1:
        return _Kink(s, rng.uniform(0.25, 0.75, size=K))
    freqs = np.array([k for k in itertools.product(range(-TRIG_MAX_FREQ, TRIG_MAX_FREQ + 1), repeat=K)
                      if sum(map(abs, k)) <= TRIG_MAX_FREQ], dtype=float)
    decay = 1.0 / (1.0 + np.sum(freqs ** 2, axis=1))
    coef = rng.standard_normal(len(freqs)) * decay
    coef /= np.sum(np.abs(coef))
    phase = rng.uniform(0, 2 * np.pi, size=len(freqs))
    return _TrigSum(s, freqs, coef, phase)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


# -- constructors --------------------------------------------------------------

def make_isotropic(s: float, d: int, amplitude: float = 1.0, seed=0,
                   holder_bound: float | None = None) -> TargetFunction:
    """Isotropic Hölder-s target on [0,1]^d.

    With ``holder_bound`` the amplitude is shrunk (never grown) until the
    certified Hölder norm fits under it.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    prim = _primitive(s, d, _rng(seed))
    cert = prim.holder_certificate()
    amp = amplitude if holder_bound is None else min(amplitude, holder_bound / cert)
    spec = SmoothnessSpec(Isotropic(float(s), int(d)), holder_norm_bound=amp * cert,
                          sup_bound=amp)
    kind = "kink" if s <= 1 else "trig"
    cfg = {"regime": "isotropic", "s": float(s), "d": int(d), "amplitude": float(amplitude),
           "seed": seed}
    if holder_bound is not None:
        cfg["holder_bound"] = float(holder_bound)
    return TargetFunction(spec, lambda x: amp * prim(x),
                          f"isotropic-{kind}(s={s:g}, d={d}, seed={seed})", cfg)


def make_anisotropic(s_vec, amplitude: float = 1.0, seed=0) -> TargetFunction:
    """Tensor sum ``amplitude/d * sum_j g_{s_j}(x_j)``."""
    s_vec = tuple(float(v) for v in s_vec)
    if len(s_vec) < 2:
        raise ValueError("anisotropic targets need at least two coordinates")
    rng = _rng(seed)
    prims = [_primitive(s, 1, rng) for s in s_vec]
    d = len(s_vec)

    def fn(x):
        return amplitude * sum(p(x[:, [j]]) for j, p in enumerate(prims)) / d

    cert = amplitude * sum(p.holder_certificate() for p in prims) / d
    spec = SmoothnessSpec(Anisotropic(s_vec), holder_norm_bound=cert, sup_bound=amplitude)
    cfg = {"regime": "anisotropic", "s_vec": list(s_vec), "amplitude": float(amplitude),
           "seed": seed}
    kinds = "".join("k" if s <= 1 else "t" for s in s_vec)
    return TargetFunction(spec, fn, f"anisotropic[{kinds}](s={s_vec}, seed={seed})", cfg)


def synthesize_composition(tree: CompositionTree, amplitude: float = 1.0, seed=0,
                           d: int | None = None) -> TargetFunction:
    """Random member of the hierarchical composition model for ``tree``.

    Each node draws a K-variate primitive of its smoothness; children outputs
    are affinely squashed into [0,1] before being fed to it.  Leaves read the
    coordinates ``x[pi]``; pi is a seeded permutation when the leaves need no
    more than ``d`` slots in total and is drawn with replacement otherwise.
    """
    if d is None:
        d = tree.leaf_arity()
    rng = _rng(seed)
    # coordinate selection gets its own stream so a single-leaf tree draws
    # exactly the primitive make_isotropic would
    pi_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    slots = tree.leaf_arity()
    if slots <= d:
        pool = sorted(int(j) for j in pi_rng.permutation(d)[:slots])
    else:
        pool = list(pi_rng.integers(0, d, size=slots))

    def build(node: CompositionTree):
        prim = _primitive(node.s, node.K, rng)
        lo, hi = prim.bounds
        if node.is_leaf:
            idx = np.array([pool.pop(0) for _ in range(node.K)], dtype=int)
            return (lambda x, p=prim, idx=idx: p(x[:, idx])), (lo, hi)
        kids = [build(c) for c in node.children]

        def g(x, p=prim, kids=kids):
            u = np.column_stack([(h(x) - a) / (b - a) for h, (a, b) in kids])
            return p(u)
        return g, (lo, hi)

    inner, (lo, hi) = build(tree)
    scale = amplitude / max(abs(lo), abs(hi))

    def fn(x):
        return scale * inner(x)

    spec = SmoothnessSpec(Composition(tree, int(d)), holder_norm_bound=1.0, sup_bound=amplitude)
    cfg = {"regime": "composition", "tree": tree.to_config(), "d": int(d),
           "amplitude": float(amplitude), "seed": seed}
    return TargetFunction(spec, fn, f"composition{tree}(d={d}, seed={seed})", cfg)


def make_manifold_target(s: float, name: str, amplitude: float = 1.0, seed=0) -> TargetFunction:
    """Isotropic ambient target paired with a library manifold for the design."""
    emb = embed_manifold(name)
    base = make_isotropic(s, emb.d, amplitude, seed)
    spec = SmoothnessSpec(Manifold(float(s), emb.d, emb.d_M), base.spec.holder_norm_bound,
                          base.spec.sup_bound)
    cfg = {"regime": "manifold", "s": float(s), "manifold": name,
           "amplitude": float(amplitude), "seed": seed}
    return TargetFunction(spec, base.fn, f"manifold[{name}]/" + base.description, cfg)


def constant_target(value: float, d: int) -> TargetFunction:
    spec = SmoothnessSpec(Isotropic(1.0, int(d)), holder_norm_bound=abs(value) + 1e-300,
                          sup_bound=max(abs(value), 1e-300))
    return TargetFunction(spec, lambda x: np.full(x.shape[0], float(value)),
                          f"constant({value:g}, d={d})",
                          {"regime": "constant", "value": float(value), "d": int(d)})


def build_target(cfg: dict) -> TargetFunction:
    """Rebuild a target from its serialized config (see ``TargetFunction.config``)."""
    if "regime" not in cfg:
        raise ValueError("missing key target.regime")
    kind = cfg["regime"]
    amp = float(cfg.get("amplitude", 1.0))
    seed = cfg.get("seed", 0)
    try:
        if kind == "isotropic":
            return make_isotropic(float(cfg["s"]), int(cfg["d"]), amp, seed,
                                  cfg.get("holder_bound"))
        if kind == "anisotropic":
            return make_anisotropic(cfg["s_vec"], amp, seed)
        if kind == "composition":
            tree = CompositionTree.from_config(cfg["tree"])
            return synthesize_composition(tree, amp, seed, cfg.get("d"))
        if kind == "manifold":
            return make_manifold_target(float(cfg["s"]), cfg["manifold"], amp, seed)
        if kind == "constant":
            return constant_target(float(cfg["value"]), int(cfg["d"]))
    except KeyError as e:
        raise ValueError(f"missing key target.{e.args[0]}") from None
    raise ValueError(f"target.regime: unknown regime {kind!r}")


# -- manifolds -------------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldEmbedding:
    name: str
    d_M: int
    d: int
    chart: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.chart(t.reshape(-1)).reshape(t.shape + (self.d,))


def _circle(t):
    a = 2 * np.pi * t
    return np.column_stack([0.5 + 0.4 * np.cos(a), 0.5 + 0.4 * np.sin(a)])


def _helix(t):
    a = 4 * np.pi * t
    return np.column_stack([0.5 + 0.35 * np.cos(a), 0.5 + 0.35 * np.sin(a), t])


MANIFOLDS = {
    "circle-in-square": (1, 2, _circle),
    "helix-in-cube": (1, 3, _helix),
}


def embed_manifold(name: str, d: int | None = None) -> ManifoldEmbedding:
    if name not in MANIFOLDS:
        raise ValueError(f"unknown manifold {name!r}; choose from {sorted(MANIFOLDS)}")
    d_M, dim, chart = MANIFOLDS[name]
    if d is not None and d != dim:
        raise ValueError(f"{name} lives in d={dim}, not d={d}")
    return ManifoldEmbedding(name, d_M, dim, chart)
