"""Localized Rademacher averages, their fixed points, and bound shapes.

All universal constants in the bound shapes are 1: the outputs are shapes,
not certified bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq


@dataclass
class Dictionary:
    """Finite stand-in for a candidate class, centred at ``reference``."""

    members: list[Callable]
    reference: Callable
    label: str = ""

    def __len__(self):
        return len(self.members)

    def deviations(self, X: np.ndarray) -> np.ndarray:
        """``(len, N)`` matrix of ``f(X) - f_ref(X)``."""
        if not self.members:
            return np.zeros((0, X.shape[0]))
        ref = self.reference(X)
        return np.stack([f(X) - ref for f in self.members])


@dataclass
class ComplexityReport:
    r_grid: np.ndarray
    phi: np.ndarray
    stderr: np.ndarray
    fixed_point: float | None
    draws: int
    sizes: list[int] = field(default_factory=list)

    def rows(self):
        return [(float(r), float(p), float(s)) for r, p, s in zip(self.r_grid, self.phi, self.stderr)]


def _flat(x_sample) -> np.ndarray:
    x = np.asarray(x_sample, dtype=float)
    return x.reshape(-1, x.shape[-1])


def _signs(draws: int, N: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(draws, N), dtype=np.int8) * 2.0 - 1.0


def rademacher_average(dic: Dictionary, x_sample, draws: int = 200, seed=0) -> tuple[float, float]:
    """Monte Carlo ``E sup_f |(1/nm) sum sigma_ij (f - f_ref)(X_ij)|``.

    The sup over the finite dictionary is exact for each sign draw.
    Returns ``(estimate, standard error)``.
    """
    if draws < 1:
        raise ValueError("need at least one draw")
    X = _flat(x_sample)
    D = dic.deviations(X)
    return _rademacher_from_deviations(D, _signs(draws, X.shape[0], seed))


def _rademacher_from_deviations(D: np.ndarray, sigma: np.ndarray) -> tuple[float, float]:
    if D.shape[0] == 0:
        return 0.0, 0.0
    sups = np.max(np.abs(sigma @ D.T), axis=1) / D.shape[1]
    se = float(np.std(sups, ddof=1) / math.sqrt(len(sups))) if len(sups) > 1 else 0.0
    return float(np.mean(sups)), se


def l2_distances(dic: Dictionary, px_sample) -> np.ndarray:
    """Monte Carlo ``int (f - f_ref)^2 dP_X`` for each member."""
    D = dic.deviations(_flat(px_sample))
    return np.mean(D ** 2, axis=1)


def localize(dic: Dictionary, r: float, px_sample, distances: np.ndarray | None = None) -> Dictionary:
    """Members within squared L2(P_X) distance ``r`` of the reference."""
    if distances is None:
        distances = l2_distances(dic, px_sample)
    keep = [f for f, dist in zip(dic.members, distances) if dist <= r]
    return Dictionary(keep, dic.reference, f"{dic.label}(r={r:g})")


def default_grid(b1: float = 1.0, points: int = 25) -> np.ndarray:
    return np.logspace(-6, math.log10(4 * b1 ** 2), points)


def phi_hat(dic: Dictionary, x_sample, px_sample, r_grid: Sequence[float] | None = None,
            draws: int = 200, seed=0, b1: float = 1.0) -> ComplexityReport:
    """Localized Rademacher average on a grid of radii, with its fixed point.

    One set of sign draws is shared across radii, so the estimate is exactly
    nondecreasing in ``r``.
    """
    r_grid = default_grid(b1) if r_grid is None else np.asarray(r_grid, dtype=float)
    X = _flat(x_sample)
    D = dic.deviations(X)
    dist = l2_distances(dic, px_sample)
    sigma = _signs(draws, X.shape[0], seed)
    phi, se, sizes = [], [], []
    for r in r_grid:
        keep = dist <= r
        p, s = _rademacher_from_deviations(D[keep], sigma)
        phi.append(p)
        se.append(s)
        sizes.append(int(keep.sum()))
    phi, se = np.array(phi), np.array(se)
    try:
        rstar = fixed_point(r_grid, phi)
    except ValueError:
        rstar = None
    return ComplexityReport(r_grid, phi, se, rstar, draws, sizes)


def fixed_point(r_grid, phi) -> float:
    """Smallest ``r`` with ``phi(r) <= r``.

    Finds the first grid point that satisfies the inequality, then bisects the
    bracketing interval on the log-log interpolation of ``phi`` (exact for
    power laws such as ``c sqrt(r)`` and constants).
    """
    if callable(phi):
        raise TypeError("pass phi evaluated on the grid")
    r = np.asarray(r_grid, dtype=float)
    p = np.asarray(phi, dtype=float)
    if r.ndim != 1 or r.shape != p.shape or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise ValueError("need an increasing positive grid with one phi value per point")
    hits = np.nonzero(p <= r)[0]
    if hits.size == 0:
        raise ValueError("grid too narrow: phi(r) > r at every grid point")
    i = int(hits[0])
    if i == 0:
        return float(r[0])
    r0, r1, p0, p1 = r[i - 1], r[i], p[i - 1], p[i]
    if p0 > 0 and p1 > 0:
        lr0, lr1, lp0, lp1 = map(math.log, (r0, r1, p0, p1))

        def gap(lr):
            w = (lr - lr0) / (lr1 - lr0)
            return (1 - w) * lp0 + w * lp1 - lr
    else:
        def gap(lr):
            w = (math.exp(lr) - r0) / (r1 - r0)
            return (1 - w) * p0 + w * p1 - math.exp(lr)
    lo, hi = math.log(r0), math.log(r1)
    if gap(hi) >= 0:
        return float(r1)
    return float(math.exp(brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)))


def iota(n: int, m: int, b1: float, b2: float, b3: float) -> float:
    """Composite log factor ``b1^2 + b2^2 (log n)^2 + b3^2 (log nm)^2``."""
    return b1 ** 2 + b2 ** 2 * math.log(n) ** 2 + b3 ** 2 * math.log(n * m) ** 2


def vc_size_bound(L: int, W: int, n: int, m: int, b1: float, b2: float, b3: float) -> float:
    """Estimation-error shape for FNN(d, L, W):

    ``(b1^2+b2^2)/n + L^2 W^2 log(LW) iota log(nm) / nm``.

    The covering-number variant replaces ``L^2 W^2 log(LW)`` by the expected
    log covering number at scale ``b1/nm`` plus ``log nm``; it has no
    operation here because that covering number is not computable for nets.
    """
    if math.log(L * W) < 1:
        raise ValueError(f"need log(LW) >= 1, got LW={L * W}")
    nm = n * m
    return ((b1 ** 2 + b2 ** 2) / n
            + L ** 2 * W ** 2 * math.log(L * W) * iota(n, m, b1, b2, b3) * math.log(nm) / nm)


def oracle_bound(approx_err: float, n: int, m: int, r_star: float,
                 b1: float, b2: float, b3: float) -> float:
    """``approx + (b1^2+b2^2)/n + (r* + 1/nm) iota``."""
    if min(approx_err, r_star, b1, b2, b3) < 0:
        raise ValueError("all inputs must be nonnegative")
    return approx_err + (b1 ** 2 + b2 ** 2) / n + (r_star + 1.0 / (n * m)) * iota(n, m, b1, b2, b3)
