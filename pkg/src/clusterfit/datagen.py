"""Repeated-measurements data: ``Y_ij = f(X_ij) + U_i(X_ij) + eps_ij``.

Tail contracts use the standard Orlicz convention ``E exp((|Z|/b)^p) <= 2``
(p=2 sub-Gaussian, p=1 sub-exponential).  Every random draw comes from a
stream keyed by ``(seed, subject, role)``, so subject ``i`` sees the same data
whatever ``n`` is and however the work is split.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .targets import TargetFunction, embed_manifold

DESIGN, PROCESS, NOISE = 0, 1, 2

# N(0, s^2) has E exp(Z^2/b^2) = (1 - 2 s^2/b^2)^(-1/2); equal to 2 at s^2 = 3b^2/8
GAUSS_ORLICZ_VAR = 3.0 / 8.0
# Laplace(0, lam) has E exp(|Z|/b) = 1/(1 - lam/b); equal to 2 at lam = b/2
LAPLACE_ORLICZ_SCALE = 0.5
ORLICZ_CEILING = 3.0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "laplace"):
            raise ValueError(f"noise.kind must be gaussian or laplace, got {self.kind!r}")
        if self.scale < 0:
            raise ValueError("noise.scale must be nonnegative")

    @property
    def orlicz_order(self) -> int:
        return 2 if self.kind == "gaussian" else 1


@dataclass(frozen=True)
class ProcessSpec:
    kind: str = "zero"
    scale: float = 0.0
    n_terms: int = 10

    def __post_init__(self):
        if self.kind not in ("fourier-gp", "bounded-bump", "zero"):
            raise ValueError(f"process.kind must be fourier-gp, bounded-bump or zero, got {self.kind!r}")
        if self.scale < 0:
            raise ValueError("process.scale must be nonnegative")
        if self.n_terms < 1:
            raise ValueError("process.n_terms must be positive")


@dataclass
class Dataset:
    x: np.ndarray  # (n, m, d)
    y: np.ndarray  # (n, m)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 3 or self.y.shape != self.x.shape[:2]:
            raise ValueError(f"shape mismatch: x {self.x.shape}, y {self.y.shape}")
        if self.n * self.m < 3:
            raise ValueError("a dataset needs nm >= 3")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """All nm observations as ``(X (nm, d), Y (nm,))``."""
        return self.x.reshape(-1, self.d), self.y.reshape(-1)


def stream(seed: int, subject: int, role: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(subject), int(role)])


def parse_design(design: str) -> tuple[str, str | None]:
    if design == "uniform-cube":
        return "uniform-cube", None
    for prefix in ("manifold:", "manifold("):
        if design.startswith(prefix):
            return "manifold", design[len(prefix):].rstrip(")")
    raise ValueError(f"unknown design {design!r}; use uniform-cube or manifold:<name>")


def _design_points(rng: np.random.Generator, count: int, d: int, design: str) -> np.ndarray:
    kind, name = parse_design(design)
    if kind == "uniform-cube":
        return rng.random((count, d))
    emb = embed_manifold(name, d)
    return emb(rng.random(count))


def sample_design(n: int, m: int, d: int, design: str = "uniform-cube", seed: int = 0) -> np.ndarray:
    return np.stack([_design_points(stream(seed, i, DESIGN), m, d, design) for i in range(n)])


def sample_process_path(spec: ProcessSpec, d: int, rng) -> Callable[[np.ndarray], np.ndarray]:
    """One continuous random path ``U: (N, d) -> (N,)``.

    ``fourier-gp`` is a Gaussian cosine series with weights ~ k^-1.5 rescaled so
    that the pointwise variance never exceeds ``3 b^2 / 8``, which is exactly
    the Orlicz-2 bound ``E exp(U^2/b^2) <= 2`` for a centred Gaussian.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    b = spec.scale
    if spec.kind == "zero" or b == 0:
        return lambda x: np.zeros(np.asarray(x).shape[0])
    if spec.kind == "fourier-gp":
        k = np.arange(1, spec.n_terms + 1, dtype=float)
        lam = k ** -1.5
        lam *= math.sqrt(GAUSS_ORLICZ_VAR) * b / math.sqrt(np.sum(lam ** 2))
        omega = rng.uniform(-1, 1, size=(spec.n_terms, d)) * k[:, None]
        phase = rng.uniform(0, 2 * np.pi, size=spec.n_terms)
        w = rng.standard_normal(spec.n_terms) * lam
        return lambda x: np.cos(2 * np.pi * (np.asarray(x) @ omega.T) + phase) @ w
    # bounded-bump
    amp = b * rng.uniform(-1, 1)
    center = rng.random(d)
    width = 0.2
    return lambda x: amp * np.exp(-np.sum((np.asarray(x) - center) ** 2, axis=1) / (2 * width ** 2))


def sample_noise(spec: NoiseSpec, count: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if count < 1:
        raise ValueError("count must be positive")
    if spec.scale == 0:
        return np.zeros(count)
    if spec.kind == "gaussian":
        return rng.normal(0.0, spec.scale * math.sqrt(GAUSS_ORLICZ_VAR), size=count)
    return rng.laplace(0.0, spec.scale * LAPLACE_ORLICZ_SCALE, size=count)


def generate_dataset(target: TargetFunction, n: int, m: int, design: str = "uniform-cube",
                     proc: ProcessSpec = ProcessSpec(), noise: NoiseSpec = NoiseSpec(),
                     seed: int = 0) -> Dataset:
    if n * m < 3:
        raise ValueError(f"need nm >= 3, got n={n}, m={m}")
    d = target.d
    xs, ys = [], []
    for i in range(n):
        x = _design_points(stream(seed, i, DESIGN), m, d, design)
        U = sample_process_path(proc, d, stream(seed, i, PROCESS))
        eps = sample_noise(noise, m, stream(seed, i, NOISE))
        xs.append(x)
        ys.append(target(x) + U(x) + eps)
    meta = {
        "target": target.config,
        "description": target.description,
        "process": asdict(proc),
        "noise": asdict(noise),
        "design": design,
        "seed": int(seed),
    }
    return Dataset(np.stack(xs), np.stack(ys), meta)


def check_orlicz(samples, b: float, order: int) -> tuple[float, bool]:
    """Monte Carlo ``E exp((|Z|/b)^order)``; passes at ``<= 2 + 3 SE``.

    When the moment is infinite the standard error grows with the estimate
    and the SE slack stops meaning anything, so an estimate above
    ``ORLICZ_CEILING`` fails outright.
    """
    z = np.asarray(samples, dtype=float).ravel()
    if z.size < 1000:
        raise ValueError("check_orlicz needs at least 1000 samples")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if b <= 0:
        return (1.0, True) if np.all(z == 0) else (math.inf, False)
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.exp((np.abs(z) / b) ** order)
        est = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(z.size))
    ok = bool(np.isfinite(est) and np.isfinite(se) and est <= 2 + 3 * se and est <= ORLICZ_CEILING)
    return est, ok
