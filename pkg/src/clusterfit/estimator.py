"""Pooled least-squares fitting of truncated ReLU networks."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import relunet
from .datagen import Dataset
from .relunet import MLP


@dataclass
class OptConfig:
    optimizer: str = "adam"  # "adam" or "gd"
    lr: float = 1e-3
    epochs: int = 2000
    batch_size: int | None = None  # None: full batch
    restarts: int = 1
    seed: int = 0
    patience: int | None = None  # stop after this many epochs without a new best
    init_bias: str = "spread"  # see relunet.init


@dataclass
class FitReport:
    final_risk: float
    best_risk: float
    optimization_gap: float
    restarts: int
    loss_trace: list[float] = field(default_factory=list)
    restart_risks: list[float] = field(default_factory=list)
    diverged: int = 0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"final_risk": self.final_risk, "best_risk": self.best_risk,
                "optimization_gap": self.optimization_gap, "restarts": self.restarts,
                "diverged": self.diverged, "epochs_run": len(self.loss_trace)}


def empirical_risk(f, data: Dataset) -> float:
    """``(1/nm) sum_ij (Y_ij - f(X_ij))^2``."""
    X, Y = data.pooled()
    return float(np.mean((Y - f(X)) ** 2))


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _GD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(net: MLP, X: np.ndarray, y: np.ndarray, opt: OptConfig, seed=0) -> tuple[MLP, list[float]]:
    """Train in place; return the best checkpoint and the per-epoch risk trace.

    The returned net is the iterate with the lowest full-data risk seen, so a
    longer run can never report a worse risk than a shorter one.
    """
    rng = np.random.default_rng(seed)
    params = net.params()
    stepper = _Adam(params, opt.lr) if opt.optimizer == "adam" else _GD(params, opt.lr)
    N = X.shape[0]
    bs = N if not opt.batch_size or opt.batch_size >= N else opt.batch_size
    best, best_risk, since = net.copy(), math.inf, 0
    trace = []
    for epoch in range(opt.epochs):
        if bs == N:
            risk, gW, gb = relunet.backward(net, X, y)
        else:
            risk, gW, gb = float(np.mean((net(X) - y) ** 2)), None, None
        if not math.isfinite(risk):
            raise FloatingPointError(f"non-finite risk at epoch {epoch}")
        trace.append(risk)
        if risk < best_risk:
            best_risk, best, since = risk, net.copy(), 0
        else:
            since += 1
            if opt.patience and since >= opt.patience:
                break
        if gW is not None:
            stepper.step(params, [*gW, *gb])
        else:
            order = rng.permutation(N)
            for start in range(0, N, bs):
                idx = order[start:start + bs]
                _, gW, gb = relunet.backward(net, X[idx], y[idx])
                stepper.step(params, [*gW, *gb])
    else:
        final = float(np.mean((net(X) - y) ** 2))
        if not math.isfinite(final):
            raise FloatingPointError("non-finite risk after the last epoch")
        trace.append(final)
        if final < best_risk:
            best = net.copy()
    return best, trace


def fit_erm(arch: tuple[int, int | list[int], float], data: Dataset, opt: OptConfig = OptConfig(),
            warm_start: MLP | None = None) -> tuple[MLP, FitReport]:
    """Empirical risk minimisation over FNN(d, L, W, beta) by restarts.

    ``arch`` is ``(L, W, beta)``.  Restart ``r`` starts from ``init(seed + r)``;
    with ``warm_start`` the first restart instead starts from that net.  The
    lowest-risk restart is returned (ties go to the lowest index).
    ``optimization_gap`` is the mean restart risk minus the best one: the
    expected excess of a single training run over the best run found.
    """
    L, W, beta = arch
    X, y = data.pooled()
    if X.shape[0] < 3:
        raise ValueError("need nm >= 3")
    t0 = time.perf_counter()
    results = []
    diverged = 0
    for r in range(opt.restarts):
        if r == 0 and warm_start is not None:
            net = warm_start.copy()
        else:
            net = relunet.init(data.d, L, W, beta, seed=opt.seed + r, bias=opt.init_bias)
        try:
            # overflow shows up as a non-finite risk, which train() turns into an error
            with np.errstate(over="ignore", invalid="ignore"):
                best, trace = train(net, X, y, opt, seed=opt.seed + r)
        except FloatingPointError:
            diverged += 1
            continue
        risk = float(np.mean((best(X) - y) ** 2))
        results.append((risk, r, best, trace))
    if not results:
        raise RuntimeError(f"all {opt.restarts} restarts diverged")
    risk, _, net, trace = min(results, key=lambda t: (t[0], t[1]))
    risks = [t[0] for t in sorted(results, key=lambda t: t[1])]
    gap = max(0.0, float(np.mean(risks)) - risk)
    report = FitReport(final_risk=risk, best_risk=min(risks), optimization_gap=gap,
                       restarts=opt.restarts, loss_trace=trace, restart_risks=risks,
                       diverged=diverged, wall_time=time.perf_counter() - t0,
                       config={"L": L, "W": W, "beta": beta, **asdict(opt)})
    return net, report
