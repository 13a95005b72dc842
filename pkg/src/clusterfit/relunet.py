"""Truncated fully connected ReLU networks FNN(d, L, W, beta).

A net with ``L`` hidden layers has ``L + 1`` affine maps; layer ``i`` maps
width ``W_i`` to ``W_{i+1}`` with ``W_0 = d`` and ``W_{L+1} = 1``.  All
arithmetic is float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class MLP:
    d: int
    weights: list[np.ndarray]  # weights[i] has shape (W_{i+1}, W_i)
    biases: list[np.ndarray]   # biases[i] has shape (W_{i+1},)
    beta: float

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        fan_in = self.d
        for i, (Wm, b) in enumerate(zip(self.weights, self.biases)):
            if Wm.ndim != 2 or Wm.shape[1] != fan_in or b.shape != (Wm.shape[0],):
                raise ValueError(f"layer {i}: weight {Wm.shape} / bias {b.shape} do not chain from width {fan_in}")
            fan_in = Wm.shape[0]
        if fan_in != 1:
            raise ValueError("the last layer must have a single output")
        if not self.beta > 0:
            raise ValueError("truncation level beta must be positive")

    @property
    def depth(self) -> int:
        """Number of hidden layers L."""
        return len(self.weights) - 1

    @property
    def widths(self) -> list[int]:
        return [Wm.shape[0] for Wm in self.weights[:-1]]

    @property
    def max_width(self) -> int:
        return max(self.widths) if self.widths else 0

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MLP":
        return MLP(self.d, [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.beta)

    def __call__(self, x):
        return forward(self, x)


def relu(v):
    return np.maximum(v, 0.0)


def truncate(v, beta):
    """``T_beta`` realised by two ReLU units: ReLU(v+beta) - ReLU(v-beta) - beta.

    ``beta`` may be an array broadcasting against ``v``.
    """
    if not np.all(np.asarray(beta) > 0):
        raise ValueError("beta must be positive")
    return relu(v + beta) - relu(v - beta) - beta


def _pre_truncation(net: MLP, X: np.ndarray, keep: bool = False):
    a = X
    cache = [a]
    for Wm, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ Wm.T + b
        a = relu(z)
        if keep:
            cache.append(z)
    v = (a @ net.weights[-1].T + net.biases[-1])[:, 0]
    return v, a, cache


def forward(net: MLP, x):
    """Network output, truncated to [-beta, beta].

    Accepts one point ``(d,)`` or a batch ``(N, d)``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.d:
        raise ValueError(f"expected input dimension {net.d}, got shape {x.shape}")
    v, _, _ = _pre_truncation(net, X)
    # clip is the same map as truncate() without its rounding in the last ulp
    out = np.clip(v, -net.beta, net.beta)
    return float(out[0]) if single else out


def backward(net: MLP, X, y):
    """Mean squared loss ``mean((f(X) - y)^2)`` and its exact gradient.

    Returns ``(loss, grad_weights, grad_biases)``.  ReLU'(0) = 0; the
    truncation passes gradient on ``-beta < v <= beta`` and blocks it outside.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("need a nonempty batch with matching X and y")
    B = X.shape[0]
    v, a_last, zs = _pre_truncation(net, X, keep=True)
    out = np.clip(v, -net.beta, net.beta)
    r = out - y
    loss = float(np.mean(r ** 2))
    gate = (v > -net.beta) & (v <= net.beta)
    delta = (2.0 / B) * r * gate  # dLoss/dv, shape (B,)

    gW = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    g = delta[:, None]
    gW[-1] = g.T @ a_last
    gb[-1] = g.sum(axis=0)
    for i in range(len(net.weights) - 2, -1, -1):
        g = (g @ net.weights[i + 1]) * (zs[i + 1] > 0)
        a_prev = X if i == 0 else relu(zs[i])
        gW[i] = g.T @ a_prev
        gb[i] = g.sum(axis=0)
    return loss, gW, gb


def init(d: int, L: int, W: int | list[int], beta: float, seed=0, bias: str = "zero") -> MLP:
    """He-style uniform init: zero mean, std sqrt(2/fan_in).

    ``bias="zero"`` leaves every bias at 0.  On inputs in [0, 1]^d that makes
    the whole net positively homogeneous (all first-layer kinks pass through
    the origin; for d = 1 it is linear on the cube).  ``bias="spread"`` sets
    first-layer biases to ``-w_j . c_j`` with ``c_j ~ U[0,1]^d`` so each unit's
    kink passes through a random point of the cube; deeper biases stay zero.
    """
    widths = [W] * L if np.isscalar(W) else list(W)
    if L < 1 or len(widths) != L or min(widths) < 1:
        raise ValueError("need L >= 1 hidden layers of positive width")
    if bias not in ("zero", "spread"):
        raise ValueError(f"bias must be zero or spread, got {bias!r}")
    rng = np.random.default_rng(seed)
    dims = [d, *widths, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if bias == "spread":
        centres = rng.random((widths[0], d))
        biases[0] = -np.sum(weights[0] * centres, axis=1)
    return MLP(d, weights, biases, float(beta))


def param_count(net: MLP) -> int:
    return int(sum(w.size for w in net.weights) + sum(b.size for b in net.biases))


def param_bound(d: int, L: int, W: int) -> int:
    """Explicit instance of the O(L W^2) size bound for FNN(d, L, W)."""
    return (L + 1) * W * (W + 1) + (d + 1) * W


def expand_budget(budget: int, depth_share: float = 0.5, log_expand: bool = False) -> tuple[int, int]:
    """Split a size budget ``LW`` into ``(depth, width)``.

    The split is even on the log scale by default (``depth ~ budget**0.5``).
    ``log_expand`` applies the ``c L log L`` / ``c W log W`` widening of the
    network classes, with c = 1.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    L = max(1, int(round(budget ** depth_share)))
    W = max(1, int(math.ceil(budget / L)))
    if log_expand:
        L = max(L, math.ceil(L * math.log(L))) if L > 1 else 1
        W = max(W, math.ceil(W * math.log(W))) if W > 1 else 1
    return L, W


def widen(net: MLP, widths: list[int]) -> MLP:
    """Embed ``net`` into a wider net of the same depth computing the same function.

    New units get zero incoming and outgoing weights, so the larger class
    contains the smaller one exactly.
    """
    if len(widths) != net.depth or any(w < v for w, v in zip(widths, net.widths)):
        raise ValueError("can only widen to the same depth with no narrower layer")
    dims = [net.d, *widths, 1]
    weights, biases = [], []
    for i, (Wm, b) in enumerate(zip(net.weights, net.biases)):
        Wn = np.zeros((dims[i + 1], dims[i]))
        Wn[: Wm.shape[0], : Wm.shape[1]] = Wm
        bn = np.zeros(dims[i + 1])
        bn[: b.shape[0]] = b
        weights.append(Wn)
        biases.append(bn)
    return MLP(net.d, weights, biases, net.beta)


# -- portable text format ---------------------------------------------------------

def to_text(net: MLP) -> str:
    lines = ["clusterfit-mlp 1",
             f"d {net.d}",
             f"L {net.depth}",
             "widths " + " ".join(str(w) for w in net.widths),
             f"beta {net.beta:.17g}"]
    for i, (Wm, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"layer {i} {Wm.shape[0]} {Wm.shape[1]}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in Wm)
        lines.append(" ".join(f"{v:.17g}" for v in b))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> MLP:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0][0] != "clusterfit-mlp":
        raise ValueError("not a clusterfit MLP file")
    head = {r[0]: r[1:] for r in rows[1:5]}
    d, L = int(head["d"][0]), int(head["L"][0])
    beta = float(head["beta"][0])
    pos = 5
    weights, biases = [], []
    for _ in range(L + 1):
        _, _, fan_out, fan_in = rows[pos]
        fan_out, fan_in = int(fan_out), int(fan_in)
        weights.append(np.array(rows[pos + 1: pos + 1 + fan_out], dtype=float).reshape(fan_out, fan_in))
        biases.append(np.array(rows[pos + 1 + fan_out], dtype=float).reshape(fan_out))
        pos += fan_out + 2
    return MLP(d, weights, biases, beta)
