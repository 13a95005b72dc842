"""Experiment driver: prediction error, rate sweeps, phase scans, approximation benchmarks.

Every experiment is a pure function of its config.  Jobs carry plain dicts so
they can be shipped to worker processes; each job derives its seeds from
``(seed, replicate, ...)`` and results are sorted before writing, so output
tables do not depend on the worker count.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats
from threadpoolctl import threadpool_limits

from . import funclass, relunet
from .datagen import NoiseSpec, ProcessSpec, _design_points, generate_dataset
from .estimator import OptConfig, fit_erm
from .io import fmt, write_csv, write_dataset, write_net, write_spline
from .splines import choose_k, fit_spline
from .targets import TargetFunction, build_target

TEST_ROLE = 7


# -- estimator plumbing --------------------------------------------------------------

@dataclass
class EstimatorConfig:
    kind: str = "spline"  # "spline" or "mlp"
    # spline
    r: int = 2
    k: int | None = None  # fixed resolution; otherwise choose_k with constant k_c
    k_c: float = 1.0
    box_bound: float | None = None
    # mlp
    L: int | None = None  # fixed architecture; otherwise network_budget with budget_c
    W: int | None = None
    budget_c: float = 1.0
    depth_share: float = 0.5
    log_expand: bool = False
    beta: float | None = None  # defaults to the target's sup bound
    optimizer: str = "adam"
    lr: float = 1e-3
    epochs: int = 3000
    batch_size: int | None = None
    restarts: int = 3
    patience: int | None = 200
    init_bias: str = "spread"

    @classmethod
    def from_config(cls, cfg: dict | None) -> "EstimatorConfig":
        cfg = dict(cfg or {})
        known = {f.name for f in fields(cls)}
        bad = sorted(set(cfg) - known)
        if bad:
            raise ValueError(f"unknown key estimator.{bad[0]}")
        if cfg.get("kind", "spline") not in ("spline", "mlp"):
            raise ValueError(f"estimator.kind must be spline or mlp, got {cfg['kind']!r}")
        return cls(**cfg)

    def opt(self, seed: int) -> OptConfig:
        return OptConfig(self.optimizer, self.lr, self.epochs, self.batch_size, self.restarts,
                         seed, self.patience, self.init_bias)


def fit_estimator(est: EstimatorConfig, data, spec: funclass.SmoothnessSpec, seed: int = 0):
    """Fit the configured estimator; returns ``(f_hat, report, size)``.

    ``size`` is the spline resolution k or the network product L*W.
    """
    n, m = data.n, data.m
    if est.kind == "spline":
        k = est.k or choose_k(n, m, spec.ratio * data.d, data.d, est.k_c)
        model, report = fit_spline(data, k, est.r, est.box_bound)
        return model, report, k
    if est.L and est.W:
        L, W = est.L, est.W
    else:
        budget = funclass.network_budget(n, m, spec.ratio, est.budget_c)
        L, W = relunet.expand_budget(budget, est.depth_share, est.log_expand)
    beta = est.beta if est.beta is not None else spec.sup_bound
    net, report = fit_erm((L, W, beta), data, est.opt(seed))
    return net, report, L * W


def mspe(f_hat, target: TargetFunction, design: str = "uniform-cube", n_test: int = 10_000,
         seed=0) -> float:
    """Monte Carlo ``int (f_hat - f)^2 dP_X`` over fresh design points."""
    if n_test < 1000:
        raise ValueError("n_test must be at least 1000")
    X = _design_points(np.random.default_rng(seed), n_test, target.d, design)
    return float(np.mean((f_hat(X) - target(X)) ** 2))


def _seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def run_jobs(fn, jobs, workers: int = 1):
    """``[fn(j) for j in jobs]``, optionally across processes, order preserved."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# -- rate sweeps ------------------------------------------------------------------------

@dataclass
class SweepConfig:
    target: dict
    n: list[int]
    m: list[int]
    replicates: int = 8
    design: str = "uniform-cube"
    process: dict = field(default_factory=lambda: {"kind": "zero"})
    noise: dict = field(default_factory=lambda: {"kind": "gaussian", "scale": 0.0})
    estimator: dict = field(default_factory=dict)
    n_test: int = 10_000
    seed: int = 0
    plateau_threshold: float = -0.25

    @classmethod
    def from_config(cls, cfg: dict, where: str = "rate_sweep") -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        bad = sorted(set(cfg) - known)
        if bad:
            raise ValueError(f"unknown key {where}.{bad[0]}")
        for key in ("target", "n", "m"):
            if key not in cfg:
                raise ValueError(f"missing key {where}.{key}")
        out = cls(**cfg)
        out.n = [int(v) for v in np.atleast_1d(out.n)]
        out.m = [int(v) for v in np.atleast_1d(out.m)]
        EstimatorConfig.from_config(out.estimator)  # validate early
        return out


@dataclass
class SweepResult:
    rows: list[tuple]  # (n, m, replicate, mspe, optimization_gap, diverged, size)
    config: dict
    theory_exponent: float
    slope: float | None = None
    slope_se: float | None = None
    wall_times: list[float] = field(default_factory=list)

    header = ("n", "m", "replicate", "mspe", "optimization_gap", "diverged", "size")

    def cells(self) -> list[dict]:
        """Per-(n, m) medians over non-divergent replicates."""
        out = {}
        for n, m, _, e, _, div, _ in self.rows:
            c = out.setdefault((n, m), {"n": n, "m": m, "values": [], "diverged": 0})
            if div:
                c["diverged"] += 1
            else:
                c["values"].append(e)
        cells = []
        for key in sorted(out):
            c = out[key]
            v = np.array(c["values"])
            c["median"] = float(np.median(v)) if v.size else math.nan
            # large-sample standard error of a median
            c["median_se"] = float(1.2533 * np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
            c["count"] = int(v.size)
            cells.append(c)
        return cells


def _sweep_job(job):
    cfg, n, m, rep = job
    with threadpool_limits(1):
        sc = SweepConfig(**cfg)
        target = build_target(sc.target)
        est = EstimatorConfig.from_config(sc.estimator)
        data = generate_dataset(target, n, m, sc.design, ProcessSpec(**sc.process),
                                NoiseSpec(**sc.noise), seed=_seed(sc.seed, rep))
        t0 = time.perf_counter()
        try:
            f_hat, report, size = fit_estimator(est, data, target.spec, seed=_seed(sc.seed, rep, n, m))
        except RuntimeError:
            return (n, m, rep, math.nan, math.nan, True, 0), time.perf_counter() - t0
        wall = time.perf_counter() - t0
        err = mspe(f_hat, target, sc.design, sc.n_test, seed=_seed(sc.seed, rep, TEST_ROLE))
        return (n, m, rep, err, report.optimization_gap, False, size), wall


def fit_slope(nm, values) -> tuple[float, float]:
    """OLS slope of log(values) on log(nm) with its standard error."""
    x = np.log(np.asarray(nm, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if np.unique(x).size < 3:
        raise ValueError("slope needs at least three distinct nm values")
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> SweepResult:
    jobs = [(asdict(cfg), n, m, rep) for n in cfg.n for m in cfg.m for rep in range(cfg.replicates)]
    out = run_jobs(_sweep_job, jobs, workers)
    rows = sorted(r for r, _ in out)
    spec = build_target(cfg.target).spec
    res = SweepResult(rows, asdict(cfg), -spec.rate_model().rate_exponent,
                      wall_times=[w for _, w in out])
    cells = [c for c in res.cells() if c["count"] > 0 and c["median"] > 0]
    nm = [c["n"] * c["m"] for c in cells]
    if len(set(nm)) >= 3:
        res.slope, res.slope_se = fit_slope(nm, [c["median"] for c in cells])
    return res


def rate_sweep(spec_or_cfg, grid=None, replicates: int = 8, estimator: dict | None = None,
               seed: int = 0, workers: int = 1, **kw) -> SweepResult:
    """Rate sweep over an (n, m) grid; pass a ``SweepConfig`` or its pieces.

    With pieces: ``spec_or_cfg`` is a target config dict and ``grid`` a pair
    ``(n_list, m_list)``.
    """
    if isinstance(spec_or_cfg, SweepConfig):
        return run_sweep(spec_or_cfg, workers)
    n_list, m_list = grid
    cfg = SweepConfig(target=spec_or_cfg, n=list(n_list), m=list(m_list), replicates=replicates,
                      estimator=estimator or {}, seed=seed, **kw)
    return run_sweep(cfg, workers)


# -- phase scans ------------------------------------------------------------------------

@dataclass
class PhaseReport:
    sweep: SweepResult
    n: int
    m_grid: list[int]
    medians: list[float]
    local_slopes: list[float]
    plateau_m: int | None
    predicted_m: float
    floor_ratio: float  # median mspe at the largest m over 1/n


def phase_scan(cfg: SweepConfig, workers: int = 1) -> PhaseReport:
    """Scan m at fixed n; the plateau is the first m whose local log-log slope
    to the next grid point rises above ``cfg.plateau_threshold``."""
    if len(cfg.n) != 1:
        raise ValueError("phase_scan needs a single n")
    sweep = run_sweep(cfg, workers)
    n = cfg.n[0]
    cells = sweep.cells()
    ms = [c["m"] for c in cells]
    med = [c["median"] for c in cells]
    slopes = [math.log(med[i + 1] / med[i]) / math.log(ms[i + 1] / ms[i]) for i in range(len(ms) - 1)]
    plateau = next((ms[i] for i, s in enumerate(slopes) if s > cfg.plateau_threshold), None)
    ratio = build_target(cfg.target).spec.ratio
    return PhaseReport(sweep, n, ms, med, slopes, plateau, funclass.phase_transition_m(n, ratio),
                       med[-1] * n)


# -- approximation benchmark ------------------------------------------------------------

@dataclass
class ApproxConfig:
    target: dict
    archs: list[list[int]]  # [[L, W], ...] with nondecreasing widths at fixed depth
    n_train: int = 4000
    n_test: int = 20_000
    grid_res: int = 21
    seed: int = 0
    nested: bool = True  # warm-start each width from the previous one
    beta: float | None = None
    optimizer: str = "adam"
    lr: float = 3e-3
    epochs: int = 3000
    batch_size: int | None = None
    restarts: int = 3
    patience: int | None = 300
    init_bias: str = "spread"

    @classmethod
    def from_config(cls, cfg: dict) -> "ApproxConfig":
        known = {f.name for f in fields(cls)}
        bad = sorted(set(cfg) - known)
        if bad:
            raise ValueError(f"unknown key approx_bench.{bad[0]}")
        for key in ("target", "archs"):
            if key not in cfg:
                raise ValueError(f"missing key approx_bench.{key}")
        return cls(**cfg)


@dataclass
class ApproxResult:
    rows: list[tuple]  # (L, W, LW, params, best_train_risk, train_rmse, test_l2, sup_error, reference)
    gamma: float
    slope: float | None
    endpoint_slope: float | None

    header = ("L", "W", "LW", "params", "best_train_risk", "train_rmse", "test_l2", "sup_error",
              "reference")


def _grid_points(d: int, res: int) -> np.ndarray:
    axes = [np.linspace(0, 1, res)] * min(d, 3)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, min(d, 3))
    if d > 3:
        pts = np.hstack([pts, np.full((pts.shape[0], d - 3), 0.5)])
    return pts


def approx_bench(cfg: ApproxConfig) -> ApproxResult:
    """Fit each architecture to dense noiseless data and tabulate its errors
    against the ``(LW)^{-2 gamma}`` reference."""
    from .datagen import Dataset

    with threadpool_limits(1):
        target = build_target(cfg.target)
        rng = np.random.default_rng(_seed(cfg.seed, 0))
        X = rng.random((cfg.n_train, target.d))
        data = Dataset(X[:, None, :], target(X)[:, None])
        Xt = np.random.default_rng(_seed(cfg.seed, TEST_ROLE)).random((cfg.n_test, target.d))
        Xg = _grid_points(target.d, cfg.grid_res)
        gamma = target.spec.ratio
        beta = cfg.beta if cfg.beta is not None else target.spec.sup_bound
        rows, prev = [], None
        for i, (L, W) in enumerate(cfg.archs):
            opt = OptConfig(cfg.optimizer, cfg.lr, cfg.epochs, cfg.batch_size, cfg.restarts,
                            _seed(cfg.seed, 1, i), cfg.patience, cfg.init_bias)
            warm = None
            if cfg.nested and prev is not None and prev.depth == L and prev.max_width <= W:
                warm = relunet.widen(prev, [W] * L)
            net, report = fit_erm((L, W, beta), data, opt, warm_start=warm)
            prev = net
            test_l2 = float(np.sqrt(np.mean((net(Xt) - target(Xt)) ** 2)))
            sup = float(np.max(np.abs(net(Xg) - target(Xg))))
            rows.append((L, W, L * W, relunet.param_count(net), report.final_risk,
                         math.sqrt(report.final_risk), test_l2, sup,
                         funclass.approximation_rate(L * W, gamma)))
    lw = np.array([r[2] for r in rows], dtype=float)
    err = np.array([r[5] for r in rows])
    slope = endpoint = None
    if len(rows) >= 2 and np.all(err > 0):
        endpoint = float(math.log(err[-1] / err[0]) / math.log(lw[-1] / lw[0]))
        if np.unique(lw).size >= 3:
            slope = fit_slope(lw, err)[0]
    return ApproxResult(rows, gamma, slope, endpoint)


# -- outputs ------------------------------------------------------------------------------

def _opt(v) -> float:
    return math.nan if v is None else v


def sweep_footer(res: SweepResult) -> list[tuple]:
    """Footer rows: per-cell medians with the minimax reference, then the fit."""
    ratio = build_target(res.config["target"]).spec.ratio
    rows = [("median", c["n"], c["m"], c["median"], c["median_se"], c["count"],
             funclass.minimax_rate(c["n"], c["m"], ratio)) for c in res.cells()]
    rows.append(("slope", _opt(res.slope), "slope_se", _opt(res.slope_se), "theory",
                 res.theory_exponent, ""))
    return rows


def plot_loglog(path, x, y, ref, xlabel: str, ylabel: str, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "clusterfit"
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(x, y, "o-", label="observed")
    if ref is not None:
        ax.loglog(x, ref, "--", label="theory (scaled)")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=9)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _reference_curve(res: SweepResult, cells) -> list[float]:
    ratio = build_target(res.config["target"]).spec.ratio
    theo = [funclass.minimax_rate(c["n"], c["m"], ratio) for c in cells]
    scale = cells[0]["median"] / theo[0] if theo[0] > 0 else 1.0
    return [scale * t for t in theo]


def _write_timings(out: Path, name: str, times) -> None:
    # wall times vary run to run, so they stay out of the CSV tables
    (out / f"{name}_timings.json").write_text(json.dumps({"wall_times": list(times)}))


def emit_sweep(res: SweepResult, out: Path, name: str = "rate_sweep") -> list[Path]:
    """One CSV (replicate rows, then footer rows) and one log-log plot."""
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{name}.csv", SweepResult.header, res.rows + sweep_footer(res))
    cells = [c for c in res.cells() if c["count"]]
    plot_loglog(out / f"{name}.svg", [c["n"] * c["m"] for c in cells], [c["median"] for c in cells],
                _reference_curve(res, cells), "nm", "median MSPE",
                f"slope {_opt(res.slope):.3f} (theory {res.theory_exponent:.3f})")
    _write_timings(out, name, res.wall_times)
    return [out / f"{name}.csv", out / f"{name}.svg"]


def phase_footer(rep: PhaseReport) -> list[tuple]:
    rows = []
    for i, (m, med) in enumerate(zip(rep.m_grid, rep.medians)):
        slope = rep.local_slopes[i] if i < len(rep.local_slopes) else math.nan
        rows.append(("median", rep.n, m, med, "local_slope", slope, ""))
    rows.append(("plateau_m", rep.plateau_m if rep.plateau_m is not None else "none",
                 "predicted_m", rep.predicted_m, "floor_ratio", rep.floor_ratio, ""))
    return rows


def emit_phase(rep: PhaseReport, out: Path, name: str = "phase_scan") -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{name}.csv", SweepResult.header, rep.sweep.rows + phase_footer(rep))
    cells = [c for c in rep.sweep.cells() if c["count"]]
    plot_loglog(out / f"{name}.svg", rep.m_grid, rep.medians, _reference_curve(rep.sweep, cells),
                "m", "median MSPE", f"n={rep.n}, predicted m*={rep.predicted_m:.3g}, "
                f"plateau at m={rep.plateau_m}")
    _write_timings(out, name, rep.sweep.wall_times)
    return [out / f"{name}.csv", out / f"{name}.svg"]


def emit_approx(res: ApproxResult, out: Path, name: str = "approx_bench") -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    tail = [("slope", _opt(res.slope), "endpoint_slope", _opt(res.endpoint_slope),
             "reference_slope", -2 * res.gamma, "", "", "")]
    write_csv(out / f"{name}.csv", ApproxResult.header, res.rows + tail)
    lw = [r[2] for r in res.rows]
    err = [r[5] for r in res.rows]
    ref = [err[0] * r[8] / res.rows[0][8] for r in res.rows]
    plot_loglog(out / f"{name}.svg", lw, err, ref, "LW", "training RMSE",
                f"gamma={res.gamma:.3g}, endpoint slope {_opt(res.endpoint_slope):.3f}")
    return [out / f"{name}.csv", out / f"{name}.svg"]


# -- config dispatch ----------------------------------------------------------------------

def _block(cfg: dict, name: str) -> dict:
    blk = cfg[name]
    if not isinstance(blk, dict):
        raise ValueError(f"{name} must be a table")
    return blk


def run_generate(blk: dict, out: Path) -> list[Path]:
    for key in ("target", "n", "m"):
        if key not in blk:
            raise ValueError(f"missing key generate.{key}")
    known = {"target", "n", "m", "design", "process", "noise", "seed", "file"}
    bad = sorted(set(blk) - known)
    if bad:
        raise ValueError(f"unknown key generate.{bad[0]}")
    target = build_target(blk["target"])
    data = generate_dataset(target, int(blk["n"]), int(blk["m"]), blk.get("design", "uniform-cube"),
                            ProcessSpec(**blk.get("process", {})), NoiseSpec(**blk.get("noise", {})),
                            seed=int(blk.get("seed", 0)))
    out.mkdir(parents=True, exist_ok=True)
    path = out / blk.get("file", "dataset.csv")
    write_dataset(data, path)
    return [path, path.with_suffix(".toml")]


FIT_HEADER = ("estimator", "size", "final_risk", "best_risk", "optimization_gap", "restarts",
              "diverged", "steps")


def run_fit(blk: dict, out: Path, base: Path = Path(".")) -> list[Path]:
    """Fit one estimator to a dataset file; writes the model and a one-row report."""
    from .io import read_dataset

    if "dataset" not in blk:
        raise ValueError("missing key fit.dataset")
    bad = sorted(set(blk) - {"dataset", "estimator", "target", "seed", "model", "report"})
    if bad:
        raise ValueError(f"unknown key fit.{bad[0]}")
    path = Path(blk["dataset"])
    data = read_dataset(path if path.is_absolute() else base / path)
    est = EstimatorConfig.from_config(blk.get("estimator"))
    tcfg = blk.get("target", data.meta.get("target"))
    if tcfg is None:
        if (est.kind == "spline" and est.k is None) or (est.kind == "mlp" and not (est.L and est.W)):
            raise ValueError("missing key fit.target (needed to size the estimator)")
        spec = funclass.SmoothnessSpec(funclass.Isotropic(1.0, data.d))
    else:
        spec = build_target(tcfg).spec
    with threadpool_limits(1):
        model, report, size = fit_estimator(est, data, spec, seed=int(blk.get("seed", 0)))
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / blk.get("model", "model.txt")
    (write_spline if est.kind == "spline" else write_net)(model, model_path)
    steps = report.config.get("iterations", len(report.loss_trace))
    row = (est.kind, size, report.final_risk, report.best_risk, report.optimization_gap,
           report.restarts, report.diverged, steps)
    report_path = out / blk.get("report", "fit_report.csv")
    write_csv(report_path, FIT_HEADER, [row])
    return [model_path, report_path]


def gamma_rows(tree: funclass.CompositionTree):
    """Per-node table: path, s, K, effective smoothness, ratio to arity."""
    rows = []
    for path, node in tree.walk():
        eff = funclass.effective_smoothness(tree, path)
        rows.append(("node", "/".join(map(str, path)) or "root", node.s, node.K, eff, eff / node.K))
    g = funclass.gamma_direct(tree)
    rows.append(("gamma", g, "", "", "", ""))
    rows.append(("exponent", 2 * g / (2 * g + 1), "", "", "", ""))
    return ("kind", "path", "s", "K", "effective_smoothness", "ratio"), rows


def run_gamma(blk: dict, out: Path | None) -> list[Path]:
    if "tree" not in blk:
        raise ValueError("missing key gamma.tree")
    header, rows = gamma_rows(funclass.CompositionTree.from_config(blk["tree"]))
    if out is None:
        return []
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "gamma.csv", header, rows)
    return [out / "gamma.csv"]


COMMANDS = ("generate", "fit", "rate_sweep", "phase_scan", "approx_bench", "gamma")


def run_config(path, out=None, workers: int = 1, only: str | None = None) -> list[Path]:
    """Run every experiment block in a TOML config (or just ``only``)."""
    from .io import load_config

    path = Path(path)
    cfg = load_config(path)
    out = Path(out) if out is not None else path.parent / path.stem
    bad = sorted(set(cfg) - set(COMMANDS))
    if bad:
        raise ValueError(f"unknown key {bad[0]}")
    names = [only] if only else [c for c in COMMANDS if c in cfg]
    if not names or (only and only not in cfg):
        raise ValueError(f"missing key {only or 'one of ' + ', '.join(COMMANDS)}")
    written = []
    for name in names:
        blk = _block(cfg, name)
        if name == "generate":
            written += run_generate(blk, out)
        elif name == "fit":
            written += run_fit(blk, out, path.parent)
        elif name == "rate_sweep":
            written += emit_sweep(run_sweep(SweepConfig.from_config(blk), workers), out)
        elif name == "phase_scan":
            written += emit_phase(phase_scan(SweepConfig.from_config(blk, "phase_scan"), workers), out)
        elif name == "approx_bench":
            written += emit_approx(approx_bench(ApproxConfig.from_config(blk)), out)
        else:
            written += run_gamma(blk, out)
    return written
