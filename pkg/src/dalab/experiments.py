"""Sweeps over sample counts, architecture and alpha, and scaling-law fits."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .data import Counts, Shift, gen_shifted_domains, standardize
from .emit import Table
from .errors import ConfigurationError, TrainingDivergedError
from .trainers import AdversarialModel, MmdModel, TrainConfig, evaluate, train

AXES = ("mt", "ms", "ns", "depth", "width", "alpha")
RATE_KINDS = ("inv_sqrt", "linear", "quadratic", "sqrt")
RATE_LABELS = {"inv_sqrt": "c1 + c2/sqrt(x)", "linear": "c1 + c2*x",
               "quadratic": "c1 + c2*x^2", "sqrt": "c*sqrt(x)"}


# -- rate fits -----------------------------------------------------------------

@dataclass
class RateFit:
    kind: str
    coefficients: tuple
    r2: float

    def predict(self, x):
        return _design(self.kind, np.asarray(x, dtype=float)) @ np.asarray(self.coefficients)

    def to_dict(self):
        return {"kind": self.kind, "model": RATE_LABELS[self.kind],
                "coefficients": list(self.coefficients), "r2": self.r2}


def _design(kind, x):
    if kind == "inv_sqrt":
        return np.column_stack([np.ones_like(x), 1.0 / np.sqrt(x)])
    if kind == "linear":
        return np.column_stack([np.ones_like(x), x])
    if kind == "quadratic":
        return np.column_stack([np.ones_like(x), x ** 2])
    if kind == "sqrt":
        return np.sqrt(x)[:, None]
    raise ConfigurationError(f"rate kind must be one of {RATE_KINDS}")


def r_squared(y, fitted) -> float:
    y = np.asarray(y, dtype=float)
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res <= 1e-24 else float("-inf")
    return 1.0 - ss_res / ss_tot


def fit_rate(xs, ys, kind: str) -> RateFit:
    """Least squares fit of one of the scaling models to (xs, ys)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ConfigurationError("need at least three (x, y) points")
    if kind in ("inv_sqrt", "sqrt") and np.any(x <= 0):
        raise ConfigurationError("square-root models need positive x")
    A = _design(kind, x)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise ConfigurationError("degenerate design: x values do not identify the model")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return RateFit(kind, tuple(float(c) for c in coef), r_squared(y, A @ coef))


# -- experiment cells ---------------------------------------------------------------

@dataclass
class ExperimentConfig:
    trainer: str = "mmd"                 # mmd | adversarial
    kind: str = "gaussians"
    rotation_deg: float = 30.0
    scale: float = 1.0
    translation: tuple = (0.0, 0.0)
    matrix: tuple | None = None
    warp: float = 0.0
    m: int = 3
    dim: int = 2
    radius: float = 2.0
    noise: float = 1.0
    Ns: int = 200
    Nt: int = 200
    Ms: int = 50
    Mt: int = 10
    n_test: int = 500
    depth: int = 2
    width: int = 8
    hidden: str = "relu"
    weight_bound: float = 1.0
    disc_hidden: tuple = (8,)
    alpha: float = 0.5
    beta: float = 1.0
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 500
    batch_size: int = 32
    bandwidth: float | None = None
    couple_domains: bool = True
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.trainer not in ("mmd", "adversarial"):
            raise ConfigurationError("trainer must be 'mmd' or 'adversarial'")
        self.translation = tuple(self.translation)
        self.disc_hidden = tuple(self.disc_hidden)
        if self.matrix is not None:
            self.matrix = tuple(tuple(r) for r in self.matrix)

    def replace(self, **changes) -> "ExperimentConfig":
        record = {f.name: getattr(self, f.name) for f in fields(self)}
        record.update(changes)
        return ExperimentConfig(**record)

    @classmethod
    def from_dict(cls, record: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(record) - known
        if unknown:
            raise ConfigurationError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**record)

    def to_dict(self) -> dict:
        return asdict(self)

    def dataset(self, seed: int):
        shift = Shift(self.rotation_deg, self.scale, self.translation, self.matrix, self.warp)
        ds = gen_shifted_domains(self.kind, shift,
                                 Counts(self.Ns, self.Nt, self.Ms, self.Mt, self.n_test),
                                 seed, self.m, self.dim, self.radius, self.noise)
        return standardize(ds) if self.standardize else ds

    def widths(self) -> tuple:
        m = 2 if self.kind == "moons" else self.m
        return (self.dim,) + (self.width,) * (self.depth - 1) + (m,)

    def model(self, seed: int):
        if self.trainer == "mmd":
            return MmdModel.create(self.widths(), seed, self.hidden, self.weight_bound,
                                   coupled=self.couple_domains)
        return AdversarialModel.create(self.widths(), self.disc_hidden, seed, self.hidden,
                                       self.weight_bound, coupled=self.couple_domains)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.alpha, self.beta, self.learning_rate, self.momentum, self.epochs,
                           self.batch_size, seed, self.couple_domains, bandwidth=self.bandwidth)


def _derive(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def run_cell(cfg: ExperimentConfig, data_seed: int, model_seed: int, counts: dict | None = None):
    """Train once and return (target test accuracy, status)."""
    ds = cfg.dataset(data_seed)
    if counts:
        ds = ds.with_counts(**counts)
    model = cfg.model(model_seed)
    try:
        train(model, ds, cfg.train_config(model_seed))
    except TrainingDivergedError as exc:
        return float("nan"), f"diverged@{exc.epoch}"
    return evaluate(model, ds.xt_test, ds.yt_test, "target"), "ok"


def _apply_axis(cfg: ExperimentConfig, axis: str, value):
    if axis == "mt":
        return cfg.replace(Mt=int(value))
    if axis == "ms":
        return cfg.replace(Ms=int(value))
    if axis == "ns":
        return cfg.replace(Ns=int(value))
    if axis == "depth":
        return cfg.replace(depth=int(value))
    if axis == "width":
        return cfg.replace(width=int(value))
    if axis == "alpha":
        return cfg.replace(alpha=float(value))
    raise ConfigurationError(f"axis must be one of {AXES}")


def _cell_task(args):
    cfg_record, data_seed, model_seed, counts = args
    return run_cell(ExperimentConfig(**cfg_record), data_seed, model_seed, counts)


# -- sweeps ----------------------------------------------------------------------

@dataclass
class SweepResult:
    axis: str
    grid: list
    rows: list                       # dicts: value, trial, seed, count, accuracy, status
    trials: int
    seed: int
    mode: str = "accuracy"
    count_axis: str | None = None
    reference_accuracy: float | None = None
    required: dict = field(default_factory=dict)   # grid value -> minimal count or None
    fit: RateFit | None = None

    def accuracy_table(self):
        """Mean accuracy per (grid value, count)."""
        acc = {}
        for r in self.rows:
            acc.setdefault((r["value"], r["count"]), []).append(r["accuracy"])
        return {k: float(np.nanmean(v)) if np.any(np.isfinite(v)) else float("nan")
                for k, v in acc.items()}

    def summary(self):
        """Per grid value: median accuracy (accuracy mode) or required count."""
        if self.mode == "complexity":
            return [(g, self.required.get(g)) for g in self.grid]
        out = []
        for g in self.grid:
            vals = [r["accuracy"] for r in self.rows if r["value"] == g]
            out.append((g, float(np.nanmedian(vals)) if vals else float("nan")))
        return out

    def to_table(self) -> Table:
        cols = ["value", "trial", "seed", "count", "accuracy", "status"]
        rows = [[r["value"], r["trial"], r["seed"], r["count"], r["accuracy"], r["status"]]
                for r in sorted(self.rows, key=_row_key)]
        summ = [(g, v) for g, v in self.summary() if v is not None]
        series = {"median" if self.mode == "accuracy" else "required":
                  ([g for g, _ in summ], [v for _, v in summ])}
        fits = {}
        if self.fit is not None and summ:
            xs = np.linspace(min(g for g, _ in summ), max(g for g, _ in summ), 50)
            fits[RATE_LABELS[self.fit.kind]] = (xs, self.fit.predict(xs))
        ylab = "target accuracy" if self.mode == "accuracy" else f"minimal {self.count_axis}"
        return Table(cols, rows, f"sweep over {self.axis}", self.axis, ylab, series, fits,
                     self.to_json_dict())

    def to_json_dict(self):
        return {"axis": self.axis, "grid": self.grid, "trials": self.trials, "seed": self.seed,
                "mode": self.mode, "count_axis": self.count_axis,
                "reference_accuracy": self.reference_accuracy,
                "required": {str(k): v for k, v in self.required.items()},
                "summary": self.summary(),
                "fit": self.fit.to_dict() if self.fit else None,
                "rows": sorted(self.rows, key=_row_key)}


def _row_key(r):
    return (float(r["value"]), int(r["trial"]), -1 if r["count"] is None else int(r["count"]))


class _CellStore:
    """Completed cells, optionally mirrored to a JSON-lines file for resumption."""

    def __init__(self, path):
        self.path = Path(path) if path else None
        self.done = {}
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self.done[tuple(rec["key"])] = rec
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def add(self, key, rec):
        rec = dict(rec, key=list(key))
        self.done[tuple(key)] = rec
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                fh.flush()


def _run_cells(cells, store: _CellStore, workers: int):
    """cells: list of (key, cfg, data_seed, model_seed, counts, meta). Returns key -> record."""
    todo = [c for c in cells if tuple(c[0]) not in store.done]
    tasks = [(c[1].to_dict(), c[2], c[3], c[4]) for c in todo]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [_cell_task(t) for t in tasks]
    for c, (acc, status) in zip(todo, results):
        store.add(c[0], dict(c[5], accuracy=acc, status=status))
    return {tuple(c[0]): store.done[tuple(c[0])] for c in cells}


def _record(value, trial, seed, count):
    return {"value": value, "trial": trial, "seed": seed, "count": count}


def sweep(axis: str, grid, base: ExperimentConfig, trials: int = 1, seed: int = 0,
          mode: str = "accuracy", count_axis: str = "ms", lattice=None,
          reference_accuracy: float | None = None, cells_path=None,
          workers: int = 1) -> SweepResult:
    """Accuracy per (grid value, trial), or the minimal labeled/total count per grid value.

    In complexity mode the count is searched on a doubling lattice by bisection of
    the trial-mean accuracy, then re-checked: the reported count reaches the
    reference accuracy and the previous lattice point does not.
    """
    grid = list(grid)
    if not grid:
        raise ConfigurationError("grid must be nonempty")
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    if axis not in AXES:
        raise ConfigurationError(f"axis must be one of {AXES}")
    store = _CellStore(cells_path)
    data_seeds = [_derive(seed, trial) for trial in range(trials)]

    if mode == "accuracy":
        cells = []
        for gi, g in enumerate(grid):
            cfg = _apply_axis(base, axis, g)
            for trial in range(trials):
                ms = _derive(seed, trial, gi + 1)
                cells.append(((gi, trial, -1), cfg, data_seeds[trial], ms, None,
                              _record(g, trial, ms, None)))
        done = _run_cells(cells, store, workers)
        rows = [_strip(done[tuple(c[0])]) for c in cells]
        return SweepResult(axis, grid, rows, trials, seed)

    if mode != "complexity":
        raise ConfigurationError("mode must be 'accuracy' or 'complexity'")
    if count_axis not in ("ms", "ns"):
        raise ConfigurationError("count_axis must be 'ms' or 'ns'")
    lattice = sorted(int(v) for v in (lattice or (4, 8, 16, 32, 64, 128)))
    cfgs = []
    for g in grid:
        cfg = _apply_axis(base, axis, g)
        top = lattice[-1]
        cfg = cfg.replace(Ms=max(cfg.Ms, top)) if count_axis == "ms" else cfg.replace(Ns=top)
        cfg = cfg.replace(Ns=max(cfg.Ns, cfg.Ms))
        cfgs.append(cfg)
    rows_by_key = {}

    def mean_acc(gi, li):
        cells = []
        for trial in range(trials):
            ms = _derive(seed, trial, gi + 1)
            counts = {"Ms": lattice[li]} if count_axis == "ms" else {"Ns": lattice[li]}
            cells.append(((gi, trial, lattice[li]), cfgs[gi], data_seeds[trial], ms, counts,
                          _record(grid[gi], trial, ms, lattice[li])))
        done = _run_cells(cells, store, workers)
        accs = []
        for c in cells:
            rows_by_key[tuple(c[0])] = _strip(done[tuple(c[0])])
            accs.append(done[tuple(c[0])]["accuracy"])
        accs = np.asarray(accs, dtype=float)
        return float(np.nanmean(accs)) if np.any(np.isfinite(accs)) else 0.0

    top_acc = [mean_acc(gi, len(lattice) - 1) for gi in range(len(grid))]
    chance = 1.0 / (2 if base.kind == "moons" else base.m)
    ref = reference_accuracy if reference_accuracy is not None else (chance + max(top_acc)) / 2
    required = {}
    for gi, g in enumerate(grid):
        required[g] = _minimal_count(lambda li: mean_acc(gi, li) >= ref, len(lattice),
                                     lattice)
    rows = [rows_by_key[k] for k in sorted(rows_by_key)]
    return SweepResult(axis, grid, rows, trials, seed, "complexity", count_axis, ref, required)


def _minimal_count(reaches, n, lattice):
    """Bisection for the first lattice index that reaches the target, re-verified."""
    if not reaches(n - 1):
        return None
    lo, hi = -1, n - 1          # reaches(hi) holds; lo is below the range or fails
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    if hi == 0 or not reaches(hi - 1):
        return lattice[hi]
    # accuracy was not monotone in the count; fall back to a scan from the bottom
    for i in range(n):
        if reaches(i) and (i == 0 or not reaches(i - 1)):
            return lattice[i]
    return lattice[n - 1]


def _strip(rec):
    return {k: rec[k] for k in ("value", "trial", "seed", "count", "accuracy", "status")}


# -- optimal alpha ------------------------------------------------------------------

@dataclass
class AlphaOptResult:
    mt_grid: list
    alpha_grid: list
    accuracy: list             # per Mt, mean accuracy per alpha
    alpha_opt: list            # None where flat
    flat: list
    fit: RateFit | None
    spearman: float | None

    def to_table(self) -> Table:
        cols = ["Mt", "alpha", "mean_accuracy", "alpha_opt", "flat"]
        rows = []
        for mt, accs, opt, flat in zip(self.mt_grid, self.accuracy, self.alpha_opt, self.flat):
            for a, acc in zip(self.alpha_grid, accs):
                rows.append([mt, a, acc, opt, flat])
        pts = [(mt, a) for mt, a in zip(self.mt_grid, self.alpha_opt) if a is not None]
        series = {"alpha_opt": ([p[0] for p in pts], [p[1] for p in pts])}
        fits = {}
        if self.fit is not None and pts:
            xs = np.linspace(min(p[0] for p in pts), max(p[0] for p in pts), 50)
            fits["c*sqrt(Mt)"] = (xs, self.fit.predict(xs))
        return Table(cols, rows, "optimal alpha vs labeled target samples", "Mt", "alpha_opt",
                     series, fits, self.to_json_dict())

    def to_json_dict(self):
        return {"mt_grid": self.mt_grid, "alpha_grid": self.alpha_grid,
                "accuracy": self.accuracy, "alpha_opt": self.alpha_opt, "flat": self.flat,
                "fit": self.fit.to_dict() if self.fit else None, "spearman": self.spearman}


def alpha_opt_from_curve(alpha_grid, accuracy, flat_tol: float = 1e-12):
    """Argmax of a quadratic fitted to accuracy(alpha), clamped to [0, 1]; None if flat."""
    a = np.asarray(alpha_grid, dtype=float)
    y = np.asarray(accuracy, dtype=float)
    if np.ptp(y) <= flat_tol:
        return None
    c2, c1, c0 = np.polyfit(a, y, 2)
    if c2 < 0:
        return float(np.clip(-c1 / (2 * c2), 0.0, 1.0))
    ends = np.array([0.0, 1.0])
    return float(ends[np.argmax(np.polyval([c2, c1, c0], ends))])


def alpha_opt_curve(mt_grid, base: ExperimentConfig, trials: int = 5, seed: int = 0,
                    alpha_grid=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0), cells_path=None,
                    workers: int = 1) -> AlphaOptResult:
    alpha_grid = [float(a) for a in alpha_grid]
    if len(alpha_grid) < 5 or min(alpha_grid) > 0.0 or max(alpha_grid) < 1.0:
        raise ConfigurationError("alpha grid must cover [0, 1] with at least 5 points")
    store = _CellStore(cells_path)
    accuracy, opts, flats = [], [], []
    for mi, mt in enumerate(mt_grid):
        cfg = base.replace(Mt=int(mt), Nt=max(base.Nt, int(mt)))
        cells = []
        for ai, a in enumerate(alpha_grid):
            for trial in range(trials):
                ms = _derive(seed, trial, mi + 1)
                cells.append(((mi, ai, trial), cfg.replace(alpha=a), _derive(seed, trial), ms,
                              None, _record(a, trial, ms, int(mt))))
        done = _run_cells(cells, store, workers)
        means = []
        for ai in range(len(alpha_grid)):
            accs = np.array([done[(mi, ai, t)]["accuracy"] for t in range(trials)], dtype=float)
            means.append(float(np.nanmean(accs)) if np.any(np.isfinite(accs)) else float("nan"))
        opt = alpha_opt_from_curve(alpha_grid, means)
        accuracy.append(means)
        opts.append(opt)
        flats.append(opt is None)
    pts = [(mt, a) for mt, a in zip(mt_grid, opts) if a is not None]
    fit = fit_rate([p[0] for p in pts], [p[1] for p in pts], "sqrt") if len(pts) >= 3 else None
    rho = None
    if len(pts) >= 3:
        rho = float(spearmanr([p[0] for p in pts], [p[1] for p in pts]).statistic)
    return AlphaOptResult(list(mt_grid), alpha_grid, accuracy, opts, flats, fit, rho)
