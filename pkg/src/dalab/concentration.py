"""Monte-Carlo checks that observed deviation frequencies respect the tail bounds.

Each check fixes the functions involved (identity features, a given network)
instead of taking a supremum over a class; the uniform bounds are looser, so
a fixed-function check is a sound necessary condition.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import bounds
from .errors import ConfigurationError, DegenerateDistributionError, PreconditionError
from .kernels import (KernelSpec, estimate_moment_constants, gram, kernel_sum,
                      mean_embedding_at, mean_embedding_sq_norm)

DISTRIBUTIONS = ("gaussian", "uniform", "mixture", "point")
REPORT_COLUMNS = ("lemma", "N", "eps", "violations", "trials", "freq", "bound", "margin", "pass")
HEADER = ("fixed-function check: each bound is evaluated for one fixed function; "
          "the uniform bound over the class is looser")
_LEMMA_IDS = {"loss_hoeffding": 1, "mean_embedding": 2, "mmd_deviation": 3, "ddan_deviation": 4}
_REF_STREAM = 2 ** 31 - 1


@dataclass
class McConfig:
    trials: int = 2000
    seed: int = 0
    sizes: tuple = (100, 400, 1600)
    eps_grid: tuple = (0.2, 0.4)
    distribution: str = "gaussian"
    dim: int = 2
    bandwidth: float = 1.0
    reference_size: int | None = None   # default 20 x the largest N
    shift: float = 1.0                  # target mean offset along the first axis
    loss_bound: float = 1.0             # range of the simulated losses
    loss_p: float = 0.5
    k_max: int = 8

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        self.eps_grid = tuple(float(e) for e in self.eps_grid)
        if self.trials < 100:
            raise ConfigurationError("at least 100 trials are required")
        if not self.eps_grid or min(self.eps_grid) <= 0:
            raise ConfigurationError("eps grid must be nonempty and positive")
        if not self.sizes or min(self.sizes) < 1:
            raise ConfigurationError("sample sizes must be positive")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(f"distribution must be one of {DISTRIBUTIONS}")

    @property
    def reference(self) -> int:
        return self.reference_size or 20 * max(self.sizes)

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.bandwidth)


@dataclass
class ViolationRow:
    lemma: str
    N: int
    eps: float
    violations: int
    trials: int
    freq: float
    bound: float
    margin: float
    passed: bool
    vacuous: bool


@dataclass
class ViolationReport:
    rows: list
    header: str = HEADER
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if not r.vacuous)

    def failures(self):
        return [r for r in self.rows if not r.vacuous and not r.passed]

    def to_csv(self, with_header=True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if with_header:
            w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.lemma, r.N, repr(r.eps), r.violations, r.trials, repr(r.freq),
                        repr(r.bound), repr(r.margin),
                        "vacuous" if r.vacuous else ("pass" if r.passed else "fail")])
        return buf.getvalue()


def binomial_margin(bound: float, trials: int) -> float:
    p = min(max(bound, 0.0), 1.0)
    return 3.0 * np.sqrt(p * (1.0 - p) / trials)


def _row(lemma, N, eps, deviations, bound):
    trials = len(deviations)
    violations = int(np.count_nonzero(deviations >= eps))
    freq = violations / trials
    vacuous = not np.isfinite(bound) or bound >= 1.0
    margin = binomial_margin(bound, trials) if np.isfinite(bound) else 0.0
    passed = bool(vacuous or freq <= bound + margin)
    return ViolationRow(lemma, int(N), float(eps), violations, trials, freq, float(bound),
                        float(margin), passed, bool(vacuous))


def _rng(cfg: McConfig, lemma: str, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, _LEMMA_IDS[lemma], stream]))


def sample(distribution: str, n, rng, dim=2, offset=0.0) -> np.ndarray:
    """Draws with unit-order spread; offset moves the mean along the first axis."""
    shape = (n, dim) if np.isscalar(n) else tuple(n) + (dim,)
    if distribution == "gaussian":
        X = rng.standard_normal(shape)
    elif distribution == "uniform":
        X = rng.uniform(-np.sqrt(3), np.sqrt(3), size=shape)
    elif distribution == "mixture":
        X = 0.5 * rng.standard_normal(shape)
        X[..., 0] += np.where(rng.random(shape[:-1]) < 0.5, -1.5, 1.5)
    elif distribution == "point":
        X = np.zeros(shape)
    else:
        raise ConfigurationError(f"unknown distribution {distribution!r}")
    X[..., 0] += offset
    return X


def _safe(fn, *args):
    try:
        return fn(*args)
    except PreconditionError:
        return float("inf")


# -- bounded losses --------------------------------------------------------------

def verify_loss_hoeffding(cfg: McConfig) -> ViolationReport:
    """Means of M losses b * Bernoulli(p) against the two-sided Hoeffding tail."""
    b, p = cfg.loss_bound, cfg.loss_p
    rows = []
    for M in cfg.sizes:
        rng = _rng(cfg, "loss_hoeffding", M)
        means = b * rng.binomial(M, p, size=cfg.trials) / M
        dev = np.abs(means - b * p)
        for eps in cfg.eps_grid:
            rows.append(_row("loss_hoeffding", M, eps, dev, bounds.hoeffding_tail(M, eps, b)))
    return ViolationReport(rows, meta={"loss_bound": b, "p": p})


# -- RKHS mean embedding ---------------------------------------------------------

def _intra_sums(kernel: KernelSpec, X) -> np.ndarray:
    """Sum of k over all ordered pairs inside each trial sample; X is trials x N x d."""
    g2 = 2.0 * kernel.bandwidth ** 2
    N = X.shape[1]
    return np.array([N + 2.0 * np.exp(-pdist(x, "sqeuclidean") / g2).sum() for x in X])


def verify_mean_embedding(cfg: McConfig) -> ViolationReport:
    """||empirical mean embedding - reference mean embedding|| vs the Bernstein-type tail."""
    kernel = cfg.kernel
    ref = sample(cfg.distribution, cfg.reference, _rng(cfg, "mean_embedding", _REF_STREAM), cfg.dim)
    probe = sample(cfg.distribution, max(cfg.sizes), _rng(cfg, "mean_embedding", _REF_STREAM - 1),
                   cfg.dim)
    try:
        sigma2, C = estimate_moment_constants(kernel, probe, ref, cfg.k_max)
    except DegenerateDistributionError:
        sigma2, C = 0.0, 0.0
    ref_sq = mean_embedding_sq_norm(kernel, ref)
    sigma = float(np.sqrt(sigma2))
    rows, medians = [], {}
    for N in cfg.sizes:
        rng = _rng(cfg, "mean_embedding", N)
        X = sample(cfg.distribution, (cfg.trials, N), rng, cfg.dim)
        mu_x = mean_embedding_at(kernel, X.reshape(-1, cfg.dim), ref)
        sq = _intra_sums(kernel, X) / N ** 2 - 2.0 * mu_x.reshape(cfg.trials, N).mean(1) + ref_sq
        dev = np.sqrt(np.maximum(sq, 0.0))
        medians[N] = float(np.median(dev))
        for eps in cfg.eps_grid:
            bound = 0.0 if sigma == 0 else _safe(bounds.mean_embedding_tail, N, eps, sigma, C)
            rows.append(_row("mean_embedding", N, eps, dev, bound))
    return ViolationReport(rows, meta={"sigma2": sigma2, "C": C, "constants": "estimated",
                                       "reference_size": cfg.reference, "median_deviation": medians})


# -- MMD between two fixed domains -------------------------------------------

def _mmd_from_sums(ss, st, tt, ns, nt):
    return np.sqrt(np.maximum(ss / ns ** 2 - 2 * st / (ns * nt) + tt / nt ** 2, 0.0))


def verify_mmd_deviation(cfg: McConfig) -> ViolationReport:
    """|D - hD| for identity features, D from the reference samples."""
    if cfg.reference < 10 * max(cfg.sizes):
        raise ConfigurationError(
            f"reference size {cfg.reference} is below 10 x the largest N ({max(cfg.sizes)})")
    kernel = cfg.kernel
    g2 = 2.0 * kernel.bandwidth ** 2
    rref = _rng(cfg, "mmd_deviation", _REF_STREAM)
    Rs = sample(cfg.distribution, cfg.reference, rref, cfg.dim)
    Rt = sample(cfg.distribution, cfg.reference, rref, cfg.dim, cfg.shift)
    m = cfg.reference
    D = float(_mmd_from_sums(kernel_sum(kernel, Rs, Rs), kernel_sum(kernel, Rs, Rt),
                             kernel_sum(kernel, Rt, Rt), m, m))
    probe_rng = _rng(cfg, "mmd_deviation", _REF_STREAM - 1)
    consts = []
    for R, off in ((Rs, 0.0), (Rt, cfg.shift)):
        probe = sample(cfg.distribution, max(cfg.sizes), probe_rng, cfg.dim, off)
        try:
            consts.append(estimate_moment_constants(kernel, probe, R, cfg.k_max))
        except DegenerateDistributionError:
            consts.append((0.0, 0.0))
    (s2s, Cs), (s2t, Ct) = consts
    rows, medians = [], {}
    for N in cfg.sizes:
        rng = _rng(cfg, "mmd_deviation", N)
        dev = np.empty(cfg.trials)
        for i in range(cfg.trials):
            S = sample(cfg.distribution, N, rng, cfg.dim)
            T = sample(cfg.distribution, N, rng, cfg.dim, cfg.shift)
            ss = N + 2.0 * np.exp(-pdist(S, "sqeuclidean") / g2).sum()
            tt = N + 2.0 * np.exp(-pdist(T, "sqeuclidean") / g2).sum()
            st = gram(kernel, S, T).sum()
            dev[i] = abs(D - float(_mmd_from_sums(ss, st, tt, N, N)))
        medians[N] = float(np.median(dev))
        for eps in cfg.eps_grid:
            if s2s == 0 and s2t == 0:
                bound = 0.0
            else:
                bound = _safe(bounds.mmd_deviation_tail, N, N, eps, np.sqrt(s2s), Cs,
                              np.sqrt(s2t), Ct)
            rows.append(_row("mmd_deviation", N, eps, dev, bound))
    return ViolationReport(rows, meta={"D_reference": D, "sigma2": (s2s, s2t), "C": (Cs, Ct),
                                       "constants": "estimated", "reference_size": m,
                                       "median_deviation": medians})


# -- discriminator distance -------------------------------------------------------

def verify_ddan_deviation(cfg: McConfig, adv_model=None) -> ViolationReport:
    """|D_Omega - hD_Omega| for a fixed extractor and discriminator."""
    from .trainers import AdversarialModel

    if cfg.reference < 10 * max(cfg.sizes):
        raise ConfigurationError(
            f"reference size {cfg.reference} is below 10 x the largest N ({max(cfg.sizes)})")
    if adv_model is None:
        adv_model = AdversarialModel.create((cfg.dim, 8, 2), disc_hidden=(8,),
                                            seed=cfg.seed, weight_bound=2.0)
    rref = _rng(cfg, "ddan_deviation", _REF_STREAM)
    Rs = sample(cfg.distribution, cfg.reference, rref, cfg.dim)
    Rt = sample(cfg.distribution, cfg.reference, rref, cfg.dim, cfg.shift)
    D = float(adv_model.discriminate(Rs, "source").mean() - adv_model.discriminate(Rt, "target").mean())
    B_D = adv_model.disc_bound
    rows, medians = [], {}
    for N in cfg.sizes:
        rng = _rng(cfg, "ddan_deviation", N)
        S = sample(cfg.distribution, (cfg.trials, N), rng, cfg.dim)
        T = sample(cfg.distribution, (cfg.trials, N), rng, cfg.dim, cfg.shift)
        vs = adv_model.discriminate(S.reshape(-1, cfg.dim), "source").reshape(cfg.trials, N)
        vt = adv_model.discriminate(T.reshape(-1, cfg.dim), "target").reshape(cfg.trials, N)
        dev = np.abs(np.abs(D) - np.abs(vs.mean(1) - vt.mean(1)))
        medians[N] = float(np.median(dev))
        for eps in cfg.eps_grid:
            rows.append(_row("ddan_deviation", N, eps, dev,
                             bounds.discriminator_tail(N, N, eps, B_D)))
    return ViolationReport(rows, meta={"D_reference": abs(D), "reference_size": cfg.reference,
                                       "median_deviation": medians})


VERIFIERS = {
    "loss_hoeffding": verify_loss_hoeffding,
    "mean_embedding": verify_mean_embedding,
    "mmd_deviation": verify_mmd_deviation,
    "ddan_deviation": verify_ddan_deviation,
}
