"""Two-dimensional two-class experiments with known geometric domain transforms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, SingularSystemError


@dataclass(frozen=True)
class GeometricTransform:
    A: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if A.shape != (2, 2) or t.shape != (2,):
            raise DimensionError("expected a 2x2 matrix and a 2-vector")
        if abs(np.linalg.det(A)) <= 1e-9:
            raise SingularSystemError("transform matrix is singular")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_params(cls, rotation_deg=0.0, scale=(1.0, 1.0), shear=0.0, translation=(0.0, 0.0)):
        th = np.deg2rad(rotation_deg)
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        S = np.array([[scale[0], shear], [0.0, scale[1]]])
        return cls(R @ S, np.asarray(translation, dtype=float))

    def __call__(self, X):
        return np.asarray(X, dtype=float) @ self.A.T + self.t

    def inverse(self) -> "GeometricTransform":
        Ai = np.linalg.inv(self.A)
        return GeometricTransform(Ai, -Ai @ self.t)


IDENTITY = GeometricTransform(np.eye(2), np.zeros(2))
SOURCE_TRUTH = GeometricTransform.from_params(20.0, (1.2, 0.8), 0.2, (0.5, -0.5))
TARGET_TRUTH = GeometricTransform.from_params(75.0, (0.7, 1.4), -0.3, (-1.0, 2.0))


@dataclass
class ShallowConfig:
    n: int = 400
    Ms: int = 20
    Mt: int = 8
    alpha: float = 0.5
    lam: float = 1e-2
    tau: float = 0.3
    seed: int = 0
    test_size: int = 1000
    offset: float = 1.5
    source_truth: GeometricTransform = field(default=SOURCE_TRUTH)
    target_truth: GeometricTransform = field(default=TARGET_TRUTH)
    scramble_labels: bool = False

    def __post_init__(self):
        if not (0 <= self.Ms <= self.n and 0 <= self.Mt <= self.n):
            raise ConfigurationError("labeled counts must not exceed n")
        if self.lam < 0 or self.tau < 0:
            raise ConfigurationError("lambda and tau must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")


def gen_two_class(seed, n: int, transform: GeometricTransform = IDENTITY, offset: float = 1.5):
    """Balanced classes N((+-offset, 0), I) pushed through the transform, shuffled."""
    if n < 2:
        raise ConfigurationError("need at least two samples")
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) < n - n // 2, 1.0, -1.0)
    y = y[rng.permutation(n)]
    X = rng.standard_normal((n, 2))
    X[:, 0] += offset * y
    return transform(X), y


def perturb_transform(truth: GeometricTransform, tau: float, seed) -> GeometricTransform:
    """Adds a random matrix of spectral norm exactly tau to the linear part."""
    if tau < 0:
        raise ConfigurationError("tau must be nonnegative")
    if tau == 0:
        return truth
    rng = np.random.default_rng(seed)
    for _ in range(10):
        E = rng.standard_normal((2, 2))
        E *= tau / np.linalg.norm(E, 2)
        A = truth.A + E
        if abs(np.linalg.det(A)) > 1e-9:
            return GeometricTransform(A, truth.t)
    raise SingularSystemError("perturbed transform stayed singular after 10 draws")


def ridge_objective_grad(w, fS, ys, fT, yt, alpha, lam):
    """Gradient of the weighted ridge objective at w."""
    g = 2.0 * lam * w
    if alpha < 1 and len(ys):
        g += 2.0 * (1 - alpha) / len(ys) * fS.T @ (fS @ w - ys)
    if alpha > 0 and len(yt):
        g += 2.0 * alpha / len(yt) * fT.T @ (fT @ w - yt)
    return g


def weighted_ridge(fS, ys, fT, yt, alpha: float, lam: float) -> np.ndarray:
    """argmin (1-a)/Ms |fS w - ys|^2 + a/Mt |fT w - yt|^2 + lam |w|^2."""
    fS = np.atleast_2d(np.asarray(fS, dtype=float))
    fT = np.atleast_2d(np.asarray(fT, dtype=float))
    ys = np.asarray(ys, dtype=float)
    yt = np.asarray(yt, dtype=float)
    d = fS.shape[1] if fS.size else fT.shape[1]
    H = lam * np.eye(d)
    r = np.zeros(d)
    if alpha < 1 and len(ys):
        H += (1 - alpha) / len(ys) * fS.T @ fS
        r += (1 - alpha) / len(ys) * fS.T @ ys
    if alpha > 0 and len(yt):
        H += alpha / len(yt) * fT.T @ fT
        r += alpha / len(yt) * fT.T @ yt
    try:
        w = np.linalg.solve(H, r)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("normal equations are singular") from exc
    if np.linalg.cond(H) > 1e14:
        raise SingularSystemError("normal equations are numerically singular")
    return w


def principal_basis(X, k: int) -> np.ndarray:
    """Top-k principal directions of X as columns (d x k)."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-12)) if s.size and s[0] > 0 else 0
    if k > rank:
        raise DimensionError(f"k={k} exceeds the data rank {rank}")
    return Vt[:k].T


@dataclass
class SubspaceAlignment:
    Ps: np.ndarray
    Pt: np.ndarray

    @property
    def M(self) -> np.ndarray:
        return self.Ps.T @ self.Pt

    def source(self, X):
        return np.asarray(X, dtype=float) @ self.Ps @ self.M

    def target(self, X):
        return np.asarray(X, dtype=float) @ self.Pt


def subspace_align(Xs, Xt, k: int) -> SubspaceAlignment:
    d = np.shape(Xs)[1]
    if k > d:
        raise DimensionError(f"k={k} exceeds the data dimension {d}")
    return SubspaceAlignment(principal_basis(Xs, k), principal_basis(Xt, k))


def run_shallow(cfg: ShallowConfig) -> float:
    """Target test misclassification rate of the weighted ridge classifier."""
    ss = np.random.SeedSequence(cfg.seed).spawn(6)
    Xs, ys = gen_two_class(ss[0], cfg.n, cfg.source_truth, cfg.offset)
    Xt, yt = gen_two_class(ss[1], cfg.n, cfg.target_truth, cfg.offset)
    Xte, yte = gen_two_class(ss[2], cfg.test_size, cfg.target_truth, cfg.offset)
    if cfg.scramble_labels:
        rng = np.random.default_rng(ss[5])
        ys = rng.choice([-1.0, 1.0], size=len(ys))
        yt = rng.choice([-1.0, 1.0], size=len(yt))
    f_s = perturb_transform(cfg.source_truth.inverse(), cfg.tau, ss[3])
    f_t = perturb_transform(cfg.target_truth.inverse(), cfg.tau, ss[4])
    w = weighted_ridge(f_s(Xs[:cfg.Ms]), ys[:cfg.Ms], f_t(Xt[:cfg.Mt]), yt[:cfg.Mt],
                       cfg.alpha, cfg.lam)
    pred = np.where(f_t(Xte) @ w >= 0, 1.0, -1.0)
    return float(np.mean(pred != yte))


def error_curve(base: ShallowConfig, axis: str, grid, trials: int, seed: int = 0):
    """Mean and std of run_shallow over trials for each grid value of Mt or tau."""
    if axis not in ("Mt", "tau", "Ms", "alpha"):
        raise ConfigurationError(f"unsupported axis {axis!r}")
    rows = []
    for gi, g in enumerate(grid):
        errs = []
        for trial in range(trials):
            record = dict(base.__dict__)
            record[axis] = type(getattr(base, axis))(g) if axis != "alpha" else float(g)
            record["seed"] = int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])
            errs.append(run_shallow(ShallowConfig(**record)))
        rows.append((g, float(np.mean(errs)), float(np.std(errs)), errs))
    return rows
