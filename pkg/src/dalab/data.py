"""Source/target datasets: synthetic shift generators, CSV loading, standardization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

KINDS = ("gaussians", "moons", "affine")


@dataclass
class DomainDataset:
    xs: np.ndarray          # Ns x d_0, the first Ms rows are labeled
    ys: np.ndarray          # Ns x m one-hot
    xt: np.ndarray
    yt: np.ndarray
    Ms: int
    Mt: int
    xs_test: np.ndarray | None = None
    ys_test: np.ndarray | None = None
    xt_test: np.ndarray | None = None
    yt_test: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.xs.shape[0] != self.ys.shape[0] or self.xt.shape[0] != self.yt.shape[0]:
            raise DimensionError("feature and label row counts differ")
        if self.xs.shape[1] != self.xt.shape[1]:
            raise DimensionError("source and target feature dimensions differ")
        if not (0 <= self.Ms <= self.Ns and 0 <= self.Mt <= self.Nt):
            raise ConfigurationError(
                f"labeled counts (Ms={self.Ms}, Mt={self.Mt}) exceed totals "
                f"(Ns={self.Ns}, Nt={self.Nt})")

    @property
    def Ns(self) -> int:
        return self.xs.shape[0]

    @property
    def Nt(self) -> int:
        return self.xt.shape[0]

    @property
    def m(self) -> int:
        return self.ys.shape[1]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def with_counts(self, Ms=None, Mt=None, Ns=None, Nt=None) -> "DomainDataset":
        """Truncate to smaller totals or change labeled prefixes."""
        Ns = self.Ns if Ns is None else Ns
        Nt = self.Nt if Nt is None else Nt
        Ms = min(self.Ms if Ms is None else Ms, Ns)
        Mt = min(self.Mt if Mt is None else Mt, Nt)
        return DomainDataset(self.xs[:Ns], self.ys[:Ns], self.xt[:Nt], self.yt[:Nt], Ms, Mt,
                             self.xs_test, self.ys_test, self.xt_test, self.yt_test,
                             dict(self.meta))


@dataclass
class Shift:
    rotation_deg: float = 0.0
    scale: float = 1.0
    translation: tuple = (0.0, 0.0)
    matrix: tuple | None = None     # explicit 2x2 linear part, used by kind="affine"
    warp: float = 0.0               # x_2 += warp * sin(x_1), applied after the affine part

    def linear(self, kind: str) -> np.ndarray:
        if kind == "affine":
            if self.matrix is None:
                raise ConfigurationError("affine shift needs a 2x2 matrix")
            A = np.asarray(self.matrix, dtype=float)
            if A.shape != (2, 2) or abs(np.linalg.det(A)) < 1e-9:
                raise ConfigurationError("affine matrix must be an invertible 2x2")
            return A
        if not self.scale > 0:
            raise ConfigurationError("scale must be positive")
        th = np.deg2rad(self.rotation_deg)
        return self.scale * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])

    def apply(self, X: np.ndarray, kind: str) -> np.ndarray:
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (2,):
            raise ConfigurationError("translation must be a 2-vector")
        out = X.copy()
        out[:, :2] = X[:, :2] @ self.linear(kind).T + t
        if self.warp:
            out[:, 1] += self.warp * np.sin(out[:, 0])
        return out


@dataclass
class Counts:
    Ns: int = 200
    Nt: int = 200
    Ms: int = 50
    Mt: int = 10
    n_test: int = 500


def _class_means(m, dim, radius):
    ang = 2 * np.pi * np.arange(m) / m
    means = np.zeros((m, dim))
    means[:, 0] = radius * np.cos(ang)
    means[:, 1] = radius * np.sin(ang)
    return means


def _draw_base(rng, kind, n, m, dim, radius, noise):
    labels = rng.integers(0, m, size=n)
    if kind == "moons":
        t = rng.uniform(0, np.pi, size=n)
        X = np.zeros((n, dim))
        upper = labels == 0
        X[:, 0] = np.where(upper, np.cos(t), 1 - np.cos(t))
        X[:, 1] = np.where(upper, np.sin(t), 0.5 - np.sin(t))
        X += noise * rng.standard_normal((n, dim))
    else:
        X = _class_means(m, dim, radius)[labels] + noise * rng.standard_normal((n, dim))
    return X, np.eye(m)[labels]


def gen_shifted_domains(kind: str = "gaussians", shift: Shift | None = None,
                        counts: Counts | None = None, seed: int = 0, m: int = 3,
                        dim: int = 2, radius: float = 2.0, noise: float = 1.0) -> DomainDataset:
    """Target samples are draws from the source law pushed through the shift."""
    if kind not in KINDS:
        raise ConfigurationError(f"kind must be one of {KINDS}")
    if dim < 2:
        raise ConfigurationError("need at least two input dimensions")
    shift = shift or Shift()
    counts = counts or Counts()
    if kind == "moons":
        m = 2
    rng = np.random.default_rng(seed)
    xs, ys = _draw_base(rng, kind, counts.Ns, m, dim, radius, noise)
    xt, yt = _draw_base(rng, kind, counts.Nt, m, dim, radius, noise)
    xs_test, ys_test = _draw_base(rng, kind, counts.n_test, m, dim, radius, noise)
    xt_test, yt_test = _draw_base(rng, kind, counts.n_test, m, dim, radius, noise)
    xt = shift.apply(xt, kind)
    xt_test = shift.apply(xt_test, kind)
    meta = {"kind": kind, "seed": seed}
    if kind != "moons":
        means = _class_means(m, dim, radius)
        meta["source_means"] = means
        meta["target_means"] = shift.apply(means, kind) if not shift.warp else None
    return DomainDataset(xs, ys, xt, yt, min(counts.Ms, counts.Ns), min(counts.Mt, counts.Nt),
                         xs_test, ys_test, xt_test, yt_test, meta)


def load_csv_domain(path, m: int):
    """Rows of features followed by m one-hot label columns."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] <= m:
        raise DimensionError(f"{path}: need more than {m} columns")
    return data[:, :-m], data[:, -m:]


def load_csv_dataset(source_path, target_path, m: int, Ms: int, Mt: int,
                     test_fraction: float = 0.25, seed: int = 0) -> DomainDataset:
    rng = np.random.default_rng(seed)
    splits = []
    for path in (source_path, target_path):
        X, Y = load_csv_domain(path, m)
        order = rng.permutation(len(X))
        n_test = int(round(test_fraction * len(X)))
        test, train = order[:n_test], order[n_test:]
        splits.append((X[train], Y[train], X[test], Y[test]))
    (xs, ys, xs_te, ys_te), (xt, yt, xt_te, yt_te) = splits
    return DomainDataset(xs, ys, xt, yt, min(Ms, len(xs)), min(Mt, len(xt)),
                         xs_te, ys_te, xt_te, yt_te, {"kind": "csv"})


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 1e-12, sd, 1.0))

    def transform(self, X):
        return None if X is None else (np.asarray(X, dtype=float) - self.mean) / self.scale


def standardize(ds: DomainDataset) -> DomainDataset:
    """Per-coordinate standardization fit on the source training split only."""
    st = Standardizer.fit(ds.xs)
    return DomainDataset(st.transform(ds.xs), ds.ys, st.transform(ds.xt), ds.yt, ds.Ms, ds.Mt,
                         st.transform(ds.xs_test), ds.ys_test, st.transform(ds.xt_test),
                         ds.yt_test, dict(ds.meta))
