"""Gaussian kernels, empirical MMD^2 (biased V-statistic) and its gradients."""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import (ConfigurationError, ConsistencyError, DegenerateDistributionError,
                     DimensionError)

NEGATIVE_FLOOR = -1e-9
_CHUNK = 2048


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float = 1.0
    layer_bandwidths: tuple | None = None
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ConfigurationError(f"unsupported kernel family {self.family!r}")
        bws = [self.bandwidth] + list(self.layer_bandwidths or [])
        if not all(np.isfinite(g) and g > 0 for g in bws):
            raise ConfigurationError("kernel bandwidths must be finite and positive")
        if self.layer_bandwidths is not None:
            object.__setattr__(self, "layer_bandwidths",
                               tuple(float(g) for g in self.layer_bandwidths))

    def for_layer(self, l: int) -> "KernelSpec":
        """Kernel used at hidden layer l (1-based)."""
        if self.layer_bandwidths is None:
            return self
        return KernelSpec(self.layer_bandwidths[l - 1])

    @property
    def lipschitz(self) -> float:
        # sup of |d/dr exp(-r^2 / 2g^2)| is exp(-1/2)/g, attained at r = g
        return float(np.exp(-0.5) / self.bandwidth)


@dataclass
class MmdReport:
    per_layer: list
    total: float

    @property
    def layer_count(self) -> int:
        return len(self.per_layer)


def median_bandwidth(X) -> float:
    """Median pairwise distance, falling back to 1 for degenerate samples."""
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 1e-12 else 1.0


def kernel_eval(spec: KernelSpec, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionError(f"kernel arguments differ in shape: {u.shape} vs {v.shape}")
    d2 = float(np.sum((u - v) ** 2))
    return float(np.exp(-d2 / (2.0 * spec.bandwidth ** 2)))


def gram(spec: KernelSpec, A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"feature dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * spec.bandwidth ** 2))


def kernel_sum(spec: KernelSpec, A, B) -> float:
    """Sum of k(a_i, b_j) over all pairs, chunked over rows of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    total = 0.0
    for i in range(0, len(A), _CHUNK):
        total += float(gram(spec, A[i:i + _CHUNK], B).sum())
    return total


def _floor(value: float) -> float:
    if value < 0.0:
        if value < NEGATIVE_FLOOR:
            raise ConsistencyError(f"squared RKHS norm came out negative: {value}")
        return 0.0
    return value


def _check_pair(S, T):
    S = np.atleast_2d(np.asarray(S, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if S.size == 0 or T.size == 0 or len(S) == 0 or len(T) == 0:
        raise DimensionError("MMD needs at least one sample per domain")
    if S.shape[1] != T.shape[1]:
        raise DimensionError(f"feature dimensions differ: {S.shape[1]} vs {T.shape[1]}")
    return S, T


def mmd2_layer(spec: KernelSpec, S, T) -> float:
    S, T = _check_pair(S, T)
    ns, nt = len(S), len(T)
    value = (gram(spec, S, S).sum() / ns ** 2
             - 2.0 * gram(spec, S, T).sum() / (ns * nt)
             + gram(spec, T, T).sum() / nt ** 2)
    return _floor(float(value))


def mmd2_total(spec: KernelSpec, features_s, features_t) -> MmdReport:
    """Sum of per-layer MMD^2 over the given hidden layers (index 0 is layer 1)."""
    if len(features_s) != len(features_t):
        raise DimensionError(
            f"{len(features_s)} source layers vs {len(features_t)} target layers")
    per = [mmd2_layer(spec.for_layer(l), S, T)
           for l, (S, T) in enumerate(zip(features_s, features_t), start=1)]
    return MmdReport(per, float(sum(per)))


def mmd2_grad(spec: KernelSpec, S, T):
    """Gradients of mmd2_layer with respect to every row of S and of T."""
    S, T = _check_pair(S, T)
    ns, nt = len(S), len(T)
    g2 = spec.bandwidth ** 2
    Kss, Kst, Ktt = gram(spec, S, S), gram(spec, S, T), gram(spec, T, T)
    # d k(a, b) / d a = -k(a, b) (a - b) / g^2
    gs = (-(2.0 / (ns * ns * g2)) * (Kss.sum(1)[:, None] * S - Kss @ S)
          + (2.0 / (ns * nt * g2)) * (Kst.sum(1)[:, None] * S - Kst @ T))
    gt = (-(2.0 / (nt * nt * g2)) * (Ktt.sum(1)[:, None] * T - Ktt @ T)
          + (2.0 / (ns * nt * g2)) * (Kst.sum(0)[:, None] * T - Kst.T @ S))
    return gs, gt


def rkhs_variance(spec: KernelSpec, X) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(X)
    if n < 2:
        raise DimensionError("variance needs at least two samples")
    # k(x, x) = 1 for the Gaussian kernel
    value = 1.0 - kernel_sum(spec, X, X) / n ** 2
    return max(value, 0.0)


def mean_embedding_sq_norm(spec: KernelSpec, reference) -> float:
    R = np.atleast_2d(np.asarray(reference, dtype=float))
    return kernel_sum(spec, R, R) / len(R) ** 2


def mean_embedding_at(spec: KernelSpec, X, reference) -> np.ndarray:
    """Reference mean embedding evaluated at each row of X, (1/m) sum_j k(x, r_j)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.atleast_2d(np.asarray(reference, dtype=float))
    return np.concatenate([gram(spec, X[i:i + _CHUNK], R).mean(axis=1)
                           for i in range(0, len(X), _CHUNK)])


def deviations_from_reference(spec: KernelSpec, X, reference, ref_sq_norm=None) -> np.ndarray:
    """RKHS distances ||phi(x_i) - mu_ref|| expanded through kernel sums."""
    if ref_sq_norm is None:
        ref_sq_norm = mean_embedding_sq_norm(spec, reference)
    sq = 1.0 - 2.0 * mean_embedding_at(spec, X, reference) + ref_sq_norm
    return np.sqrt(np.maximum(sq, 0.0))


def estimate_moment_constants(spec: KernelSpec, X, reference, k_max: int = 8):
    """Plug-in estimates of the variance and moment-growth constants (sigma^2, C).

    sigma^2 is the RKHS variance of the reference sample. C is the smallest
    constant making the empirical moments of ||phi(x) - mu|| over X satisfy
    m_k <= (k!/2) sigma^2 C^(k-2) for k = 3..k_max.
    """
    if k_max < 3:
        raise ConfigurationError("k_max must be at least 3")
    sigma2 = rkhs_variance(spec, reference)
    if sigma2 < 1e-12:
        raise DegenerateDistributionError(f"RKHS variance {sigma2:.3g} is degenerate")
    dev = deviations_from_reference(spec, X, reference)
    C = 0.0
    for k in range(3, k_max + 1):
        m_k = float(np.mean(dev ** k))
        C = max(C, (2.0 * m_k / (factorial(k) * sigma2)) ** (1.0 / (k - 2)))
    return sigma2, C


def moment_constant_envelope(sigma2: float, k_max: int = 8, dev_bound: float = 2.0) -> float:
    """Largest C any sample can produce when deviations never exceed dev_bound."""
    return max((2.0 * dev_bound ** k / (factorial(k) * sigma2)) ** (1.0 / (k - 2))
               for k in range(3, k_max + 1))
