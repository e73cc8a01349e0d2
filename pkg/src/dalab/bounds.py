"""Closed-form generalization constants, covering numbers and probability bounds.

Covering numbers are handled as natural logarithms throughout. Probability
lower bounds are evaluated term by term in log space and may come out
negative (vacuous); they are returned as-is and flagged by callers.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from math import exp, inf, log, log1p, sqrt

from .errors import ConfigurationError, PreconditionError
from .losses import DEFAULT_DELTA, loss_constants

BRANCHES = ("operator", "value")
_EXP_MAX = 709.0


@dataclass
class BoundInputs:
    eps: float = 0.1
    alpha: float = 0.5
    widths: tuple = (2, 2, 2)           # d_0 .. d_L of the classification network
    disc_widths: tuple = (1,)           # discriminator output widths, last is 1
    weight_bound: float = 1.0           # B_theta
    input_bound: float = 1.0            # B_x
    act_lipschitz: float = 1.0          # L_eta
    branch: str = "operator"            # which activation bound is assumed
    act_value_bound: float = 1.0        # B_eta
    act_operator_bound: float = 1.0     # B_op
    kernel_lipschitz: float = 1.0       # L_k
    loss_bound: float | None = None     # b_l; derived from (m, delta) when None
    loss_lipschitz: float | None = None
    delta: float = DEFAULT_DELTA
    Ms: float = 1000.0
    Mt: float = 100.0
    Ns: float = 10000.0
    Nt: float = 10000.0
    sigma_s: float = 1.0
    sigma_t: float = 1.0
    C_s: float = 1.0
    C_t: float = 1.0
    relation_constant: float | None = 1.0      # L_L
    relation_constant_adv: float | None = 1.0  # L_L for the discriminator distance
    disc_bound: float = 1.0                    # B_D
    assumed: tuple = ("relation_constant", "relation_constant_adv")

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.disc_widths = tuple(int(w) for w in self.disc_widths)
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ConfigurationError(f"invalid widths {self.widths}")
        if self.branch not in BRANCHES:
            raise ConfigurationError(f"branch must be one of {BRANCHES}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")
        for name in ("weight_bound", "input_bound", "act_lipschitz", "kernel_lipschitz",
                     "disc_bound"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.loss_bound is None or self.loss_lipschitz is None:
            lc = loss_constants(self.widths[-1], self.delta)
            if self.loss_bound is None:
                self.loss_bound = lc.b
            if self.loss_lipschitz is None:
                self.loss_lipschitz = lc.lipschitz
        self.assumed = tuple(self.assumed)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    def replace(self, **changes) -> "BoundInputs":
        record = {f.name: getattr(self, f.name) for f in fields(self)}
        record.update(changes)
        return BoundInputs(**record)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["widths"] = list(self.widths)
        out["disc_widths"] = list(self.disc_widths)
        out["assumed"] = list(self.assumed)
        return out

    @classmethod
    def from_dict(cls, record: dict) -> "BoundInputs":
        known = {f.name for f in fields(cls)}
        unknown = set(record) - known
        if unknown:
            raise ConfigurationError(f"unknown bound inputs: {sorted(unknown)}")
        return cls(**record)


@dataclass
class BoundReport:
    R: list
    Q_layers: list
    Q: float
    log_cov_F: float
    log_cov_HF: float
    log_cov_V: float
    a_s: float
    a_t: float
    theorem2: float
    theorem3: float
    lemma9: float
    theorem5: float
    target_loss_bound: float | None
    recommended_alpha: float
    Ms_required: float
    Ns_required: float
    Nt_required: float
    vacuous: dict = field(default_factory=dict)
    assumed: list = field(default_factory=list)
    estimated: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def flat_row(self) -> dict:
        """Scalar fields only, for a one-line CSV."""
        row = {}
        for k, v in asdict(self).items():
            if isinstance(v, (int, float)) or v is None:
                row[k] = v
            elif k == "vacuous":
                for name, flag in v.items():
                    row[f"vacuous_{name}"] = flag
        return row


def lipschitz_of_activation(kind: str, d: int = 1) -> float:
    if kind in ("relu", "softplus", "identity"):
        return 1.0
    if kind == "sigmoid":
        return 0.25
    if kind == "softmax":
        if d < 1:
            raise ConfigurationError("softmax needs d >= 1")
        return d / 4.0
    raise ConfigurationError(f"unknown activation {kind!r}")


# -- layer constants ---------------------------------------------------------

def _norm_bounds(widths, branch, B_theta, B_x, B_op, B_eta, count):
    """R_0 .. R_{count-1} for the given architecture."""
    c = B_op * B_theta
    R = [float(B_x)]
    for l in range(1, count):
        if branch == "value" and l >= 2:
            R.append(B_eta * sqrt(widths[l]))
        else:
            R.append(c * sqrt(widths[l] * widths[l - 1]) * R[l - 1] + c * sqrt(widths[l]))
    return R


def _q_layers(widths, R, L_eta, B_theta, upto):
    """Q_1 .. Q_upto, written as the explicit sum over earlier layers."""
    def own(i):
        return L_eta * R[i - 1] * sqrt(widths[i] * widths[i - 1]) + L_eta * sqrt(widths[i])

    def gain(k):
        return L_eta * B_theta * sqrt(widths[k] * widths[k - 1])

    Q = []
    for l in range(1, upto + 1):
        total = own(l)
        for i in range(1, l):
            prod = 1.0
            for k in range(i + 1, l + 1):
                prod *= gain(k)
            total += own(i) * prod
        Q.append(total)
    return Q


def feature_norm_bounds(inputs: BoundInputs) -> list:
    """R_0 .. R_{L-1}."""
    return _norm_bounds(inputs.widths, inputs.branch, inputs.weight_bound, inputs.input_bound,
                        inputs.act_operator_bound, inputs.act_value_bound, inputs.depth)


def q_constants(inputs: BoundInputs):
    """Returns ([Q_1..Q_L], Q) with Q the sum over the first L-1 layers."""
    R = feature_norm_bounds(inputs)
    Ql = _q_layers(inputs.widths, R, inputs.act_lipschitz, inputs.weight_bound, inputs.depth)
    return Ql, float(sum(Ql[:-1]))


def _check_eps(eps):
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")


def _log1p_ratio(num: float, log_den: float) -> float:
    """log(1 + num / exp(log_den)) without overflow for tiny or huge ratios."""
    if num <= 0:
        return 0.0
    t = log(num) - log_den
    return t + log1p(exp(-t)) if t > 0 else log1p(exp(t))


def log_covering_F(inputs: BoundInputs, eps: float) -> float:
    _check_eps(eps)
    _, Q = q_constants(inputs)
    w = inputs.widths
    base = _log1p_ratio(4.0 * inputs.weight_bound * inputs.kernel_lipschitz * Q, 2.0 * log(eps))
    return float(sum(w[l] * (w[l - 1] + 1) for l in range(1, inputs.depth)) * base)


def log_covering_HF(inputs: BoundInputs, eps: float) -> float:
    _check_eps(eps)
    Ql, _ = q_constants(inputs)
    w = inputs.widths
    base = _log1p_ratio(2.0 * inputs.weight_bound * Ql[-1], log(eps))
    return float(sum(w[l] * (w[l - 1] + 1) for l in range(1, inputs.depth + 1)) * base)


def cascade_widths(inputs: BoundInputs) -> tuple:
    """Extractor widths d_0..d_{L-1} followed by the discriminator layer widths."""
    if not inputs.disc_widths:
        raise ConfigurationError("discriminator widths are required")
    if inputs.disc_widths[-1] != 1:
        raise ConfigurationError("discriminator must end in a scalar output")
    return inputs.widths[:-1] + inputs.disc_widths


def log_covering_V(inputs: BoundInputs, eps: float) -> float:
    return log_covering_HF(inputs.replace(widths=cascade_widths(inputs)), eps)


# -- concentration -----------------------------------------------------------

def bernstein_exponent(N: float, eps: float, sigma: float, C: float) -> float:
    """Exponent of the fixed-function RKHS mean-embedding tail, exp(-value)."""
    if sigma <= 0:
        return inf
    r = sigma / eps
    if N <= r * r:
        raise PreconditionError(f"need N > sigma^2/eps^2 = {r * r:g}", minimum=r * r)
    x = sqrt(N) * eps / sigma - 1.0
    return x * x / 8.0 / (1.0 + x * C / (2.0 * sqrt(N) * sigma))


def concentration_a(N: float, eps: float, sigma: float, C: float) -> float:
    """Exponent controlling the MMD estimate deviation at accuracy eps."""
    _check_eps(eps)
    if sigma <= 0:
        return inf
    r = sigma / eps
    threshold = 16.0 * r * r
    if N <= threshold:
        raise PreconditionError(f"need N > 16 sigma^2/eps^2 = {threshold:g}", minimum=threshold)
    return bernstein_exponent(N, eps / 4.0, sigma, C)


def hoeffding_tail(M: float, eps: float, b: float) -> float:
    """Two-sided tail for the mean of M variables with range width b."""
    return 2.0 * exp(-2.0 * M * eps ** 2 / b ** 2)


def mean_embedding_tail(N, eps, sigma, C) -> float:
    return exp(-bernstein_exponent(N, eps, sigma, C))


def mmd_deviation_tail(Ns, Nt, eps, sigma_s, C_s, sigma_t, C_t) -> float:
    """Fixed-pair core of the MMD deviation bound (covering factors dropped)."""
    return exp(-concentration_a(Ns, eps, sigma_s, C_s)) + exp(-concentration_a(Nt, eps, sigma_t, C_t))


def discriminator_tail(Ns, Nt, eps, B_D=1.0) -> float:
    """Fixed-function core of the discriminator-distance deviation bound."""
    return 2.0 * exp(-Ns * eps ** 2 / (72 * B_D ** 2)) + 2.0 * exp(-Nt * eps ** 2 / (72 * B_D ** 2))


def _one_minus(log_terms) -> float:
    total = 0.0
    for t in log_terms:
        if t > _EXP_MAX:
            return -inf
        total += exp(t)
    return 1.0 - total


def _sq_exponent(M, eps, scale):
    """-M (eps/scale)^2, with M = 0 giving 0 and a vanishing scale giving -inf."""
    if M == 0:
        return 0.0
    if scale == 0:
        return -inf
    r = eps / scale
    return -M * r * r


def _labeled_log_terms(inputs: BoundInputs):
    eps, a = inputs.eps, inputs.alpha
    b, Ll = inputs.loss_bound, inputs.loss_lipschitz
    terms = []
    for weight, M in ((a, inputs.Mt), (1 - a, inputs.Ms)):
        if weight > 0:
            terms.append(log(2.0) + log_covering_HF(inputs, eps / (8 * weight * Ll))
                         + _sq_exponent(M, eps, sqrt(8.0) * weight * b))
    return terms


def _unlabeled_log_terms(inputs: BoundInputs):
    eps = inputs.eps
    a_s = concentration_a(inputs.Ns, eps, inputs.sigma_s, inputs.C_s)
    a_t = concentration_a(inputs.Nt, eps, inputs.sigma_t, inputs.C_t)
    logF = log_covering_F(inputs, eps / 8)
    return [logF - a_s, logF - a_t]


def _discriminator_log_terms(inputs: BoundInputs):
    eps, B = inputs.eps, inputs.disc_bound
    logV = log_covering_V(inputs, eps / 6)
    return [log(2.0) + logV - inputs.Ns * eps ** 2 / (72 * B ** 2),
            log(2.0) + logV - inputs.Nt * eps ** 2 / (72 * B ** 2)]


def theorem2_probability(inputs: BoundInputs) -> float:
    """Lower bound on the probability that the weighted empirical loss is eps-accurate."""
    _check_eps(inputs.eps)
    return _one_minus(_labeled_log_terms(inputs))


def theorem3_probability(inputs: BoundInputs) -> float:
    """Adds the unlabeled-sample MMD deviation terms to theorem2_probability."""
    _check_eps(inputs.eps)
    return _one_minus(_labeled_log_terms(inputs) + _unlabeled_log_terms(inputs))


def lemma9_probability(inputs: BoundInputs) -> float:
    _check_eps(inputs.eps)
    return _one_minus(_discriminator_log_terms(inputs))


def theorem5_probability(inputs: BoundInputs) -> float:
    """Adversarial analogue: labeled-loss terms plus discriminator-distance terms."""
    _check_eps(inputs.eps)
    return _one_minus(_labeled_log_terms(inputs) + _discriminator_log_terms(inputs))


@dataclass
class TargetLossBound:
    value: float
    probability: float
    vacuous: bool
    assumed: list


def target_loss_upper_bound(hLw: float, distance: float, inputs: BoundInputs,
                            variant: str = "mmd") -> TargetLossBound:
    """hLw + (1-alpha) L (distance + eps) + eps, with its companion probability."""
    if variant == "mmd":
        relation, prob_fn, name = inputs.relation_constant, theorem3_probability, "relation_constant"
    elif variant == "adversarial":
        relation, prob_fn, name = (inputs.relation_constant_adv, theorem5_probability,
                                   "relation_constant_adv")
    else:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if relation is None:
        raise ConfigurationError(f"{name} must be supplied for the target-loss bound")
    a, eps = inputs.alpha, inputs.eps
    value = hLw + (1 - a) * relation * distance + (1 - a) * relation * eps + eps
    try:
        prob = prob_fn(inputs)
    except PreconditionError:
        prob = -inf
    return TargetLossBound(value, prob, prob <= 0, [n for n in inputs.assumed if n == name])


# -- rates ---------------------------------------------------------------------

def _rate_numerator(eps, d, L):
    if d < 2:
        raise ConfigurationError("width d must be at least 2")
    value = d ** 2 * L * log(L / eps) + d ** 2 * L ** 2 * log(d)
    if not value > 0:
        raise ConfigurationError(f"rate numerator is nonpositive ({value:g})")
    return value


def recommended_alpha(Mt: float, eps: float, d: int, L: int, c_scale: float = 1.0) -> float:
    _check_eps(eps)
    return min(1.0, c_scale * sqrt(Mt * eps ** 2 / _rate_numerator(eps, d, L)))


def sample_complexity(eps: float, d: int, L: int, K: int = 0, variant: str = "mmd",
                      c_scale: float = 1.0):
    """(Ms, Ns, Nt) up to the unit constant c_scale."""
    _check_eps(eps)
    Ms = c_scale * _rate_numerator(eps, d, L) / eps ** 2
    if variant == "mmd":
        return Ms, Ms, Ms
    if variant == "adversarial":
        N = c_scale * _rate_numerator(eps, d, L + K) / eps ** 2
        return Ms, N, N
    raise ConfigurationError(f"unknown variant {variant!r}")


def bound_report(inputs: BoundInputs, hLw: float | None = None, distance: float = 0.0,
                 variant: str = "mmd", c_scale: float = 1.0) -> BoundReport:
    R = feature_norm_bounds(inputs)
    Ql, Q = q_constants(inputs)
    eps = inputs.eps
    try:
        a_s = concentration_a(inputs.Ns, eps, inputs.sigma_s, inputs.C_s)
        a_t = concentration_a(inputs.Nt, eps, inputs.sigma_t, inputs.C_t)
        th3 = theorem3_probability(inputs)
    except PreconditionError:
        a_s = a_t = th3 = -inf
    th2 = theorem2_probability(inputs)
    l9 = lemma9_probability(inputs)
    th5 = theorem5_probability(inputs)
    d = max(2, max(inputs.widths))
    L = inputs.depth
    K = len(inputs.disc_widths)
    Ms, Ns, Nt = sample_complexity(eps, d, L, K, variant, c_scale)
    target = None
    if hLw is not None:
        target = target_loss_upper_bound(hLw, distance, inputs, variant).value
    return BoundReport(
        R=R, Q_layers=Ql, Q=Q,
        log_cov_F=log_covering_F(inputs, eps),
        log_cov_HF=log_covering_HF(inputs, eps),
        log_cov_V=log_covering_V(inputs, eps),
        a_s=a_s, a_t=a_t, theorem2=th2, theorem3=th3, lemma9=l9, theorem5=th5,
        target_loss_bound=target,
        recommended_alpha=recommended_alpha(inputs.Mt, eps, d, L, c_scale),
        Ms_required=Ms, Ns_required=Ns, Nt_required=Nt,
        vacuous={"theorem2": th2 <= 0, "theorem3": th3 <= 0, "lemma9": l9 <= 0,
                 "theorem5": th5 <= 0},
        assumed=list(inputs.assumed),
        estimated=[],
    )
