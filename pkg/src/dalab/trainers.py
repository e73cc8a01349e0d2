"""Training of MMD-aligned and adversarially aligned networks.

Both objectives return a value, its parts and gradients listed in the same
order as ``model.tensors()``, so one projected momentum-SGD loop drives either
model. Parameters are updated in place, which keeps shared output layers of
uncoupled networks shared.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import DomainDataset
from .errors import ConfigurationError, DimensionError, TrainingDivergedError
from .kernels import KernelSpec, median_bandwidth, mmd2_grad, mmd2_total
from .losses import DEFAULT_DELTA, cross_entropy, cross_entropy_grad, domain_log_loss
from .nn import NetworkParams, NetworkSpec, backward, forward, init_params

TRACE_COLUMNS = ("epoch", "hLs", "hLt", "hLw", "alignment", "target_acc")


@dataclass
class TrainConfig:
    alpha: float = 0.5
    beta: float = 1.0
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    couple_domains: bool = True
    delta: float = DEFAULT_DELTA
    bandwidth: float | None = None   # None: median heuristic on the first batch

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")
        if self.beta < 0:
            raise ConfigurationError("beta must be nonnegative")
        if self.batch_size < 2:
            raise ConfigurationError("batch_size must be at least 2")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be nonnegative")


@dataclass
class DomainBatch:
    xs_lab: np.ndarray
    ys: np.ndarray
    xs_unl: np.ndarray
    xt_lab: np.ndarray
    yt: np.ndarray
    xt_unl: np.ndarray

    @property
    def xs(self):
        return np.vstack([self.xs_lab, self.xs_unl])

    @property
    def xt(self):
        return np.vstack([self.xt_lab, self.xt_unl])


def full_batch(ds: DomainDataset) -> DomainBatch:
    return DomainBatch(ds.xs[:ds.Ms], ds.ys[:ds.Ms], ds.xs[ds.Ms:],
                       ds.xt[:ds.Mt], ds.yt[:ds.Mt], ds.xt[ds.Mt:])


@dataclass
class ObjectiveResult:
    value: float
    hLs: float
    hLt: float
    hLw: float
    alignment: float
    grads: list
    extra: dict = field(default_factory=dict)


# -- models --------------------------------------------------------------------

@dataclass
class MmdModel:
    """Network whose hidden features are aligned by MMD; target params None means coupled."""

    spec: NetworkSpec
    source: NetworkParams
    target: NetworkParams | None = None
    kernel: KernelSpec | None = None

    @classmethod
    def create(cls, widths, seed=0, hidden="relu", weight_bound=1.0, input_bound=1.0,
               coupled=True, kernel=None) -> "MmdModel":
        L = len(widths) - 1
        spec = NetworkSpec(widths, (hidden,) * (L - 1) + ("softmax",), weight_bound, input_bound)
        source = init_params(spec, seed)
        target = None
        if not coupled:
            target = init_params(spec, np.random.SeedSequence(seed).spawn(1)[0])
            target.layers[-1] = source.layers[-1]   # shared classifier
        return cls(spec, source, target, kernel)

    @property
    def coupled(self) -> bool:
        return self.target is None

    def params_for(self, domain: str) -> NetworkParams:
        return self.source if domain == "source" or self.coupled else self.target

    def tensors(self) -> list:
        out = [a for W, b in self.source.layers for a in (W, b)]
        if not self.coupled:
            out += [a for W, b in self.target.layers[:-1] for a in (W, b)]
        return out

    def bounds(self) -> list:
        return [self.spec.weight_bound] * len(self.tensors())

    def predict_proba(self, X, domain="target"):
        return forward(self.spec, self.params_for(domain), X).output


@dataclass
class AdversarialModel:
    """Feature extractor, one-layer label predictor and sigmoid discriminator."""

    extractor_spec: NetworkSpec
    extractor: NetworkParams
    predictor_spec: NetworkSpec
    predictor: NetworkParams
    disc_spec: NetworkSpec
    discriminator: NetworkParams
    target_extractor: NetworkParams | None = None
    disc_bound: float = 1.0

    def __post_init__(self):
        if self.disc_spec.widths[-1] != 1 or self.disc_spec.activations[-1] != "sigmoid":
            raise ConfigurationError("discriminator must end in one sigmoid unit")
        feat = self.extractor_spec.widths[-1]
        if self.predictor_spec.widths[0] != feat or self.disc_spec.widths[0] != feat:
            raise DimensionError("predictor and discriminator must read extractor features")

    @classmethod
    def create(cls, widths, disc_hidden=(8,), seed=0, hidden="relu", weight_bound=1.0,
               input_bound=1.0, coupled=True) -> "AdversarialModel":
        """widths d_0..d_L: the extractor covers layers 1..L-1, the predictor layer L."""
        widths = tuple(widths)
        if len(widths) < 3:
            raise ConfigurationError("adversarial model needs depth L >= 2")
        ss = np.random.SeedSequence(seed).spawn(4)
        ext = NetworkSpec(widths[:-1], (hidden,) * (len(widths) - 2), weight_bound, input_bound)
        pred = NetworkSpec(widths[-2:], ("softmax",), weight_bound, input_bound)
        dw = (widths[-2],) + tuple(disc_hidden) + (1,)
        disc = NetworkSpec(dw, (hidden,) * len(disc_hidden) + ("sigmoid",), weight_bound,
                           input_bound)
        target = None if coupled else init_params(ext, ss[3])
        return cls(ext, init_params(ext, ss[0]), pred, init_params(pred, ss[1]),
                   disc, init_params(disc, ss[2]), target)

    @property
    def coupled(self) -> bool:
        return self.target_extractor is None

    def extractor_for(self, domain: str) -> NetworkParams:
        return self.extractor if domain == "source" or self.coupled else self.target_extractor

    def _groups(self):
        groups = [(self.extractor_spec, self.extractor)]
        if not self.coupled:
            groups.append((self.extractor_spec, self.target_extractor))
        groups += [(self.predictor_spec, self.predictor), (self.disc_spec, self.discriminator)]
        return groups

    def tensors(self) -> list:
        return [a for _, p in self._groups() for W, b in p.layers for a in (W, b)]

    def bounds(self) -> list:
        return [s.weight_bound for s, p in self._groups() for _ in p.layers for _ in (0, 1)]

    def features(self, X, domain="target"):
        return forward(self.extractor_spec, self.extractor_for(domain), X).output

    def predict_proba(self, X, domain="target"):
        return forward(self.predictor_spec, self.predictor, self.features(X, domain)).output

    def discriminate(self, X, domain="target"):
        return forward(self.disc_spec, self.discriminator, self.features(X, domain)).output[:, 0]


def _flat_grads(p: NetworkParams) -> list:
    return [a for W, b in p.layers for a in (W, b)]


def _check_labels(alpha, ms, mt):
    if alpha > 0 and mt == 0:
        raise ConfigurationError("alpha > 0 requires labeled target samples")
    if alpha < 1 and ms == 0:
        raise ConfigurationError("alpha < 1 requires labeled source samples")


def _ce_part(P, Y, weight, delta):
    """Mean cross-entropy over rows and the matching upstream gradient (scaled by weight)."""
    n = len(Y)
    if n == 0:
        return float("nan"), np.zeros_like(P)
    loss = float(np.mean(cross_entropy(P, Y, delta)))
    return loss, (weight / n) * cross_entropy_grad(P, Y, delta)


def _combine(alpha, hLs, hLt):
    value = 0.0
    if alpha < 1:
        value += (1 - alpha) * hLs
    if alpha > 0:
        value += alpha * hLt
    return value


# -- objectives ---------------------------------------------------------------

def freeze_bandwidths(model: MmdModel, batch: DomainBatch, bandwidth=None):
    """Per-layer median-heuristic bandwidths from one pooled batch, kept for the run."""
    if model.kernel is not None:
        return model.kernel
    L = model.spec.depth
    if bandwidth is not None:
        model.kernel = KernelSpec(bandwidth)
        return model.kernel
    fs = forward(model.spec, model.params_for("source"), batch.xs)
    ft = forward(model.spec, model.params_for("target"), batch.xt)
    bws = tuple(median_bandwidth(np.vstack([fs[l], ft[l]])) for l in range(1, L))
    model.kernel = KernelSpec(bws[0] if bws else 1.0, bws or None)
    return model.kernel


def mmd_objective(model: MmdModel, batch: DomainBatch, config: TrainConfig) -> ObjectiveResult:
    """(1-alpha) hLs + alpha hLt + beta * sum of hidden-layer MMD^2, with gradients."""
    alpha, beta, delta = config.alpha, config.beta, config.delta
    ms, mt = len(batch.ys), len(batch.yt)
    _check_labels(alpha, ms, mt)
    kernel = freeze_bandwidths(model, batch, config.bandwidth)
    spec, L = model.spec, model.spec.depth
    Xs, Xt = batch.xs, batch.xt
    ns = len(Xs)
    if ns == 0 or len(Xt) == 0:
        raise DimensionError("each domain needs at least one sample")

    if model.coupled:
        feats = forward(spec, model.source, np.vstack([Xs, Xt]))
        fs = [a[:ns] for a in feats.activations]
        ft = [a[ns:] for a in feats.activations]
    else:
        feats_s = forward(spec, model.source, Xs)
        feats_t = forward(spec, model.target, Xt)
        fs, ft = feats_s.activations, feats_t.activations

    hLs, up_s = _ce_part(fs[L][:ms], batch.ys, 1 - alpha, delta)
    hLt, up_t = _ce_part(ft[L][:mt], batch.yt, alpha, delta)
    hLw = _combine(alpha, hLs, hLt)
    report = mmd2_total(kernel, fs[1:L], ft[1:L])

    grad_s_out = np.zeros_like(fs[L])
    grad_s_out[:ms] = up_s
    grad_t_out = np.zeros_like(ft[L])
    grad_t_out[:mt] = up_t
    extra_s, extra_t = {}, {}
    if beta > 0:
        for l in range(1, L):
            gs, gt = mmd2_grad(kernel.for_layer(l), fs[l], ft[l])
            extra_s[l] = beta * gs
            extra_t[l] = beta * gt

    if model.coupled:
        extra = {l: np.vstack([extra_s[l], extra_t[l]]) for l in extra_s}
        pg, _ = backward(spec, model.source, None, np.vstack([grad_s_out, grad_t_out]),
                         features=feats, feature_grads=extra)
        grads = _flat_grads(pg)
    else:
        pg_s, _ = backward(spec, model.source, None, grad_s_out, feats_s, extra_s)
        pg_t, _ = backward(spec, model.target, None, grad_t_out, feats_t, extra_t)
        shared = (pg_s.layers[-1][0] + pg_t.layers[-1][0], pg_s.layers[-1][1] + pg_t.layers[-1][1])
        pg_s.layers[-1] = shared
        grads = _flat_grads(pg_s) + _flat_grads(NetworkParams(pg_t.layers[:-1]))

    value = hLw + beta * report.total
    return ObjectiveResult(value, hLs, hLt, hLw, report.total, grads, {"mmd": report})


def adversarial_objective(model: AdversarialModel, batch: DomainBatch,
                          config: TrainConfig) -> ObjectiveResult:
    """(1-alpha) hLs + alpha hLt - beta (hLs_dom + hLt_dom) with gradient reversal.

    The discriminator receives the gradient that lowers hLs_dom + hLt_dom; the
    extractor receives the classification gradient minus beta times the
    domain-loss gradient, so descending on it raises the domain losses.
    """
    alpha, beta, delta = config.alpha, config.beta, config.delta
    ms, mt = len(batch.ys), len(batch.yt)
    _check_labels(alpha, ms, mt)
    Xs, Xt = batch.xs, batch.xt
    ns, nt = len(Xs), len(Xt)
    if ns == 0 or nt == 0:
        raise DimensionError("each domain needs at least one sample")
    es, ps, ds = model.extractor_spec, model.predictor_spec, model.disc_spec

    if model.coupled:
        feats = forward(es, model.extractor, np.vstack([Xs, Xt]))
        f_s, f_t = feats.output[:ns], feats.output[ns:]
    else:
        ext_s = forward(es, model.extractor, Xs)
        ext_t = forward(es, model.target_extractor, Xt)
        f_s, f_t = ext_s.output, ext_t.output

    # classification on labeled rows
    pred = forward(ps, model.predictor, np.vstack([f_s[:ms], f_t[:mt]]))
    P = pred.output
    hLs, up_s = _ce_part(P[:ms], batch.ys, 1 - alpha, delta)
    hLt, up_t = _ce_part(P[ms:], batch.yt, alpha, delta)
    hLw = _combine(alpha, hLs, hLt)
    pg_pred, g_in_cls = backward(ps, model.predictor, None, np.vstack([up_s, up_t]), pred)

    # domain losses on all rows
    disc = forward(ds, model.discriminator, np.vstack([f_s, f_t]))
    v = disc.output[:, 0]
    v_s, v_t = v[:ns], v[ns:]
    Ls_dom = float(np.mean(domain_log_loss(v_s, 0, delta)))
    Lt_dom = float(np.mean(domain_log_loss(v_t, 1, delta)))
    up_v = np.concatenate([1.0 / (1.0 - v_s + delta) / ns, -1.0 / (v_t + delta) / nt])
    pg_disc, g_in_dom = backward(ds, model.discriminator, None, up_v[:, None], disc)

    g_fs = -beta * g_in_dom[:ns]
    g_ft = -beta * g_in_dom[ns:]
    g_fs[:ms] += g_in_cls[:ms]
    g_ft[:mt] += g_in_cls[ms:]

    if model.coupled:
        pg_ext, _ = backward(es, model.extractor, None, np.vstack([g_fs, g_ft]), feats)
        grads = _flat_grads(pg_ext)
    else:
        pg_s, _ = backward(es, model.extractor, None, g_fs, ext_s)
        pg_t, _ = backward(es, model.target_extractor, None, g_ft, ext_t)
        grads = _flat_grads(pg_s) + _flat_grads(pg_t)
    grads += _flat_grads(pg_pred) + _flat_grads(pg_disc)

    value = hLw - beta * (Ls_dom + Lt_dom)
    distance = abs(float(v_s.mean() - v_t.mean()))
    return ObjectiveResult(value, hLs, hLt, hLw, distance, grads,
                           {"hLs_dom": Ls_dom, "hLt_dom": Lt_dom,
                            "disc_grads": _flat_grads(pg_disc)})


def objective_for(model):
    return adversarial_objective if isinstance(model, AdversarialModel) else mmd_objective


# -- training ------------------------------------------------------------------

@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([r[name] for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow([r["epoch"]] + [repr(float(r[c])) for c in TRACE_COLUMNS[1:]])
        return buf.getvalue()


class _Cycler:
    """Endless reshuffled pass over an index range."""

    def __init__(self, lo, hi, rng):
        self.idx = np.arange(lo, hi)
        self.rng = rng
        self.order = rng.permutation(self.idx) if len(self.idx) else self.idx
        self.pos = 0

    def take(self, k):
        k = min(k, len(self.idx))
        out = []
        while k > 0:
            if self.pos == len(self.order):
                self.order = self.rng.permutation(self.idx)
                self.pos = 0
            step = min(k, len(self.order) - self.pos)
            out.append(self.order[self.pos:self.pos + step])
            self.pos += step
            k -= step
        return np.concatenate(out) if out else self.idx[:0]


def evaluate(model, X, Y, domain: str = "target") -> float:
    """Fraction of argmax-correct predictions; Y is one-hot or integer labels."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise DimensionError("empty test set")
    Y = np.asarray(Y)
    truth = Y.argmax(axis=1) if Y.ndim == 2 else Y.astype(int)
    pred = np.argmax(model.predict_proba(X, domain), axis=1)   # first maximum wins ties
    return float(np.mean(pred == truth))


def empirical_ddan_distance(model: AdversarialModel, S, T) -> float:
    if len(S) == 0 or len(T) == 0:
        raise DimensionError("discriminator distance needs nonempty samples")
    return abs(float(model.discriminate(S, "source").mean() - model.discriminate(T, "target").mean()))


def train(model, dataset: DomainDataset, config: TrainConfig) -> TrainTrace:
    """Projected momentum SGD; parameters are clipped to their box after every step."""
    if dataset.Ms > dataset.Ns or dataset.Mt > dataset.Nt:
        raise ConfigurationError("labeled counts exceed sample counts")
    _check_labels(config.alpha, dataset.Ms, dataset.Mt)
    objective = objective_for(model)
    rng = np.random.default_rng(config.seed)
    bs = config.batch_size
    cyc = [_Cycler(0, dataset.Ms, rng), _Cycler(dataset.Ms, dataset.Ns, rng),
           _Cycler(0, dataset.Mt, rng), _Cycler(dataset.Mt, dataset.Nt, rng)]
    steps = max(1, -(-max(dataset.Ns, dataset.Nt) // bs))
    tensors = model.tensors()
    limits = model.bounds()
    velocity = [np.zeros_like(t) for t in tensors]
    if dataset.xt_test is not None:
        x_eval, y_eval = dataset.xt_test, dataset.yt_test
    else:
        x_eval, y_eval = dataset.xt, dataset.yt
    trace = TrainTrace()
    for epoch in range(config.epochs):
        sums = np.zeros(4)
        for _ in range(steps):
            i_sl, i_su, i_tl, i_tu = (c.take(bs) for c in cyc)
            batch = DomainBatch(dataset.xs[i_sl], dataset.ys[i_sl], dataset.xs[i_su],
                                dataset.xt[i_tl], dataset.yt[i_tl], dataset.xt[i_tu])
            res = objective(model, batch, config)
            if not np.isfinite(res.value):
                raise TrainingDivergedError(epoch)
            for t, g, v, B in zip(tensors, res.grads, velocity, limits):
                v *= config.momentum
                v -= config.learning_rate * g
                t += v
                np.clip(t, -B, B, out=t)
            sums += np.nan_to_num([res.hLs, res.hLt, res.hLw, res.alignment])
        if not all(np.all(np.isfinite(t)) for t in tensors):
            raise TrainingDivergedError(epoch)
        hLs, hLt, hLw, align = sums / steps
        acc = evaluate(model, x_eval, y_eval, "target") if len(x_eval) else float("nan")
        trace.records.append({"epoch": epoch, "hLs": hLs, "hLt": hLt, "hLw": hLw,
                              "alignment": align, "target_acc": acc})
    return trace
