"""Acceptance criteria 1-11, one pass/fail line each (shown in the terminal summary)."""
import functools
import json
import math
import time

import numpy as np
import pytest

from dalab import bounds as B
from dalab.bounds import BoundInputs
from dalab.cli import main
from dalab.concentration import McConfig, VERIFIERS
from dalab.experiments import ExperimentConfig, alpha_opt_curve, fit_rate, sweep
from dalab.kernels import KernelSpec, mmd2_grad, mmd2_layer
from dalab.losses import (cross_entropy, cross_entropy_grad, domain_log_loss,
                          domain_log_loss_grad)
from dalab.nn import NetworkSpec, backward, forward, init_params
from dalab.shallow import ShallowConfig, error_curve
from dalab.trainers import (AdversarialModel, DomainBatch, MmdModel, TrainConfig,
                            adversarial_objective, mmd_objective)
from conftest import ACCEPTANCE, central_diff, rel_err


def criterion(n, name):
    """Records a PASS/FAIL line for criterion n; the test body returns a detail string."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                ACCEPTANCE[n] = f"criterion {n:2d} FAIL  {name}: {type(exc).__name__}: {exc}"
                print(ACCEPTANCE[n])
                raise
            ACCEPTANCE[n] = (f"criterion {n:2d} PASS  {name}: {detail} "
                             f"[{time.perf_counter() - t0:.1f}s]")
            print(ACCEPTANCE[n])
        return wrapper
    return deco


# 1 -------------------------------------------------------------------------------

def naive_mmd2(gamma, S, T):
    k = lambda u, v: math.exp(-sum((a - b) ** 2 for a, b in zip(u, v)) / (2 * gamma ** 2))
    m, n = len(S), len(T)
    total = 0.0
    for i in range(m):
        for j in range(m):
            total += k(S[i], S[j]) / m ** 2
    for i in range(m):
        for j in range(n):
            total -= 2 * k(S[i], T[j]) / (m * n)
    for i in range(n):
        for j in range(n):
            total += k(T[i], T[j]) / n ** 2
    return total


@criterion(1, "mmd2_layer matches the quadruple-loop oracle")
def test_c01_mmd_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        m, n, d = rng.integers(1, 51), rng.integers(1, 51), rng.integers(1, 6)
        S = rng.normal(size=(m, d))
        T = rng.normal(loc=rng.uniform(-1, 1), size=(n, d))
        gamma = float(rng.uniform(0.3, 3.0))
        worst = max(worst, abs(mmd2_layer(KernelSpec(gamma), S, T) - naive_mmd2(gamma, S, T)))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-10
    assert elapsed < 5.0
    return f"max abs diff {worst:.1e}, {elapsed:.2f}s"


# 2 -------------------------------------------------------------------------------

def _fd_tensors(tensors, fn):
    out = []
    for t in tensors:
        def f(x, t=t):
            saved = t.copy()
            t[...] = x
            v = fn()
            t[...] = saved
            return v
        out.append(central_diff(f, t.copy()))
    return np.concatenate([g.ravel() for g in out])


def _flat(arrs):
    return np.concatenate([a.ravel() for a in arrs])


def _batch(rng, d, m):
    return DomainBatch(rng.normal(size=(5, d)), np.eye(m)[rng.integers(0, m, 5)],
                       rng.normal(size=(6, d)), rng.normal(0.5, size=(4, d)),
                       np.eye(m)[rng.integers(0, m, 4)], rng.normal(0.5, size=(6, d)))


def _gradient_errors(seed):
    rng = np.random.default_rng(seed)
    errs = {}
    L = int(rng.integers(1, 5))
    widths = tuple(int(w) for w in rng.integers(1, 9, size=L + 1))
    acts = tuple(rng.choice(["relu", "sigmoid", "softplus", "identity"], size=L - 1)) + (
        str(rng.choice(["softmax", "sigmoid", "identity"])),)
    spec = NetworkSpec(widths, acts, weight_bound=2.0)
    p = init_params(spec, seed)
    X = rng.normal(size=(4, widths[0]))
    c = rng.normal(size=(4, widths[-1]))
    g, _ = backward(spec, p, X, c)
    fd = central_diff(lambda fl: float(np.sum(c * forward(spec, p.with_flat(fl), X).output)),
                      p.flat())
    errs["backprop"] = rel_err(g.flat(), fd)

    d = int(rng.integers(1, 9))
    S, T = rng.normal(size=(6, d)), rng.normal(0.4, size=(5, d))
    k = KernelSpec(float(rng.uniform(0.5, 2)))
    gs, gt = mmd2_grad(k, S, T)
    errs["mmd"] = max(rel_err(gs, central_diff(lambda A: mmd2_layer(k, A, T), S)),
                      rel_err(gt, central_diff(lambda Bm: mmd2_layer(k, S, Bm), T)))

    q = rng.uniform(0.05, 1, size=5)
    y = rng.uniform(size=5)
    v = rng.uniform(0.05, 0.95, size=5)
    errs["losses"] = max(
        rel_err(cross_entropy_grad(q, y, 1e-3), central_diff(lambda u: cross_entropy(u, y, 1e-3), q)),
        rel_err(domain_log_loss_grad(v, 1, 1e-4),
                central_diff(lambda u: float(np.sum(domain_log_loss(u, 1, 1e-4))), v)))

    depth = int(rng.integers(2, 5))
    w = tuple(int(x) for x in rng.integers(2, 9, size=depth)) + (3,)
    batch = _batch(rng, w[0], 3)
    cfg = TrainConfig(alpha=float(rng.uniform(0.1, 0.9)), beta=float(rng.uniform(0.2, 2)))
    mm = MmdModel.create(w, seed=seed, hidden="softplus", weight_bound=2.0, coupled=bool(seed % 2))
    res = mmd_objective(mm, batch, cfg)
    fd = _fd_tensors(mm.tensors(), lambda: mmd_objective(mm, batch, cfg).value)
    errs["mmd_objective"] = rel_err(_flat(res.grads), fd)

    adv = AdversarialModel.create(w, disc_hidden=(int(rng.integers(2, 9)),), seed=seed,
                                  hidden="softplus", weight_bound=2.0, coupled=bool(seed % 2))
    res = adversarial_objective(adv, batch, cfg)
    n_ext = 2 * adv.extractor_spec.depth * (1 if adv.coupled else 2)
    n_pred = 2 * adv.predictor_spec.depth
    groups = adv._groups()
    ext = [a for _, prm in groups[:-2] for W, b in prm.layers for a in (W, b)]
    pred = [a for W, b in adv.predictor.layers for a in (W, b)]
    disc = [a for W, b in adv.discriminator.layers for a in (W, b)]
    value = lambda: adversarial_objective(adv, batch, cfg).value
    dom = lambda: (lambda r: r.extra["hLs_dom"] + r.extra["hLt_dom"])(
        adversarial_objective(adv, batch, cfg))
    errs["adversarial"] = max(
        rel_err(_flat(res.grads[:n_ext]), _fd_tensors(ext, value)),
        rel_err(_flat(res.grads[n_ext:n_ext + n_pred]), _fd_tensors(pred, value)),
        rel_err(_flat(res.grads[n_ext + n_pred:]), _fd_tensors(disc, dom)))
    # reversal: the extractor gradient at beta minus at 0 is -beta times the domain-loss gradient
    zero = adversarial_objective(adv, batch, TrainConfig(alpha=cfg.alpha, beta=0.0))
    g_dom = _fd_tensors(ext, dom)
    errs["reversal"] = rel_err(_flat(res.grads[:n_ext]) - _flat(zero.grads[:n_ext]),
                               -cfg.beta * g_dom)
    return errs


@criterion(2, "analytic gradients match central differences")
def test_c02_gradients():
    t0 = time.perf_counter()
    worst = {}
    for seed in range(20):
        for k, e in _gradient_errors(seed).items():
            worst[k] = max(worst.get(k, 0.0), e)
    elapsed = time.perf_counter() - t0
    assert max(worst.values()) <= 1e-4, worst
    assert elapsed < 60.0
    return ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s"


# 3 -------------------------------------------------------------------------------

SPOT = [
    ("Q_1", lambda: B.q_constants(BoundInputs(widths=(2, 2, 2)))[0][0], 2 + math.sqrt(2)),
    ("Q_2", lambda: B.q_constants(BoundInputs(widths=(2, 2, 2)))[0][1], 15.0710678),
    ("log N(F, 1)", lambda: B.log_covering_F(BoundInputs(widths=(2, 2, 2)), 1.0), 16.1094486),
    ("log N(HF, .5)", lambda: B.log_covering_HF(BoundInputs(widths=(2, 2, 2)), 0.5), 49.3862787),
    ("log N(V, .5)", lambda: B.log_covering_V(BoundInputs(widths=(2, 2, 2), disc_widths=(2, 1)),
                                              0.5), 73.7868161),
    ("a(100, 1, 1, 1)", lambda: B.concentration_a(100, 1, 1, 1), 0.261627907),
    ("theorem2", lambda: B.theorem2_probability(BoundInputs(
        eps=0.5, alpha=0.3, widths=(2, 2, 2), delta=1e-3, Ms=5e5, Mt=9e4)), 0.999921977),
    ("theorem3", lambda: B.theorem3_probability(BoundInputs(
        eps=0.5, alpha=0.3, widths=(2, 2, 2), delta=1e-3, Ms=5e5, Mt=9e4, Ns=3e4, Nt=3e4,
        sigma_s=1, sigma_t=1, C_s=1, C_t=1)), 0.480865897),
    ("lemma9", lambda: B.lemma9_probability(BoundInputs(
        eps=0.5, widths=(2, 2, 2), disc_widths=(2, 1), Ns=3e4, Nt=3e4)), 0.890163526),
]


@criterion(3, "bound formulas reproduce hand-evaluated spot values (6 s.f.)")
def test_c03_bound_spot_values():
    bad = []
    for name, fn, want in SPOT:
        got = fn()
        if f"{got:.6g}" != f"{want:.6g}" and abs(got - want) > 5e-7 * abs(want):
            bad.append(f"{name}: {got!r} vs {want!r}")
    assert not bad, bad
    return f"{len(SPOT)} values"


# 4 -------------------------------------------------------------------------------

@criterion(4, "monotonicity suite")
def test_c04_monotonicity():
    violations = []
    eps_grid = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0]
    checks = 0

    def need(ok, what):
        nonlocal checks
        checks += 1
        if not ok:
            violations.append(what)

    for fn in (B.log_covering_F, B.log_covering_HF):
        for widths in [(2, 4, 2), (3, 4, 4, 2), (8, 8, 8, 8, 3)]:
            vals = [fn(BoundInputs(widths=widths), e) for e in eps_grid]
            need(all(b <= a for a, b in zip(vals, vals[1:])), f"{fn.__name__} eps {widths}")
            for e in (0.1, 1.0):
                bt = [fn(BoundInputs(widths=widths, weight_bound=w), e) for w in (0.5, 1, 2, 4)]
                need(all(b >= a for a, b in zip(bt, bt[1:])), f"{fn.__name__} B_theta")
                lk = [fn(BoundInputs(widths=widths, kernel_lipschitz=k), e) for k in (0.5, 1, 2)]
                need(all(b >= a for a, b in zip(lk, lk[1:])), f"{fn.__name__} L_k")
        for e in (0.1, 1.0):
            for L in (1, 2, 3, 4):
                ds = [fn(BoundInputs(widths=(d,) * (L + 1)), e) for d in (2, 4, 8, 16)]
                need(all(b >= a for a, b in zip(ds, ds[1:])), f"{fn.__name__} d at L={L}")
            for d in (2, 4, 8, 16):
                Ls = [fn(BoundInputs(widths=(d,) * (L + 1)), e) for L in (1, 2, 3, 4, 5)]
                need(all(b >= a for a, b in zip(Ls, Ls[1:])), f"{fn.__name__} L at d={d}")
            for l in range(1, 3):
                base = [3, 4, 4, 2]
                wider = list(base)
                wider[l] *= 2
                need(fn(BoundInputs(widths=tuple(wider)), e) >= fn(BoundInputs(widths=tuple(base)), e),
                     f"{fn.__name__} width {l}")
    rng = np.random.default_rng(0)
    for _ in range(500):
        N = 10 ** rng.uniform(3, 9)
        eps, sigma = rng.uniform(0.05, 1), rng.uniform(0.1, 2)
        if N <= 16 * sigma ** 2 / eps ** 2:
            continue
        inp = BoundInputs(eps=eps, alpha=rng.uniform(0, 1), Ms=10 ** rng.uniform(2, 8),
                          Mt=10 ** rng.uniform(2, 8), Ns=N, Nt=N, sigma_s=sigma, sigma_t=sigma,
                          widths=(3, 4, 2))
        need(B.theorem3_probability(inp) <= B.theorem2_probability(inp), "theorem3 <= theorem2")
    assert not violations, violations[:5]
    return f"{checks} checks, 0 violations"


# 5 -------------------------------------------------------------------------------

@criterion(5, "log N(H o F) follows the d^2 L log(L/eps) + d^2 L^2 log d rate")
def test_c05_covering_growth_rate():
    eps = 0.1
    rows, ys = [], []
    for d in (4, 8, 16):
        for L in (2, 3, 4):
            rows.append([d * d * L * math.log(L / eps), d * d * L * L * math.log(d)])
            ys.append(B.log_covering_HF(BoundInputs(widths=(d,) * (L + 1)), eps))
    X, y = np.array(rows), np.array(ys)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r2 = 1 - np.sum((y - X @ coef) ** 2) / np.sum((y - y.mean()) ** 2)
    assert r2 >= 0.99
    return f"a={coef[0]:.3g} b={coef[1]:.3g} R2={r2:.4f}"


# 6 -------------------------------------------------------------------------------

C6_GRIDS = {
    "loss_hoeffding": dict(sizes=(50, 100, 200), eps_grid=(0.1, 0.2)),
    "mean_embedding": dict(sizes=(25, 50, 100), eps_grid=(0.3, 0.5)),
    "mmd_deviation": dict(sizes=(100, 400, 800), eps_grid=(0.4, 0.8)),
    "ddan_deviation": dict(sizes=(400, 1600, 6400), eps_grid=(0.3, 0.5)),
}


@pytest.mark.slow
@criterion(6, "Monte Carlo violation frequency within bound + 3 sigma")
def test_c06_concentration():
    t0 = time.perf_counter()
    failures, cells = [], 0
    for name, grid in C6_GRIDS.items():
        rep = VERIFIERS[name](McConfig(trials=2000, seed=0, **grid))
        live = [r for r in rep.rows if not r.vacuous]
        assert live, f"{name}: every cell vacuous"
        cells += len(live)
        failures += [f"{name} N={r.N} eps={r.eps}" for r in rep.failures()]
    elapsed = time.perf_counter() - t0
    assert not failures, failures
    assert elapsed < 600
    return f"{cells} nonvacuous cells, 0 failures"


# 7, 8 ----------------------------------------------------------------------------

SHALLOW = ShallowConfig(Ms=20, alpha=0.5, tau=0.3)


@criterion(7, "shallow target error vs Mt fits c1 + c2/sqrt(Mt)")
def test_c07_shallow_mt():
    t0 = time.perf_counter()
    rows = error_curve(SHALLOW, "Mt", [2, 4, 8, 16, 32, 64], trials=200, seed=0)
    elapsed = time.perf_counter() - t0
    fit = fit_rate([r[0] for r in rows], [r[1] for r in rows], "inv_sqrt")
    assert fit.r2 >= 0.85 and fit.coefficients[1] > 0
    assert elapsed < 120
    return f"c2={fit.coefficients[1]:.3f} R2={fit.r2:.3f}"


@criterion(8, "shallow target error vs tau fits c1 + c2*tau")
def test_c08_shallow_tau():
    rows = error_curve(SHALLOW, "tau", [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], trials=200, seed=0)
    fit = fit_rate([r[0] for r in rows], [r[1] for r in rows], "linear")
    assert fit.r2 >= 0.85 and fit.coefficients[1] > 0
    return f"c2={fit.coefficients[1]:.3f} R2={fit.r2:.3f}"


# 9 -------------------------------------------------------------------------------

ALPHA_BASE = ExperimentConfig(Ns=200, Nt=200, Ms=200, epochs=100, rotation_deg=15, noise=1.5)


@pytest.mark.slow
@criterion(9, "optimal alpha grows like c*sqrt(Mt)")
def test_c09_alpha_scaling():
    t0 = time.perf_counter()
    res = alpha_opt_curve((8, 32, 128), ALPHA_BASE, trials=20, seed=0)
    elapsed = time.perf_counter() - t0
    assert not any(res.flat)
    assert res.spearman >= 0.8 and res.fit.r2 >= 0.7
    assert elapsed < 900
    opts = ", ".join(f"{a:.3f}" for a in res.alpha_opt)
    return f"alpha_opt [{opts}] rho={res.spearman:.2f} c={res.fit.coefficients[0]:.4f} R2={res.fit.r2:.3f}"


# 10 ------------------------------------------------------------------------------

# five classes in five dimensions, source labels only: the labeled count matters
DEPTH_BASE = ExperimentConfig(alpha=0.0, Mt=2, m=5, dim=5, noise=1.0, rotation_deg=10, epochs=200)


@pytest.mark.slow
@criterion(10, "minimal Ms is nondecreasing in depth for both trainers")
def test_c10_depth_complexity():
    t0 = time.perf_counter()
    out = []
    for trainer in ("mmd", "adversarial"):
        res = sweep("depth", (2, 3, 4), DEPTH_BASE.replace(trainer=trainer), trials=10, seed=0,
                    mode="complexity")
        req = [res.required[L] for L in (2, 3, 4)]
        assert None not in req, f"{trainer}: reference accuracy never reached {req}"
        assert all(b >= a for a, b in zip(req, req[1:])), f"{trainer}: {req}"
        out.append(f"{trainer} {req} (ref {res.reference_accuracy:.3f})")
    assert time.perf_counter() - t0 < 45 * 60
    return "; ".join(out)


# 11 ------------------------------------------------------------------------------

SMALL_TRAIN = {"Ns": 40, "Nt": 40, "Ms": 20, "Mt": 6, "n_test": 60, "epochs": 3, "width": 4}
CLI_RUNS = [
    ("train-mmd", ["train-mmd"], SMALL_TRAIN),
    ("train-adv", ["train-adv"], SMALL_TRAIN),
    ("shallow", ["shallow", "--mt-grid", "2,8,32", "--tau-grid", "0,0.5,1", "--trials", "5"],
     {"n": 100, "test_size": 200}),
    ("bounds", ["bounds"], {"widths": [2, 2, 2], "disc_widths": [2, 1], "eps": 0.5, "alpha": 0.3,
                            "Ms": 500000, "Mt": 90000, "Ns": 30000, "Nt": 30000}),
    ("verify", ["verify", "--trials", "100"],
     {"sizes": [20, 40], "eps_grid": [0.3],
      "per_lemma": {"mmd_deviation": {"reference_size": 400},
                    "ddan_deviation": {"reference_size": 400}}}),
    ("sweep", ["sweep", "--axis", "mt", "--grid", "2,6", "--trials", "2"], SMALL_TRAIN),
    ("sweep-complexity", ["sweep", "--axis", "depth", "--grid", "2,3", "--mode", "complexity",
                          "--lattice", "4,8"], SMALL_TRAIN),
    ("sweep-alpha", ["sweep", "--axis", "alpha", "--mt-grid", "2,4,8"], SMALL_TRAIN),
]


@criterion(11, "every CLI subcommand is byte-identical on rerun")
def test_c11_cli_determinism(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("n,err\n4,0.6\n16,0.35\n64,0.225\n")
    runs = CLI_RUNS + [("fit", ["fit", "--input", str(pts), "--x", "n", "--y", "err",
                                "--kind", "inv_sqrt"], None)]
    nfiles = 0
    for name, argv, config in runs:
        outputs = []
        for rep in ("a", "b"):
            out = tmp_path / name / rep
            args = ["--seed", "7", "--out-dir", str(out)]
            if config is not None:
                cfg = tmp_path / f"{name}.json"
                cfg.write_text(json.dumps(config))
                args += ["--config", str(cfg)]
            main(args + argv)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outputs[0] == outputs[1], name
        assert any(n.endswith((".csv", ".json", ".svg")) for n in outputs[0])
        nfiles += len(outputs[0])
    return f"{len(runs)} invocations, {nfiles} files identical"
