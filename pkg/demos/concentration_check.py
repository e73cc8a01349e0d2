"""Monte Carlo check that observed tail frequencies stay under the stated bounds.

Each row is one (N, eps) cell: how often the empirical quantity deviated by
more than eps, next to the bound and a 3-sigma binomial margin.

    python demos/concentration_check.py
"""
from dalab.concentration import (McConfig, verify_ddan_deviation, verify_loss_hoeffding,
                                 verify_mean_embedding, verify_mmd_deviation)

runs = [
    ("bounded losses", verify_loss_hoeffding, McConfig(trials=1000, sizes=(50, 100, 200),
                                                       eps_grid=(0.1, 0.2))),
    ("mean embedding", verify_mean_embedding, McConfig(trials=500, sizes=(25, 50, 100),
                                                       eps_grid=(0.3, 0.5))),
    ("MMD estimate", verify_mmd_deviation, McConfig(trials=300, sizes=(100, 400),
                                                    eps_grid=(0.4, 0.8))),
    ("discriminator", verify_ddan_deviation, McConfig(trials=300, sizes=(400, 1600),
                                                      eps_grid=(0.3, 0.5))),
]

for title, fn, cfg in runs:
    rep = fn(cfg)
    print(f"\n{title}  ({cfg.trials} trials per cell)")
    print(f"{'N':>6s} {'eps':>5s} {'freq':>8s} {'bound':>9s}  ok")
    for r in rep.rows:
        flag = "vacuous" if r.vacuous else ("yes" if r.passed else "NO")
        print(f"{r.N:6d} {r.eps:5.2f} {r.freq:8.4f} {r.bound:9.4f}  {flag}")
