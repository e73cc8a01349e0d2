"""Ridge classifier on two transformed 2-D domains with imperfect alignment maps.

The target error should fall like c1 + c2/sqrt(Mt) in the number of labeled
target points, and grow roughly linearly in the alignment error tau. Writes
CSV and SVG curves to out/demos/.

    python demos/shallow_rates.py
"""
from pathlib import Path

import numpy as np

from dalab.emit import Table, emit
from dalab.experiments import RATE_LABELS, fit_rate
from dalab.shallow import ShallowConfig, error_curve

out = Path("out/demos")
base = ShallowConfig(Ms=20, alpha=0.5, tau=0.3)

for axis, grid, kind in (("Mt", [2, 4, 8, 16, 32, 64], "inv_sqrt"),
                         ("tau", [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], "linear")):
    rows = error_curve(base, axis, grid, trials=200, seed=0)
    xs, ys = [r[0] for r in rows], [r[1] for r in rows]
    fit = fit_rate(xs, ys, kind)
    print(f"\n{axis:>4s}  mean error")
    for x, y in zip(xs, ys):
        print(f"{x:5g}  {y:.4f}")
    print(f"fit {RATE_LABELS[kind]}: coefficients {np.round(fit.coefficients, 4)}, R2 {fit.r2:.3f}")
    gx = np.linspace(min(xs), max(xs), 50)
    table = Table([axis, "mean_error"], [[x, y] for x, y in zip(xs, ys)],
                  f"target error vs {axis}", axis, "target error",
                  {"mean error": (xs, ys)}, {RATE_LABELS[kind]: (gx, fit.predict(gx))})
    emit(table, "csv", out / f"shallow_{axis.lower()}.csv")
    print("wrote", emit(table, "svg", out / f"shallow_{axis.lower()}.svg"))
