"""How the best target-loss weight alpha changes with the number of target labels.

For each Mt the MMD network is trained across an alpha grid, a quadratic is
fitted to accuracy(alpha), and its argmax is taken. The optimum should grow
roughly like c*sqrt(Mt). The full run (20 trials) takes a few minutes; pass
a trial count to make it quicker.

    python demos/optimal_alpha.py [trials]
"""
import sys

import numpy as np

from dalab.emit import emit
from dalab.experiments import ExperimentConfig, alpha_opt_curve

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = ExperimentConfig(Ns=200, Nt=200, Ms=200, epochs=100, rotation_deg=15, noise=1.5)
res = alpha_opt_curve((8, 32, 128), base, trials=trials, seed=0)

for mt, accs, opt in zip(res.mt_grid, res.accuracy, res.alpha_opt):
    shown = "flat" if opt is None else f"{opt:.3f}"
    print(f"Mt={mt:4d}  accuracy over alpha {np.round(accs, 3)}  alpha_opt {shown}")
if res.fit is not None:
    print(f"alpha_opt ~ {res.fit.coefficients[0]:.4f} sqrt(Mt), R2 {res.fit.r2:.3f}, "
          f"Spearman {res.spearman:.2f}")
emit(res, "svg", "out/demos/alpha_opt.svg")
