"""Evaluate the generalization bounds for a small network and see how they move.

    python demos/bound_calculator.py
"""
import numpy as np

from dalab import bounds
from dalab.bounds import BoundInputs

inp = BoundInputs(eps=0.5, alpha=0.3, widths=(2, 2, 2), disc_widths=(2, 1), delta=1e-3,
                  Ms=5e5, Mt=9e4, Ns=3e4, Nt=3e4)
rep = bounds.bound_report(inp, hLw=0.2, distance=0.05)

print("R per layer      ", np.round(rep.R, 4))
print("Q per layer      ", np.round(rep.Q_layers, 4))
print(f"log N(F)          {rep.log_cov_F:.4f}")
print(f"log N(H o F)      {rep.log_cov_HF:.4f}")
print(f"log N(V)          {rep.log_cov_V:.4f}")
print(f"P (labeled only)  {rep.theorem2:.6f}")
print(f"P (with MMD)      {rep.theorem3:.6f}")
print(f"P (discriminator) {rep.lemma9:.6f}")
print(f"target loss <=    {rep.target_loss_bound:.4f}")

# how the labeled-sample requirement and the recommended target weight scale
print("\n eps      Ms needed    alpha at Mt=100")
for eps in (0.4, 0.2, 0.1, 0.05):
    Ms, _, _ = bounds.sample_complexity(eps, d=10, L=3)
    print(f"{eps:5.2f} {Ms:14.4g} {bounds.recommended_alpha(100, eps, 10, 3):14.4f}")

# wider or deeper networks need exponentially larger covers
print("\n d  L   log N(H o F) at eps=0.1")
for d in (4, 8, 16):
    for L in (2, 4):
        v = bounds.log_covering_HF(BoundInputs(widths=(d,) * (L + 1)), 0.1)
        print(f"{d:2d} {L:2d} {v:14.2f}")
