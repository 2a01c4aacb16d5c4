"""Mode-by-mode stability of both equilibria across the threshold r0 = 1.

    python demos/stability_survey.py
"""
import numpy as np

from sirsfit import Params
from sirsfit.stability import analyze_equilibrium, stability_sweep

params = Params(mu=0.1, gamma=1.0, kappa=0.5, d1=0.01, d2=0.05, d3=0.005)

print("beta    r0     disease-free  endemic")
for row in stability_sweep(params, {"beta": np.linspace(0.5, 3.0, 11)}, y0=100.0, n_modes=50):
    endemic = row["endemic_verdict"] or "-"
    print(f"{row['beta']:4.2f}  {row['r0']:5.3f}  {row['dfe_verdict']:>12}  {endemic}")

modes = analyze_equilibrium(params, 2.0, 100.0, "endemic", n_modes=6)
print("\nendemic state at beta = 2, leading modes:")
for m in modes:
    print(f"  mode {m.mode}  lambda = {m.lambda_l:8.3f}  max Re = {m.max_real:+.4f}  "
          f"Routh-Hurwitz: {m.routh_hurwitz}")
