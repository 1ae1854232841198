"""Reflected equation for an American put, and the stopping times it defines.

Run with ``python3 demos/02_american_put.py``.
"""

import numpy as np

from bsdelab import (DelayMeasure, ForwardModelSpec, GeneratorSpec, JumpMeasure, ObstacleSpec, Payoff, TerminalSpec,
                     binomial_american, build_time_grid, epsilon_optimal_time, optimal_times, simulate_paths,
                     solve_reflected, verify_optimality)
from bsdelab.reflected import structural_checks
from bsdelab.stopping import epsilon_sandwich, stop_now, stop_terminal

grid = build_time_grid(1.0, 50)
put = Payoff("put", strike=100.0)

# %% f = 0: the Snell envelope of the payoff
paths = simulate_paths(ForwardModelSpec(100.0, volatility=0.2), grid, JumpMeasure(), 100_000, seed=0)
snell = solve_reflected(TerminalSpec(put), ObstacleSpec(put), paths, GeneratorSpec(), DelayMeasure.instantaneous(grid))
tree = binomial_american(100.0, 100.0, 1.0, 0.2, steps=2000)
print(f"Monte Carlo Y0 = {snell.Y[:, 0].mean():.4f}   tree = {tree:.4f}")
print("structural:", structural_checks(snell))

# %% growth 6% with f = -0.06 Y discounts the payoff, so early exercise pays
paths = simulate_paths(ForwardModelSpec(100.0, drift=0.06, volatility=0.2), grid, JumpMeasure(), 20_000, seed=1)
sol = solve_reflected(TerminalSpec(put), ObstacleSpec(put), paths, GeneratorSpec("linear-in-y", -0.06),
                      DelayMeasure.instantaneous(grid))
tree = binomial_american(100.0, 100.0, 1.0, 0.2, steps=2000, rate=0.06)
print(f"\ndiscounted put: Y0 = {sol.Y[:, 0].mean():.4f}   tree = {tree:.4f}")

times = optimal_times(sol, 0)
for name, field in times.items():
    print(f"{name:9s} median stop index {np.median(field.indices):5.1f}")

# %% risk of each rule against the value -Y(0)
candidates = [times["tau_star"], times["tau_bar"], times["tau_tilde"], epsilon_optimal_time(sol, 0, 0.5),
              stop_terminal(sol, 0), stop_now(sol, 0)]
print("\nrule        rho(0)    -Y(0)     gap      gap/SE")
for c in candidates:
    r = verify_optimality(sol, c, 0)
    print(f"{r.rule_name:9s} {r.rho_mean:9.4f} {r.value_mean:9.4f} {r.gap:8.4f} {r.gap / r.se:8.2f}")

# %% the D^eps sandwich: the measured constant against exp(sqrt(K) T)
print("\n eps   rho - (-Y0)   measured C   bound C")
for eps in (2.0, 1.0, 0.5, 0.25):
    sw = epsilon_sandwich(sol, 0, eps)
    print(f"{eps:5.2f}  {sw.rho_mean - sw.value_mean:10.4f}  {sw.measured_C:10.4f}  {sw.bound_C:8.4f}"
          f"  {'ok' if sw.passed else 'FAIL'}")
