"""Robust stopping over a finite family of drivers.

Run with ``python3 demos/04_robust_game.py``.
"""

from bsdelab import (AmbiguitySet, DelayMeasure, ForwardModelSpec, GeneratorSpec, JumpMeasure, ObstacleSpec, Payoff,
                     TerminalSpec, build_time_grid, robust_values, saddle_point, simulate_paths)

grid = build_time_grid(1.0, 50)
paths = simulate_paths(ForwardModelSpec(100.0, volatility=0.2), grid, JumpMeasure(), 10_000, seed=3)
dm = DelayMeasure.instantaneous(grid)
put = Payoff("put", 100.0)
args = (ObstacleSpec(put), TerminalSpec(put), paths, dm)

# %% f^delta = delta |Z| for delta in {0.05, 0.15}; 0.05 is the pointwise minimum
amb = AmbiguitySet((0.05, 0.15), GeneratorSpec("scaled-abs-z"))
vals = robust_values(amb, *args, workers=2)
for k, v in vals.as_dict().items():
    if k != "region":
        print(f"{k:17s} {v}")

tau, delta_bar, cert = saddle_point(amb, *args, values=vals)
print(f"\nworst case delta_bar = {delta_bar}, certificate passed: {cert.passed}")
for row in cert.left + cert.right:
    print("  ", row)

_, _, wrong = saddle_point(amb, *args, values=vals, delta_bar=0.15)
print(f"forcing delta_bar = 0.15: certificate passed: {wrong.passed}")

# %% the infimum 0.1 |Z| is not attained by {0.1|Z| + 0.02, 0.1|Z| + 0.04}
net = AmbiguitySet((0.02, 0.04), GeneratorSpec("scaled-abs-z", 0.1, delta_param="offset"),
                   contains_min=False, infimum=GeneratorSpec("scaled-abs-z", 0.1))
nv = robust_values(net, *args)
bound = net.shifted_bound(grid, nv.eta)
gap = nv.upper_V.mean() - nv.lower_V.mean()
print(f"\neta = {nv.eta:.4f}   upper - lower = {gap:.4f}   bound C eta = {bound:.4f}")
