"""Sampled constraints versus MCMC constraint search on a 6-channel irrigation ring.

A scaled-down run (fewer chains and sweeps than the acceptance check) that
finishes in about a minute.

Run: python3 demos/irrigation_mcmc.py
"""

import numpy as np

from hmdp import bench
from hmdp.basis import StateRelevanceDensity
from hmdp.halp import solve
from hmdp.oracles import MCConfig, MCMCConfig
from hmdp.policy import GreedyPolicy, evaluate_policy, utopian_bound

topo = bench.IrrigationRing(6)
mdp, basis = bench.make(topo)
psi = StateRelevanceDensity.uniform()
print(f"{len(mdp.states)} state and {len(mdp.actions)} action variables, "
      f"{len(basis)} basis functions; utopian bound {utopian_bound(topo):.2f}")

runs = {
    "MC, 2000 samples": (MCConfig(2000), {}),
    "MCMC, 10 chains x 100 sweeps": (MCMCConfig(10, 100), {"max_iters": 100}),
}
for name, (cfg, limits) in runs.items():
    sol = solve(mdp, basis, psi, mdp.discount, cfg, np.random.default_rng(0), **limits)
    stats = evaluate_policy(mdp, GreedyPolicy(sol.value_function, mdp.discount), mdp.discount,
                            n_traj=50, horizon=300, rng=1)
    print(f"{name:<30} objective {sol.objective:8.2f} ({sol.status}), "
          f"return {stats.mean:.2f} +/- {stats.stderr:.2f}")
