"""Grid-oracle HALP on the 4-computer ring against simple heuristics.

Run: python3 demos/ring_admin.py
"""

from hmdp import bench
from hmdp.basis import StateRelevanceDensity
from hmdp.halp import solve
from hmdp.oracles import EpsConfig
from hmdp.policy import GreedyPolicy, evaluate_policy, utopian_bound

topo = bench.RingAdmin(4)
mdp, basis = bench.make(topo)

sol = solve(mdp, basis, StateRelevanceDensity.uniform(), mdp.discount, EpsConfig(1 / 8))
print(f"relaxed LP: objective {sol.objective:.3f} after {sol.iterations} rounds, "
      f"{len(sol.constraints)} constraints")
for f, w in zip(basis, sol.weights):
    print(f"  {f.label or 'const':<8} {w:+9.4f}")

policies = {"halp greedy": GreedyPolicy(sol.value_function, mdp.discount)}
policies.update({k: bench.heuristic(k, topo) for k in ("dummy", "random", "server")})
for name, pol in policies.items():
    stats = evaluate_policy(mdp, pol, mdp.discount, n_traj=100, horizon=300, rng=0)
    print(f"{name:<12} return {stats.mean:6.2f} +/- {stats.stderr:.2f}")
print(f"utopian bound {utopian_bound(topo):.2f}")
