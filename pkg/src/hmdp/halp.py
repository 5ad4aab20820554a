"""HALP solvers: sampled relaxation and cutting-plane constraint generation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import (BasisFunction, LinearValueFunction, StateRelevanceDensity,
                    relevance_weight)
from .costnet import ViolationTables, eliminate_argmin, uniform_grid
from .errors import ContractError
from .lp import OPTIMAL, solve_lp
from .model import HybridMDP
from .oracles import (VIOLATION_TOL, Constraint, ConstraintSpace, MCConfig, make_oracle)

log = logging.getLogger(__name__)

ITERATION_CAPPED = "iteration-capped"


@dataclass
class RelaxedLP:
    """min alpha^T w  s.t.  rows, |w_i| <= bound."""

    objective: np.ndarray
    constraints: list[Constraint] = field(default_factory=list)
    bound: float | None = None

    def add(self, cuts: Sequence[Constraint]) -> int:
        self.constraints.extend(cuts)
        return len(cuts)

    def solve(self):
        k = len(self.objective)
        A = (np.array([c.coefficients for c in self.constraints]) if self.constraints
             else np.zeros((0, k)))
        b = np.array([c.rhs for c in self.constraints])
        return solve_lp(self.objective, A, b, self.bound)


@dataclass
class HalpSolution:
    weights: np.ndarray
    objective: float
    status: str
    iterations: int
    constraints: list[Constraint]
    basis: tuple[BasisFunction, ...]
    objective_history: list[float] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def value_function(self) -> LinearValueFunction:
        return LinearValueFunction(self.basis, self.weights)


def build_objective(basis: Sequence[BasisFunction], psi: StateRelevanceDensity) -> np.ndarray:
    return np.array([relevance_weight(f, psi) for f in basis])


def default_bound(mdp: HybridMDP, gamma: float) -> float | None:
    if mdp.r_max is None:
        return None
    return mdp.r_max / (1.0 - gamma)


def _finish(lp: RelaxedLP, result, iterations, basis, history, t0) -> HalpSolution:
    if result.status != OPTIMAL:
        return HalpSolution(np.full(len(basis), np.nan), float("nan"), result.status,
                            iterations, lp.constraints, tuple(basis), history,
                            time.perf_counter() - t0)
    return HalpSolution(result.x, result.objective, OPTIMAL, iterations, lp.constraints,
                        tuple(basis), history, time.perf_counter() - t0)


def mc_halp(mdp: HybridMDP, basis: Sequence[BasisFunction], psi: StateRelevanceDensity,
            gamma: float, cfg: MCConfig, rng: np.random.Generator,
            bound: float | None | str = "auto") -> HalpSolution:
    """Solve the relaxation over N sampled state-action pairs (all kept as rows)."""
    t0 = time.perf_counter()
    space = ConstraintSpace(mdp, basis, gamma)
    env = (cfg.proposal(cfg.samples, rng) if cfg.proposal is not None
           else space.uniform(cfg.samples, rng))
    lp = RelaxedLP(build_objective(basis, psi),
                   bound=default_bound(mdp, gamma) if bound == "auto" else bound)
    lp.add(space.materialize(env, "mc"))
    result = lp.solve()
    return _finish(lp, result, 1, basis, [result.objective], t0)


def cutting_plane(mdp: HybridMDP, basis: Sequence[BasisFunction], psi: StateRelevanceDensity,
                  gamma: float, oracle: Callable[[np.ndarray], list[Constraint]],
                  max_iters: int = 500, max_cuts: int | None = None,
                  bound: float | None | str = "auto") -> HalpSolution:
    """Alternate between solving the relaxed LP and asking the oracle for cuts.

    Stops when the oracle finds nothing violated beyond the tolerance or
    after ``max_iters`` rounds.  Cuts are deduplicated by provenance, and at
    most ``max_cuts`` of the most violated new cuts (all when None) are
    added per round.
    """
    t0 = time.perf_counter()
    lp = RelaxedLP(build_objective(basis, psi),
                   bound=default_bound(mdp, gamma) if bound == "auto" else bound)
    seen: set[tuple] = set()
    history: list[float] = []
    result = lp.solve()
    for it in range(1, max_iters + 1):
        if result.status != OPTIMAL:
            return _finish(lp, result, it, basis, history, t0)
        history.append(result.objective)
        w = result.x
        fresh = []
        for cut in oracle(w):
            if cut.violation(w) <= VIOLATION_TOL:
                continue
            key = cut.key()
            if key in seen:
                continue
            seen.add(key)
            fresh.append(cut)
            if max_cuts is not None and len(fresh) >= max_cuts:
                break
        log.debug("round %d: objective %.6g, %d new cuts", it, result.objective, len(fresh))
        if not fresh:
            return _finish(lp, result, it, basis, history, t0)
        lp.add(fresh)
        result = lp.solve()
    sol = _finish(lp, result, max_iters, basis, history, t0)
    if sol.status == OPTIMAL:
        sol.status = ITERATION_CAPPED
    return sol


def solve(mdp: HybridMDP, basis: Sequence[BasisFunction], psi: StateRelevanceDensity,
          gamma: float, cfg, rng: np.random.Generator | None = None, **limits) -> HalpSolution:
    """Dispatch on the oracle configuration: MC samples up front, others cut."""
    if isinstance(cfg, MCConfig):
        if rng is None:
            raise ContractError("sampling needs a random generator")
        return mc_halp(mdp, basis, psi, gamma, cfg, rng, **limits)
    oracle = make_oracle(cfg, mdp, basis, gamma, rng)
    return cutting_plane(mdp, basis, psi, gamma, oracle, **limits)


def delta_infeasibility(w, mdp: HybridMDP, basis: Sequence[BasisFunction], gamma: float,
                        probe) -> float:
    """max(0, largest violation found by ``probe``).

    ``probe`` is either a grid resolution (exhaustive search on that grid by
    variable elimination) or an oracle callable returning constraints.
    """
    w = np.asarray(w, dtype=float)
    if isinstance(probe, (int, float)):
        levels = uniform_grid(float(probe))
        grid = {v.name: levels for v in mdp.states + mdp.actions if v.continuous}
        tables = ViolationTables(mdp, basis, gamma, grid)
        return max(0.0, -eliminate_argmin(tables.network(w)).value)
    found = probe(w)
    return max([0.0] + [c.violation(w) for c in found])
