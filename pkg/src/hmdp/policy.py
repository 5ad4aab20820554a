"""Policies, Monte Carlo policy evaluation and utopian upper bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Protocol

import numpy as np
from scipy import integrate

from .basis import LinearValueFunction, backproject_many, children_parents
from .costnet import CostNetwork, TableFactor, eliminate_argmin
from .errors import ContractError
from .model import HybridMDP, initial_states, reward, sample_transition
from .special import beta_pdf, expect_monomial

JOINT_ACTION_CAP = 2 ** 16
_BATCH_ENTRIES = 2 ** 21


class Policy(Protocol):
    def act(self, mdp: HybridMDP, x: Mapping[str, np.ndarray],
            rng: np.random.Generator) -> dict[str, np.ndarray]: ...


def _batch_len(x: Mapping[str, np.ndarray]) -> int:
    return len(np.atleast_1d(next(iter(x.values()))))


@dataclass(frozen=True)
class FixedPolicy:
    action: Mapping[str, int]

    def act(self, mdp, x, rng):
        n = _batch_len(x)
        missing = set(mdp.action_names) - set(self.action)
        if missing:
            raise ContractError(f"fixed policy lacks values for {sorted(missing)}")
        return {a: np.full(n, float(self.action[a])) for a in mdp.action_names}


@dataclass(frozen=True)
class DummyPolicy(FixedPolicy):
    """Always the do-nothing action."""


@dataclass(frozen=True)
class RandomPolicy:
    def act(self, mdp, x, rng):
        n = _batch_len(x)
        return {v.name: rng.integers(0, v.size, n).astype(float) for v in mdp.actions}


@dataclass(frozen=True)
class GreedyPolicy:
    """argmax_a R(x, a) + gamma E[V(x') | x, a] for a linear value function."""

    value_function: LinearValueFunction
    gamma: float

    def act(self, mdp, x, rng):
        return greedy_action(self.value_function, mdp, self.gamma, x)


# ---------------------------------------------------------------------------
# greedy action selection

def _q_terms(v: LinearValueFunction, mdp: HybridMDP):
    """Group the action-dependent parts of Q by their action scope."""
    actions = set(mdp.action_names)
    groups: dict[tuple[str, ...], tuple[list[int], list]] = {}
    for i, f in enumerate(v.basis):
        if v.weights[i] == 0:
            continue
        scope = tuple(sorted(set(children_parents(mdp, f)) & actions))
        if scope:
            groups.setdefault(scope, ([], []))[0].append(i)
    for r in mdp.rewards:
        scope = tuple(sorted(set(r.scope) & actions))
        if scope:
            groups.setdefault(scope, ([], []))[1].append(r)
    return groups


def _group_tables(v, mdp, gamma, x, scope, idx, rewards, n):
    """Values of one group for every joint value of its action scope: (n, *levels)."""
    sizes = [mdp.levels(a) for a in scope]
    combos = np.array(list(itertools.product(*[range(s) for s in sizes])), dtype=float)
    c = len(combos)
    env = {k: np.repeat(np.atleast_1d(np.asarray(val, dtype=float)), c) for k, val in x.items()}
    for j, a in enumerate(scope):
        env[a] = np.tile(combos[:, j], n)
    for a in mdp.action_names:  # unused actions: any fixed value
        env.setdefault(a, np.zeros(n * c))
    total = np.zeros(n * c)
    if idx:
        g = backproject_many([v.basis[i] for i in idx], mdp, env)
        total += gamma * g @ np.asarray(v.weights, dtype=float)[idx]
    for r in rewards:
        total += np.broadcast_to(r.expr(env), (n * c,))
    return total.reshape([n] + sizes)


def greedy_action(v: LinearValueFunction, mdp: HybridMDP, gamma: float,
                  x: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Greedy joint action for each state in the batch.

    Small joint action spaces are enumerated exactly; larger ones are
    maximized per state by variable elimination over the action variables.
    Ties go to the lexicographically smallest joint action.
    """
    x = {k: np.atleast_1d(np.asarray(val, dtype=float)) for k, val in x.items()}
    n = _batch_len(x)
    names = list(mdp.action_names)
    sizes = [mdp.levels(a) for a in names]
    joint = int(np.prod(sizes))
    groups = _q_terms(v, mdp)
    if joint <= JOINT_ACTION_CAP:
        out = {a: np.zeros(n) for a in names}
        chunk = max(1, _BATCH_ENTRIES // max(joint, 1))
        for lo in range(0, n, chunk):
            hi = min(n, lo + chunk)
            xs = {k: val[lo:hi] for k, val in x.items()}
            q = np.zeros([hi - lo] + sizes)
            for scope, (idx, rewards) in groups.items():
                table = _group_tables(v, mdp, gamma, xs, scope, idx, rewards, hi - lo)
                shape = [hi - lo] + [mdp.levels(a) if a in scope else 1 for a in names]
                perm = [0] + [1 + scope.index(a) for a in names if a in scope]
                q = q + np.transpose(table, perm).reshape(shape)
            best = np.argmax(q.reshape(hi - lo, -1), axis=1)
            for a, vals in zip(names, np.unravel_index(best, sizes)):
                out[a][lo:hi] = vals
        return out
    out = {a: np.zeros(n) for a in names}
    for s in range(n):
        xs = {k: val[s:s + 1] for k, val in x.items()}
        factors = []
        for scope, (idx, rewards) in groups.items():
            table = _group_tables(v, mdp, gamma, xs, scope, idx, rewards, 1)[0]
            factors.append(TableFactor(scope, -table))
        res = eliminate_argmin(CostNetwork(dict(zip(names, sizes)), factors))
        for a in names:
            out[a][s] = res.assignment[a]
    return out


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class TrajectoryStats:
    mean: float
    std: float
    count: int
    horizon: int
    seed: int | None = None

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count)


def discounted_returns(mdp: HybridMDP, policy, gamma: float, n_traj: int, horizon: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Discounted return of each of n_traj trajectories, simulated in lockstep."""
    x = initial_states(mdp, n_traj, rng)
    total = np.zeros(n_traj)
    disc = 1.0
    for _ in range(horizon):
        a = policy.act(mdp, x, rng)
        total += disc * reward(mdp, x, a)
        x = sample_transition(mdp, x, a, rng)
        disc *= gamma
    return total


def evaluate_policy(mdp: HybridMDP, policy, gamma: float, n_traj: int = 100,
                    horizon: int = 300, rng: np.random.Generator | int = 0) -> TrajectoryStats:
    """Mean and standard deviation of discounted returns from the initial distribution."""
    if n_traj < 1 or horizon < 1:
        raise ContractError("need at least one trajectory of positive length")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng) if seed is not None else rng
    ret = discounted_returns(mdp, policy, gamma, n_traj, horizon, gen)
    return TrajectoryStats(float(ret.mean()), float(ret.std(ddof=1)) if n_traj > 1 else 0.0,
                           n_traj, horizon, None if seed is None else int(seed))


# ---------------------------------------------------------------------------
# utopian bounds

def utopian_bound_ring(n: int, gamma: float = 0.95) -> float:
    """Every computer at the rebooted Beta(20, 2) distribution forever."""
    return (n + 1) / (1.0 - gamma) * float(expect_monomial(20.0, 2.0, 2, 0))


@lru_cache(maxsize=None)
def best_channel_reward() -> float:
    """max over levels mu of E[R(x')], x' ~ Beta(46 mu + 2, 46 (1 - mu) + 2).

    A coarse scan uses composite Gauss-Legendre quadrature; the maximizer is
    then refined with adaptive quadrature.
    """
    from scipy.optimize import minimize_scalar

    from .bench import channel_reward

    def expected(mu: float) -> float:
        a, b = 46.0 * mu + 2.0, 46.0 * (1.0 - mu) + 2.0
        val, _ = integrate.quad(lambda t: float(beta_pdf(t, a, b) * channel_reward(t)), 0.0, 1.0,
                                points=[0.4, 0.55], limit=200, epsabs=1e-13, epsrel=1e-12)
        return val

    nodes, weights = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(0.0, 1.0, 201)
    half = np.diff(edges) / 2
    t = (edges[:-1, None] + half[:, None] * (nodes[None, :] + 1)).ravel()
    wt = (half[:, None] * weights[None, :]).ravel() * channel_reward(t)
    grid = np.linspace(0.0, 1.0, 1001)
    a = 46.0 * grid[:, None] + 2.0
    b = 46.0 * (1.0 - grid[:, None]) + 2.0
    vals = beta_pdf(t[None, :], a, b) @ wt
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda m: -expected(m), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return max(expected(float(grid[k])), -float(res.fun))


def utopian_bound_irrigation(topology, gamma: float = 0.95) -> float:
    """Draining channels carry all inflow; every other channel sits at its best level."""
    from .bench import irrigation_layout

    layout = irrigation_layout(topology)
    n = len(layout.channels)
    n_out = layout.n_outflow_channels
    drained = 2.0 * 0.1 * len(layout.inflow)
    return (drained + (n - n_out) * best_channel_reward()) / (1.0 - gamma)


def utopian_bound(topology, gamma: float = 0.95) -> float:
    from .bench import DiscreteRingAdmin, RingAdmin

    if isinstance(topology, RingAdmin):
        return utopian_bound_ring(topology.n, gamma)
    if isinstance(topology, DiscreteRingAdmin):
        return (topology.n + 1) * 0.95 / (1.0 - gamma)
    return utopian_bound_irrigation(topology, gamma)
