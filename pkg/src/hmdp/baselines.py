"""Value-iteration baselines: grid-based VI and least-squares fitted VI."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .basis import BasisFunction, LinearValueFunction, backproject_many, evaluate_many
from .costnet import uniform_grid
from .errors import DegenerateGridError, FittingError, ResourceError
from .model import BetaMixtureFactor, HybridMDP, reward
from .special import beta_pdf

MAX_GRID_POINTS = 20_000
MAX_JOINT_ACTIONS = 4096


def joint_actions(mdp: HybridMDP) -> list[dict[str, float]]:
    sizes = [mdp.levels(a) for a in mdp.action_names]
    total = math.prod(sizes)
    if total > MAX_JOINT_ACTIONS:
        raise ResourceError(f"{total} joint actions exceed the cap {MAX_JOINT_ACTIONS}")
    return [dict(zip(mdp.action_names, map(float, combo)))
            for combo in itertools.product(*[range(s) for s in sizes])]


def uniform_points(mdp: HybridMDP, eps: float) -> dict[str, np.ndarray]:
    """Cartesian epsilon grid over the state space (discrete variables enumerated)."""
    axes = [uniform_grid(eps) if v.continuous else np.arange(v.size, dtype=float)
            for v in mdp.states]
    count = math.prod(len(a) for a in axes)
    if count > MAX_GRID_POINTS:
        raise ResourceError(f"grid of {count} points exceeds the cap {MAX_GRID_POINTS}")
    mesh = np.meshgrid(*axes, indexing="ij")
    return {v.name: m.ravel() for v, m in zip(mdp.states, mesh)}


def random_points(mdp: HybridMDP, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """n states drawn uniformly at random."""
    if n > MAX_GRID_POINTS:
        raise ResourceError(f"{n} grid points exceed the cap {MAX_GRID_POINTS}")
    return {v.name: (rng.random(n) if v.continuous
                     else rng.integers(0, v.size, n).astype(float)) for v in mdp.states}


def transition_weights(mdp: HybridMDP, x: Mapping[str, np.ndarray],
                       a: Mapping[str, float], points: Mapping[str, np.ndarray]) -> np.ndarray:
    """Unnormalized P(points_j | x_i, a): shape (len(x), len(points))."""
    n = len(next(iter(x.values())))
    env = {**{k: np.asarray(v, dtype=float) for k, v in x.items()},
           **{k: np.full(n, v) for k, v in a.items()}}
    out = None
    for var in mdp.states:
        fac = mdp.transition(var.name)
        target = np.asarray(points[var.name], dtype=float)[None, :]
        if isinstance(fac, BetaMixtureFactor):
            dens = 0.0
            for w, al, be in fac.params(env):
                dens = dens + w * beta_pdf(target, al[:, None], be[:, None])
        else:
            probs = fac.probs(env)
            dens = probs[:, target[0].astype(int)]
        out = dens if out is None else out * dens
    return out


@dataclass
class GridVIResult:
    points: dict[str, np.ndarray]
    values: np.ndarray
    actions: list[dict[str, float]]
    iterations: int
    residuals: list[float] = field(default_factory=list)


def _normalize(weights: np.ndarray, points, where: str) -> np.ndarray:
    mass = weights.sum(axis=1, keepdims=True)
    bad = np.flatnonzero(~(mass[:, 0] > 0))
    if bad.size:
        i = int(bad[0])
        raise DegenerateGridError(f"{where} {i} ({ {k: float(v[i]) for k, v in points.items()} }) "
                                  "has zero transition mass onto the grid")
    return weights / mass


def grid_vi(mdp: HybridMDP, points: Mapping[str, np.ndarray], gamma: float,
            max_iters: int = 100, tol: float = 1e-6) -> GridVIResult:
    """Value iteration on a finite set of states with normalized transition densities."""
    points = {k: np.asarray(v, dtype=float) for k, v in points.items()}
    n = len(next(iter(points.values())))
    if n > MAX_GRID_POINTS:
        raise ResourceError(f"{n} grid points exceed the cap {MAX_GRID_POINTS}")
    actions = joint_actions(mdp)
    kernels, rewards = [], []
    for a in actions:
        kernels.append(_normalize(transition_weights(mdp, points, a, points), points, "grid point"))
        rewards.append(np.broadcast_to(reward(mdp, points, {k: np.full(n, v) for k, v in a.items()}),
                                       (n,)))
    P = np.stack(kernels)
    R = np.stack(rewards)
    v = np.zeros(n)
    residuals = []
    it = 0
    for it in range(1, max_iters + 1):
        new = (R + gamma * P @ v).max(axis=0)
        res = float(np.abs(new - v).max())
        residuals.append(res)
        v = new
        if res < tol:
            break
    return GridVIResult(points, v, actions, it, residuals)


@dataclass(frozen=True)
class GridLookaheadPolicy:
    """argmax_a R(x, a) + gamma sum_j P_G(x_j | x, a) V_j for a grid VI solution."""

    result: GridVIResult
    gamma: float

    def act(self, mdp, x, rng):
        x = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in x.items()}
        n = len(next(iter(x.values())))
        q = []
        for a in self.result.actions:
            w = transition_weights(mdp, x, a, self.result.points)
            mass = w.sum(axis=1)
            ev = np.where(mass > 0, w @ self.result.values / np.where(mass > 0, mass, 1.0), 0.0)
            q.append(reward(mdp, x, {k: np.full(n, v) for k, v in a.items()}) + self.gamma * ev)
        best = np.argmax(np.stack(q), axis=0)
        return {name: np.array([self.result.actions[b][name] for b in best])
                for name in mdp.action_names}


@dataclass
class L2VIResult:
    weights: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)

    def value_function(self, basis: Sequence[BasisFunction]) -> LinearValueFunction:
        return LinearValueFunction(tuple(basis), self.weights)


def l2_vi(mdp: HybridMDP, basis: Sequence[BasisFunction], gamma: float,
          points: Mapping[str, np.ndarray], max_iters: int = 100, tol: float = 1e-6,
          w0: np.ndarray | None = None) -> L2VIResult:
    """Fitted value iteration: w <- argmin ||X w - max_a (R_a + gamma G_a w)||_2.

    The residual recorded per iteration is the root-mean-square Bellman
    error of the current iterate on the points.
    """
    points = {k: np.asarray(v, dtype=float) for k, v in points.items()}
    n = len(next(iter(points.values())))
    X = evaluate_many(basis, points)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise FittingError(f"design matrix of {n} points has rank "
                           f"{np.linalg.matrix_rank(X)} < {X.shape[1]} basis functions")
    q, r = np.linalg.qr(X)
    actions = joint_actions(mdp)
    G, R = [], []
    for a in actions:
        env = {**points, **{k: np.full(n, v) for k, v in a.items()}}
        G.append(backproject_many(basis, mdp, env))
        R.append(np.broadcast_to(reward(mdp, points, {k: np.full(n, v) for k, v in a.items()}),
                                 (n,)))
    G = np.stack(G)
    R = np.stack(R)
    w = np.zeros(X.shape[1]) if w0 is None else np.asarray(w0, dtype=float)
    residuals = []
    it = 0
    for it in range(1, max_iters + 1):
        target = (R + gamma * G @ w).max(axis=0)
        res = float(np.sqrt(np.mean((X @ w - target) ** 2)))
        residuals.append(res)
        if res < tol:
            break
        w = np.linalg.solve(r, q.T @ target)
    return L2VIResult(w, it, residuals)
