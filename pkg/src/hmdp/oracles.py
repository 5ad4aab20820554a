"""Constraint generation: uniform sampling, epsilon-grid elimination, annealed MCMC.

Every oracle inspects the violation

    tau^w(x, a) = R(x, a) - sum_i w_i F_i(x, a),   F_i = f_i - gamma g_i,

which is positive exactly where the HALP constraint at (x, a) is violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .basis import BasisFunction, children_parents, constraint_rows
from .costnet import ViolationTables, eliminate_argmin, uniform_grid
from .errors import ContractError
from .model import HybridMDP, batch_shape

VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class Constraint:
    """One HALP row: coefficients F_i(x, a), right-hand side R(x, a)."""

    coefficients: np.ndarray
    rhs: float
    state: Mapping[str, float]
    action: Mapping[str, float]
    source: str = ""

    def violation(self, w: np.ndarray) -> float:
        return float(self.rhs - self.coefficients @ np.asarray(w, dtype=float))

    def key(self) -> tuple:
        """Provenance hash key; continuous values rounded to 1e-9."""
        items = list(self.state.items()) + list(self.action.items())
        return tuple((k, round(float(v), 9)) for k, v in sorted(items))


@dataclass(frozen=True)
class MCConfig:
    samples: int = 1000
    proposal: Callable | None = None  # (n, rng) -> assignment dict

    def __post_init__(self):
        if self.samples < 1:
            raise ContractError("sample count must be at least 1")


@dataclass(frozen=True)
class EpsConfig:
    eps: float = 0.125

    def __post_init__(self):
        if not (0 < self.eps <= 1):
            raise ContractError("grid resolution must lie in (0, 1]")


@dataclass(frozen=True)
class MCMCConfig:
    chains: int = 50
    sweeps: int = 500
    temp_c: float = 0.2
    inner_steps: int = 10

    def __post_init__(self):
        if self.chains < 1 or self.sweeps < 1:
            raise ContractError("chain and sweep counts must be at least 1")
        if not self.temp_c > 0:
            raise ContractError("initial temperature must be positive")
        if self.inner_steps < 1:
            raise ContractError("inner Metropolis steps must be at least 1")


OracleConfig = "MCConfig | EpsConfig | MCMCConfig"


def temperature(t: int | np.ndarray, c: float):
    """Cooling schedule c / ln(t + e): T_0 = c, strictly decreasing."""
    return c / np.log(np.asarray(t, dtype=float) + math.e)


def grid_resolution_for_delta(delta: float, n_terms: int, k_loc: float) -> float:
    """Grid step that bounds the violation error of an epsilon grid by delta."""
    if not (delta > 0 and n_terms > 0 and k_loc > 0):
        raise ContractError("delta, term count and Lipschitz constant must be positive")
    return 2.0 * delta / (n_terms * k_loc)


class ConstraintSpace:
    """Constraint rows of one (model, basis, discount) triple.

    Also keeps the term structure the MCMC oracle needs: for each variable,
    the basis functions and reward factors whose value it can change.
    """

    def __init__(self, mdp: HybridMDP, basis: Sequence[BasisFunction], gamma: float):
        if not (0 <= gamma < 1):
            raise ContractError("discount must lie in [0, 1)")
        self.mdp = mdp
        self.basis = tuple(basis)
        self.gamma = gamma
        self.names = mdp.state_names + mdp.action_names
        self.depends: list[frozenset[str]] = [
            frozenset(f.scope) | frozenset(children_parents(mdp, f)) for f in self.basis]
        self.local_basis = {v: np.array([i for i, d in enumerate(self.depends) if v in d], dtype=int)
                            for v in self.names}
        self.local_rewards = {v: [r for r in mdp.rewards if v in r.scope] for v in self.names}

    @property
    def size(self) -> int:
        return len(self.basis)

    def rows(self, env: Mapping[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """(F, R) with F of shape (B, K) and R of shape (B,)."""
        shape = batch_shape(env)
        F = constraint_rows(self.basis, self.mdp, self.gamma, env)
        R = np.zeros(shape)
        for r in self.mdp.rewards:
            R = R + r.expr(env)
        return F, R

    def tau(self, w: np.ndarray, env: Mapping[str, np.ndarray]) -> np.ndarray:
        F, R = self.rows(env)
        return R - F @ np.asarray(w, dtype=float)

    def local_tau(self, w: np.ndarray, var: str, env: Mapping[str, np.ndarray]) -> np.ndarray:
        """Part of tau that depends on ``var``; differences match full tau."""
        shape = batch_shape(env)
        out = np.zeros(shape)
        for r in self.local_rewards[var]:
            out = out + r.expr(env)
        idx = self.local_basis[var]
        idx = idx[np.asarray(w)[idx] != 0]
        if idx.size:
            F = constraint_rows([self.basis[i] for i in idx], self.mdp, self.gamma, env)
            out = out - F @ np.asarray(w, dtype=float)[idx]
        return out

    def uniform(self, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        env = {}
        for v in self.mdp.states + self.mdp.actions:
            if v.continuous:
                env[v.name] = rng.random(n)
            else:
                env[v.name] = rng.integers(0, v.size, n).astype(float)
        return env

    def materialize(self, env: Mapping[str, np.ndarray], source: str = "",
                    rows: tuple[np.ndarray, np.ndarray] | None = None) -> list[Constraint]:
        F, R = self.rows(env) if rows is None else rows
        out = []
        states, actions = self.mdp.state_names, self.mdp.action_names
        for j in range(len(R)):
            out.append(Constraint(
                coefficients=F[j].copy(), rhs=float(R[j]),
                state={s: float(env[s][j]) for s in states},
                action={a: float(env[a][j]) for a in actions},
                source=source))
        return out


def _as_space(mdp, basis, gamma) -> ConstraintSpace:
    if isinstance(mdp, ConstraintSpace):
        return mdp
    return ConstraintSpace(mdp, basis, gamma)


def violation(w, mdp: HybridMDP, basis, gamma: float, x, a) -> np.ndarray:
    """tau^w(x, a); positive means the constraint is violated."""
    env = {**x, **a}
    return ConstraintSpace(mdp, basis, gamma).tau(w, env)


def _violated(space: ConstraintSpace, w, env, source: str) -> list[Constraint]:
    F, R = space.rows(env)
    tau = R - F @ np.asarray(w, dtype=float)
    keep = np.flatnonzero(tau > VIOLATION_TOL)
    keep = keep[np.argsort(-tau[keep], kind="stable")]
    sub = {k: np.asarray(v)[keep] for k, v in env.items()}
    return space.materialize(sub, source, (F[keep], R[keep]))


def oracle_mc(cfg: MCConfig, w, mdp, basis, gamma: float,
              rng: np.random.Generator) -> list[Constraint]:
    """Violated constraints among N i.i.d. proposal samples, most violated first."""
    space = _as_space(mdp, basis, gamma)
    env = (cfg.proposal(cfg.samples, rng) if cfg.proposal is not None
           else space.uniform(cfg.samples, rng))
    return _violated(space, w, env, "mc")


class EpsOracle:
    """Most violated constraint on an epsilon grid, by variable elimination.

    The per-term tables are built once and reused across weight vectors.
    """

    def __init__(self, cfg: EpsConfig, mdp, basis=None, gamma: float | None = None):
        self.space = _as_space(mdp, basis, gamma)
        levels = uniform_grid(cfg.eps)
        grid = {v.name: levels for v in self.space.mdp.states + self.space.mdp.actions
                if v.continuous}
        self.tables = ViolationTables(self.space.mdp, self.space.basis, self.space.gamma, grid)

    def most_violated(self, w) -> tuple[float, dict[str, float]]:
        """(max tau on the grid, maximizing assignment as variable values)."""
        result = eliminate_argmin(self.tables.network(w))
        return -result.value, self.tables.assignment_values(result.assignment)

    def __call__(self, w) -> list[Constraint]:
        _, point = self.most_violated(w)
        env = {k: np.array([v]) for k, v in point.items()}
        return _violated(self.space, w, env, "eps")


def oracle_eps(cfg: EpsConfig, w, mdp, basis, gamma: float) -> Constraint | None:
    found = EpsOracle(cfg, mdp, basis, gamma)(w)
    return found[0] if found else None


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=-1, keepdims=True)


def gibbs_conditional(space: ConstraintSpace, w, var: str, env) -> np.ndarray:
    """p(z | rest) proportional to exp(tau) over the values of a discrete variable."""
    size = space.mdp.levels(var)
    n = len(next(iter(env.values())))
    rep = {k: np.repeat(np.asarray(v, dtype=float), size) for k, v in env.items()}
    rep[var] = np.tile(np.arange(size, dtype=float), n)
    return _softmax_rows(space.local_tau(w, var, rep).reshape(n, size))


@dataclass
class ChainTrace:
    """States visited by the chains (one array per variable, per sweep)."""

    states: list[dict[str, np.ndarray]] = field(default_factory=list)
    tau: list[np.ndarray] = field(default_factory=list)


def run_chains(cfg: MCMCConfig, w, space: ConstraintSpace,
               rng: np.random.Generator) -> ChainTrace:
    """Annealed Gibbs sampling of p(z) proportional to exp(tau^w(z)), all chains batched."""
    w = np.asarray(w, dtype=float)
    n = cfg.chains
    state = space.uniform(n, rng)
    tau = space.tau(w, state)
    trace = ChainTrace([{k: v.copy() for k, v in state.items()}], [tau.copy()])
    rows = np.arange(n)
    for t in range(cfg.sweeps):
        inv_t = 1.0 / float(temperature(t, cfg.temp_c))
        for var in space.names:
            current = space.local_tau(w, var, state)
            variable = space.mdp.variables[var]
            if variable.continuous:
                k = cfg.inner_steps
                cand = rng.random((n, k))
                rep = {key: np.repeat(val, k) for key, val in state.items()}
                rep[var] = cand.ravel()
                cand_tau = space.local_tau(w, var, rep).reshape(n, k)
                log_u = np.log(rng.random((n, k)))
                z, z_tau = state[var].copy(), current.copy()
                for s in range(k):
                    accept = log_u[:, s] < cand_tau[:, s] - z_tau
                    z = np.where(accept, cand[:, s], z)
                    z_tau = np.where(accept, cand_tau[:, s], z_tau)
            else:
                size = variable.size
                rep = {key: np.repeat(val, size) for key, val in state.items()}
                rep[var] = np.tile(np.arange(size, dtype=float), n)
                all_tau = space.local_tau(w, var, rep).reshape(n, size)
                cum = np.cumsum(_softmax_rows(all_tau), axis=1)
                pick = np.minimum((rng.random(n)[:, None] >= cum[:, :-1]).sum(axis=1), size - 1)
                z = pick.astype(float)
                z_tau = all_tau[rows, pick]
            delta = z_tau - current
            accept = np.log(rng.random(n)) < (inv_t - 1.0) * delta
            state[var] = np.where(accept, z, state[var])
            tau = tau + np.where(accept, delta, 0.0)
        trace.states.append({k: v.copy() for k, v in state.items()})
        trace.tau.append(tau.copy())
    return trace


def oracle_mcmc(cfg: MCMCConfig, w, mdp, basis, gamma: float,
                rng: np.random.Generator) -> list[Constraint]:
    """Violated constraints among all states visited by annealed chains."""
    space = _as_space(mdp, basis, gamma)
    trace = run_chains(cfg, w, space, rng)
    taus = np.concatenate(trace.tau)
    keep = np.flatnonzero(taus > 0.5 * VIOLATION_TOL)
    if keep.size == 0:
        return []
    env = {k: np.concatenate([s[k] for s in trace.states])[keep] for k in space.names}
    # drop repeated visits before materializing
    keys = np.round(np.stack([env[k] for k in space.names], axis=1), 9)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    env = {k: v[first] for k, v in env.items()}
    return _violated(space, w, env, "mcmc")


def make_oracle(cfg, mdp, basis, gamma: float,
                rng: np.random.Generator | None = None) -> Callable[[np.ndarray], list[Constraint]]:
    """Bind an oracle configuration to a problem: returns w -> constraints."""
    space = _as_space(mdp, basis, gamma)
    if isinstance(cfg, EpsConfig):
        return EpsOracle(cfg, space)
    if rng is None:
        raise ContractError("sampling oracles need a random generator")
    if isinstance(cfg, MCConfig):
        return lambda w: oracle_mc(cfg, w, space, None, gamma, rng)
    if isinstance(cfg, MCMCConfig):
        return lambda w: oracle_mcmc(cfg, w, space, None, gamma, rng)
    raise ContractError(f"unknown oracle configuration {cfg!r}")
