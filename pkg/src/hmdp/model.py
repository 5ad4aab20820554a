"""Hybrid factored MDPs with beta-mixture and discriminant transitions.

A model is an immutable bundle of state/action variables, one transition
factor per state variable, additive reward factors and a discount factor.
Assignments are plain mappings from variable names to scalars or length-B
arrays; every function here is vectorized over the batch axis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, ModelEvaluationError
from .expr import Expr

Assignment = Mapping[str, "np.ndarray | float | int"]


@dataclass(frozen=True)
class Variable:
    """A continuous variable on [0, 1] (``size is None``) or a discrete one."""

    name: str
    size: int | None = None

    @property
    def continuous(self) -> bool:
        return self.size is None


@dataclass(frozen=True)
class BetaComponent:
    weight: float
    alpha: Expr
    beta: Expr


@dataclass(frozen=True)
class BetaMixtureFactor:
    """P(x' | parents) = sum_j w_j Beta(x' | alpha_j(parents), beta_j(parents))."""

    child: str
    parents: tuple[str, ...]
    components: tuple[BetaComponent, ...]

    def params(self, env: Assignment) -> list[tuple[float, np.ndarray, np.ndarray]]:
        shape = batch_shape(env)
        out = []
        for k, comp in enumerate(self.components):
            a = np.broadcast_to(comp.alpha(env), shape).astype(float)
            b = np.broadcast_to(comp.beta(env), shape).astype(float)
            for label, val in (("alpha", a), ("beta", b)):
                if val.min(initial=1.0) > 0 and val.max(initial=1.0) < np.inf:
                    continue
                bad = ~(val > 0) | ~np.isfinite(val)
                if np.any(bad):
                    i = int(np.flatnonzero(bad.ravel())[0])
                    raise ModelEvaluationError(
                        f"transition of {self.child!r}, component {k}: "
                        f"{label} = {val.ravel()[i]!r} is not a positive number"
                    )
            out.append((comp.weight, a, b))
        return out


@dataclass(frozen=True)
class DiscriminantFactor:
    """P(x' = j | parents) = theta_j(parents) / sum_k theta_k(parents)."""

    child: str
    parents: tuple[str, ...]
    discriminants: tuple[Expr, ...]

    def probs(self, env: Assignment) -> np.ndarray:
        shape = batch_shape(env)
        theta = np.stack([np.broadcast_to(d(env), shape).astype(float)
                          for d in self.discriminants], axis=-1)
        if np.any(theta < 0) or not np.all(np.isfinite(theta)):
            raise ModelEvaluationError(f"negative or non-finite discriminant for {self.child!r}")
        total = theta.sum(axis=-1, keepdims=True)
        if np.any(total <= 0):
            raise ModelEvaluationError(f"discriminants of {self.child!r} sum to zero")
        return theta / total


TransitionFactor = "BetaMixtureFactor | DiscriminantFactor"


@dataclass(frozen=True)
class RewardFactor:
    scope: tuple[str, ...]
    expr: Expr


@dataclass(frozen=True)
class HybridMDP:
    states: tuple[Variable, ...]
    actions: tuple[Variable, ...]
    transitions: tuple  # of BetaMixtureFactor | DiscriminantFactor
    rewards: tuple[RewardFactor, ...]
    discount: float
    r_max: float | None = None
    initial: Mapping[str, float] = field(default_factory=dict)
    name: str = "hmdp"

    @cached_property
    def variables(self) -> dict[str, Variable]:
        return {v.name: v for v in self.states + self.actions}

    @cached_property
    def state_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.states)

    @cached_property
    def action_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.actions)

    @cached_property
    def factor_of(self) -> dict[str, object]:
        return {f.child: f for f in self.transitions}

    def transition(self, child: str):
        try:
            return self.factor_of[child]
        except KeyError:
            raise ContractError(f"no transition factor for {child!r}") from None

    def levels(self, name: str) -> int:
        size = self.variables[name].size
        if size is None:
            raise ContractError(f"{name!r} is continuous")
        return size

    @property
    def v_max(self) -> float:
        if self.r_max is None:
            raise ContractError("model has no reward bound r_max")
        return self.r_max / (1.0 - self.discount)


def batch_shape(env: Assignment) -> tuple[int, ...]:
    shapes = {np.shape(v) for v in env.values()}
    if len(shapes) == 1:
        return shapes.pop()
    return np.broadcast_shapes(*shapes) if shapes else ()


def _check_assignment(mdp: HybridMDP, env: Assignment, names: Sequence[str]) -> None:
    for n in names:
        if n not in env:
            raise ContractError(f"assignment is missing variable {n!r}")
        var = mdp.variables[n]
        val = np.asarray(env[n])
        if var.continuous:
            if np.any((val < 0) | (val > 1)) or np.any(np.isnan(val)):
                raise ContractError(f"continuous variable {n!r} outside [0, 1]")
        elif np.any((val < 0) | (val >= var.size) | (val != np.round(val))):
            raise ContractError(f"discrete variable {n!r} outside 0..{var.size - 1}")


def reward(mdp: HybridMDP, x: Assignment, a: Assignment) -> np.ndarray:
    """Additive reward R(x, a) = sum_j R_j(x_j, a_j)."""
    env = {**x, **a}
    _check_assignment(mdp, env, mdp.state_names + mdp.action_names)
    shape = batch_shape(env)
    total = np.zeros(shape)
    for r in mdp.rewards:
        total = total + r.expr(env)
    return total


def sample_transition(mdp: HybridMDP, x: Assignment, a: Assignment,
                      rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Draw x' ~ P(. | x, a); variables are sampled in declaration order."""
    env = {**x, **a}
    _check_assignment(mdp, env, mdp.state_names + mdp.action_names)
    shape = batch_shape(env)
    out: dict[str, np.ndarray] = {}
    for var in mdp.states:
        fac = mdp.transition(var.name)
        if isinstance(fac, DiscriminantFactor):
            p = fac.probs(env)
            u = rng.random(shape)
            cum = np.cumsum(p, axis=-1)
            idx = (u[..., None] >= cum[..., :-1]).sum(axis=-1)
            out[var.name] = idx.astype(float)
            continue
        params = fac.params(env)
        if len(params) == 1:
            _, alpha, beta = params[0]
        else:
            weights = np.array([w for w, _, _ in params])
            pick = rng.choice(len(params), size=shape, p=weights / weights.sum())
            alpha = np.choose(pick, [p[1] for p in params])
            beta = np.choose(pick, [p[2] for p in params])
        g1 = rng.standard_gamma(alpha)
        g2 = rng.standard_gamma(beta)
        with np.errstate(invalid="ignore"):
            draw = g1 / (g1 + g2)
        out[var.name] = np.where(np.isfinite(draw), draw, alpha / (alpha + beta))
    return out


def initial_states(mdp: HybridMDP, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """n draws from the initial distribution: uniform unless overridden."""
    out = {}
    for var in mdp.states:
        if var.name in mdp.initial:
            out[var.name] = np.full(n, float(mdp.initial[var.name]))
        elif var.continuous:
            out[var.name] = rng.random(n)
        else:
            out[var.name] = rng.integers(0, var.size, n).astype(float)
    return out


# ---------------------------------------------------------------------------
# validation

_CORNERS = (0.0, 0.5, 1.0)
_RANDOM_PROBES = 1000
_CORNER_CAP = 100_000


def _corner_grid(mdp: HybridMDP, names: Sequence[str]) -> dict[str, np.ndarray] | None:
    axes = []
    for n in names:
        var = mdp.variables[n]
        axes.append(_CORNERS if var.continuous else tuple(range(var.size)))
    count = math.prod(len(a) for a in axes)
    if count > _CORNER_CAP:
        return None
    if not axes:
        return {}
    mesh = np.array(list(itertools.product(*axes)), dtype=float).T
    return {n: mesh[i] for i, n in enumerate(names)}


def _random_probe(mdp: HybridMDP, rng: np.random.Generator) -> dict[str, np.ndarray]:
    env = {}
    for var in mdp.states + mdp.actions:
        if var.continuous:
            env[var.name] = rng.random(_RANDOM_PROBES)
        else:
            env[var.name] = rng.integers(0, var.size, _RANDOM_PROBES).astype(float)
    return env


def _describe(env: Mapping[str, np.ndarray], i: int) -> str:
    return "{" + ", ".join(f"{k}={float(np.ravel(v)[i]):g}" for k, v in env.items()) + "}"


def _probe_factor(fac, env, where: str) -> list[str]:
    problems = []
    if not env:
        return problems
    if isinstance(fac, BetaMixtureFactor):
        for k, comp in enumerate(fac.components):
            for label, ex in (("alpha", comp.alpha), ("beta", comp.beta)):
                val = np.broadcast_to(ex(env), batch_shape(env))
                bad = np.flatnonzero(~(val > 0) | ~np.isfinite(val))
                if bad.size:
                    problems.append(
                        f"{fac.child}: non-positive beta parameter {label} in component {k} "
                        f"at {where} {_describe(env, int(bad[0]))}"
                    )
    else:
        for j, d in enumerate(fac.discriminants):
            val = np.broadcast_to(d(env), batch_shape(env))
            bad = np.flatnonzero(~(val >= 0) | ~np.isfinite(val))
            if bad.size:
                problems.append(f"{fac.child}: negative discriminant {j} at {where} "
                                f"{_describe(env, int(bad[0]))}")
        total = sum(np.broadcast_to(d(env), batch_shape(env)) for d in fac.discriminants)
        bad = np.flatnonzero(~(np.asarray(total) > 0))
        if bad.size:
            problems.append(f"{fac.child}: discriminants sum to zero at {where} "
                            f"{_describe(env, int(bad[0]))}")
    return problems


def validate(mdp: HybridMDP, seed: int = 0) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    problems: list[str] = []
    names = [v.name for v in mdp.states + mdp.actions]
    for n in sorted({n for n in names if names.count(n) > 1}):
        problems.append(f"duplicate variable name {n!r}")
    for v in mdp.states + mdp.actions:
        if v.size is not None and v.size < 2:
            problems.append(f"discrete variable {v.name!r} needs at least 2 values")
    if not mdp.actions:
        problems.append("model declares no action variables")
    if not (0.0 <= mdp.discount < 1.0):
        problems.append(f"discount factor {mdp.discount} outside [0, 1)")
    declared = set(names)

    children = [f.child for f in mdp.transitions]
    for s in mdp.states:
        count = children.count(s.name)
        if count == 0:
            problems.append(f"missing transition factor for {s.name!r}")
        elif count > 1:
            problems.append(f"duplicate transition factor for {s.name!r}")
    for c in children:
        if c not in {s.name for s in mdp.states}:
            problems.append(f"transition factor for undeclared state {c!r}")

    structurally_ok = []
    for fac in mdp.transitions:
        ok = True
        undeclared = set(fac.parents) - declared
        if undeclared:
            problems.append(f"{fac.child}: undeclared parents {sorted(undeclared)}")
            ok = False
        exprs = ([c.alpha for c in fac.components] + [c.beta for c in fac.components]
                 if isinstance(fac, BetaMixtureFactor) else list(fac.discriminants))
        used = frozenset().union(*(e.variables() for e in exprs)) if exprs else frozenset()
        if not used <= set(fac.parents):
            problems.append(f"{fac.child}: expression reads {sorted(used - set(fac.parents))} "
                            "outside its declared parents")
            ok = False
        child_var = mdp.variables.get(fac.child)
        if isinstance(fac, BetaMixtureFactor):
            if child_var is not None and not child_var.continuous:
                problems.append(f"{fac.child}: beta mixture on a discrete variable")
                ok = False
            weights = [c.weight for c in fac.components]
            if not weights or min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-9:
                problems.append(f"{fac.child}: mixture weights must be non-negative and sum to 1")
        else:
            if child_var is not None and child_var.size != len(fac.discriminants):
                problems.append(f"{fac.child}: {len(fac.discriminants)} discriminants for "
                                f"{child_var.size} values")
                ok = False
        if ok:
            structurally_ok.append(fac)

    good_rewards = []
    for j, r in enumerate(mdp.rewards):
        undeclared = set(r.scope) - declared
        used = r.expr.variables()
        if undeclared:
            problems.append(f"reward {j}: undeclared scope variables {sorted(undeclared)}")
        elif not used <= set(r.scope):
            problems.append(f"reward {j}: reads {sorted(used - set(r.scope))} outside its scope")
        else:
            good_rewards.append(r)

    if problems:
        return problems

    for fac in structurally_ok:
        corners = _corner_grid(mdp, fac.parents)
        if corners is not None:
            problems += _probe_factor(fac, corners, "corner")
    rng = np.random.default_rng(seed)
    env = _random_probe(mdp, rng)
    for fac in structurally_ok:
        problems += _probe_factor(fac, env, "random probe")

    total = np.zeros(_RANDOM_PROBES)
    for r in good_rewards:
        val = np.broadcast_to(r.expr(env), (_RANDOM_PROBES,))
        if not np.all(np.isfinite(val)):
            problems.append(f"reward over {r.scope}: non-finite value")
        total = total + val
    if np.any(total < -1e-12):
        i = int(np.argmin(total))
        problems.append(f"negative total reward {total[i]:g} at {_describe(env, i)}")
    if mdp.r_max is not None and np.any(total > mdp.r_max + 1e-9):
        i = int(np.argmax(total))
        problems.append(f"total reward {total[i]:g} exceeds r_max {mdp.r_max:g}")
    corners = _corner_grid(mdp, names)
    if corners is not None:
        tot = sum((np.broadcast_to(r.expr(corners), batch_shape(corners)) for r in good_rewards),
                  np.zeros(batch_shape(corners)))
        if np.any(tot < -1e-12):
            problems.append(f"negative total reward at corner {_describe(corners, int(np.argmin(tot)))}")
        if mdp.r_max is not None and np.any(tot > mdp.r_max + 1e-9):
            problems.append(f"total reward exceeds r_max at corner "
                            f"{_describe(corners, int(np.argmax(tot)))}")
    return problems
