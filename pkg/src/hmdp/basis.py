"""Factored basis functions, linear value functions and their expectations.

A basis function is a product of univariate continuous factors (monomial,
beta density or piecewise linear) times an optional table over discrete
state variables.  Backprojection computes E[f(X') | x, a] in closed form by
pairing each factor with the transition factor of its variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate
from scipy import special as sp

from . import special
from .errors import CapabilityError, ContractError, DomainError
from .model import (Assignment, BetaMixtureFactor, DiscriminantFactor, HybridMDP,
                    batch_shape)
from .special import Segment


@dataclass(frozen=True)
class Monomial:
    """x^n (1 - x)^m."""

    var: str
    n: int = 1
    m: int = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x ** self.n * (1.0 - x) ** self.m

    def expect(self, alpha, beta):
        return special.expect_monomial(alpha, beta, self.n, self.m)


@dataclass(frozen=True)
class BetaFactor:
    """Beta(x | alpha, beta) density used as a basis factor."""

    var: str
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("beta factor parameters must be positive")

    def __call__(self, x):
        return special.beta_pdf(x, self.alpha, self.beta)

    def expect(self, alpha, beta):
        return special.expect_beta_pdf(alpha, beta, self.alpha, self.beta)


@dataclass(frozen=True)
class PwlFactor:
    """sum_i I[l_i, r_i](x) (slope_i x + intercept_i)."""

    var: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        special.check_segments(self.segments)

    def __call__(self, x):
        return special.pwl_eval(x, self.segments)

    def expect(self, alpha, beta):
        return special.expect_pwl(alpha, beta, self.segments)


Factor = "Monomial | BetaFactor | PwlFactor"


@dataclass(frozen=True)
class BasisFunction:
    """Product of continuous factors and a table over discrete variables.

    ``table`` is flattened in C order over ``discrete_vars`` with the given
    ``shape``; an empty basis function is the constant 1.
    """

    factors: tuple = ()
    discrete_vars: tuple[str, ...] = ()
    shape: tuple[int, ...] = ()
    table: tuple[float, ...] = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        names = [f.var for f in self.factors]
        if len(set(names)) != len(names):
            raise ContractError("basis function has two factors on one variable")
        if set(names) & set(self.discrete_vars):
            raise ContractError("variable used as both continuous and discrete factor")
        if len(self.shape) != len(self.discrete_vars):
            raise ContractError("table shape does not match discrete variables")
        if self.discrete_vars and len(self.table) != int(np.prod(self.shape)):
            raise ContractError("table size does not match its shape")

    @property
    def scope(self) -> tuple[str, ...]:
        return tuple(f.var for f in self.factors) + self.discrete_vars

    @property
    def table_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=float).reshape(self.shape)

    @classmethod
    def constant(cls) -> "BasisFunction":
        return cls(label="1")

    @classmethod
    def indicator(cls, var: str, size: int, value: int) -> "BasisFunction":
        table = [0.0] * size
        table[value] = 1.0
        return cls(discrete_vars=(var,), shape=(size,), table=tuple(table),
                   label=f"[{var}={value}]")


def evaluate(f: BasisFunction, x: Assignment) -> np.ndarray:
    """f(x); broadcasts over array-valued assignments."""
    shape = batch_shape({k: x[k] for k in f.scope if k in x}) if f.scope else ()
    out = np.ones(shape)
    for fac in f.factors:
        if fac.var not in x:
            raise ContractError(f"assignment is missing variable {fac.var!r}")
        out = out * fac(x[fac.var])
    if f.discrete_vars:
        idx = []
        for v in f.discrete_vars:
            if v not in x:
                raise ContractError(f"assignment is missing variable {v!r}")
            idx.append(np.asarray(x[v]).astype(int))
        out = out * f.table_array[tuple(idx)]
    return out


@dataclass(frozen=True)
class LinearValueFunction:
    basis: tuple[BasisFunction, ...]
    weights: np.ndarray

    def __post_init__(self):
        if len(self.basis) != len(np.asarray(self.weights)):
            raise ContractError("one weight per basis function required")


def value(v: LinearValueFunction, x: Assignment) -> np.ndarray:
    out = 0.0
    for f, w in zip(v.basis, np.asarray(v.weights, dtype=float)):
        if w:
            out = out + w * evaluate(f, x)
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# backprojection

def children_parents(mdp: HybridMDP, f: BasisFunction) -> tuple[str, ...]:
    """Union of parents of the transition factors of f's variables (sorted)."""
    out: set[str] = set()
    for c in f.scope:
        out.update(mdp.transition(c).parents)
    return tuple(sorted(out))


@lru_cache(maxsize=4096)
def _pwl_plan(factors: tuple[PwlFactor, ...]):
    """Union knots and per-interval slope/intercept matrices for PWL factors."""
    knots = tuple(sorted({u for f in factors for seg in f.segments for u in seg[:2]}))
    m = len(knots) - 1
    slopes = np.zeros((max(m, 0), len(factors)))
    icpts = np.zeros_like(slopes)
    for j, f in enumerate(factors):
        for left, right, slope, icpt in f.segments:
            for i in range(m):
                if knots[i] >= left and knots[i + 1] <= right:
                    slopes[i, j] += slope
                    icpts[i, j] += icpt
    return knots, slopes, icpts


class _Backprojector:
    """Caches transition parameters per child within one batch evaluation."""

    def __init__(self, mdp: HybridMDP, env: Assignment):
        self.mdp = mdp
        self.env = env
        self.shape = batch_shape(env)
        self._params: dict[str, list] = {}
        self._probs: dict[str, np.ndarray] = {}
        self._factor_cache: dict[object, np.ndarray] = {}

    def params(self, child: str):
        if child not in self._params:
            fac = self.mdp.transition(child)
            if not isinstance(fac, BetaMixtureFactor):
                raise CapabilityError(
                    f"no closed-form expectation for a continuous factor on {child!r}, "
                    "whose transition is a discriminant table")
            self._params[child] = fac.params(self.env)
        return self._params[child]

    def probs(self, child: str) -> np.ndarray:
        if child not in self._probs:
            fac = self.mdp.transition(child)
            if not isinstance(fac, DiscriminantFactor):
                raise CapabilityError(
                    f"no closed-form expectation for a table factor on {child!r}, "
                    "whose transition is a beta mixture")
            self._probs[child] = fac.probs(self.env)
        return self._probs[child]

    def _knot_integrals(self, child: str, knots: tuple[float, ...]):
        """Per interval [k_m, k_m+1]: E[x 1{..}] and P(..), summed over components."""
        first, second = 0.0, 0.0
        for w, a, b in self.params(child):
            cdf = np.empty(self.shape + (len(knots),))
            cdf_plus = np.empty_like(cdf)
            log_norm = np.log(a) + sp.betaln(a, b)
            for m, u in enumerate(knots):
                if u <= 0.0:
                    cdf[..., m] = cdf_plus[..., m] = 0.0
                elif u >= 1.0:
                    cdf[..., m] = cdf_plus[..., m] = 1.0
                else:
                    # I_u(a + 1, b) = I_u(a, b) - u^a (1 - u)^b / (a B(a, b))
                    cdf[..., m] = sp.betainc(a, b, u)
                    cdf_plus[..., m] = cdf[..., m] - np.exp(
                        a * math.log(u) + b * math.log1p(-u) - log_norm)
            mean = (a / (a + b))[..., None]
            first = first + w * mean * np.diff(cdf_plus, axis=-1)
            second = second + w * np.diff(cdf, axis=-1)
        return first, second

    def prepare_pwl(self, factors: Sequence[PwlFactor]) -> None:
        """Expectations of many PWL factors on one child in two matrix products."""
        todo = [f for f in dict.fromkeys(factors) if f not in self._factor_cache]
        by_child: dict[str, list[PwlFactor]] = {}
        for f in todo:
            by_child.setdefault(f.var, []).append(f)
        for child, facs in by_child.items():
            knots, slopes, icpts = _pwl_plan(tuple(facs))
            first, second = self._knot_integrals(child, knots)
            values = first @ slopes + second @ icpts
            for j, f in enumerate(facs):
                self._factor_cache[f] = values[..., j]

    def factor(self, fac) -> np.ndarray:
        if fac not in self._factor_cache:
            if isinstance(fac, PwlFactor):
                self.prepare_pwl([fac])
                return self._factor_cache[fac]
            else:
                total = 0.0
                for w, a, b in self.params(fac.var):
                    total = total + w * fac.expect(a, b)
            self._factor_cache[fac] = np.broadcast_to(total, self.shape)
        return self._factor_cache[fac]

    def __call__(self, f: BasisFunction) -> np.ndarray:
        out = np.ones(self.shape)
        for fac in f.factors:
            out = out * self.factor(fac)
        if f.discrete_vars:
            probs = [self.probs(v) for v in f.discrete_vars]
            table = f.table_array
            res = np.broadcast_to(table, self.shape + table.shape)
            nd = len(f.discrete_vars)
            for d, p in enumerate(probs):
                expand = [slice(None)] * len(self.shape) + [None] * nd
                expand[len(self.shape) + d] = slice(None)
                res = res * p[tuple(expand)]
            out = out * res.reshape(self.shape + (-1,)).sum(axis=-1)
        return out


def backproject(f: BasisFunction, mdp: HybridMDP, x: Assignment, a: Assignment) -> np.ndarray:
    """g(x, a) = E[f(X') | x, a]."""
    return _Backprojector(mdp, {**x, **a})(f)


def backproject_many(basis: Sequence[BasisFunction], mdp: HybridMDP,
                     env: Assignment) -> np.ndarray:
    """Stack of backprojections, shape batch + (K,)."""
    bp = _Backprojector(mdp, env)
    bp.prepare_pwl([fac for f in basis for fac in f.factors if isinstance(fac, PwlFactor)])
    return np.stack([bp(f) for f in basis], axis=-1)


def evaluate_many(basis: Sequence[BasisFunction], env: Assignment) -> np.ndarray:
    shape = batch_shape(env)
    return np.stack([np.broadcast_to(evaluate(f, env), shape) for f in basis], axis=-1)


def constraint_coefficient(f: BasisFunction, mdp: HybridMDP, gamma: float,
                           x: Assignment, a: Assignment) -> np.ndarray:
    """F(x, a) = f(x) - gamma g(x, a)."""
    env = {**x, **a}
    shape = batch_shape(env)
    return np.broadcast_to(evaluate(f, env), shape) - gamma * _Backprojector(mdp, env)(f)


def constraint_rows(basis: Sequence[BasisFunction], mdp: HybridMDP, gamma: float,
                    env: Assignment) -> np.ndarray:
    """All F_i at once, shape batch + (K,)."""
    return evaluate_many(basis, env) - gamma * backproject_many(basis, mdp, env)


# ---------------------------------------------------------------------------
# state relevance densities

@dataclass(frozen=True)
class BetaDensity:
    alpha: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class PwlDensity:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        special.check_segments(self.segments)
        vals = [special.pwl_eval(np.array([l, r, 0.5 * (l + r)]), self.segments)
                for l, r, _, _ in self.segments]
        if any(np.any(v < -1e-12) for v in vals):
            raise ContractError("piecewise-linear density is negative")
        mass = _integrate_pwl_product(self.segments, ((0.0, 1.0, 0.0, 1.0),))
        if abs(mass - 1.0) > 1e-9:
            raise ContractError(f"piecewise-linear density integrates to {mass:.12g}")


@dataclass(frozen=True)
class StateRelevanceDensity:
    """Mixture of products of univariate densities.

    Each component is (weight, {continuous var: density}, {discrete var:
    probabilities}); variables not mentioned are uniform.
    """

    components: tuple = ((1.0, (), ()),)

    @classmethod
    def uniform(cls) -> "StateRelevanceDensity":
        return cls()

    def __post_init__(self):
        weights = [c[0] for c in self.components]
        if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-9:
            raise ContractError("relevance mixture weights must be non-negative and sum to 1")
        for _, _, disc in self.components:
            for name, probs in disc:
                if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
                    raise ContractError(f"discrete relevance marginal of {name!r} is not a distribution")


def _integrate_pwl_product(s1: Sequence[Segment], s2: Sequence[Segment]) -> float:
    """Exact integral over [0, 1] of the product of two PWL functions."""
    total = 0.0
    for l1, r1, a1, b1 in s1:
        for l2, r2, a2, b2 in s2:
            lo, hi = max(l1, l2), min(r1, r2)
            if hi <= lo:
                continue
            # (a1 x + b1)(a2 x + b2) = a1 a2 x^2 + (a1 b2 + a2 b1) x + b1 b2
            c2, c1, c0 = a1 * a2, a1 * b2 + a2 * b1, b1 * b2
            total += (c2 * (hi ** 3 - lo ** 3) / 3 + c1 * (hi ** 2 - lo ** 2) / 2
                      + c0 * (hi - lo))
    return total


def _density_expectation(fac, density) -> float:
    if isinstance(density, BetaDensity):
        return float(fac.expect(density.alpha, density.beta))
    if not isinstance(density, PwlDensity):
        raise CapabilityError(f"unsupported relevance density {density!r}")
    if isinstance(fac, PwlFactor):
        return _integrate_pwl_product(fac.segments, density.segments)
    total = 0.0
    for left, right, slope, icpt in density.segments:
        if isinstance(fac, Monomial):
            n, m = fac.n, fac.m
            # int (slope x + icpt) x^n (1-x)^m over [l, r] via incomplete betas
            for coef, k in ((slope, n + 1), (icpt, n)):
                if coef:
                    beta_fn = math.exp(sp.betaln(k + 1, m + 1))
                    total += coef * beta_fn * (sp.betainc(k + 1, m + 1, right)
                                               - sp.betainc(k + 1, m + 1, left))
        elif isinstance(fac, BetaFactor):
            af, bf = fac.alpha, fac.beta
            if slope:
                total += slope * af / (af + bf) * (sp.betainc(af + 1, bf, right)
                                                   - sp.betainc(af + 1, bf, left))
            if icpt:
                total += icpt * (sp.betainc(af, bf, right) - sp.betainc(af, bf, left))
        else:
            raise CapabilityError(f"unsupported factor {fac!r}")
    return total


def relevance_weight(f: BasisFunction, psi: StateRelevanceDensity) -> float:
    """E_psi[f(x)] in closed form."""
    total = 0.0
    for weight, cont, disc in psi.components:
        cont_d = dict(cont)
        disc_d = dict(disc)
        term = weight
        for fac in f.factors:
            term *= _density_expectation(fac, cont_d.get(fac.var, BetaDensity()))
        if f.discrete_vars:
            res = f.table_array
            for v, size in zip(f.discrete_vars, f.shape):
                p = np.asarray(disc_d.get(v, np.full(size, 1.0 / size)), dtype=float)
                res = np.tensordot(res, p, axes=([0], [0]))
            term *= float(res)
        total += term
    return total


def relevance_weight_quadrature(f: BasisFunction, psi: StateRelevanceDensity,
                                sizes: Mapping[str, int]) -> float:
    """Independent check of :func:`relevance_weight` by adaptive quadrature."""
    total = 0.0
    for weight, cont, disc in psi.components:
        cont_d, disc_d = dict(cont), dict(disc)
        term = weight
        for fac in f.factors:
            dens = cont_d.get(fac.var, BetaDensity())
            if isinstance(dens, BetaDensity):
                pdf = lambda x, d=dens: float(special.beta_pdf(x, d.alpha, d.beta))
            else:
                pdf = lambda x, d=dens: float(special.pwl_eval(x, d.segments))
            val, _ = integrate.quad(lambda x: float(fac(x)) * pdf(x), 0.0, 1.0,
                                    limit=200, points=[0.25, 0.5, 0.75])
            term *= val
        if f.discrete_vars:
            grids = np.meshgrid(*[np.arange(sizes[v]) for v in f.discrete_vars], indexing="ij")
            prob = np.ones(grids[0].shape)
            for v, g in zip(f.discrete_vars, grids):
                p = np.asarray(disc_d.get(v, np.full(sizes[v], 1.0 / sizes[v])))
                prob = prob * p[g]
            term *= float((f.table_array * prob).sum())
        total += term
    return total
