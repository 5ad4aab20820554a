"""Cost networks over discrete (or discretized) variables.

A cost network is a sum of table factors.  ``eliminate_argmin`` minimizes
that sum by bucket elimination along an ordering and recovers a minimizing
assignment by a backward pass; ties go to the smallest level index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, ResourceError

DEFAULT_MEMORY_CAP = 2 ** 26  # table entries


@dataclass(frozen=True)
class TableFactor:
    scope: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if np.ndim(self.values) != len(self.scope):
            raise ContractError(f"table of rank {np.ndim(self.values)} for scope {self.scope}")
        if len(set(self.scope)) != len(self.scope):
            raise ContractError(f"repeated variable in scope {self.scope}")


@dataclass
class CostNetwork:
    levels: dict[str, int]
    factors: list[TableFactor]

    def __post_init__(self):
        for f in self.factors:
            for v, k in zip(f.scope, np.shape(f.values)):
                if v not in self.levels:
                    raise ContractError(f"factor uses unknown variable {v!r}")
                if self.levels[v] != k:
                    raise ContractError(f"factor axis for {v!r} has {k} levels, "
                                        f"expected {self.levels[v]}")

    def total(self, assignment: Mapping[str, int]) -> float:
        """Sum of all factors at an assignment of level indices."""
        return float(sum(f.values[tuple(int(assignment[v]) for v in f.scope)]
                         for f in self.factors))


@dataclass(frozen=True)
class EliminationOrder:
    order: tuple[str, ...]
    width: int


def interaction_graph(net: CostNetwork) -> dict[str, set[str]]:
    graph: dict[str, set[str]] = {v: set() for v in net.levels}
    for f in net.factors:
        for u, v in itertools.combinations(f.scope, 2):
            graph[u].add(v)
            graph[v].add(u)
    return graph


def induced_width(net: CostNetwork, order: Sequence[str]) -> int:
    """Largest neighbor count of a variable at the moment it is eliminated."""
    graph = {v: set(n) for v, n in interaction_graph(net).items()}
    if sorted(order) != sorted(graph):
        raise ContractError("ordering must contain every variable exactly once")
    width = 0
    for v in order:
        nbrs = graph.pop(v)
        width = max(width, len(nbrs))
        for u in nbrs:
            graph[u].discard(v)
            graph[u].update(nbrs - {u})
    return width


def min_degree_order(net: CostNetwork) -> EliminationOrder:
    """Greedy minimum-degree ordering; ties broken by variable name."""
    graph = {v: set(n) for v, n in interaction_graph(net).items()}
    order, width = [], 0
    while graph:
        v = min(graph, key=lambda u: (len(graph[u]), u))
        nbrs = graph.pop(v)
        width = max(width, len(nbrs))
        for u in nbrs:
            graph[u].discard(v)
            graph[u].update(nbrs - {u})
        order.append(v)
    return EliminationOrder(tuple(order), width)


def _aligned(f: TableFactor, scope: Sequence[str]) -> np.ndarray:
    """View f.values broadcastable against a table over ``scope``."""
    perm = sorted(range(len(f.scope)), key=lambda i: scope.index(f.scope[i]))
    vals = np.transpose(f.values, perm)
    shape = [1] * len(scope)
    for i in perm:
        shape[scope.index(f.scope[i])] = f.values.shape[i]
    return vals.reshape(shape)


@dataclass
class EliminationResult:
    value: float
    assignment: dict[str, int]
    width: int


def eliminate_argmin(net: CostNetwork, order: EliminationOrder | None = None,
                     memory_cap: int = DEFAULT_MEMORY_CAP) -> EliminationResult:
    """min over assignments of the factor sum, with a minimizing assignment."""
    if order is None:
        order = min_degree_order(net)
    pending: list[TableFactor] = list(net.factors)
    constant = 0.0
    trace: list[tuple[str, tuple[str, ...], np.ndarray]] = []
    width = 0
    for v in order.order:
        bucket = [f for f in pending if v in f.scope]
        pending = [f for f in pending if v not in f.scope]
        scope_set = set().union(*(f.scope for f in bucket)) if bucket else {v}
        rest = tuple(sorted(scope_set - {v}))
        width = max(width, len(rest))
        scope = (v,) + rest
        size = int(np.prod([net.levels[u] for u in scope]))
        if size > memory_cap:
            raise ResourceError(f"eliminating {v!r} needs a table of {size} entries "
                                f"(cap {memory_cap})")
        combined = np.zeros([net.levels[u] for u in scope])
        for f in bucket:
            combined = combined + _aligned(f, list(scope))
        trace.append((v, rest, np.argmin(combined, axis=0)))
        reduced = combined.min(axis=0)
        if rest:
            pending.append(TableFactor(rest, reduced))
        else:
            constant += float(reduced)
    for f in pending:  # factors with empty scope
        constant += float(np.asarray(f.values))
    if width != order.width:
        raise AssertionError(f"recorded width {width} differs from ordering width {order.width}")
    assignment: dict[str, int] = {}
    for v, rest, arg in reversed(trace):
        idx = tuple(assignment[u] for u in rest)
        assignment[v] = int(arg[idx])
    return EliminationResult(constant, assignment, width)


def enumerate_argmin(net: CostNetwork, cap: int = 10 ** 7) -> EliminationResult:
    """Brute-force minimum, first minimizer in lexicographic level order."""
    names = list(net.levels)
    total = int(np.prod([net.levels[v] for v in names]))
    if total > cap:
        raise ResourceError(f"{total} assignments exceed enumeration cap {cap}")
    table = np.zeros([net.levels[v] for v in names])
    for f in net.factors:
        table = table + _aligned(f, names)
    flat = int(np.argmin(table))
    idx = np.unravel_index(flat, table.shape)
    return EliminationResult(float(table.ravel()[flat]),
                             {v: int(i) for v, i in zip(names, idx)}, width=-1)


def to_dot(net: CostNetwork, name: str = "costnet") -> str:
    """Interaction graph in Graphviz DOT format."""
    graph = interaction_graph(net)
    lines = [f"graph {name} {{"]
    for v in net.levels:
        lines.append(f'  "{v}";')
    for u in sorted(graph):
        for v in sorted(graph[u]):
            if u < v:
                lines.append(f'  "{u}" -- "{v}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def random_network(rng: np.random.Generator, n_vars: int, n_factors: int,
                   max_levels: int = 3, max_scope: int = 3) -> CostNetwork:
    """Random network for testing; variable names v00, v01, ..."""
    levels = {f"v{i:02d}": int(rng.integers(1, max_levels + 1)) for i in range(n_vars)}
    names = list(levels)
    factors = []
    for _ in range(n_factors):
        k = int(rng.integers(0, min(max_scope, n_vars) + 1))
        scope = tuple(rng.choice(names, size=k, replace=False)) if k else ()
        shape = [levels[v] for v in scope]
        factors.append(TableFactor(tuple(str(s) for s in scope), rng.normal(size=shape)))
    return CostNetwork(levels, factors)


# ---------------------------------------------------------------------------
# violation networks

class ViolationTables:
    """Per-term tables of F_i = f_i - gamma g_i and R_j on a discretization.

    The tables do not depend on the weights, so one instance serves every
    cutting-plane iteration.  ``grid`` maps each continuous variable to its
    levels; discrete variables use their natural values.
    """

    def __init__(self, mdp, basis, gamma: float, grid: Mapping[str, np.ndarray],
                 memory_cap: int = DEFAULT_MEMORY_CAP):
        from .basis import children_parents, constraint_rows

        self.mdp = mdp
        self.basis = tuple(basis)
        self.gamma = gamma
        self.values: dict[str, np.ndarray] = {}
        for var in mdp.states + mdp.actions:
            if var.continuous:
                if var.name not in grid:
                    raise ContractError(f"no grid levels for continuous {var.name!r}")
                self.values[var.name] = np.asarray(grid[var.name], dtype=float)
            else:
                self.values[var.name] = np.arange(var.size, dtype=float)
        self.levels = {v: len(vals) for v, vals in self.values.items()}

        groups: dict[tuple[str, ...], list[int]] = {}
        for i, f in enumerate(self.basis):
            scope = tuple(sorted(set(f.scope) | set(children_parents(mdp, f))))
            groups.setdefault(scope, []).append(i)
        self.basis_tables: list[tuple[tuple[str, ...], np.ndarray, np.ndarray]] = []
        for scope, idx in groups.items():
            env = self._mesh(scope, memory_cap)
            rows = constraint_rows([self.basis[i] for i in idx], mdp, gamma, env)
            shape = [self.levels[v] for v in scope]
            self.basis_tables.append((scope, rows.reshape(shape + [len(idx)]), np.array(idx)))
        self.reward_tables: list[TableFactor] = []
        for r in mdp.rewards:
            scope = tuple(sorted(set(r.scope)))
            env = self._mesh(scope, memory_cap)
            shape = [self.levels[v] for v in scope]
            vals = np.broadcast_to(r.expr(env), (int(np.prod(shape)),)).reshape(shape)
            self.reward_tables.append(TableFactor(scope, np.array(vals, dtype=float)))

    def _mesh(self, scope: Sequence[str], memory_cap: int) -> dict[str, np.ndarray]:
        size = int(np.prod([self.levels[v] for v in scope]))
        if size > memory_cap:
            raise ResourceError(f"table over {scope} needs {size} entries (cap {memory_cap})")
        axes = np.meshgrid(*[self.values[v] for v in scope], indexing="ij")
        return {v: a.ravel() for v, a in zip(scope, axes)}

    def network(self, w: np.ndarray, sign: float = -1.0) -> CostNetwork:
        """Network summing to sign * tau(x, a), tau = R - sum_i w_i F_i.

        With the default sign the minimum corresponds to the most violated
        constraint.
        """
        w = np.asarray(w, dtype=float)
        factors = []
        for scope, table, idx in self.basis_tables:
            factors.append(TableFactor(scope, -sign * (table @ w[idx])))
        for t in self.reward_tables:
            factors.append(TableFactor(t.scope, sign * t.values))
        return CostNetwork(dict(self.levels), factors)

    def assignment_values(self, assignment: Mapping[str, int]) -> dict[str, float]:
        """Map level indices back to variable values."""
        return {v: float(self.values[v][i]) for v, i in assignment.items()}


def build_violation_network(w, mdp, gamma: float, basis, grid: Mapping[str, np.ndarray],
                            sign: float = -1.0) -> CostNetwork:
    return ViolationTables(mdp, basis, gamma, grid).network(w, sign)


def uniform_grid(eps: float) -> np.ndarray:
    """Levels {0, eps, 2 eps, ..., 1}: ceil(1/eps) + 1 points including both ends."""
    if not (0 < eps <= 1):
        raise ContractError("grid resolution must lie in (0, 1]")
    n = int(np.ceil(1.0 / eps - 1e-9))
    return np.linspace(0.0, 1.0, n + 1)


def condition_network(net: CostNetwork, fixed: Mapping[str, int] | None = None,
                      tol: float = 0.0) -> CostNetwork:
    """Fix some variables to levels, then drop table axes that do not matter.

    An axis is dropped when the table is constant along it (up to ``tol``),
    so a factor whose dependence vanishes under the assignment no longer
    adds edges to the interaction graph.
    """
    fixed = dict(fixed or {})
    for v, k in fixed.items():
        if v not in net.levels or not (0 <= k < net.levels[v]):
            raise ContractError(f"cannot fix {v!r} to level {k}")
    factors = []
    for f in net.factors:
        vals = np.asarray(f.values, dtype=float)
        scope = list(f.scope)
        index = tuple(fixed.get(v, slice(None)) for v in scope)
        vals = vals[index]
        scope = [v for v in scope if v not in fixed]
        axis = 0
        while axis < len(scope):
            first = np.take(vals, [0], axis=axis)
            if np.all(np.abs(vals - first) <= tol):
                vals = np.take(vals, 0, axis=axis)
                del scope[axis]
            else:
                axis += 1
        factors.append(TableFactor(tuple(scope), vals))
    levels = {v: k for v, k in net.levels.items() if v not in fixed}
    return CostNetwork(levels, factors)


def constraint_network(mdp, basis, gamma: float, eps: float,
                       fixed: Mapping[str, int] | None = None, tol: float = 1e-12) -> CostNetwork:
    """Structure of the violation function on an eps grid with all weights 1.

    Each basis function keeps its own table so that pruning cannot be fooled
    by cancellations between terms.
    """
    grid = {v.name: uniform_grid(eps) for v in mdp.states + mdp.actions if v.continuous}
    tables = ViolationTables(mdp, basis, gamma, grid)
    factors = []
    for scope, table, idx in tables.basis_tables:
        for j in range(len(idx)):
            factors.append(TableFactor(scope, table[..., j]))
    factors.extend(tables.reward_tables)
    return condition_network(CostNetwork(dict(tables.levels), factors), fixed, tol)


def project_structure(net: CostNetwork, keep) -> CostNetwork:
    """Interaction structure restricted to ``keep``; tables are zero placeholders.

    Used to measure widths in a subset of variables (e.g. the continuous
    ones), where the other variables are treated as context.
    """
    keep = set(keep)
    levels = {v: k for v, k in net.levels.items() if v in keep}
    factors = []
    for f in net.factors:
        scope = tuple(v for v in f.scope if v in keep)
        factors.append(TableFactor(scope, np.zeros([levels[v] for v in scope])))
    return CostNetwork(levels, factors)
