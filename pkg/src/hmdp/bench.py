"""Benchmark generators: network administration and irrigation networks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import BasisFunction, Monomial, PwlFactor
from .errors import ContractError
from .expr import Add, Clamp, Const, Expr, Ind, Min, Mul, Normal, Pow, Table, Var
from .model import (BetaComponent, BetaMixtureFactor, DiscriminantFactor, HybridMDP,
                    RewardFactor, Variable)

GAMMA = 0.95


# ---------------------------------------------------------------------------
# topologies

@dataclass(frozen=True)
class RingAdmin:
    """n computers in a ring; computer i is influenced by its predecessor."""

    n: int = 4


@dataclass(frozen=True)
class DiscreteRingAdmin:
    n: int = 2


@dataclass(frozen=True)
class IrrigationRing:
    n: int = 6


@dataclass(frozen=True)
class IrrigationRingOfRings:
    n: int = 6


@dataclass(frozen=True)
class IrrigationGrid:
    rows: int = 3
    cols: int = 3


Topology = "RingAdmin | DiscreteRingAdmin | IrrigationRing | IrrigationRingOfRings | IrrigationGrid"


# ---------------------------------------------------------------------------
# network administration

def _pred(i: int, n: int) -> int:
    return n if i == 1 else i - 1


def make_ring_admin(n: int = 4, gamma: float = GAMMA) -> HybridMDP:
    """Continuous network administration on a ring of n computers.

    x_i in [0, 1] is the fraction of processes of computer i running.  The
    single action reboots one computer (values 0..n-1) or does nothing
    (value n).  A rebooted computer moves to Beta(20, 2); otherwise its
    state drifts by Beta(2 + 13 x_i - 5 x_i x_p, 10 - 2 x_i - 6 x_i x_p)
    where p is its predecessor.
    """
    if n < 2:
        raise ContractError("a ring needs at least two computers")
    states = tuple(Variable(f"x{i}") for i in range(1, n + 1))
    transitions = []
    for i in range(1, n + 1):
        xi, xp = Var(f"x{i}"), Var(f"x{_pred(i, n)}")
        reboot = Ind("a", i - 1)
        keep = 1.0 - reboot
        alpha = 20.0 * reboot + keep * (2.0 + 13.0 * xi - 5.0 * xi * xp)
        beta = 2.0 * reboot + keep * (10.0 - 2.0 * xi - 6.0 * xi * xp)
        transitions.append(BetaMixtureFactor(
            f"x{i}", tuple(sorted({f"x{i}", f"x{_pred(i, n)}", "a"})),
            (BetaComponent(1.0, alpha, beta),)))
    rewards = [RewardFactor(("x1",), 2.0 * Pow(Var("x1"), 2))]
    rewards += [RewardFactor((f"x{j}",), Pow(Var(f"x{j}"), 2)) for j in range(2, n + 1)]
    return HybridMDP(states, (Variable("a", n + 1),), tuple(transitions), tuple(rewards),
                     gamma, r_max=float(n + 1), name=f"ring-admin-{n}")


def ring_admin_basis(n: int = 4) -> tuple[BasisFunction, ...]:
    """Constant, x_i for every computer, x_i x_j for every ring edge."""
    basis = [BasisFunction.constant()]
    basis += [BasisFunction((Monomial(f"x{i}"),), label=f"x{i}") for i in range(1, n + 1)]
    edges = sorted({tuple(sorted((i, i % n + 1))) for i in range(1, n + 1)})
    basis += [BasisFunction((Monomial(f"x{i}"), Monomial(f"x{j}")), label=f"x{i}*x{j}")
              for i, j in edges]
    return tuple(basis)


# probabilities of "up" equal the modes of the continuous transitions
_REBOOT_UP, _DOWN_UP, _LONE_UP, _PAIR_UP = 0.95, 0.1, 2.0 / 3.0, 0.9


def make_discrete_ring_admin(n: int = 2, gamma: float = GAMMA) -> HybridMDP:
    """Binary network administration with up-probabilities from the beta modes."""
    if n < 2:
        raise ContractError("a ring needs at least two computers")
    states = tuple(Variable(f"x{i}", 2) for i in range(1, n + 1))
    transitions = []
    for i in range(1, n + 1):
        xi, xp = Var(f"x{i}"), Var(f"x{_pred(i, n)}")
        reboot = Ind("a", i - 1)
        drift = _DOWN_UP + xi * (_LONE_UP - _DOWN_UP) + xi * xp * (_PAIR_UP - _LONE_UP)
        up = _REBOOT_UP * reboot + (1.0 - reboot) * drift
        transitions.append(DiscriminantFactor(
            f"x{i}", tuple(sorted({f"x{i}", f"x{_pred(i, n)}", "a"})), (1.0 - up, up)))
    rewards = [RewardFactor(("x1",), Table("x1", (0.0, 2.0)))]
    rewards += [RewardFactor((f"x{j}",), Table(f"x{j}", (0.0, 1.0))) for j in range(2, n + 1)]
    return HybridMDP(states, (Variable("a", n + 1),), tuple(transitions), tuple(rewards),
                     gamma, r_max=float(n + 1), name=f"discrete-ring-admin-{n}")


def discrete_ring_admin_basis(n: int = 2) -> tuple[BasisFunction, ...]:
    return (BasisFunction.constant(),) + tuple(
        BasisFunction.indicator(f"x{i}", 2, 1) for i in range(1, n + 1))


# ---------------------------------------------------------------------------
# irrigation networks

_INFLOW = 0.1
_MAX_FLOW = 1.0 / 3.0
_SHARPNESS = 46.0
_KNOTS = (0.0, 0.4, 0.55, 1.0)


@dataclass(frozen=True)
class IrrigationLayout:
    """Devices connected by directed channels.

    Inflow devices only emit water (a fixed amount per step), outflow
    devices only absorb it.  Every other device is controlled: mode 0
    idles, and each further mode routes water from one inbound channel
    into one outbound channel.
    """

    channels: tuple[tuple[int, int], ...]
    inflow: tuple[int, ...]
    outflow: tuple[int, ...]

    @property
    def devices(self) -> tuple[int, ...]:
        return tuple(sorted({d for c in self.channels for d in c}))

    @property
    def internal(self) -> tuple[int, ...]:
        return tuple(d for d in self.devices if d not in self.inflow and d not in self.outflow)

    @property
    def controlled(self) -> tuple[int, ...]:
        return self.internal

    def inbound(self, d: int) -> list[tuple[int, int]]:
        return [c for c in self.channels if c[1] == d]

    def outbound(self, d: int) -> list[tuple[int, int]]:
        return [c for c in self.channels if c[0] == d]

    def modes(self, d: int) -> list[tuple[int, int] | None]:
        """Mode 0 (None) idles; mode (h, j) routes channel h->d into d->j."""
        return [None] + [(h, j) for h, _ in self.inbound(d) for _, j in self.outbound(d)]

    def routes(self, d: int, h: int, j: int) -> Expr:
        """1 when device d routes h->d->j, as an expression of its action."""
        return Ind(f"A{d}", self.modes(d).index((h, j)))

    @property
    def n_outflow_channels(self) -> int:
        return sum(1 for c in self.channels if c[1] in self.outflow)


def channel_name(c: tuple[int, int]) -> str:
    return f"x{c[0]}_{c[1]}"


def _loop_tail(body: list[tuple[int, int]], first: int, last: int, n: int) -> IrrigationLayout:
    j1, src, sink, j2 = n + 1, n + 2, n + 3, n + 4
    chans = body + [(last, j1), (j1, j2), (j2, first), (src, j1), (j2, sink)]
    return IrrigationLayout(tuple(chans), (src,), (sink,))


def irrigation_layout(topology) -> IrrigationLayout:
    if isinstance(topology, IrrigationRing):
        n = topology.n
        if n < 2:
            raise ContractError("ring needs at least two devices")
        body = [(k, k + 1) for k in range(1, n)]
        return _loop_tail(body, 1, n, n)
    if isinstance(topology, IrrigationRingOfRings):
        n = topology.n
        if n < 3 or n % 3:
            raise ContractError("ring of rings needs a positive multiple of three devices")
        body = []
        for g in range(n // 3):
            a, b, c = 3 * g + 1, 3 * g + 2, 3 * g + 3
            body += [(a, b), (b, c), (a, c)]
            if g + 1 < n // 3:
                body.append((c, c + 1))
        return _loop_tail(body, 1, n, n)
    if isinstance(topology, IrrigationGrid):
        r, c = topology.rows, topology.cols
        if r < 1 or c < 1:
            raise ContractError("grid needs positive dimensions")
        ident = lambda i, j: i * c + j + 1
        chans = []
        for i in range(r):
            for j in range(c):
                if j + 1 < c:
                    chans.append((ident(i, j), ident(i, j + 1)))
                if i + 1 < r:
                    chans.append((ident(i, j), ident(i + 1, j)))
        inflow = tuple(r * c + 1 + j for j in range(c))
        outflow = tuple(r * c + c + 1 + j for j in range(c))
        chans += [(inflow[j], ident(0, j)) for j in range(c)]
        chans += [(ident(r - 1, j), outflow[j]) for j in range(c)]
        return IrrigationLayout(tuple(chans), inflow, outflow)
    raise ContractError(f"not an irrigation topology: {topology!r}")


def _gaussian_reward(x: Expr) -> Expr:
    return Add((Mul((Const(1 / 25.6), Normal(x, 0.4, 0.025))),
                Mul((Const(1 / 32.0), Normal(x, 0.55, 0.05)))))


def channel_reward(x):
    """Two-Gaussian reward of a non-draining channel at level x."""
    return (np.exp(-0.5 * ((x - 0.4) / 0.025) ** 2) / (0.025 * math.sqrt(2 * math.pi)) / 25.6
            + np.exp(-0.5 * ((x - 0.55) / 0.05) ** 2) / (0.05 * math.sqrt(2 * math.pi)) / 32.0)


@lru_cache(maxsize=None)
def gaussian_reward_max() -> float:
    x = np.linspace(0.0, 1.0, 200_001)
    return float(channel_reward(x).max()) + 1e-6


def make_irrigation(topology, gamma: float = GAMMA) -> HybridMDP:
    """Irrigation network: channel water levels in [0, 1], one action per device.

    A routing device in mode (h, j) moves min(x_{h->d}, 1/3) of water from
    channel h->d into d->j (capped by the free capacity).  Inflow devices
    add 0.1 per step, outflow devices drain their channel.  The next level
    is Beta(46 mu + 2, 46 (1 - mu) + 2) around the resulting level mu.
    Draining channels pay 2 x; every other channel pays a two-Gaussian
    reward that prefers levels near 0.4 and 0.55.
    """
    layout = irrigation_layout(topology)
    states = tuple(Variable(channel_name(c)) for c in layout.channels)
    actions = tuple(Variable(f"A{d}", len(layout.modes(d))) for d in layout.controlled)
    transitions = []
    for c in layout.channels:
        i, j = c
        x = Var(channel_name(c))
        parents = {channel_name(c)}
        # water leaving through device j
        if j in layout.outflow:
            leaving: Expr = Min((x, Const(1.0)))
        else:
            terms = [layout.routes(j, i, k) * Min((x, Const(_MAX_FLOW)))
                     for _, k in layout.outbound(j)]
            leaving = Add(tuple(terms)) if terms else Const(0.0)
            if j in layout.controlled:
                parents.add(f"A{j}")
        mu = x - leaving
        # water arriving through device i
        if i in layout.inflow:
            arriving: Expr = Min((1.0 - mu, Const(_INFLOW)))
        else:
            terms = []
            for h, _ in layout.inbound(i):
                feed = Var(channel_name((h, i)))
                parents.add(channel_name((h, i)))
                terms.append(layout.routes(i, h, j)
                             * Min((1.0 - mu, Min((feed, Const(_MAX_FLOW))))))
            arriving = Add(tuple(terms)) if terms else Const(0.0)
            if i in layout.controlled:
                parents.add(f"A{i}")
        level = Clamp(mu + arriving, 0.0, 1.0)
        transitions.append(BetaMixtureFactor(
            channel_name(c), tuple(sorted(parents)),
            (BetaComponent(1.0, _SHARPNESS * level + 2.0,
                           _SHARPNESS * (1.0 - level) + 2.0),)))
    rewards, r_max = [], 0.0
    for c in layout.channels:
        x = Var(channel_name(c))
        if c[1] in layout.outflow:
            rewards.append(RewardFactor((channel_name(c),), 2.0 * x))
            r_max += 2.0
        else:
            rewards.append(RewardFactor((channel_name(c),), _gaussian_reward(x)))
            r_max += gaussian_reward_max()
    return HybridMDP(states, actions, tuple(transitions), tuple(rewards), gamma,
                     r_max=r_max, name=f"irrigation-{_topology_id(topology)}")


def hat_factors(var: str) -> tuple[PwlFactor, ...]:
    """Triangular hat functions on the knots 0, 0.4, 0.55, 1."""
    out = []
    for m, k in enumerate(_KNOTS):
        segs = []
        if m > 0:
            lo = _KNOTS[m - 1]
            segs.append((lo, k, 1.0 / (k - lo), -lo / (k - lo)))
        if m + 1 < len(_KNOTS):
            hi = _KNOTS[m + 1]
            segs.append((k, hi, -1.0 / (hi - k), hi / (hi - k)))
        out.append(PwlFactor(var, tuple(segs)))
    return tuple(out)


def irrigation_basis(topology) -> tuple[BasisFunction, ...]:
    """Constant plus four hat functions per channel."""
    layout = irrigation_layout(topology)
    basis = [BasisFunction.constant()]
    for c in layout.channels:
        name = channel_name(c)
        for k, fac in zip(_KNOTS, hat_factors(name)):
            basis.append(BasisFunction((fac,), label=f"hat{k}({name})"))
    return tuple(basis)


# ---------------------------------------------------------------------------
# registry

def _topology_id(topology) -> str:
    if isinstance(topology, IrrigationRing):
        return f"ring{topology.n}"
    if isinstance(topology, IrrigationRingOfRings):
        return f"ror{topology.n}"
    if isinstance(topology, IrrigationGrid):
        return f"grid{topology.rows}x{topology.cols}"
    return str(topology)


def make(topology, gamma: float = GAMMA) -> tuple[HybridMDP, tuple[BasisFunction, ...]]:
    """Model and default basis for a topology."""
    if isinstance(topology, RingAdmin):
        return make_ring_admin(topology.n, gamma), ring_admin_basis(topology.n)
    if isinstance(topology, DiscreteRingAdmin):
        return make_discrete_ring_admin(topology.n, gamma), discrete_ring_admin_basis(topology.n)
    return make_irrigation(topology, gamma), irrigation_basis(topology)


def parse_benchmark(name: str):
    """Builtin ids: ring4, ring-admin-N, discrete-ringN, irrigation-ringN,
    irrigation-rorN, irrigation-gridRxC."""
    import re

    table = [
        (r"ring(\d+)$", lambda m: RingAdmin(int(m[1]))),
        (r"ring-admin-(\d+)$", lambda m: RingAdmin(int(m[1]))),
        (r"discrete-ring(\d+)$", lambda m: DiscreteRingAdmin(int(m[1]))),
        (r"irrigation-ring(\d+)$", lambda m: IrrigationRing(int(m[1]))),
        (r"irrigation-ror(\d+)$", lambda m: IrrigationRingOfRings(int(m[1]))),
        (r"irrigation-grid(\d+)x(\d+)$", lambda m: IrrigationGrid(int(m[1]), int(m[2]))),
    ]
    for pattern, build in table:
        m = re.match(pattern, name)
        if m:
            return build(m)
    raise ContractError(f"unknown benchmark {name!r}")


def heuristic(kind: str, topology):
    """Baseline policies: 'dummy', 'random' or 'server' (ring administration only)."""
    from .policy import DummyPolicy, FixedPolicy, RandomPolicy

    admin = isinstance(topology, (RingAdmin, DiscreteRingAdmin))
    if kind == "random":
        return RandomPolicy()
    if kind == "dummy":
        if admin:
            return DummyPolicy({"a": topology.n})
        layout = irrigation_layout(topology)
        return DummyPolicy({f"A{d}": 0 for d in layout.controlled})
    if kind == "server":
        if not admin:
            raise ContractError("the server heuristic exists only for network administration")
        return FixedPolicy({"a": 0})
    raise ContractError(f"unknown heuristic {kind!r}")


def expectation_demo() -> tuple[float, float, float]:
    """E[f(x2')] on the 4-ring at x = (0, 1, 0, 0) with the server rebooted.

    x2' is then Beta(15, 8); f is x^4, Beta(x | 2, 6) and a tent on [0.3, 0.7].
    """
    from .basis import BetaFactor, Monomial, backproject

    mdp = make_ring_admin(4)
    x = {"x1": 0.0, "x2": 1.0, "x3": 0.0, "x4": 0.0}
    a = {"a": 0.0}
    tent = PwlFactor("x2", ((0.3, 0.5, 5.0, -1.5), (0.5, 0.7, -5.0, 3.5)))
    factors = (Monomial("x2", 4, 0), BetaFactor("x2", 2.0, 6.0), tent)
    return tuple(float(backproject(BasisFunction((f,)), mdp, x, a)) for f in factors)
