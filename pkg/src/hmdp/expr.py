"""Small expression trees for transition parameters and reward terms.

Expressions evaluate vectorized over a mapping ``name -> array``; every leaf
broadcasts, so a batch of B assignments yields a length-B array.  Trees
serialize to a prefix S-expression (``(add (mul 13.0 x1) 2.0)``) and parse
back to an equal tree; floats are written with ``repr`` so the round trip is
exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import ContractError

Env = Mapping[str, "np.ndarray | float | int"]
Number = Union[int, float]


def _lookup(env: Env, name: str) -> np.ndarray:
    try:
        return np.asarray(env[name], dtype=float)
    except KeyError:
        raise ContractError(f"assignment is missing variable {name!r}") from None


class Expr:
    """Base class; subclasses are frozen dataclasses."""

    def __call__(self, env: Env) -> np.ndarray:
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        raise NotImplementedError

    def to_prefix(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_prefix()

    # operator sugar for building models in code
    def __add__(self, other):
        return Add((self, lift(other)))

    def __radd__(self, other):
        return Add((lift(other), self))

    def __sub__(self, other):
        return Sub(self, lift(other))

    def __rsub__(self, other):
        return Sub(lift(other), self)

    def __mul__(self, other):
        return Mul((self, lift(other)))

    def __rmul__(self, other):
        return Mul((lift(other), self))

    def __neg__(self):
        return Mul((Const(-1.0), self))


def lift(value: "Expr | Number") -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Const(float(value))
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __call__(self, env):
        return np.asarray(self.value, dtype=float)

    def variables(self):
        return frozenset()

    def to_prefix(self):
        return _fmt(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __call__(self, env):
        return _lookup(env, self.name)

    def variables(self):
        return frozenset({self.name})

    def to_prefix(self):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    args: tuple[Expr, ...]

    def __call__(self, env):
        out = self.args[0](env)
        for a in self.args[1:]:
            out = out + a(env)
        return out

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def to_prefix(self):
        return "(add " + " ".join(a.to_prefix() for a in self.args) + ")"


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def __call__(self, env):
        return self.left(env) - self.right(env)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def to_prefix(self):
        return f"(sub {self.left.to_prefix()} {self.right.to_prefix()})"


@dataclass(frozen=True)
class Mul(Expr):
    args: tuple[Expr, ...]

    def __call__(self, env):
        out = self.args[0](env)
        for a in self.args[1:]:
            out = out * a(env)
        return out

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def to_prefix(self):
        return "(mul " + " ".join(a.to_prefix() for a in self.args) + ")"


@dataclass(frozen=True)
class Min(Expr):
    args: tuple[Expr, ...]

    def __call__(self, env):
        out = self.args[0](env)
        for a in self.args[1:]:
            out = np.minimum(out, a(env))
        return out

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def to_prefix(self):
        return "(min " + " ".join(a.to_prefix() for a in self.args) + ")"


@dataclass(frozen=True)
class Max(Expr):
    args: tuple[Expr, ...]

    def __call__(self, env):
        out = self.args[0](env)
        for a in self.args[1:]:
            out = np.maximum(out, a(env))
        return out

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def to_prefix(self):
        return "(max " + " ".join(a.to_prefix() for a in self.args) + ")"


@dataclass(frozen=True)
class Ind(Expr):
    """1 where the discrete variable equals ``value``, else 0."""

    name: str
    value: int

    def __call__(self, env):
        return (_lookup(env, self.name) == self.value).astype(float)

    def variables(self):
        return frozenset({self.name})

    def to_prefix(self):
        return f"(ind {self.name} {int(self.value)})"


@dataclass(frozen=True)
class Clamp(Expr):
    arg: Expr
    lo: float = 0.0
    hi: float = 1.0

    def __call__(self, env):
        return np.clip(self.arg(env), self.lo, self.hi)

    def variables(self):
        return self.arg.variables()

    def to_prefix(self):
        return f"(clamp {self.arg.to_prefix()} {_fmt(self.lo)} {_fmt(self.hi)})"


@dataclass(frozen=True)
class Pow(Expr):
    arg: Expr
    n: int

    def __call__(self, env):
        return self.arg(env) ** self.n

    def variables(self):
        return self.arg.variables()

    def to_prefix(self):
        return f"(pow {self.arg.to_prefix()} {int(self.n)})"


@dataclass(frozen=True)
class Normal(Expr):
    """Gaussian density N(arg | mu, sigma)."""

    arg: Expr
    mu: float
    sigma: float

    def __call__(self, env):
        z = (self.arg(env) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def variables(self):
        return self.arg.variables()

    def to_prefix(self):
        return f"(normal {self.arg.to_prefix()} {_fmt(self.mu)} {_fmt(self.sigma)})"


@dataclass(frozen=True)
class Table(Expr):
    """Lookup ``values[d]`` indexed by a discrete variable."""

    name: str
    values: tuple[float, ...]

    def __call__(self, env):
        idx = _lookup(env, self.name).astype(int)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.values)):
            raise ContractError(f"value of {self.name!r} out of range for table")
        return np.asarray(self.values, dtype=float)[idx]

    def variables(self):
        return frozenset({self.name})

    def to_prefix(self):
        return f"(table {self.name} " + " ".join(_fmt(v) for v in self.values) + ")"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")
_NARY = {"add": Add, "mul": Mul, "min": Min, "max": Max}


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ContractError(f"cannot tokenize expression at {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _number(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ContractError(f"expected a number, got {tok!r}") from None


def parse(text: str) -> Expr:
    """Parse a prefix S-expression produced by :meth:`Expr.to_prefix`."""
    tokens = _tokenize(text)
    if not tokens:
        raise ContractError("empty expression")
    expr, pos = _parse(tokens, 0)
    if pos != len(tokens):
        raise ContractError(f"trailing tokens in expression: {tokens[pos:]}")
    return expr


def _parse(tokens: list[str], pos: int) -> tuple[Expr, int]:
    tok = tokens[pos]
    if tok == ")":
        raise ContractError("unbalanced ')' in expression")
    if tok != "(":
        if _IDENT.match(tok) and tok not in ("inf", "nan"):
            return Var(tok), pos + 1
        return Const(_number(tok)), pos + 1
    if pos + 1 >= len(tokens):
        raise ContractError("unterminated expression")
    head = tokens[pos + 1]
    pos += 2
    raw: list[object] = []
    while True:
        if pos >= len(tokens):
            raise ContractError("unterminated expression")
        if tokens[pos] == ")":
            pos += 1
            break
        if tokens[pos] == "(":
            sub, pos = _parse(tokens, pos)
            raw.append(sub)
        else:
            raw.append(tokens[pos])
            pos += 1

    def as_expr(item: object) -> Expr:
        if isinstance(item, Expr):
            return item
        return _parse([str(item)], 0)[0]

    if head in _NARY:
        if not raw:
            raise ContractError(f"({head}) needs at least one argument")
        return _NARY[head](tuple(as_expr(r) for r in raw)), pos
    if head == "sub" and len(raw) == 2:
        return Sub(as_expr(raw[0]), as_expr(raw[1])), pos
    if head == "ind" and len(raw) == 2:
        return Ind(str(raw[0]), int(raw[1])), pos
    if head == "clamp" and len(raw) == 3:
        return Clamp(as_expr(raw[0]), _number(str(raw[1])), _number(str(raw[2]))), pos
    if head == "pow" and len(raw) == 2:
        return Pow(as_expr(raw[0]), int(raw[1])), pos
    if head == "normal" and len(raw) == 3:
        return Normal(as_expr(raw[0]), _number(str(raw[1])), _number(str(raw[2]))), pos
    if head == "table" and len(raw) >= 1:
        return Table(str(raw[0]), tuple(_number(str(r)) for r in raw[1:])), pos
    raise ContractError(f"unknown operator or arity: ({head} ... {len(raw)} args)")
