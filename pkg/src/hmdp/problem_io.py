"""JSON problem files and solution archives.

A problem document has the sections ``variables``, ``actions``,
``transitions``, ``rewards``, ``discount`` and optionally ``basis``,
``r_max``, ``initial`` and ``name``.  Expressions are stored as prefix
strings (see :mod:`hmdp.expr`) and floats as JSON numbers, both written
with ``repr`` precision, so a load/dump cycle is bit-exact.

Schema (all keys required unless noted)::

    {"name": str,                                   # optional
     "discount": float,
     "r_max": float | null,                         # optional
     "variables": [{"name": str, "size": int | null}, ...],
     "actions":   [{"name": str, "size": int}, ...],
     "transitions": [
        {"kind": "beta-mixture", "child": str, "parents": [str, ...],
         "components": [{"weight": float, "alpha": expr, "beta": expr}, ...]},
        {"kind": "discriminant", "child": str, "parents": [str, ...],
         "discriminants": [expr, ...]}],
     "rewards": [{"scope": [str, ...], "expr": expr}, ...],
     "initial": {str: float},                       # optional
     "basis": [{"label": str,                       # optional section
                "factors": [{"kind": "monomial", "var": str, "n": int, "m": int}
                            | {"kind": "beta", "var": str, "alpha": float, "beta": float}
                            | {"kind": "pwl", "var": str, "segments": [[l, r, slope, icpt], ...]}],
                "discrete": {"vars": [str, ...], "shape": [int, ...], "table": [float, ...]}}]}
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .basis import BasisFunction, BetaFactor, Monomial, PwlFactor
from .errors import ContractError
from .expr import parse
from .model import (BetaComponent, BetaMixtureFactor, DiscriminantFactor, HybridMDP,
                    RewardFactor, Variable)

FORMAT = "hmdp-problem/1"
ARCHIVE_FORMAT = "hmdp-solution/1"


def _variable(v: Variable) -> dict:
    return {"name": v.name, "size": v.size}


def _transition(f) -> dict:
    if isinstance(f, BetaMixtureFactor):
        return {"kind": "beta-mixture", "child": f.child, "parents": list(f.parents),
                "components": [{"weight": c.weight, "alpha": c.alpha.to_prefix(),
                                "beta": c.beta.to_prefix()} for c in f.components]}
    return {"kind": "discriminant", "child": f.child, "parents": list(f.parents),
            "discriminants": [d.to_prefix() for d in f.discriminants]}


def _factor(fac) -> dict:
    if isinstance(fac, Monomial):
        return {"kind": "monomial", "var": fac.var, "n": fac.n, "m": fac.m}
    if isinstance(fac, BetaFactor):
        return {"kind": "beta", "var": fac.var, "alpha": fac.alpha, "beta": fac.beta}
    return {"kind": "pwl", "var": fac.var, "segments": [list(s) for s in fac.segments]}


def basis_to_dict(f: BasisFunction) -> dict:
    out: dict[str, Any] = {"label": f.label, "factors": [_factor(x) for x in f.factors]}
    if f.discrete_vars:
        out["discrete"] = {"vars": list(f.discrete_vars), "shape": list(f.shape),
                           "table": list(f.table)}
    return out


def problem_to_dict(mdp: HybridMDP, basis: Sequence[BasisFunction] | None = None) -> dict:
    doc: dict[str, Any] = {
        "format": FORMAT,
        "name": mdp.name,
        "discount": mdp.discount,
        "r_max": mdp.r_max,
        "variables": [_variable(v) for v in mdp.states],
        "actions": [_variable(v) for v in mdp.actions],
        "transitions": [_transition(f) for f in mdp.transitions],
        "rewards": [{"scope": list(r.scope), "expr": r.expr.to_prefix()} for r in mdp.rewards],
        "initial": dict(mdp.initial),
    }
    if basis is not None:
        doc["basis"] = [basis_to_dict(f) for f in basis]
    return doc


def _require(doc: dict, key: str, where: str = "problem"):
    if key not in doc:
        raise ContractError(f"{where} document lacks the {key!r} section")
    return doc[key]


def _load_factor(d: dict):
    kind = _require(d, "kind", "factor")
    if kind == "monomial":
        return Monomial(d["var"], int(d.get("n", 1)), int(d.get("m", 0)))
    if kind == "beta":
        return BetaFactor(d["var"], float(d["alpha"]), float(d["beta"]))
    if kind == "pwl":
        return PwlFactor(d["var"], tuple(tuple(float(v) for v in s) for s in d["segments"]))
    raise ContractError(f"unknown basis factor kind {kind!r}")


def basis_from_dict(d: dict) -> BasisFunction:
    disc = d.get("discrete") or {}
    return BasisFunction(
        factors=tuple(_load_factor(x) for x in d.get("factors", [])),
        discrete_vars=tuple(disc.get("vars", ())),
        shape=tuple(int(s) for s in disc.get("shape", ())),
        table=tuple(float(t) for t in disc.get("table", ())),
        label=d.get("label", ""),
    )


def _load_transition(d: dict):
    kind = _require(d, "kind", "transition")
    parents = tuple(d.get("parents", ()))
    if kind == "beta-mixture":
        comps = tuple(BetaComponent(float(c["weight"]), parse(c["alpha"]), parse(c["beta"]))
                      for c in d["components"])
        return BetaMixtureFactor(d["child"], parents, comps)
    if kind == "discriminant":
        return DiscriminantFactor(d["child"], parents,
                                  tuple(parse(e) for e in d["discriminants"]))
    raise ContractError(f"unknown transition kind {kind!r}")


def problem_from_dict(doc: dict) -> tuple[HybridMDP, tuple[BasisFunction, ...] | None]:
    fmt = doc.get("format", FORMAT)
    if fmt != FORMAT:
        raise ContractError(f"unsupported problem format {fmt!r}")
    mdp = HybridMDP(
        states=tuple(Variable(v["name"], v.get("size")) for v in _require(doc, "variables")),
        actions=tuple(Variable(v["name"], v["size"]) for v in _require(doc, "actions")),
        transitions=tuple(_load_transition(t) for t in _require(doc, "transitions")),
        rewards=tuple(RewardFactor(tuple(r["scope"]), parse(r["expr"]))
                      for r in _require(doc, "rewards")),
        discount=float(_require(doc, "discount")),
        r_max=doc.get("r_max"),
        initial={k: float(v) for k, v in (doc.get("initial") or {}).items()},
        name=doc.get("name", "hmdp"),
    )
    basis = doc.get("basis")
    return mdp, None if basis is None else tuple(basis_from_dict(b) for b in basis)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save_problem(path, mdp: HybridMDP, basis: Sequence[BasisFunction] | None = None) -> Path:
    return write_atomic(path, dumps(problem_to_dict(mdp, basis)))


def load_problem(path) -> tuple[HybridMDP, tuple[BasisFunction, ...] | None]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ContractError(f"problem file {str(path)!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ContractError(f"problem file {str(path)!r} is not valid JSON: {exc}") from None
    return problem_from_dict(doc)


# ---------------------------------------------------------------------------
# solution archives

def solution_to_dict(solution, *, seed: int | None, config: dict,
                     problem: dict | None = None) -> dict:
    """Everything needed to rebuild the value function without re-solving.

    Wall-clock timings are left out on purpose so that reruns are
    byte-identical; they belong in the run manifest.
    """
    doc = {
        "format": ARCHIVE_FORMAT,
        "seed": seed,
        "config": config,
        "status": solution.status,
        "objective": None if not np.isfinite(solution.objective) else float(solution.objective),
        "iterations": int(solution.iterations),
        "objective_history": [float(v) for v in solution.objective_history],
        "weights": [None if not np.isfinite(v) else float(v) for v in solution.weights],
        "basis": [basis_to_dict(f) for f in solution.basis],
        "cuts": [{"source": c.source, "state": dict(c.state), "action": dict(c.action),
                  "rhs": float(c.rhs)} for c in solution.constraints],
    }
    if problem is not None:
        doc["problem"] = problem
    return doc


def load_archive(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ContractError(f"archive {str(path)!r} does not exist") from None
    if doc.get("format") != ARCHIVE_FORMAT:
        raise ContractError(f"{str(path)!r} is not a solution archive")
    doc["basis"] = tuple(basis_from_dict(b) for b in doc["basis"])
    doc["weights"] = np.array([np.nan if v is None else v for v in doc["weights"]])
    return doc
