"""JSON scenario documents and the reports produced from them.

A scenario names the tensor factors, the initial state, per-interval dynamics,
one list of decomposition builders per time slot, and optional queries. See
the bundled documents in ``chronicle/scenarios`` for complete examples.

Reports are serialised canonically: sorted keys, UTF-8, floats at 17
significant digits, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from math import isfinite
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, linalg
from .epr import Direction, singlet, spin_decomposition, spin_ket
from .errors import ParseError, ValidationError
from .framework import (
    Decomposition,
    InvalidDecomposition,
    Projector,
    common_refinement,
    lift_decomposition,
    trivial_decomposition,
    validate_decomposition,
)
from .histories import (
    UNITARY_LABELS,
    Dynamics,
    Event,
    HistoryFamily,
    TimeGrid,
    at,
    check_consistency,
    conditional,
    marginal,
    probabilities,
)
from .linalg import DEFAULT_TOL, TensorSpace
from .measurement import MeasurementSpec, assert_in_specified_domain, build_measurement_unitary, specified_domain

_CALL = re.compile(r"^\s*(\w+)\s*\(([^()]*)\)\s*$")


def _field(doc: dict, key: str, path: str, kind=None):
    if not isinstance(doc, dict):
        raise ParseError("expected an object", path or "$")
    if key not in doc:
        raise ParseError(f"missing field {key!r}", path or "$")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"expected {kind.__name__ if isinstance(kind, type) else kind}", f"{path}.{key}")
    return value


def _complex(x, path: str) -> complex:
    if isinstance(x, bool):
        raise ParseError("expected a number or [re, im]", path)
    if isinstance(x, (int, float)):
        z = complex(x)
    elif isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        z = complex(x[0], x[1])
    else:
        raise ParseError("expected a number or [re, im]", path)
    if not (isfinite(z.real) and isfinite(z.imag)):
        raise ValidationError("non-finite number", path)
    return z


def _vector(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ParseError("expected a non-empty list of amplitudes", path)
    return np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(x)])


def _matrix(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ParseError("expected a list of rows", path)
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(x)]
    if any(len(r) != len(rows) for r in rows):
        raise ValidationError("matrix is not square", path)
    return np.array(rows)


def _call(text: str, path: str) -> tuple[str, list[str]]:
    m = _CALL.match(text)
    if not m:
        return text.strip(), []
    args = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    return m.group(1), args


def _number(text: str, path: str) -> float:
    # accepts plain floats and the forms "pi", "pi/3", "2*pi/3"
    t = text.replace(" ", "")
    m = re.fullmatch(r"(?:([-+]?[\d.eE+-]+)\*?)?(-?pi)(?:/([\d.]+))?", t)
    try:
        if m:
            k = float(m.group(1)) if m.group(1) else 1.0
            sign = -1.0 if m.group(2).startswith("-") else 1.0
            d = float(m.group(3)) if m.group(3) else 1.0
            return sign * k * np.pi / d
        return float(t)
    except ValueError:
        raise ParseError(f"cannot read {text!r} as a number", path) from None


class Scenario:
    """A parsed, validated scenario document."""

    def __init__(self, doc: dict):
        self.doc = doc
        spaces = _field(doc, "spaces", "", list)
        try:
            self.space = TensorSpace(
                (_field(s, "label", f"$.spaces[{i}]", str), _field(s, "dim", f"$.spaces[{i}]", int))
                for i, s in enumerate(spaces))
        except ValueError as e:
            raise ValidationError(str(e), "$.spaces") from None
        times = _field(doc, "times", "", list)
        try:
            self.grid = TimeGrid(times)
        except (TypeError, ValueError) as e:
            raise ValidationError(str(e), "$.times") from None
        self.tolerance = float(doc.get("tolerance", DEFAULT_TOL))
        self.measurements = {name: self._measurement(name, m)
                             for name, m in (doc.get("measurements") or {}).items()}
        self.initial = self._initial(_field(doc, "initial", ""))
        self.dynamics = self._dynamics(_field(doc, "dynamics", "", list))
        slots = _field(doc, "family", "", list)
        if len(slots) != self.grid.slots:
            raise ValidationError(f"{len(slots)} family slots for {self.grid.slots} grid intervals", "$.family")
        decomps = tuple(self._slot(j, s) for j, s in enumerate(slots, 1))
        try:
            self.family = HistoryFamily(self.initial, self.grid, decomps, self.dynamics, doc.get("name", ""))
        except ValueError as e:
            raise ValidationError(str(e), "$") from None
        for name, (spec, system, pointer) in self.measurements.items():
            domain = self.space.lift(specified_domain(spec), (system, pointer))
            try:
                assert_in_specified_domain(self.family, domain, spec.interval)
            except ValueError as e:
                raise ValidationError(str(e), f"$.measurements.{name}") from None
        self.queries = doc.get("queries", [])
        if not isinstance(self.queries, list):
            raise ParseError("expected a list", "$.queries")

    def _measurement(self, name: str, m: dict):
        path = f"$.measurements.{name}"
        system = _field(m, "system", path, str)
        pointer = _field(m, "pointer", path, str)
        for f in (system, pointer):
            if f not in self.space.labels:
                raise ValidationError(f"unknown factor {f!r}", path)
        basis = _field(m, "basis", path)
        n_sys = self.space.factor_dim(system)
        labels = m.get("system_labels")
        if isinstance(basis, str):
            fn, args = _call(basis, f"{path}.basis")
            if fn == "spin" and n_sys == 2:
                d = Direction(*(_number(a, f"{path}.basis") for a in args))
                vecs = [spin_ket(d, s) for s in "+-"]
                labels = labels or [f"{d.name}_{system}{s}" for s in "+-"]
            elif fn == "standard":
                vecs = [linalg.basis_ket(n_sys, k) for k in range(n_sys)]
            else:
                raise ValidationError(f"unknown basis builder {basis!r}", f"{path}.basis")
        else:
            vecs = [_vector(v, f"{path}.basis[{i}]") for i, v in enumerate(basis)]
        finals = m.get("final_states")
        if finals is not None:
            finals = [_vector(v, f"{path}.final_states[{i}]") for i, v in enumerate(finals)]
        outcome_labels = m.get("outcome_labels")
        try:
            spec = MeasurementSpec.standard(
                vecs, final_states=finals, system_labels=labels, outcome_labels=outcome_labels,
                pointer=pointer, interval=int(m.get("interval", self.grid.slots)))
        except ValueError as e:
            raise ValidationError(str(e), path) from None
        if spec.pointer_dim != self.space.factor_dim(pointer) or spec.system_dim != n_sys:
            raise ValidationError(f"pointer factor must have dim {spec.pointer_dim}", path)
        return spec, system, pointer

    def _state(self, factors: list[str], state, path: str) -> np.ndarray:
        dim = int(np.prod([self.space.factor_dim(f) for f in factors]))
        if isinstance(state, str):
            fn, args = _call(state, path)
            if fn == "singlet" and dim == 4 and len(factors) == 2:
                return singlet()
            if fn == "ready" and len(args) == 1 and args[0] in self.measurements:
                return self.measurements[args[0]][0].pointer_ready
            if fn == "basis" and len(args) == 1:
                return linalg.basis_ket(dim, int(args[0]))
            raise ValidationError(f"unknown state builder {state!r}", path)
        v = _vector(state, path)
        if v.shape != (dim,):
            raise ValidationError(f"state has {len(v)} amplitudes, factors need {dim}", path)
        return v

    def _initial(self, init) -> np.ndarray:
        path = "$.initial"
        if isinstance(init, (str, list)):
            v = self._state(list(self.space.labels), init, path)
        elif isinstance(init, dict) and "product" in init:
            parts = []
            for i, part in enumerate(_field(init, "product", path, list)):
                p = f"{path}.product[{i}]"
                factors = _field(part, "factors", p, list)
                try:
                    parts.append((factors, self._state(factors, _field(part, "state", p), p)))
                except linalg.UnknownFactor as e:
                    raise ValidationError(str(e), p) from None
            try:
                v = self.space.embed(parts)
            except ValueError as e:
                raise ValidationError(str(e), path) from None
        else:
            raise ParseError("expected a state builder, amplitude list or {product: [...]}", path)
        if abs(np.linalg.norm(v) - 1.0) > self.tolerance:
            raise ValidationError("initial state is not normalised", path)
        return v

    def _dynamics(self, steps: list) -> Dynamics:
        if len(steps) != self.grid.slots:
            raise ValidationError(f"{len(steps)} dynamics entries for {self.grid.slots} intervals", "$.dynamics")
        ops = []
        for j, step in enumerate(steps):
            path = f"$.dynamics[{j}]"
            if step == "identity":
                ops.append(linalg.identity(self.space.dim))
            elif isinstance(step, dict) and "measure" in step:
                u = np.eye(self.space.dim, dtype=complex)
                names = step["measure"]
                names = [names] if isinstance(names, str) else names
                for name in names:
                    if name not in self.measurements:
                        raise ValidationError(f"unknown measurement {name!r}", path)
                    spec, system, pointer = self.measurements[name]
                    if spec.interval != j + 1:
                        raise ValidationError(f"measurement {name!r} declared for interval {spec.interval}", path)
                    u = self.space.lift(build_measurement_unitary(spec), (system, pointer)) @ u
                ops.append(u)
            elif isinstance(step, dict) and "unitary" in step:
                m = _matrix(step["unitary"], f"{path}.unitary")
                factors = step.get("factors", list(self.space.labels))
                try:
                    u = self.space.lift(m, factors)
                except (linalg.DimensionMismatch, linalg.UnknownFactor) as e:
                    raise ValidationError(str(e), path) from None
                if not linalg.is_unitary(u, self.tolerance):
                    raise ValidationError("operator is not unitary", path)
                ops.append(u)
            else:
                raise ParseError("expected 'identity', {measure: ...} or {unitary: ...}", path)
        return Dynamics(tuple(ops))

    def _builder(self, slot: int, ref, path: str) -> tuple[Decomposition, tuple[str, ...] | None]:
        """A decomposition plus the factors it acts on (``None`` means the whole space)."""
        if isinstance(ref, dict):
            factors = tuple(_field(ref, "factors", path, list))
            members = []
            for i, p in enumerate(_field(ref, "projectors", path, list)):
                pp = f"{path}.projectors[{i}]"
                try:
                    members.append(Projector(_matrix(_field(p, "matrix", pp), f"{pp}.matrix"), _field(p, "label", pp, str)))
                except InvalidDecomposition:
                    raise ValidationError("not a projector", pp) from None
            return validate_decomposition(members), factors
        if not isinstance(ref, str):
            raise ParseError("expected a builder string or {factors, projectors}", path)
        fn, args = _call(ref, path)
        if fn == "identity":
            return trivial_decomposition(self.space.dim), None
        if fn == "spin" and len(args) in (1, 2, 3):
            f = args[0]
            d = Direction(*(_number(a, path) for a in args[1:]))
            return spin_decomposition(d, f), (f,)
        if fn == "basis" and len(args) == 1:
            f = args[0]
            n = self.space.factor_dim(f)
            return validate_decomposition(
                [Projector(linalg.dyad(linalg.basis_ket(n, k)), f"{f}{k}") for k in range(n)]), (f,)
        if fn in ("system", "pointer") and len(args) == 1 and args[0] in self.measurements:
            spec, system, pointer = self.measurements[args[0]]
            if fn == "system":
                return spec.system_decomposition(), (system,)
            return spec.pointer_decomposition(), (pointer,)
        if fn == "psi":
            psi = self.dynamics.evolution(0, slot) @ self.initial
            p = np.outer(psi, psi.conj())
            return validate_decomposition([Projector(p, UNITARY_LABELS[0]),
                                           Projector(np.eye(len(psi)) - p, UNITARY_LABELS[1])]), None
        raise ValidationError(f"unknown decomposition builder {ref!r}", path)

    def _slot(self, j: int, refs) -> Decomposition:
        path = f"$.family[{j - 1}]"
        refs = [refs] if not isinstance(refs, list) else refs
        parts = []
        for i, ref in enumerate(refs):
            try:
                d, factors = self._builder(j, ref, f"{path}[{i}]")
                parts.append(lift_decomposition(d, factors, self.space) if factors else d)
            except (linalg.UnknownFactor, linalg.DimensionMismatch, InvalidDecomposition, ValueError) as e:
                if isinstance(e, (ParseError, ValidationError)):
                    raise
                raise ValidationError(str(e), f"{path}[{i}]") from None
        out = parts[0]
        try:
            for d in parts[1:]:
                out = common_refinement(out, d)
            return out
        except ValueError as e:
            raise ValidationError(str(e), path) from None


def parse_event(text: str) -> Event:
    """``"M+@3 & z_b-@1"``; ``|`` binds looser than ``&``; ``!`` negates one term."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("expected an event expression", "event")
    alternatives = []
    for alt in text.split("|"):
        ev = None
        for term in alt.split("&"):
            term = term.strip()
            neg = term.startswith("!")
            term = term.lstrip("!").strip()
            if "@" not in term:
                raise ParseError(f"event term {term!r} must look like ATOM@SLOT", "event")
            atom, slot = term.rsplit("@", 1)
            try:
                e = at(int(slot), atom.strip())
            except ValueError:
                raise ParseError(f"bad slot in {term!r}", "event") from None
            e = ~e if neg else e
            ev = e if ev is None else ev & e
        alternatives.append(ev)
    out = alternatives[0]
    for e in alternatives[1:]:
        out = out | e
    return out


def _answer(table, query: dict, i: int, tol: float):
    path = f"$.queries[{i}]"
    kind = _field(query, "kind", path, str)
    if kind == "marginal":
        keep = [k if isinstance(k, int) else tuple(k) for k in _field(query, "keep", path, list)]
        m = marginal(table, keep)
        return [{"key": list(k), "probability": p} for k, p in m]
    if kind == "conditional":
        return conditional(table, parse_event(_field(query, "given", path, str)),
                           parse_event(_field(query, "target", path, str)), tol)
    if kind == "probability":
        return table.prob(parse_event(_field(query, "event", path, str)))
    raise ParseError(f"unknown query kind {kind!r}", f"{path}.kind")


def load(path: str | Path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    return loads(text)


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"line {e.lineno}, column {e.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    return Scenario(doc)


def run(path: str | Path, tol: float | None = None) -> dict[str, Any]:
    """Evaluate a scenario file and return the report document."""
    return evaluate(load(path), tol)


def evaluate(scenario: Scenario, tol: float | None = None) -> dict[str, Any]:
    tol = scenario.tolerance if tol is None else tol
    fam = scenario.family
    report = check_consistency(fam, tol=tol)
    table = probabilities(fam, tol=tol)
    answers = [{"query": q, "result": _answer(table, q, i, tol)} for i, q in enumerate(scenario.queries)]
    return {
        "engine": {"name": "chronicle", "version": __version__},
        "tolerance": tol,
        "scenario": scenario.doc,
        "consistency": {
            "consistent": report.consistent,
            "worst_overlap": report.worst_overlap,
            "worst_pair": None if report.worst_pair is None else [list(a) for a in report.worst_pair],
        },
        "histories": [{"history": list(a), "probability": p} for a, p in table],
        "total_probability": table.total(),
        "queries": answers,
    }


def _encode(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, float):
        if not isfinite(x):
            raise ValueError("non-finite number in report")
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, dict):
        return "{" + ",".join(f"{json.dumps(str(k), ensure_ascii=False)}:{_encode(v)}"
                              for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in x) + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(doc) -> str:
    """Canonical JSON text."""
    return _encode(doc)


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``bundled("eq23.json")``."""
    return Path(str(resources.files("chronicle") / "scenarios" / name))


def bundled_names() -> list[str]:
    return sorted(p.name for p in resources.files("chronicle").joinpath("scenarios").iterdir()
                  if p.name.endswith(".json"))
