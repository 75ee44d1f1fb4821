"""Projective decompositions of the identity and the projector lattice.

A :class:`Decomposition` is a quantum sample space: mutually orthogonal
projectors summing to the identity. Two decompositions are compatible when all
their members commute, and then they have a common refinement.

``meet``/``join`` implement the subspace intersection/span operations so that
the failure of distributivity for non-commuting projectors can be checked
directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import linalg
from .errors import IncompatibleFrameworks, InvalidDecomposition
from .linalg import DEFAULT_TOL, Operator, max_entry

RANK_TOL = 1e-8

ZERO_LABEL = "0"
IDENTITY_LABEL = "I"
AND = "∧"


@dataclass(frozen=True, eq=False)
class Projector:
    op: Operator
    label: str = ""

    def __post_init__(self):
        op = linalg.operator(self.op)
        if not linalg.is_projector(op, DEFAULT_TOL):
            raise InvalidDecomposition([("NotProjector", self.label or "<unlabelled>")])
        object.__setattr__(self, "op", op)

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.op).real))

    def is_zero(self, tol: float = DEFAULT_TOL) -> bool:
        return max_entry(self.op) <= tol

    def is_identity(self, tol: float = DEFAULT_TOL) -> bool:
        return max_entry(self.op - np.eye(self.dim)) <= tol

    def equals(self, other: "Projector", tol: float = DEFAULT_TOL) -> bool:
        return self.op.shape == other.op.shape and max_entry(self.op - other.op) <= tol

    def __repr__(self):
        return f"Projector({self.label!r}, dim={self.dim}, rank={self.rank})"


def zero_projector(dim: int) -> Projector:
    return Projector(linalg.zeros(dim), ZERO_LABEL)


def identity_projector(dim: int) -> Projector:
    return Projector(linalg.identity(dim), IDENTITY_LABEL)


def ray(v, label: str = "") -> Projector:
    """Projector onto the ray through the (not necessarily normalised) ket ``v``."""
    v = np.asarray(v, dtype=np.complex128)
    return Projector(np.outer(v, v.conj()) / np.vdot(v, v).real, label)


def _cleanup(op: np.ndarray) -> np.ndarray:
    return 0.5 * (op + op.conj().T)


def _labelled(op: np.ndarray, label: str, tol: float = DEFAULT_TOL) -> Projector:
    dim = op.shape[0]
    if max_entry(op) <= tol:
        return zero_projector(dim)
    if max_entry(op - np.eye(dim)) <= tol:
        return identity_projector(dim)
    return Projector(_cleanup(op), label)


def negation(p: Projector) -> Projector:
    if p.label == ZERO_LABEL:
        label = IDENTITY_LABEL
    elif p.label == IDENTITY_LABEL:
        label = ZERO_LABEL
    else:
        label = f"~{p.label}"
    return Projector(np.eye(p.dim) - p.op, label)


def _range_intersection(p: Operator, q: Operator) -> np.ndarray:
    # x is in range(P) and range(Q) iff (I-P)x = 0 and (I-Q)x = 0
    dim = p.shape[0]
    stacked = np.vstack([np.eye(dim) - p, np.eye(dim) - q])
    _, s, vh = np.linalg.svd(stacked)
    rank = int(np.sum(s > RANK_TOL))
    null = vh[rank:].conj().T
    return null @ null.conj().T


def meet(p: Projector, q: Projector) -> Projector:
    """Projector onto range(P) intersected with range(Q)."""
    if p.dim != q.dim:
        raise linalg.DimensionMismatch(f"meet of dims {p.dim} and {q.dim}")
    return _labelled(_range_intersection(p.op, q.op), f"({p.label}{AND}{q.label})")


def join(p: Projector, q: Projector) -> Projector:
    """Projector onto the span of range(P) and range(Q)."""
    if p.dim != q.dim:
        raise linalg.DimensionMismatch(f"join of dims {p.dim} and {q.dim}")
    inner = _range_intersection(np.eye(p.dim) - p.op, np.eye(q.dim) - q.op)
    return _labelled(np.eye(p.dim) - inner, f"({p.label}∨{q.label})")


class DistributivityReport(NamedTuple):
    lhs: Projector
    rhs: Projector
    equal: bool


def check_distributivity(p: Projector, q: Projector, r: Projector, tol: float = DEFAULT_TOL) -> DistributivityReport:
    """Compare (P and Q) or (P and R) against P and (Q or R)."""
    lhs = join(meet(p, q), meet(p, r))
    rhs = meet(p, join(q, r))
    return DistributivityReport(lhs, rhs, lhs.equals(rhs, tol))


@dataclass(frozen=True, eq=False)
class Decomposition:
    members: tuple[Projector, ...]
    space_dim: int = field(default=0)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.members)

    def __getitem__(self, label: str) -> Projector:
        for m in self.members:
            if m.label == label:
                return m
        raise KeyError(f"no member labelled {label!r}; have {list(self.labels)}")

    def event(self, labels: Iterable[str]) -> "Event":
        return Event(self, frozenset(labels))

    def event_for(self, p: Projector, tol: float = DEFAULT_TOL) -> "Event | None":
        """The event of this sample space equal to ``p``, if there is one."""
        chosen = [m.label for m in self.members if max_entry(p.op @ m.op - m.op) <= tol]
        ev = self.event(chosen)
        return ev if max_entry(ev.projector.op - p.op) <= tol else None


@dataclass(frozen=True, eq=False)
class Event:
    decomposition: Decomposition
    members: frozenset[str]

    def __post_init__(self):
        unknown = self.members - set(self.decomposition.labels)
        if unknown:
            raise KeyError(f"unknown member labels {sorted(unknown)}")

    @property
    def projector(self) -> Projector:
        dim = self.decomposition.space_dim
        op = sum((m.op for m in self.decomposition if m.label in self.members), np.zeros((dim, dim)))
        label = "+".join(l for l in self.decomposition.labels if l in self.members) or ZERO_LABEL
        return Projector(op, label)


def validate_decomposition(candidates: Sequence[Projector], space_dim: int | None = None,
                           tol: float = DEFAULT_TOL) -> Decomposition:
    """Check the decomposition conditions and report every one that fails."""
    candidates = list(candidates)
    if not candidates:
        raise InvalidDecomposition([("SumNotIdentity", "empty candidate list")])
    dim = space_dim if space_dim is not None else candidates[0].op.shape[0]
    for c in candidates:
        if c.op.shape != (dim, dim):
            raise linalg.DimensionMismatch(f"member {c.label!r} has shape {c.op.shape}, expected {dim}")
    violations: list[tuple] = []
    labels = [c.label for c in candidates]
    for l in sorted({l for l in labels if labels.count(l) > 1}):
        violations.append(("DuplicateLabel", l))
    for c in candidates:
        if not linalg.is_projector(c.op, tol):
            violations.append(("NotProjector", c.label))
    for a, b in combinations(candidates, 2):
        overlap = max_entry(a.op @ b.op)
        if overlap > tol:
            violations.append(("NotMutuallyOrthogonal", (a.label, b.label), overlap))
    total = sum((c.op for c in candidates), np.zeros((dim, dim)))
    deviation = max_entry(total - np.eye(dim))
    if deviation > tol:
        violations.append(("SumNotIdentity", deviation))
    if violations:
        raise InvalidDecomposition(violations)
    return Decomposition(tuple(candidates), dim)


def decomposition(members: Sequence[Projector], tol: float = DEFAULT_TOL) -> Decomposition:
    return validate_decomposition(members, tol=tol)


def trivial_decomposition(dim: int) -> Decomposition:
    return Decomposition((identity_projector(dim),), dim)


def basis_decomposition(vectors: Sequence, labels: Sequence[str]) -> Decomposition:
    """Rank-one decomposition from an orthonormal basis."""
    return validate_decomposition([ray(v, l) for v, l in zip(vectors, labels, strict=True)])


def compatible(f: Decomposition, g: Decomposition, tol: float = DEFAULT_TOL) -> bool:
    if f.space_dim != g.space_dim:
        raise linalg.DimensionMismatch(f"decompositions of dims {f.space_dim} and {g.space_dim}")
    return all(linalg.commutator_norm(p.op, q.op) <= tol for p in f for q in g)


def common_refinement(f: Decomposition, g: Decomposition, tol: float = DEFAULT_TOL) -> Decomposition:
    """All nonzero products of members of ``f`` and ``g``, labelled ``"mu AND nu"``."""
    if not compatible(f, g, tol):
        raise IncompatibleFrameworks(f"{list(f.labels)} and {list(g.labels)} do not commute")
    members = []
    for p in f:
        for q in g:
            prod = p.op @ q.op
            if max_entry(prod) > tol:
                members.append(Projector(_cleanup(prod), f"{p.label}{AND}{q.label}"))
    return validate_decomposition(members, f.space_dim, tol)


def lift_decomposition(d: Decomposition, factors, space: linalg.TensorSpace) -> Decomposition:
    """Apply :func:`linalg.lift` to every member, keeping labels."""
    return Decomposition(tuple(Projector(space.lift(m.op, factors), m.label) for m in d), space.dim)


def product_decomposition(parts: Sequence[tuple[Decomposition, object]], space: linalg.TensorSpace) -> Decomposition:
    """Refinement of several decompositions, each acting on its own factor group."""
    lifted = [lift_decomposition(d, factors, space) for d, factors in parts]
    out = lifted[0]
    for d in lifted[1:]:
        out = common_refinement(out, d)
    return out
