"""History families, chain kets, the consistency condition and probabilities.

A family starts from a normalised initial ket at ``t_0`` and carries one
decomposition of the identity at each later grid time ``t_1 .. t_f``. The
chain ket of history ``alpha`` is ``P_f U_f ... P_1 U_1 |psi0>`` where ``U_j``
evolves from ``t_{j-1}`` to ``t_j``. Probabilities ``<alpha|alpha>`` are only
assigned when all distinct chain kets are mutually orthogonal.

Histories are enumerated lexicographically (slot 1 slowest, members in
decomposition order) and zero-weight histories are kept in every table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from . import linalg
from .errors import ConditionOnNullEvent, DimensionMismatch, InconsistentFamily
from .framework import AND, Decomposition, Projector, validate_decomposition
from .linalg import DEFAULT_TOL, Ket, Operator

HistoryIndex = tuple[str, ...]


@dataclass(frozen=True)
class TimeGrid:
    times: tuple[float, ...]

    def __init__(self, times: Iterable[float]):
        times = tuple(float(t) for t in times)
        if len(times) < 2:
            raise ValueError("a time grid needs at least two times")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"times must be strictly increasing, got {times}")
        object.__setattr__(self, "times", times)

    @classmethod
    def steps(cls, n: int) -> "TimeGrid":
        """``t_0 .. t_n`` labelled 0, 1, ..., n."""
        return cls(range(n + 1))

    @property
    def slots(self) -> int:
        return len(self.times) - 1

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class Dynamics:
    """Per-interval unitaries; ``steps[j-1]`` evolves ``t_{j-1}`` to ``t_j``."""

    steps: tuple[Operator, ...]

    def __post_init__(self):
        steps = tuple(linalg.operator(u) for u in self.steps)
        if not steps:
            raise ValueError("dynamics needs at least one interval")
        dim = steps[0].shape[0]
        for j, u in enumerate(steps, 1):
            if u.shape != (dim, dim):
                raise DimensionMismatch(f"interval {j} unitary has shape {u.shape}, expected {dim}")
            if not linalg.is_unitary(u, DEFAULT_TOL):
                raise ValueError(f"interval {j} operator is not unitary")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def identity(cls, dim: int, intervals: int) -> "Dynamics":
        return cls(tuple(linalg.identity(dim) for _ in range(intervals)))

    @property
    def space_dim(self) -> int:
        return self.steps[0].shape[0]

    @property
    def intervals(self) -> int:
        return len(self.steps)

    def evolution(self, start: int, stop: int) -> Operator:
        """T(t_stop, t_start) as an ordered product of interval unitaries.

        For ``stop < start`` this is the adjoint of the forward evolution.
        """
        if stop < start:
            return linalg.adjoint(self.evolution(stop, start))
        out = np.eye(self.space_dim, dtype=np.complex128)
        for u in self.steps[start:stop]:
            out = u @ out
        return linalg.operator(out)


@dataclass(frozen=True, eq=False)
class HistoryFamily:
    """Initial state, grid and per-slot decompositions.

    ``dynamics`` is optional; when absent every interval is the identity.
    """

    initial: Ket
    grid: TimeGrid
    decomps: tuple[Decomposition, ...]
    dynamics: Dynamics | None = None
    name: str = ""

    def __post_init__(self):
        psi = linalg.ket(self.initial)
        if abs(np.linalg.norm(psi) - 1.0) > DEFAULT_TOL:
            raise ValueError(f"initial state must be normalised, norm is {np.linalg.norm(psi)!r}")
        decomps = tuple(self.decomps)
        if len(decomps) != self.grid.slots:
            raise ValueError(f"{self.grid.slots} time slots but {len(decomps)} decompositions")
        for j, d in enumerate(decomps, 1):
            if d.space_dim != psi.shape[0]:
                raise DimensionMismatch(f"slot {j} decomposition has dim {d.space_dim}, state has {psi.shape[0]}")
        if self.dynamics is not None:
            if self.dynamics.intervals != self.grid.slots or self.dynamics.space_dim != psi.shape[0]:
                raise DimensionMismatch("dynamics does not match the grid or the state dimension")
        object.__setattr__(self, "initial", psi)
        object.__setattr__(self, "decomps", decomps)

    @property
    def space_dim(self) -> int:
        return self.initial.shape[0]

    @property
    def slots(self) -> int:
        return self.grid.slots

    def resolve_dynamics(self, dyn: Dynamics | None = None) -> Dynamics:
        dyn = dyn if dyn is not None else self.dynamics
        if dyn is None:
            return Dynamics.identity(self.space_dim, self.slots)
        if dyn.intervals != self.slots or dyn.space_dim != self.space_dim:
            raise DimensionMismatch("dynamics does not match the family")
        return dyn

    def indices(self) -> Iterator[HistoryIndex]:
        return itertools.product(*(d.labels for d in self.decomps))

    def truncated(self, slots: int) -> "HistoryFamily":
        """The same family restricted to its first ``slots`` time slots."""
        dyn = None if self.dynamics is None else Dynamics(self.dynamics.steps[:slots])
        return HistoryFamily(self.initial, TimeGrid(self.grid.times[: slots + 1]),
                             self.decomps[:slots], dyn, self.name)


def _chain_kets(family: HistoryFamily, dyn: Dynamics) -> tuple[list[HistoryIndex], np.ndarray]:
    """All chain kets as rows, built slot by slot so shared prefixes are evolved once."""
    states = family.initial[np.newaxis, :]
    labels: list[HistoryIndex] = [()]
    for u, d in zip(dyn.steps, family.decomps):
        projs = np.stack([m.op for m in d])
        evolved = states @ u.T
        states = np.einsum("mij,nj->nmi", projs, evolved).reshape(-1, family.space_dim)
        labels = [h + (l,) for h in labels for l in d.labels]
    return labels, states


def chain_ket(family: HistoryFamily, alpha: Sequence[str], dyn: Dynamics | None = None) -> Ket:
    dyn = family.resolve_dynamics(dyn)
    alpha = tuple(alpha)
    if len(alpha) != family.slots:
        raise ValueError(f"history has {len(alpha)} labels, family has {family.slots} slots")
    v = family.initial
    for u, d, label in zip(dyn.steps, family.decomps, alpha):
        v = d[label].op @ (u @ v)
    return linalg.ket(v)


class ConsistencyReport(NamedTuple):
    consistent: bool
    worst_pair: tuple[HistoryIndex, HistoryIndex] | None
    worst_overlap: float


def _consistency(labels, kets, tol) -> ConsistencyReport:
    gram = kets.conj() @ kets.T
    norms = np.sqrt(np.abs(np.diag(gram)))
    scale = np.maximum(1.0, np.outer(norms, norms))
    off = np.abs(gram)
    np.fill_diagonal(off, 0.0)
    if off.size == 1:
        return ConsistencyReport(True, None, 0.0)
    i, j = np.unravel_index(np.argmax(off / scale), off.shape)
    worst = float(off[i, j])
    ok = bool(np.all(off <= tol * scale))
    return ConsistencyReport(ok, (labels[i], labels[j]), worst)


def check_consistency(family: HistoryFamily, dyn: Dynamics | None = None,
                      tol: float = DEFAULT_TOL) -> ConsistencyReport:
    """Largest overlap ``|<alpha|beta>|`` over distinct histories."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    labels, kets = _chain_kets(family, family.resolve_dynamics(dyn))
    return _consistency(labels, kets, tol)


class Event:
    """Predicate on history indices, composable with ``&``, ``|`` and ``~``."""

    def __init__(self, fn: Callable[[HistoryIndex], bool], text: str):
        self._fn = fn
        self.text = text

    def __call__(self, alpha: HistoryIndex) -> bool:
        return bool(self._fn(alpha))

    def __and__(self, other: "Event") -> "Event":
        return Event(lambda a: self(a) and other(a), f"({self.text} & {other.text})")

    def __or__(self, other: "Event") -> "Event":
        return Event(lambda a: self(a) or other(a), f"({self.text} | {other.text})")

    def __invert__(self) -> "Event":
        return Event(lambda a: not self(a), f"~{self.text}")

    def __repr__(self):
        return f"Event({self.text})"


def atoms(label: str) -> tuple[str, ...]:
    return tuple(label.split(AND))


@lru_cache(maxsize=4096)
def _matchable(label: str) -> frozenset[str]:
    return frozenset(atoms(label)) | {label}


def at(slot: int, *required: str) -> Event:
    """True when the label at ``slot`` (1-based) contains every ``required`` atom.

    Product labels such as ``"z_a+∧z_b-"`` are split on the conjunction sign;
    a full label also matches itself.
    """
    def fn(alpha):
        parts = _matchable(alpha[slot - 1])
        return all(r in parts for r in required)
    return Event(fn, f"{'&'.join(required)}@{slot}")


def always() -> Event:
    return Event(lambda a: True, "true")


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Probabilities keyed by history index, in enumeration order."""

    entries: Mapping[HistoryIndex, float]
    family: HistoryFamily | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __getitem__(self, alpha: Sequence[str]) -> float:
        return self.entries[tuple(alpha)]

    def __iter__(self):
        return iter(self.entries.items())

    def __len__(self):
        return len(self.entries)

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def prob(self, event: Event) -> float:
        return float(sum(p for a, p in self.entries.items() if event(a)))

    def support(self, tol: float = DEFAULT_TOL) -> dict[HistoryIndex, float]:
        return {a: p for a, p in self.entries.items() if p > tol}

    def marginal(self, keep) -> "ProbabilityTable":
        return marginal(self, keep)

    def conditional(self, given: Event, target: Event, tol: float = DEFAULT_TOL) -> float:
        return conditional(self, given, target, tol)


def probabilities(family: HistoryFamily, dyn: Dynamics | None = None,
                  tol: float = DEFAULT_TOL) -> ProbabilityTable:
    """``Pr(alpha) = <alpha|alpha>``; refuses families that fail the consistency check."""
    labels, kets = _chain_kets(family, family.resolve_dynamics(dyn))
    report = _consistency(labels, kets, tol)
    if not report.consistent:
        raise InconsistentFamily(report.worst_pair, report.worst_overlap)
    weights = np.einsum("ni,ni->n", kets.conj(), kets).real
    return ProbabilityTable({a: float(p) for a, p in zip(labels, weights)}, family)


def _key(alpha: HistoryIndex, item) -> str:
    if isinstance(item, int):
        return alpha[item - 1]
    slot, part = item
    return atoms(alpha[slot - 1])[part]


def marginal(table: ProbabilityTable, keep: Sequence) -> ProbabilityTable:
    """Sum out everything not listed in ``keep``.

    Each item of ``keep`` is a 1-based slot number (keep the whole label) or a
    ``(slot, part)`` pair keeping one atom of a product label, e.g. ``(3, 1)``
    keeps the second factor of ``"M+∧z_b-"``. The result is keyed by the kept
    labels in ``keep`` order.
    """
    keep = list(keep)
    out: dict[HistoryIndex, float] = {}
    for alpha, p in table.entries.items():
        k = tuple(_key(alpha, item) for item in keep)
        out[k] = out.get(k, 0.0) + p
    return ProbabilityTable(out)


def conditional(table: ProbabilityTable, given: Event, target: Event, tol: float = DEFAULT_TOL) -> float:
    pg = table.prob(given)
    if pg <= tol:
        raise ConditionOnNullEvent(f"Pr({given.text}) = {pg:.3e}")
    return table.prob(given & target) / pg


def born_rule(psi0: Ket, dyn: Dynamics | Operator, decomp: Decomposition) -> ProbabilityTable:
    """Single-time probabilities ``<psi0| T^dag P T |psi0>``.

    ``dyn`` may be one unitary or a :class:`Dynamics`, in which case its full
    composite evolution is used.
    """
    u = dyn.evolution(0, dyn.intervals) if isinstance(dyn, Dynamics) else linalg.operator(dyn)
    psi0 = linalg.ket(psi0)
    out = {}
    for m in decomp:
        heisenberg = u.conj().T @ m.op @ u
        out[(m.label,)] = float(np.vdot(psi0, heisenberg @ psi0).real)
    return ProbabilityTable(out)


def pre_probability_pair(psi0: Ket, dyn: Dynamics | Operator, target: Ket) -> tuple[float, float]:
    """Probability of a rank-one property computed forward and backward in time.

    Forward: evolve ``psi0`` to ``t_1`` and overlap with the target.
    Backward: evolve the target back to ``t_0`` and overlap with ``psi0``.
    """
    u = dyn.evolution(0, dyn.intervals) if isinstance(dyn, Dynamics) else linalg.operator(dyn)
    psi0, target = linalg.ket(psi0), linalg.ket(target)
    forward = abs(np.vdot(target, u @ psi0)) ** 2
    backward = abs(np.vdot(u.conj().T @ target, psi0)) ** 2
    return float(forward), float(backward)


UNITARY_LABELS = ("Psi", "I-Psi")


def unitary_family(psi0: Ket, dyn: Dynamics, grid: TimeGrid | None = None) -> HistoryFamily:
    """At each time, the evolved initial state's projector and its complement."""
    grid = grid if grid is not None else TimeGrid.steps(dyn.intervals)
    if grid.slots != dyn.intervals:
        raise ValueError("grid and dynamics disagree on the number of intervals")
    psi0 = linalg.ket(psi0)
    decomps = []
    for j in range(1, grid.slots + 1):
        psi = dyn.evolution(0, j) @ psi0
        p = np.outer(psi, psi.conj())
        decomps.append(validate_decomposition(
            [Projector(p, UNITARY_LABELS[0]), Projector(np.eye(len(psi)) - p, UNITARY_LABELS[1])]))
    return HistoryFamily(psi0, grid, tuple(decomps), dyn, "unitary")
