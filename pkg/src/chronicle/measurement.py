"""Idealised measurement dynamics and the families built on it.

A measurement couples a system factor to a pointer factor. The interaction
unitary sends ``|s^j> (x) |M0>`` to ``|sbar^j> (x) |M^j>`` for every basis
state ``s^j``; on the orthogonal complement it is an arbitrary unitary, fixed
here by Gram-Schmidt over the standard basis so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import CompletionFailure, NullProjection, SpecInconsistent
from .framework import (
    Decomposition,
    Projector,
    basis_decomposition,
    lift_decomposition,
    product_decomposition,
    ray,
    validate_decomposition,
)
from .histories import UNITARY_LABELS, Dynamics, HistoryFamily, TimeGrid
from .linalg import DEFAULT_TOL, Ket, Operator, TensorSpace

_GS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MeasurementSpec:
    """Declarative description of an idealised measurement.

    ``interval`` is the 1-based grid interval during which the interaction
    happens; every other interval is the identity.
    """

    system_basis: tuple[Ket, ...]
    pointer_ready: Ket
    pointer_outcomes: tuple[Ket, ...]
    final_states: tuple[Ket, ...] | None = None
    system_labels: tuple[str, ...] | None = None
    outcome_labels: tuple[str, ...] | None = None
    ready_label: str = "M0"
    interval: int = 2

    def __post_init__(self):
        basis = tuple(linalg.ket(v) for v in self.system_basis)
        outcomes = tuple(linalg.ket(v) for v in self.pointer_outcomes)
        ready = linalg.ket(self.pointer_ready)
        n = len(basis)
        if n == 0:
            raise SpecInconsistent("system basis is empty")
        if len(outcomes) != n:
            raise SpecInconsistent(f"{n} system states but {len(outcomes)} pointer outcomes")
        if any(v.shape != basis[0].shape for v in basis):
            raise SpecInconsistent("system basis vectors differ in dimension")
        sb = np.array(basis).T
        if linalg.max_entry(sb.conj().T @ sb - np.eye(n)) > DEFAULT_TOL:
            raise SpecInconsistent("system basis is not orthonormal")
        pointers = np.array((ready,) + outcomes).T
        if linalg.max_entry(pointers.conj().T @ pointers - np.eye(n + 1)) > DEFAULT_TOL:
            raise SpecInconsistent("pointer states must be orthonormal and orthogonal to the ready state")
        finals = self.final_states
        if finals is not None:
            finals = tuple(linalg.ket(v) for v in finals)
            if len(finals) != n:
                raise SpecInconsistent(f"{len(finals)} final states for {n} system states")
            for v in finals:
                if v.shape != basis[0].shape or abs(np.linalg.norm(v) - 1) > DEFAULT_TOL:
                    raise SpecInconsistent("final states must be normalised system kets")
        sys_labels = tuple(self.system_labels or (f"s{j}" for j in range(1, n + 1)))
        out_labels = tuple(self.outcome_labels or (f"M{j}" for j in range(1, n + 1)))
        if len(sys_labels) != n or len(out_labels) != n:
            raise SpecInconsistent("label lists must have one entry per system state")
        if self.ready_label in out_labels:
            raise SpecInconsistent(f"ready label {self.ready_label!r} collides with an outcome label")
        object.__setattr__(self, "system_basis", basis)
        object.__setattr__(self, "pointer_outcomes", outcomes)
        object.__setattr__(self, "pointer_ready", ready)
        object.__setattr__(self, "final_states", finals)
        object.__setattr__(self, "system_labels", sys_labels)
        object.__setattr__(self, "outcome_labels", out_labels)

    @classmethod
    def standard(cls, system_basis, *, final_states=None, system_labels=None, outcome_labels=None,
                 pointer: str = "M", interval: int = 2) -> "MeasurementSpec":
        """Pointer of dimension ``1 + n`` with the ready state first."""
        n = len(system_basis)
        return cls(
            system_basis=tuple(system_basis),
            pointer_ready=linalg.basis_ket(n + 1, 0),
            pointer_outcomes=tuple(linalg.basis_ket(n + 1, j) for j in range(1, n + 1)),
            final_states=None if final_states is None else tuple(final_states),
            system_labels=system_labels,
            outcome_labels=outcome_labels or tuple(f"{pointer}{j}" for j in range(1, n + 1)),
            ready_label=f"{pointer}0",
            interval=interval,
        )

    @property
    def n(self) -> int:
        return len(self.system_basis)

    @property
    def system_dim(self) -> int:
        return self.system_basis[0].shape[0]

    @property
    def pointer_dim(self) -> int:
        return self.pointer_ready.shape[0]

    @property
    def nondestructive(self) -> bool:
        if self.final_states is None:
            return True
        return all(linalg.max_entry(a - b) <= DEFAULT_TOL for a, b in zip(self.final_states, self.system_basis))

    def finals(self) -> tuple[Ket, ...]:
        return self.final_states if self.final_states is not None else self.system_basis

    def inputs(self) -> np.ndarray:
        """Columns ``|s^j> (x) |M0>``."""
        return np.array([np.kron(s, self.pointer_ready) for s in self.system_basis]).T

    def outputs(self) -> np.ndarray:
        """Columns ``|sbar^j> (x) |M^j>``."""
        return np.array([np.kron(f, m) for f, m in zip(self.finals(), self.pointer_outcomes)]).T

    def system_decomposition(self) -> Decomposition:
        return basis_decomposition(self.system_basis, self.system_labels)

    def pointer_decomposition(self) -> Decomposition:
        """Outcome projectors plus the complement, labelled with ``ready_label``."""
        members = [ray(m, l) for m, l in zip(self.pointer_outcomes, self.outcome_labels)]
        rest = np.eye(self.pointer_dim) - sum(m.op for m in members)
        members.append(Projector(rest, self.ready_label))
        return validate_decomposition(members)


def orthonormal_completion(columns: np.ndarray, dim: int, order: Sequence[int] | None = None) -> np.ndarray:
    """Extend orthonormal columns to a basis by Gram-Schmidt over standard basis vectors.

    ``order`` fixes which standard basis vectors are tried and in what order
    (default ``0 .. dim-1``). Returns only the new columns.
    """
    q = np.asarray(columns, dtype=np.complex128).reshape(dim, -1)
    start = q.shape[1]
    for i in (range(dim) if order is None else order):
        if q.shape[1] == dim:
            break
        v = np.zeros(dim, dtype=np.complex128)
        v[i] = 1.0
        for _ in range(2):  # twice is enough for orthogonality to working precision
            v = v - q @ (q.conj().T @ v)
        nv = np.linalg.norm(v)
        if nv > _GS_TOL:
            q = np.column_stack([q, v / nv])
    if q.shape[1] != dim:
        raise CompletionFailure(f"completion reached rank {q.shape[1]} of {dim}")
    return q[:, start:]


def build_measurement_unitary(spec: MeasurementSpec, order: Sequence[int] | None = None) -> Operator:
    """Unitary on system (x) pointer realising the specified measurement.

    ``order`` permutes the standard basis used to complete both the input and
    output bases; different orders give different but equally valid unitaries.
    """
    dim = spec.system_dim * spec.pointer_dim
    v_in, v_out = spec.inputs(), spec.outputs()
    if linalg.max_entry(v_out.conj().T @ v_out - np.eye(spec.n)) > DEFAULT_TOL:
        raise SpecInconsistent("specified output states are not orthonormal")
    c_in = orthonormal_completion(v_in, dim, order)
    c_out = orthonormal_completion(v_out, dim, order)
    u = np.hstack([v_out, c_out]) @ np.hstack([v_in, c_in]).conj().T
    if not linalg.is_unitary(u, DEFAULT_TOL):
        raise CompletionFailure("completed operator is not unitary")
    if linalg.max_entry(u @ v_in - v_out) > DEFAULT_TOL:
        raise CompletionFailure("completed operator does not reproduce the specified action")
    return linalg.operator(u)


def specified_domain(spec: MeasurementSpec) -> Operator:
    """Projector onto span{|s^j> (x) |M0>}, where the unitary is fully specified."""
    v = spec.inputs()
    return linalg.operator(v @ v.conj().T)


def assert_in_specified_domain(family: HistoryFamily, domain: Operator, interval: int,
                               tol: float = DEFAULT_TOL) -> None:
    """Check every partial chain ket entering ``interval`` lies in ``domain``.

    When it does, no history probability depends on how the measurement
    unitary was completed.
    """
    dyn = family.resolve_dynamics()
    states = family.initial[np.newaxis, :]
    for u, d in list(zip(dyn.steps, family.decomps))[: interval - 1]:
        evolved = states @ u.T
        states = np.einsum("mij,nj->nmi", np.stack([m.op for m in d]), evolved).reshape(-1, family.space_dim)
    leak = states - states @ domain.T
    if linalg.max_entry(leak) > tol:
        raise SpecInconsistent(f"chain kets leave the specified subspace (max {linalg.max_entry(leak):.3e})")


def _coupled_space(spec: MeasurementSpec) -> TensorSpace:
    return TensorSpace([("s", spec.system_dim), ("M", spec.pointer_dim)])


def _initial(spec: MeasurementSpec, coeffs) -> Ket:
    c = np.asarray(coeffs, dtype=np.complex128)
    if c.shape != (spec.n,):
        raise SpecInconsistent(f"{len(c)} coefficients for {spec.n} system states")
    if abs(np.linalg.norm(c) - 1.0) > DEFAULT_TOL:
        raise ValueError("coefficients must be normalised")
    s = sum(cj * v for cj, v in zip(c, spec.system_basis))
    return linalg.ket(np.kron(s, spec.pointer_ready))


def _dynamics(spec: MeasurementSpec, grid: TimeGrid, order=None) -> Dynamics:
    if not 1 <= spec.interval <= grid.slots:
        raise SpecInconsistent(f"interaction interval {spec.interval} outside a grid of {grid.slots} intervals")
    dim = spec.system_dim * spec.pointer_dim
    u = build_measurement_unitary(spec, order)
    return Dynamics(tuple(u if j == spec.interval else linalg.identity(dim) for j in range(1, grid.slots + 1)))


def _grid(spec: MeasurementSpec, grid) -> TimeGrid:
    grid = grid if grid is not None else TimeGrid.steps(spec.interval)
    if grid.slots != spec.interval:
        raise SpecInconsistent("the interaction must occur in the final grid interval")
    return grid


def measurement_family(spec: MeasurementSpec, coeffs, grid: TimeGrid | None = None,
                       order: Sequence[int] | None = None) -> HistoryFamily:
    """System basis before the interaction, pointer outcomes after it.

    Slots before the interaction carry ``{s^j (x) I}``; the final slot carries
    ``{I (x) M^k}`` together with the ready-state complement.
    """
    grid = _grid(spec, grid)
    space = _coupled_space(spec)
    before = lift_decomposition(spec.system_decomposition(), "s", space)
    after = lift_decomposition(spec.pointer_decomposition(), "M", space)
    fam = HistoryFamily(_initial(spec, coeffs), grid, (before,) * (grid.slots - 1) + (after,),
                        _dynamics(spec, grid, order), "measurement")
    assert_in_specified_domain(fam, specified_domain(spec), spec.interval)
    return fam


def _final_products(spec: MeasurementSpec, space: TensorSpace) -> Decomposition:
    return product_decomposition([(spec.system_decomposition(), "s"), (spec.pointer_decomposition(), "M")], space)


def nondestructive_family(spec: MeasurementSpec, coeffs, grid: TimeGrid | None = None,
                          order: Sequence[int] | None = None) -> HistoryFamily:
    """Like :func:`measurement_family` but the final slot also resolves the system."""
    if not spec.nondestructive:
        raise SpecInconsistent("final states differ from the system basis")
    grid = _grid(spec, grid)
    space = _coupled_space(spec)
    before = lift_decomposition(spec.system_decomposition(), "s", space)
    fam = HistoryFamily(_initial(spec, coeffs), grid, (before,) * (grid.slots - 1) + (_final_products(spec, space),),
                        _dynamics(spec, grid, order), "nondestructive")
    assert_in_specified_domain(fam, specified_domain(spec), spec.interval)
    return fam


def textbook_family(spec: MeasurementSpec, coeffs, grid: TimeGrid | None = None,
                    order: Sequence[int] | None = None) -> HistoryFamily:
    """Evolved initial projector and its complement before the interaction."""
    if not spec.nondestructive:
        raise SpecInconsistent("final states differ from the system basis")
    grid = _grid(spec, grid)
    space = _coupled_space(spec)
    dyn = _dynamics(spec, grid, order)
    psi0 = _initial(spec, coeffs)
    before = []
    for j in range(1, grid.slots):
        psi = dyn.evolution(0, j) @ psi0
        p = np.outer(psi, psi.conj())
        before.append(validate_decomposition(
            [Projector(p, UNITARY_LABELS[0]), Projector(np.eye(space.dim) - p, UNITARY_LABELS[1])]))
    return HistoryFamily(psi0, grid, tuple(before) + (_final_products(spec, space),), dyn, "textbook")


def collapse(psi: Ket, outcome: Projector | Operator, tol: float = DEFAULT_TOL) -> Ket:
    """Project and renormalise; a calculational device for conditional probabilities."""
    p = outcome.op if isinstance(outcome, Projector) else np.asarray(outcome)
    v = p @ np.asarray(psi)
    nv = np.linalg.norm(v)
    if nv <= tol:
        raise NullProjection(f"projection has norm {nv:.3e}")
    return linalg.ket(v / nv)


def expectation(psi: Ket, p: Projector | Operator) -> float:
    op = p.op if isinstance(p, Projector) else p
    return float(np.vdot(psi, op @ psi).real)
