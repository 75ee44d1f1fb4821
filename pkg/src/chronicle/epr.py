"""Two spin-half particles in the singlet state, with and without apparatus.

Spin states along a direction ``(theta, phi)`` use the Bloch convention
``|w+> = cos(theta/2)|z+> + e^{i phi} sin(theta/2)|z->``. Factor order is
``a (x) b`` without apparatus, ``a (x) M (x) b`` with one and
``a (x) M (x) b (x) N`` with two. Every family here lives on the grid
``t_0 < t_1 < t_2`` (no apparatus) or ``t_0 < ... < t_3``, with any interaction
confined to the last interval.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import cos, isclose, pi, sin, sqrt
from typing import Sequence

import numpy as np

from . import linalg
from .errors import GridMismatch
from .framework import Decomposition, Projector, compatible, product_decomposition, ray, validate_decomposition
from .histories import Dynamics, HistoryFamily, TimeGrid, at, probabilities
from .linalg import Ket, TensorSpace
from .measurement import MeasurementSpec, assert_in_specified_domain, build_measurement_unitary, specified_domain

SIGNS = ("+", "-")


@dataclass(frozen=True)
class Direction:
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= pi + 1e-12:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", float(self.phi) % (2 * pi))

    @classmethod
    def in_plane(cls, angle: float) -> "Direction":
        """Direction in the x-z plane at ``angle`` from +z towards +x."""
        angle = angle % (2 * pi)
        if angle <= pi:
            return cls(angle, 0.0)
        return cls(2 * pi - angle, pi)

    @property
    def name(self) -> str:
        if isclose(self.theta, 0.0, abs_tol=1e-12):
            return "z"
        if isclose(self.theta, pi / 2, abs_tol=1e-12):
            if isclose(self.phi, 0.0, abs_tol=1e-12):
                return "x"
            if isclose(self.phi, pi / 2, abs_tol=1e-12):
                return "y"
        return "w"

    def vector(self) -> np.ndarray:
        return np.array([sin(self.theta) * cos(self.phi), sin(self.theta) * sin(self.phi), cos(self.theta)])

    def angle_to(self, other: "Direction") -> float:
        return float(np.arccos(np.clip(self.vector() @ other.vector(), -1.0, 1.0)))


Z = Direction(0.0, 0.0)
X = Direction(pi / 2, 0.0)
Y = Direction(pi / 2, pi / 2)


def spin_ket(d: Direction, sign: str) -> Ket:
    c, s = cos(d.theta / 2), sin(d.theta / 2)
    ph = np.exp(1j * d.phi)
    if sign == "+":
        return linalg.ket([c, ph * s])
    if sign == "-":
        return linalg.ket([-np.conj(ph) * s, c])
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def spin_label(d: Direction, sign: str, particle: str = "") -> str:
    return f"{d.name}_{particle}{sign}" if particle else f"{d.name}{sign}"


def spin_projector(d: Direction, sign: str, particle: str = "") -> Projector:
    return ray(spin_ket(d, sign), spin_label(d, sign, particle))


def spin_decomposition(d: Direction, particle: str = "") -> Decomposition:
    return validate_decomposition([spin_projector(d, s, particle) for s in SIGNS])


def singlet() -> Ket:
    up, down = linalg.basis_ket(2, 0), linalg.basis_ket(2, 1)
    return linalg.ket((np.kron(up, down) - np.kron(down, up)) / sqrt(2))


def spin_measurement(d: Direction, pointer: str = "M", interval: int = 3) -> MeasurementSpec:
    """Nondestructive measurement of spin along ``d`` with outcomes ``M+``/``M-``."""
    return MeasurementSpec.standard(
        [spin_ket(d, s) for s in SIGNS],
        system_labels=tuple(spin_label(d, s) for s in SIGNS),
        outcome_labels=tuple(f"{pointer}{s}" for s in SIGNS),
        pointer=pointer,
        interval=interval,
    )


def _grid(n: int) -> TimeGrid:
    return TimeGrid.steps(n)


def family_no_measurement(wa: Direction = Z, wb: Direction = Z) -> HistoryFamily:
    """Singlet with trivial dynamics and ``{wa_a} (x) {wb_b}`` at ``t_1`` and ``t_2``."""
    space = TensorSpace([("a", 2), ("b", 2)])
    slot = product_decomposition([(spin_decomposition(wa, "a"), "a"), (spin_decomposition(wb, "b"), "b")], space)
    return HistoryFamily(singlet(), _grid(2), (slot, slot), Dynamics.identity(4, 2), "no-measurement")


def _measure_a(wa: Direction, wb: Direction, order=None) -> HistoryFamily:
    space = TensorSpace([("a", 2), ("M", 3), ("b", 2)])
    spec = spin_measurement(wa, "M")
    psi0 = space.embed([(("a", "b"), singlet()), ("M", spec.pointer_ready)])
    u = linalg.tensor_op(build_measurement_unitary(spec, order), linalg.identity(2))
    dyn = Dynamics((linalg.identity(12), linalg.identity(12), u))
    early = product_decomposition([(spin_decomposition(wa, "a"), "a"), (spin_decomposition(wb, "b"), "b")], space)
    late = product_decomposition([(spec.pointer_decomposition(), "M"), (spin_decomposition(wb, "b"), "b")], space)
    fam = HistoryFamily(psi0, _grid(3), (early, early, late), dyn, "measure-a")
    assert_in_specified_domain(fam, space.lift(specified_domain(spec), ("a", "M")), spec.interval)
    return fam


def family_measure_a(wb: Direction = Z, order: Sequence[int] | None = None) -> HistoryFamily:
    """Apparatus ``M`` measures ``S_z`` of particle a during ``(t_2, t_3)``.

    Slots ``t_1``, ``t_2`` carry ``{z_a} (x) {wb_b}``; slot ``t_3`` carries
    ``{M+, M-, M0} (x) {wb_b}``.
    """
    return _measure_a(Z, wb, order)


def two_apparatus_family(wa: Direction, wb: Direction, order: Sequence[int] | None = None) -> HistoryFamily:
    """Apparatus ``M`` measures ``S_wa`` of a and ``N`` measures ``S_wb`` of b in ``(t_2, t_3)``."""
    space = TensorSpace([("a", 2), ("M", 3), ("b", 2), ("N", 3)])
    spec_a = spin_measurement(wa, "M")
    spec_b = spin_measurement(wb, "N")
    psi0 = space.embed([(("a", "b"), singlet()), ("M", spec_a.pointer_ready), ("N", spec_b.pointer_ready)])
    u = linalg.tensor_op(build_measurement_unitary(spec_a, order), build_measurement_unitary(spec_b, order))
    eye = linalg.identity(space.dim)
    dyn = Dynamics((eye, eye, u))
    early = product_decomposition([(spin_decomposition(wa, "a"), "a"), (spin_decomposition(wb, "b"), "b")], space)
    late = product_decomposition([(spec_a.pointer_decomposition(), "M"), (spec_b.pointer_decomposition(), "N")], space)
    fam = HistoryFamily(psi0, _grid(3), (early, early, late), dyn, "measure-both")
    domain = space.lift(specified_domain(spec_a), ("a", "M")) @ space.lift(specified_domain(spec_b), ("b", "N"))
    assert_in_specified_domain(fam, domain, 3)
    return fam


def family_measure_both(theta: float, phi: float = 0.0, order: Sequence[int] | None = None) -> HistoryFamily:
    """``S_z`` of a measured by ``M`` and ``S_w`` of b by ``N``, ``w`` at angle ``theta`` from z."""
    return two_apparatus_family(Z, Direction(theta, phi), order)


def incompatibility_matrix(families: Sequence[HistoryFamily]) -> np.ndarray:
    """Pairwise slot-by-slot compatibility; entry ``(i, j)`` is True when compatible."""
    n = len(families)
    for f in families[1:]:
        if f.grid != families[0].grid or f.space_dim != families[0].space_dim:
            raise GridMismatch("families must share one grid and one Hilbert space")
    out = np.ones((n, n), dtype=bool)
    for i, j in itertools.combinations(range(n), 2):
        ok = all(compatible(p, q) for p, q in zip(families[i].decomps, families[j].decomps))
        out[i, j] = out[j, i] = ok
    return out


def outcome_correlation(family: HistoryFamily) -> float:
    """``Pr(same signs) - Pr(opposite signs)`` for the final pointer readings."""
    table = probabilities(family)
    e = 0.0
    for sa, sb in itertools.product(SIGNS, SIGNS):
        p = table.prob(at(3, f"M{sa}", f"N{sb}"))
        e += p if sa == sb else -p
    return e


def correlation_between(wa: Direction, wb: Direction) -> float:
    return outcome_correlation(two_apparatus_family(wa, wb))


def correlation(theta: float) -> float:
    """Outcome correlation with a measured along z and b at angle ``theta``."""
    return outcome_correlation(family_measure_both(theta))


def chsh(a1: Direction, a2: Direction, b1: Direction, b2: Direction) -> float:
    """``E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2)`` from two-apparatus tables."""
    return (correlation_between(a1, b1) + correlation_between(a1, b2)
            + correlation_between(a2, b1) - correlation_between(a2, b2))


OPTIMAL_CHSH = (Direction.in_plane(0.0), Direction.in_plane(pi / 2),
                Direction.in_plane(pi / 4), Direction.in_plane(-pi / 4))


def deterministic_chsh_values() -> list[int]:
    """CHSH combination for every deterministic assignment of +/-1 outcomes."""
    return [a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2
            for a1, a2, b1, b2 in itertools.product((1, -1), repeat=4)]
