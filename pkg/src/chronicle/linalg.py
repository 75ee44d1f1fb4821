"""Dense complex linear algebra on small tensor-product Hilbert spaces.

Kets are 1-d complex128 numpy arrays and operators are square 2-d complex128
arrays. Both are returned read-only by the constructors here, so values can be
shared freely between threads.

Tensor ordering is row-major: the leftmost factor varies slowest, matching
``numpy.kron``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue, UnknownFactor

DEFAULT_TOL = 1e-10

Ket = np.ndarray
Operator = np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def ket(amplitudes) -> Ket:
    """Validated, read-only ket from any sequence of numbers."""
    a = np.asarray(amplitudes, dtype=np.complex128)
    if a.ndim != 1 or a.size == 0:
        raise DimensionMismatch(f"ket must be a non-empty vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue("ket amplitudes must be finite")
    return _frozen(a)


def operator(entries) -> Operator:
    """Validated, read-only square operator."""
    a = np.asarray(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"operator must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue("operator entries must be finite")
    return _frozen(a)


def basis_ket(dim: int, index: int) -> Ket:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return _frozen(v)


def identity(dim: int) -> Operator:
    return _frozen(np.eye(dim, dtype=np.complex128))


def zeros(dim: int) -> Operator:
    return _frozen(np.zeros((dim, dim), dtype=np.complex128))


def dyad(a: Ket, b: Ket | None = None) -> Operator:
    """|a><b|, or the projector |a><a| when ``b`` is omitted."""
    b = a if b is None else b
    return _frozen(np.outer(a, np.conj(b)))


def tensor_ket(*kets: Ket) -> Ket:
    return _frozen(reduce(np.kron, kets))


def tensor_op(*ops: Operator) -> Operator:
    return _frozen(reduce(np.kron, ops))


def adjoint(a: Operator) -> Operator:
    return _frozen(np.conj(np.transpose(a)))


def multiply(a: Operator, b: Operator) -> Operator:
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return _frozen(a @ b)


def apply(a: Operator, k: Ket) -> Ket:
    if a.shape[1] != k.shape[0]:
        raise DimensionMismatch(f"cannot apply {a.shape} operator to dim {k.shape[0]} ket")
    return _frozen(a @ k)


def inner(a: Ket, b: Ket) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"inner product of dims {a.shape} and {b.shape}")
    return complex(np.vdot(a, b))


def norm(a: Ket) -> float:
    return float(np.linalg.norm(a))


def max_entry(a: np.ndarray) -> float:
    return float(np.abs(a).max()) if a.size else 0.0


def is_hermitian(a: Operator, tol: float = DEFAULT_TOL) -> bool:
    return max_entry(a - a.conj().T) <= tol


def is_projector(a: Operator, tol: float = DEFAULT_TOL) -> bool:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return is_hermitian(a, tol) and max_entry(a - a @ a) <= tol


def is_unitary(a: Operator, tol: float = DEFAULT_TOL) -> bool:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return max_entry(a.conj().T @ a - np.eye(a.shape[0])) <= tol


def commutator_norm(a: Operator, b: Operator) -> float:
    return max_entry(a @ b - b @ a)


@dataclass(frozen=True)
class TensorSpace:
    """Ordered tensor product of labelled factors, e.g. ``a (x) M (x) b``."""

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        factors = tuple((str(label), int(dim)) for label, dim in factors)
        labels = [f[0] for f in factors]
        if not factors:
            raise DimensionMismatch("a tensor space needs at least one factor")
        if len(set(labels)) != len(labels):
            raise ValueError(f"factor labels must be unique, got {labels}")
        if any(d < 1 for _, d in factors):
            raise DimensionMismatch("factor dimensions must be positive")
        object.__setattr__(self, "factors", factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f[0] for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f[1] for f in self.factors)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownFactor(f"no factor labelled {label!r} in {self.labels}") from None

    def factor_dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def lift(self, a: Operator, factors: str | Sequence[str]) -> Operator:
        return lift(a, factors, self)

    def embed(self, parts: Sequence[tuple[Sequence[str] | str, Ket]]) -> Ket:
        return embed_product(parts, self)


def _as_labels(factors: str | Sequence[str]) -> tuple[str, ...]:
    return (factors,) if isinstance(factors, str) else tuple(factors)


def _permutation_to_space(labels: Sequence[str], space: TensorSpace) -> list[int]:
    # axis order that takes (given labels..., remaining labels...) to space order
    idx = [space.index(l) for l in labels]
    if len(set(idx)) != len(idx):
        raise ValueError(f"repeated factor labels {list(labels)}")
    rest = [i for i in range(len(space.factors)) if i not in idx]
    order = idx + rest
    return [order.index(i) for i in range(len(order))]


def lift(a: Operator, factors: str | Sequence[str], space: TensorSpace) -> Operator:
    """Embed ``a`` acting on the named factors, with identity on all the others.

    ``a`` is interpreted in the order the labels are given, which need not be
    the order of the factors in ``space``.
    """
    labels = _as_labels(factors)
    sub = [space.factor_dim(l) for l in labels]
    if a.shape != (prod(sub), prod(sub)):
        raise DimensionMismatch(f"operator of shape {a.shape} does not act on factors {labels} of dims {sub}")
    rest = [d for l, d in space.factors if l not in labels]
    full = np.kron(a, np.eye(prod(rest), dtype=np.complex128))
    n = len(space.factors)
    perm = _permutation_to_space(labels, space)
    shape = sub + rest
    t = full.reshape(shape + shape)
    t = t.transpose(perm + [p + n for p in perm])
    return _frozen(t.reshape(space.dim, space.dim))


def embed_product(parts: Sequence[tuple[Sequence[str] | str, Ket]], space: TensorSpace) -> Ket:
    """Tensor together kets living on disjoint groups of factors covering ``space``."""
    labels: list[str] = []
    vecs = []
    for group, v in parts:
        group = _as_labels(group)
        d = prod(space.factor_dim(l) for l in group)
        if v.shape != (d,):
            raise DimensionMismatch(f"ket of dim {v.shape[0]} does not fit factors {group}")
        labels.extend(group)
        vecs.append(v)
    if sorted(labels) != sorted(space.labels):
        raise ValueError(f"parts cover factors {labels}, space has {list(space.labels)}")
    t = reduce(np.kron, vecs).reshape([space.factor_dim(l) for l in labels])
    perm = _permutation_to_space(labels, space)
    return _frozen(t.transpose(perm).reshape(space.dim))


def random_unitary(dim: int, rng: np.random.Generator) -> Operator:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return _frozen(q * (d / np.abs(d)))


def random_ket(dim: int, rng: np.random.Generator) -> Ket:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return _frozen(v / np.linalg.norm(v))
