import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronicle import linalg
from chronicle.epr import Z, family_no_measurement, singlet
from chronicle.errors import ConditionOnNullEvent, InconsistentFamily
from chronicle.framework import Projector, ray, trivial_decomposition, validate_decomposition
from chronicle.histories import (
    Dynamics,
    HistoryFamily,
    TimeGrid,
    always,
    at,
    born_rule,
    chain_ket,
    check_consistency,
    conditional,
    marginal,
    pre_probability_pair,
    probabilities,
    unitary_family,
)

Z_DEC = validate_decomposition([ray([1, 0], "z+"), ray([0, 1], "z-")])
X_DEC = validate_decomposition([ray([1, 1], "x+"), ray([1, -1], "x-")])


def _random_decomposition(rng, dim):
    v = linalg.random_unitary(dim, rng)
    cut = sorted(rng.choice(np.arange(1, dim), size=int(rng.integers(0, dim)), replace=False))
    groups = np.split(np.arange(dim), cut)
    return validate_decomposition(
        [Projector(v[:, g] @ v[:, g].conj().T, f"p{k}") for k, g in enumerate(groups)])


def test_time_grid_validation():
    assert TimeGrid([0, 0.5, 2]).slots == 2
    with pytest.raises(ValueError):
        TimeGrid([0])
    with pytest.raises(ValueError):
        TimeGrid([0, 1, 1])


def test_dynamics_rejects_non_unitary():
    with pytest.raises(ValueError):
        Dynamics((np.diag([1, 2]),))


def test_dynamics_composition_order(rng):
    u1, u2 = linalg.random_unitary(3, rng), linalg.random_unitary(3, rng)
    dyn = Dynamics((u1, u2))
    np.testing.assert_allclose(dyn.evolution(0, 2), u2 @ u1, atol=1e-14)
    np.testing.assert_allclose(dyn.evolution(2, 0), (u2 @ u1).conj().T, atol=1e-14)


def test_family_validation():
    with pytest.raises(ValueError):
        HistoryFamily(linalg.ket([1, 1]), TimeGrid.steps(1), (Z_DEC,))
    with pytest.raises(ValueError):
        HistoryFamily(linalg.ket([1, 0]), TimeGrid.steps(2), (Z_DEC,))


def test_chain_kets_of_singlet_family():
    fam = family_no_measurement(Z, Z)
    k = chain_ket(fam, ("z_a+∧z_b-", "z_a+∧z_b-"))
    assert linalg.norm(k) ** 2 == pytest.approx(0.5, abs=1e-15)
    zero = chain_ket(fam, ("z_a+∧z_b+", "z_a+∧z_b-"))
    assert linalg.norm(zero) == 0


def test_single_trivial_slot_is_evolution(rng):
    u = linalg.random_unitary(3, rng)
    psi = linalg.random_ket(3, rng)
    fam = HistoryFamily(psi, TimeGrid.steps(1), (trivial_decomposition(3),), Dynamics((u,)))
    np.testing.assert_allclose(chain_ket(fam, ("I",)), u @ psi, atol=1e-14)


def test_chain_ket_unknown_label():
    fam = HistoryFamily(linalg.ket([1, 0]), TimeGrid.steps(1), (Z_DEC,))
    with pytest.raises(KeyError):
        chain_ket(fam, ("y+",))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_two_time_families_always_consistent(seed, dim):
    rng = np.random.default_rng(seed)
    fam = HistoryFamily(linalg.random_ket(dim, rng), TimeGrid.steps(1), (_random_decomposition(rng, dim),),
                        Dynamics((linalg.random_unitary(dim, rng),)))
    assert check_consistency(fam).consistent
    assert probabilities(fam).total() == pytest.approx(1, abs=1e-12)


def test_engineered_inconsistent_family():
    # z+ then {x+, x-} then {z+, z-}: the two histories ending in z+ overlap by 1/4
    fam = HistoryFamily(linalg.ket([1, 0]), TimeGrid.steps(2), (X_DEC, Z_DEC))
    report = check_consistency(fam)
    assert not report.consistent
    assert report.worst_overlap == pytest.approx(0.25)
    assert set(report.worst_pair) == {("x+", "z+"), ("x-", "z+")}
    with pytest.raises(InconsistentFamily) as exc:
        probabilities(fam)
    assert exc.value.worst_overlap == pytest.approx(0.25)


def test_chain_ket_matches_batched_computation(rng):
    decs = [_random_decomposition(rng, 4) for _ in range(3)]
    dyn = Dynamics(tuple(linalg.random_unitary(4, rng) for _ in range(3)))
    fam = HistoryFamily(linalg.random_ket(4, rng), TimeGrid.steps(3), tuple(decs), dyn)
    # brute force Gram matrix from one-at-a-time chain kets
    idx = list(fam.indices())
    kets = np.array([chain_ket(fam, a) for a in idx])
    gram = kets.conj() @ kets.T
    off = np.abs(gram - np.diag(np.diag(gram)))
    assert check_consistency(fam).worst_overlap == pytest.approx(off.max(), rel=1e-12, abs=1e-15)


def test_probability_table_of_singlet_family():
    t = probabilities(family_no_measurement(Z, Z))
    assert len(t) == 16
    assert t.support() == pytest.approx({("z_a+∧z_b-",) * 2: 0.5, ("z_a-∧z_b+",) * 2: 0.5})
    assert list(t.entries)[:2] == [("z_a+∧z_b+", "z_a+∧z_b+"), ("z_a+∧z_b+", "z_a+∧z_b-")]


def test_all_trivial_family():
    fam = HistoryFamily(linalg.ket([0.6, 0.8]), TimeGrid.steps(3), (trivial_decomposition(2),) * 3)
    t = probabilities(fam)
    assert dict(t) == pytest.approx({("I", "I", "I"): 1.0})


def test_marginals():
    t = probabilities(family_no_measurement(Z, Z))
    m = marginal(t, [2])
    assert m[("z_a+∧z_b-",)] == pytest.approx(0.5)
    assert m[("z_a-∧z_b+",)] == pytest.approx(0.5)
    assert dict(marginal(t, [1, 2])) == dict(t)
    assert dict(marginal(t, [])) == pytest.approx({(): 1.0})
    b_only = marginal(t, [(2, 1)])
    assert dict(b_only) == pytest.approx({("z_b+",): 0.5, ("z_b-",): 0.5})


def test_conditionals():
    t = probabilities(family_no_measurement(Z, Z))
    a = at(1, "z_a+")
    assert conditional(t, a, a) == pytest.approx(1)
    assert conditional(t, a, at(2, "z_b-")) == pytest.approx(1)
    assert conditional(t, a, ~at(2, "z_b-")) == pytest.approx(0)
    assert t.prob(a | at(1, "z_a-")) == pytest.approx(1)
    assert t.prob(always()) == pytest.approx(1)
    with pytest.raises(ConditionOnNullEvent):
        conditional(t, at(1, "z_a+", "z_b+"), a)


def test_truncation_gives_marginals(rng):
    for _ in range(10):
        u = linalg.random_unitary(2, rng)
        psi = linalg.random_ket(2, rng)
        dyn = Dynamics((u, u.conj().T, u))
        # a unitary family is consistent for any dynamics; also try the singlet family
        for fam in (unitary_family(psi, dyn), family_no_measurement(Z, Z)):
            full = probabilities(fam)
            short = probabilities(fam.truncated(fam.slots - 1))
            m = marginal(full, list(range(1, fam.slots)))
            for k, p in short:
                assert m[k] == pytest.approx(p, abs=1e-12)


def test_born_rule_examples():
    fam = family_no_measurement(Z, Z)
    b = born_rule(singlet(), np.eye(4), fam.decomps[0])
    assert [p for _, p in b] == pytest.approx([0, 0.5, 0.5, 0], abs=1e-15)
    eig = born_rule(linalg.ket([0, 1]), np.eye(2), Z_DEC)
    assert dict(eig) == pytest.approx({("z+",): 0.0, ("z-",): 1.0})
    assert dict(born_rule(linalg.ket([0.6, 0.8j]), np.eye(2), trivial_decomposition(2))) == pytest.approx({("I",): 1})


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_born_rule_equals_single_slot_family(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 6))
    psi, u, dec = linalg.random_ket(dim, rng), linalg.random_unitary(dim, rng), _random_decomposition(rng, dim)
    born = born_rule(psi, u, dec)
    hist = probabilities(HistoryFamily(psi, TimeGrid.steps(1), (dec,), Dynamics((u,))))
    for k, p in hist:
        assert born[k] == pytest.approx(p, abs=1e-12)


def test_pre_probability_examples(rng):
    psi = linalg.random_ket(3, rng)
    assert pre_probability_pair(psi, np.eye(3), psi) == pytest.approx((1, 1))
    orth = linalg.ket(np.cross(np.array([1, 0, 0]), np.array([0, 1, 0])).astype(complex))
    assert pre_probability_pair(linalg.basis_ket(3, 0), np.eye(3), orth) == (0, 0)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_pre_probability_forward_equals_backward(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 7))
    fwd, bwd = pre_probability_pair(linalg.random_ket(dim, rng), linalg.random_unitary(dim, rng),
                                    linalg.random_ket(dim, rng))
    assert fwd == pytest.approx(bwd, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_unitary_family(seed, steps):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 5))
    dyn = Dynamics(tuple(linalg.random_unitary(dim, rng) for _ in range(steps)))
    fam = unitary_family(linalg.random_ket(dim, rng), dyn)
    assert check_consistency(fam).consistent
    t = probabilities(fam)
    assert t[("Psi",) * steps] == pytest.approx(1, abs=1e-12)


def test_unitary_family_with_trivial_dynamics():
    fam = unitary_family(linalg.ket([0.6, 0.8]), Dynamics.identity(2, 3))
    first = fam.decomps[0]["Psi"]
    for d in fam.decomps[1:]:
        assert d["Psi"].equals(first)
