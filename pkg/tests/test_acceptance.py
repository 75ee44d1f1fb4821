"""Exit criteria. Each criterion prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` (lines appear in the
summary) or ``python -m tests.test_acceptance``.
"""

import itertools
from math import cos, pi, sin, sqrt

import numpy as np
import pytest

from chronicle import linalg, scenario
from chronicle.epr import (
    OPTIMAL_CHSH,
    X,
    Z,
    Direction,
    chsh,
    deterministic_chsh_values,
    family_measure_a,
    family_measure_both,
    family_no_measurement,
    incompatibility_matrix,
    singlet,
    spin_projector,
    two_apparatus_family,
)
from chronicle.framework import Projector, check_distributivity, validate_decomposition
from chronicle.histories import (
    Dynamics,
    HistoryFamily,
    TimeGrid,
    at,
    born_rule,
    check_consistency,
    marginal,
    pre_probability_pair,
    probabilities,
)
from chronicle.measurement import (
    MeasurementSpec,
    collapse,
    expectation,
    measurement_family,
    nondestructive_family,
    textbook_family,
)

TOL = 1e-10
THETAS = (0.0, pi / 6, pi / 3, pi / 2, 2 * pi / 3, pi)
RESULTS: dict[str, tuple[bool, str]] = {}


def _record(name, deviation, tol, extra=""):
    ok = bool(deviation <= tol)
    RESULTS[name] = (ok, f"max deviation {deviation:.3e} (tol {tol:g}){extra}")
    return ok


def two_histories_at_half():
    t = probabilities(family_no_measurement(Z, Z))
    half = [p for p in t.entries.values() if abs(p - 0.5) <= TOL]
    small = [p for p in t.entries.values() if p <= TOL]
    dev = max(abs(p - 0.5) if p > TOL else p for p in t.entries.values())
    counts_ok = len(half) == 2 and len(small) == 14
    return _record("two-history table", dev if counts_ok else np.inf, TOL, f", {len(half)} at 1/2, {len(small)} at 0")


def final_marginals_match_born():
    fam = family_no_measurement(Z, Z)
    m = marginal(probabilities(fam), [2])
    born = born_rule(fam.initial, fam.resolve_dynamics(), fam.decomps[1])
    dev = max(abs(m[("z_a+∧z_b-",)] - 0.5), abs(m[("z_a-∧z_b+",)] - 0.5))
    dev = max(dev, max(abs(m[k] - p) for k, p in born))
    return _record("t2 marginals vs Born rule", dev, TOL)


def tilted_b_split():
    dev = 0.0
    for th in THETAS:
        wb = Direction(th)
        t = probabilities(family_no_measurement(Z, wb))
        c2, s2 = 0.5 * cos(th / 2) ** 2, 0.5 * sin(th / 2) ** 2
        for (sa, sb), e in {("+", "-"): c2, ("-", "+"): c2, ("+", "+"): s2, ("-", "-"): s2}.items():
            key = (f"z_a{sa}∧{wb.name}_b{sb}",) * 2
            dev = max(dev, abs(t[key] - e))
        # everything off the diagonal histories is zero
        dev = max(dev, max(p for a, p in t if a[0] != a[1]))
    return _record("cos^2/sin^2 split over theta grid", dev, TOL)


def measurement_formulas():
    rng = np.random.default_rng(17)
    dev = 0.0
    for trial in range(100):
        n = (2, 3, 4)[trial % 3]
        v = linalg.random_unitary(n, rng)
        spec = MeasurementSpec.standard([v[:, j] for j in range(n)])
        c = linalg.random_ket(n, rng)
        t = probabilities(measurement_family(spec, c))
        nd = probabilities(nondestructive_family(spec, c))
        for (j, sj), (k, mk) in itertools.product(enumerate(spec.system_labels), enumerate(spec.outcome_labels)):
            dev = max(dev, abs(t[(sj, mk)] - abs(c[j]) ** 2 * (j == k)))
            for l, sl in enumerate(spec.system_labels):
                dev = max(dev, abs(nd[(sj, f"{sl}∧{mk}")] - abs(c[j]) ** 2 * (j == k == l)))
    return _record("measurement joint and triple-delta formulas (100 sets)", dev, TOL)


def one_apparatus_inference():
    t = probabilities(family_measure_a(Z))
    vals = [t.conditional(at(3, "M+"), at(j, "z_a+")) for j in (1, 2)]
    vals += [t.conditional(at(3, "M+"), at(k, "z_b-")) for k in (1, 2, 3)]
    return _record("M+ implies z_a+ (t1,t2) and z_b- (t1..t3)", max(abs(v - 1) for v in vals), TOL)


def collapse_matches_history_conditionals():
    psi_plus = collapse(singlet(), np.kron(spin_projector(Z, "+").op, np.eye(2)))
    dev = 0.0
    for wb in (Z, X, Direction(pi / 5)):
        t = probabilities(family_measure_a(wb))
        for s in "+-":
            p = spin_projector(wb, s, "b")
            via_collapse = expectation(psi_plus, np.kron(np.eye(2), p.op))
            for k in (1, 2, 3):
                dev = max(dev, abs(t.conditional(at(3, "M+"), at(k, p.label)) - via_collapse))
    return _record("collapse rule vs history table", dev, TOL)


def one_apparatus_tilted():
    dev = 0.0
    for th in THETAS:
        wb = Direction(th)
        t = probabilities(family_measure_a(wb))
        for k in (1, 2, 3):
            dev = max(dev, abs(t.conditional(at(3, "M+"), at(k, f"{wb.name}_b+")) - sin(th / 2) ** 2))
            for s in "+-":
                label = f"{wb.name}_b{s}"
                if t.prob(at(1, label)) > TOL:
                    dev = max(dev, abs(t.conditional(at(1, label), at(k, label)) - 1))
    return _record("Pr(w_b+|M+) = sin^2 and S_bw persistence", dev, TOL)


def two_apparatus():
    dev = 0.0
    for th in THETAS:
        wb = Direction(th)
        t = probabilities(family_measure_both(th))
        for s in "+-":
            for j in (1, 2):
                dev = max(dev, abs(t.conditional(at(3, f"M{s}"), at(j, f"z_a{s}")) - 1))
                if t.prob(at(3, f"N{s}")) > TOL:
                    dev = max(dev, abs(t.conditional(at(3, f"N{s}"), at(j, f"{wb.name}_b{s}")) - 1))
            dev = max(dev, abs(t.conditional(at(3, f"M{s}"), at(3, f"N{s}")) - sin(th / 2) ** 2))
    return _record("two-apparatus conditionals over theta grid", dev, TOL)


def _tv(p, q):
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q))


def locality():
    dev = 0.0
    grid = [Direction(th, ph) for th in (pi / 6, pi / 2, 5 * pi / 6) for ph in (0, pi / 2, pi, 3 * pi / 2)]
    for wb in grid:
        with_m = probabilities(family_measure_a(wb))
        without = probabilities(family_no_measurement(Z, wb))
        dev = max(dev, _tv(dict(marginal(with_m, [(1, 1), (2, 1)])), dict(marginal(without, [(1, 1), (2, 1)]))))
        for k in (1, 2, 3):
            dev = max(dev, _tv(dict(marginal(with_m, [(k, 1)])), dict(marginal(without, [(min(k, 2), 1)]))))
    return _record("b-side marginals with/without a-apparatus (12 directions)", dev, TOL)


def non_distributivity():
    zp, xm, xp = spin_projector(Z, "+"), spin_projector(X, "-"), spin_projector(X, "+")
    r = check_distributivity(zp, xm, xp)
    dev = max(linalg.max_entry(r.lhs.op), linalg.max_entry(r.rhs.op - zp.op))
    ok = not r.equal
    rng = np.random.default_rng(23)
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        v = linalg.random_unitary(dim, rng)
        triple = [Projector(v @ np.diag(rng.integers(0, 2, dim)) @ v.conj().T, "r") for _ in range(3)]
        ok &= check_distributivity(*triple).equal
    return _record("non-distributive triple; 100 commuting triples distribute", dev if ok else np.inf, TOL)


def consistency_guarantees():
    ok = True
    for name in scenario.bundled_names():
        ok &= scenario.run(scenario.bundled(name), TOL)["consistency"]["consistent"]
    for fam in (family_no_measurement(Z, Z), family_no_measurement(X, X), family_no_measurement(Z, Direction(1.0)),
                family_measure_a(Z), family_measure_a(Direction(1.0)), family_measure_both(1.0),
                two_apparatus_family(Direction(0.4, 1.0), Direction(2.0, 3.0))):
        ok &= check_consistency(fam, tol=TOL).consistent
    rng = np.random.default_rng(29)
    for _ in range(50):
        dim = int(rng.integers(2, 6))
        v = linalg.random_unitary(dim, rng)
        split = int(rng.integers(1, dim))
        dec = validate_decomposition([Projector(v[:, :split] @ v[:, :split].conj().T, "p"),
                                      Projector(v[:, split:] @ v[:, split:].conj().T, "q")])
        fam = HistoryFamily(linalg.random_ket(dim, rng), TimeGrid.steps(1), (dec,),
                            Dynamics((linalg.random_unitary(dim, rng),)))
        ok &= check_consistency(fam, tol=TOL).consistent
    for _ in range(30):
        n = int(rng.integers(2, 5))
        v = linalg.random_unitary(n, rng)
        spec = MeasurementSpec.standard([v[:, j] for j in range(n)])
        c = linalg.random_ket(n, rng)
        if rng.random() < 0.3:
            c = np.zeros(n, dtype=complex)
            c[int(rng.integers(n))] = 1
        tb, mf = textbook_family(spec, c), measurement_family(spec, c)
        ok &= check_consistency(tb, tol=TOL).consistent
        several = int(np.sum(np.abs(c) > 1e-8)) >= 2
        ok &= bool(incompatibility_matrix([tb, mf])[0, 1]) != several
    return _record("consistency of bundled/random/textbook families", 0.0 if ok else np.inf, TOL)


def pre_probability_equivalence():
    rng = np.random.default_rng(31)
    dev = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 7))
        f, b = pre_probability_pair(linalg.random_ket(dim, rng), linalg.random_unitary(dim, rng),
                                    linalg.random_ket(dim, rng))
        dev = max(dev, abs(f - b))
    return _record("forward vs backward pre-probability (100 pairs)", dev, 1e-12)


def chsh_demo():
    s = chsh(*OPTIMAL_CHSH)
    classical = max(abs(v) for v in deterministic_chsh_values())
    dev = abs(abs(s) - 2 * sqrt(2))
    return _record("CHSH |S| = 2*sqrt(2); deterministic bound 2", dev if classical <= 2 else np.inf, 1e-9,
                   f", S = {s:.12f}, classical max {classical}")


CRITERIA = [
    two_histories_at_half,
    final_marginals_match_born,
    tilted_b_split,
    measurement_formulas,
    one_apparatus_inference,
    collapse_matches_history_conditionals,
    one_apparatus_tilted,
    two_apparatus,
    locality,
    non_distributivity,
    consistency_guarantees,
    pre_probability_equivalence,
    chsh_demo,
]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[c.__name__ for c in CRITERIA])
def test_criterion(criterion):
    assert criterion(), RESULTS


def report_lines() -> list[str]:
    return [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, (ok, detail) in RESULTS.items()]


if __name__ == "__main__":
    for c in CRITERIA:
        c()
    print("\n".join(report_lines()))
    raise SystemExit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
