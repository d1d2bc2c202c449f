"""Brute-force verification oracles."""

import pytest

from conftest import digraph, make_path_program, make_tc_program
from homkit.core import Instance, Schema, find_homomorphism
from homkit.duality import dual_from_program
from homkit.oracle import (
    OracleError,
    Verdict,
    count_instances,
    enumerate_instances,
    enumerate_pointed,
    iter_homomorphisms,
    programs_equivalent_bounded,
    verify_duality,
)


E = Schema([("E", 2)])


def test_count_matches_enumeration():
    for B in (0, 1, 2):
        assert count_instances(E, B) == \
            sum(1 for _ in enumerate_instances(E, B))


def test_count_closed_form():
    # one empty instance, 2^1 at one element, 2^16 at two for E/2... per
    # domain size m the count is 2^(m^2)
    assert count_instances(E, 2) == 1 + 2 + 2 ** 4


def test_enumerate_ordered_smallest_first():
    seq = list(enumerate_instances(E, 2))
    sizes = [(len(I.domain), len(I.facts)) for I in seq]
    assert sizes == sorted(sizes)


def test_enumerate_pointed_counts():
    seq = list(enumerate_pointed(E, 1, k=1))
    # empty instance has no pointed variants; one element gives 2 * 1
    assert len(seq) == 2


def test_verdict_invariant():
    with pytest.raises(OracleError):
        Verdict(passed=False, bound=2)
    v = Verdict(passed=False, bound=2, counterexample=digraph([("a", "b")]))
    assert not v
    assert Verdict(passed=True, bound=2)


def test_iter_homomorphisms_complete():
    A = digraph([("a", "b")])
    B = digraph([("x", "y"), ("y", "x")])
    homs = list(iter_homomorphisms(A, B))
    assert len(homs) == 2
    for h in homs:
        for rel, args in A.facts:
            assert (rel, tuple(h[e] for e in args)) in set(B.facts)


def test_verify_duality_pass_and_fail():
    d = dual_from_program(make_path_program(2), "Ans")
    assert verify_duality(d.generator, d.duals, 3).passed
    # an over-narrow dual set misses instances: drop the dual entirely
    bad = verify_duality([digraph([("a", "b"), ("b", "c")])], [], 2)
    assert not bad.passed and bad.counterexample is not None


def test_verify_duality_redundant_dual_invariant():
    d = dual_from_program(make_path_program(2), "Ans")
    # adding a dual that maps into an existing one never changes the verdict
    redundant = digraph([], extra=["z"])
    assert find_homomorphism(redundant, d.duals[0]) is not None
    v1 = verify_duality(d.generator, d.duals, 3)
    v2 = verify_duality(d.generator, list(d.duals) + [redundant], 3)
    assert v1.passed == v2.passed


def test_verify_duality_detects_overlap():
    # frontier and dual both hit the single edge: never a duality
    edge = digraph([("a", "b")])
    v = verify_duality([edge], [digraph([("x", "y"), ("y", "x")])], 2)
    assert not v.passed


def test_programs_equivalent_bounded(tc_program):
    from homkit.program import Atom, Program, Rule
    copy_only = Program(
        Schema([("E", 2)]), Schema([("Ans", 2)]), Schema([]),
        [Rule((Atom("Ans", ("x", "y")),), (Atom("E", ("x", "y")),))])
    v = programs_equivalent_bounded(tc_program, copy_only, B=3)
    assert not v.passed and v.counterexample is not None
    assert programs_equivalent_bounded(tc_program, tc_program, B=2).passed
