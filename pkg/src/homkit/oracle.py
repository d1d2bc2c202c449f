"""Brute-force verification backbone.

Exhaustive small-instance enumeration plus checkers for homomorphism
dualities, generalized right-adjoints, and bounded program equivalence.
Everything here is deliberately independent of the constructions it checks:
it only uses the chase and plain homomorphism search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .chase import DEFAULT_BUDGET, chase_existential, run_program
from .core import (
    Element,
    Fact,
    HomkitError,
    Instance,
    Schema,
    find_homomorphism,
)
from .duality import abox_morphism, adom_instance, chase_theory, theory_program
from .program import Program, classify, tgd_schema


class OracleError(HomkitError):
    pass


@dataclass
class Verdict:
    """Outcome of a bounded exhaustive check.

    ``counterexample`` is present exactly when ``passed`` is false; when the
    check could not be decided within the chase budget, ``unknown`` is set
    and the explanation says why.
    """

    passed: bool
    bound: int
    counterexample: Optional[Instance] = None
    explanation: str = ""
    unknown: bool = False

    def __post_init__(self):
        if self.passed and self.counterexample is not None:
            raise OracleError("passing verdict with a counterexample")
        if not self.passed and self.counterexample is None and \
                not self.unknown:
            raise OracleError("failing verdict without a counterexample")

    def __bool__(self):
        return self.passed


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _all_facts(schema: Schema, elems: list[Element]) -> list[Fact]:
    facts: list[Fact] = []
    for rel, arity in schema.relations:
        for combo in itertools.product(elems, repeat=arity):
            facts.append((rel, combo))
    return facts


def count_instances(schema: Schema, max_domain: int) -> int:
    """Closed-form count of the enumeration, for self-testing."""
    total = 0
    for m in range(max_domain + 1):
        exponent = sum(m ** arity for _, arity in schema.relations)
        total += 2 ** exponent
    return total


def _is_model(C: Instance, P_sigma: Program, base: Schema,
              budget: int) -> bool:
    """Does the chase of C add nothing new, up to homomorphic equivalence
    fixing the active domain of C?"""
    chased, terminated = chase_theory(P_sigma, base, C, budget=budget)
    if not terminated:
        raise OracleError("model filter needs a terminating chase")
    keep = set(chased.active_domain) | set(C.active_domain)
    chased = Instance(base, keep, chased.facts)
    fixed = sorted(set(C.active_domain))
    target = Instance(base, set(C.domain) | set(fixed), C.facts)
    return find_homomorphism(chased, target, fixed=fixed) is not None


def enumerate_instances(schema: Schema, max_domain: int,
                        filter_sigma=None, dedupe_iso: bool = False,
                        budget: int = DEFAULT_BUDGET) -> Iterator[Instance]:
    """All instances over domains {e1..em}, m <= max_domain, all fact
    subsets, ordered by domain size, then fact count, then canonical fact
    order.  ``filter_sigma`` keeps only instances the dependency chase
    leaves unchanged up to hom-equivalence over the active domain
    (requires terminating chases).  ``dedupe_iso`` keeps the first
    representative of each isomorphism class.
    """
    if max_domain < 0:
        raise OracleError("max_domain must be >= 0")
    P_sigma = base = None
    if filter_sigma is not None:
        sigma = tuple(filter_sigma)
        base = tgd_schema(sigma).union(schema)
        P_sigma = theory_program(sigma, base)
        if not classify(P_sigma).weakly_acyclic:
            raise OracleError("instance filter requires a dependency set "
                              "with terminating chases")
    from .core import isomorphic

    for m in range(max_domain + 1):
        elems = [Element.named(f"e{i}") for i in range(1, m + 1)]
        candidates = _all_facts(schema, elems)
        seen: list[Instance] = []
        for size in range(len(candidates) + 1):
            for combo in itertools.combinations(range(len(candidates)),
                                                size):
                facts = [candidates[i] for i in combo]
                C = Instance(schema, elems, facts)
                if P_sigma is not None and not _is_model(
                        C.with_schema(base) if base != schema else C,
                        P_sigma, base, budget):
                    continue
                if dedupe_iso:
                    if any(isomorphic(C, s) for s in seen):
                        continue
                    seen.append(C)
                yield C


def enumerate_pointed(schema: Schema, max_domain: int, k: int,
                      filter_sigma=None,
                      budget: int = DEFAULT_BUDGET) -> Iterator[Instance]:
    """Pointed variant: every instance with every k-tuple over its domain."""
    for C in enumerate_instances(schema, max_domain, filter_sigma,
                                 budget=budget):
        if k == 0:
            yield C
            continue
        for pts in itertools.product(C.sorted_domain(), repeat=k):
            yield C.with_points(pts)


# ---------------------------------------------------------------------------
# Homomorphism enumeration (for the diagram check)
# ---------------------------------------------------------------------------


def iter_homomorphisms(A: Instance, B: Instance,
                       bindings: Optional[dict] = None) -> Iterator[dict]:
    """All homomorphisms A -> B extending ``bindings``, lazily, in
    canonical order."""
    assignment: dict[Element, Element] = dict(bindings or {})
    if A.points and B.points:
        for src, dst in zip(A.points, B.points):
            if assignment.setdefault(src, dst) != dst:
                return
    order = sorted(assignment) + [
        e for e in A.sorted_domain() if e not in assignment]
    pos = {e: i for i, e in enumerate(order)}
    closing: dict[Element, list[Fact]] = {e: [] for e in order}
    for fact in A.facts:
        _, args = fact
        if args:
            closing[max(args, key=lambda e: pos[e])].append(fact)
        elif fact not in B.facts:
            return
    b_elems = sorted(B.domain)
    n_pre = len(assignment)

    def consistent(e: Element) -> bool:
        for rel, args in closing[e]:
            if (rel, tuple(assignment[a] for a in args)) not in B.facts:
                return False
        return True

    def search(i: int) -> Iterator[dict]:
        if i == len(order):
            yield dict(assignment)
            return
        e = order[i]
        if i < n_pre:
            if consistent(e):
                yield from search(i + 1)
            return
        for cand in b_elems:
            assignment[e] = cand
            if consistent(e):
                yield from search(i + 1)
            del assignment[e]

    yield from search(0)


# ---------------------------------------------------------------------------
# Duality verification
# ---------------------------------------------------------------------------


def _frontier_hit(F, C: Instance, sigma, category: str,
                  budget: int, morph_budget: int) -> Optional[bool]:
    """Is (C, c) in the upward closure of the frontier?  None = unknown."""
    if isinstance(F, tuple) and len(F) in (2, 3) and \
            isinstance(F[0], Program):
        # generator: derivation membership via the chase
        P, R = F[0], F[1]
        I = C.with_points(()).with_schema(P.s_in)
        res = run_program(P, I, budget=budget)
        target = (R, tuple(C.points))
        return target in res.output.facts
    for A in F:
        if category == "abox":
            h = dict(zip(A.points, C.points))
            ans = abox_morphism(sigma, A, C, h, budget=morph_budget)
            if ans == "yes":
                return True
            if ans == "unknown":
                return None
        else:
            if find_homomorphism(A, adom_instance(C)) is not None:
                return True
    return False


def _dual_hit(D, C: Instance, sigma, category: str,
              budget: int, morph_budget: int) -> Optional[bool]:
    unknown = False
    for d in D:
        if category == "abox":
            h = dict(zip(C.points, d.points))
            ans = abox_morphism(sigma, C, d, h, budget=morph_budget)
            if ans == "yes":
                return True
            if ans == "unknown":
                unknown = True
        else:
            if find_homomorphism(adom_instance(C), d) is not None:
                return True
    return None if unknown else False


def verify_duality(F, D, B: int = 3, sigma=None,
                   category: Optional[str] = None,
                   budget: int = DEFAULT_BUDGET,
                   morph_budget: int = 10) -> Verdict:
    """Check the duality statement exhaustively at bound B.

    For every pointed (C, c) with at most B elements (dependency models
    only when ``sigma`` is given in the model category), exactly one of
    "some frontier member maps into (C, c)" and "(C, c) maps into some
    dual" must hold.  ``F`` is a set of pointed instances or a
    (program, relation[, depth]) generator; generator membership is decided
    by chase derivation of R(c).
    """
    duals = list(D)
    if category is None:
        category = "plain" if sigma is None else "relative"
    if isinstance(F, tuple) and F and isinstance(F[0], Program):
        schema = F[0].s_in
        k = F[0].s_out.arity(F[1])
    else:
        F = list(F)
        if not F and not duals:
            raise OracleError("nothing to verify")
        probe = (F or duals)[0]
        schema = probe.schema
        k = len(probe.points)
    filt = sigma if (sigma is not None and category == "relative") else None
    for C in enumerate_pointed(schema, B, k, filter_sigma=filt,
                               budget=budget):
        fin = _frontier_hit(F, C, sigma, category, budget, morph_budget)
        din = _dual_hit(duals, C, sigma, category, budget, morph_budget)
        if fin is None or din is None:
            return Verdict(False, B, C, unknown=True,
                           explanation="unknown: bounded chase could not "
                                       "decide a morphism for this instance")
        if fin == din:
            side = ("in both the frontier's and the duals' closure"
                    if fin else "in neither closure")
            return Verdict(False, B, C,
                           explanation=f"instance is {side}")
    return Verdict(True, B)


# ---------------------------------------------------------------------------
# Adjoint verification
# ---------------------------------------------------------------------------


def _program_output(P: Program, I: Instance, budget: int):
    """(output instance restricted to its active domain, stable?)"""
    if P.is_datalog or classify(P).weakly_acyclic:
        res = run_program(P, I, budget=budget)
        return adom_instance(res.output), True
    res = chase_existential(P, I, mode="bounded", budget=budget)
    if res.terminated:
        return adom_instance(res.output), True
    return adom_instance(res.output), False


def verify_adjoint(P: Program, J: Instance, result, B: int = 3,
                   budget: int = 12) -> Verdict:
    """Check the right-adjoint property of ``result`` for (P, J) at bound B.

    For every input instance I with at most B elements: P(I) maps into J
    iff I maps into some member; and when both hold, some witness pair of
    homomorphisms commutes through the member's partial back-map.  For
    programs with non-terminating chases the left side uses a bounded chase
    and is accepted only when one more round does not change the answer;
    otherwise the verdict is unknown.
    """
    members = list(result.members)
    for I in enumerate_instances(P.s_in, B):
        out, stable = _program_output(P, I, budget)
        lhs = find_homomorphism(out, J) is not None
        if not stable:
            out1, _ = _program_output(P, I, budget + 1)
            lhs1 = find_homomorphism(out1, J) is not None
            if lhs != lhs1:
                return Verdict(False, B, I, unknown=True,
                               explanation="unknown: bounded chase not "
                                           "stable for this instance")
        I_adom = adom_instance(I)
        rhs = any(
            find_homomorphism(I_adom, j_prime) is not None
            for j_prime, _ in members
        )
        if lhs != rhs:
            expl = ("program image maps into J but I maps into no member"
                    if lhs else
                    "I maps into a member but the program image does not "
                    "map into J")
            return Verdict(False, B, I, explanation=expl)
        if not lhs:
            continue
        # commuting diagram: some h: I -> member and g: image -> J with
        # g agreeing with iota∘h wherever iota∘h is defined
        ok = False
        for j_prime, iota in members:
            if ok:
                break
            for h in iter_homomorphisms(I_adom, j_prime):
                bindings = {
                    x: iota[h[x]]
                    for x in h
                    if x in out.domain and h[x] in iota
                }
                if find_homomorphism(out, J, bindings=bindings) is not None:
                    ok = True
                    break
        if not ok:
            return Verdict(False, B, I,
                           explanation="no homomorphism pair commutes "
                                       "through the member back-maps")
    return Verdict(True, B)


# ---------------------------------------------------------------------------
# Bounded program equivalence
# ---------------------------------------------------------------------------


def programs_equivalent_bounded(P1: Program, P2: Program, B: int = 3,
                                budget: int = 12) -> Verdict:
    """Check that both programs produce homomorphically equivalent outputs
    (fixing the input's active domain) on every input with at most B
    elements."""
    if P1.s_in.relations != P2.s_in.relations or \
            P1.s_out.relations != P2.s_out.relations:
        raise OracleError("programs have different input or output schemas")
    for I in enumerate_instances(P1.s_in, B):
        outs = []
        for P in (P1, P2):
            out, stable = _program_output(P, I, budget)
            if not stable:
                out1, _ = _program_output(P, I, budget + 1)
                stable = out.canonical_key() == out1.canonical_key()
            if not stable:
                return Verdict(False, B, I, unknown=True,
                               explanation="unknown: bounded chase not "
                                           "stable for this instance")
            outs.append(out)
        fixed = sorted(set(I.active_domain))
        o1 = Instance(P1.s_out, set(outs[0].domain) | set(fixed),
                      outs[0].facts)
        o2 = Instance(P1.s_out, set(outs[1].domain) | set(fixed),
                      outs[1].facts)
        if find_homomorphism(o1, o2, fixed=fixed) is None or \
                find_homomorphism(o2, o1, fixed=fixed) is None:
            return Verdict(False, B, I,
                           explanation="outputs are not homomorphically "
                                       "equivalent over the input's "
                                       "active domain")
    return Verdict(True, B)
