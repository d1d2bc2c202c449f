"""Randomized property suites (500 seeded trials each, <= 3 elements).

The four suites cover: chase minimality, homomorphism monotonicity of
program application, the closure properties of compiled dependency
programs, and the union-splitting of strongly linear programs under
bounded chase.  They are reused verbatim by the acceptance tests.
"""

import itertools
import random

from conftest import make_tc_program, rel_instance, sigma1, sigma2
from homkit.chase import chase_datalog, chase_existential
from homkit.core import Element, Instance, Schema, find_homomorphism
from homkit.program import (
    TGD,
    Atom,
    instance_to_input,
    output_to_instance,
    tgd_compile,
    tgd_schema,
)

NAMES = ["a", "b", "c"]
TRIALS = 500


def random_instance(rng, rel="E", density=0.3, names=NAMES) -> Instance:
    pool = names[: rng.randint(1, len(names))]
    tuples = [(x, y) for x in pool for y in pool
              if rng.random() < density]
    return rel_instance(rel, 2, tuples, extra=pool)


def naive_closure(rules, facts):
    """Reference fixpoint: repeatedly match every rule body against the
    facts and add head instantiations (Datalog only)."""
    facts = set(facts)
    changed = True
    while changed:
        changed = False
        for rule in rules:
            for asg in list(_matches(rule.body_atoms, set(facts), {})):
                for head in rule.head_atoms:
                    fact = (head.rel, tuple(asg[v] for v in head.args))
                    if fact not in facts:
                        facts.add(fact)
                        changed = True
    return facts


def _matches(atoms, facts, asg):
    if not atoms:
        yield dict(asg)
        return
    first, rest = atoms[0], atoms[1:]
    for rel, args in facts:
        if rel != first.rel:
            continue
        new = dict(asg)
        ok = True
        for v, e in zip(first.args, args):
            if new.setdefault(v, e) != e:
                ok = False
                break
        if ok:
            yield from _matches(rest, facts, new)


def test_chase_minimality_500():
    """The Datalog chase result is contained in every solution."""
    P = make_tc_program()
    rng = random.Random(101)
    for _ in range(TRIALS):
        I = random_instance(rng)
        full = chase_datalog(P, I).full
        # a random solution: close the input plus arbitrary extra derived
        # facts under the rules
        elems = sorted(I.domain)
        extra = {("T", (rng.choice(elems), rng.choice(elems)))
                 for _ in range(rng.randint(0, 3))} if elems else set()
        solution = naive_closure(P.rules, set(I.facts) | extra)
        assert set(full.facts) <= solution


def test_monotonicity_500():
    """A homomorphism h : I -> I' extends to P(I) -> P(I')."""
    P = make_tc_program()
    rng = random.Random(102)
    for _ in range(TRIALS):
        I = random_instance(rng)
        elems = sorted(I.domain)
        targets = [Element.named(n) for n in NAMES]
        h = {e: rng.choice(targets) for e in elems}
        image_facts = {(rel, tuple(h[e] for e in args))
                       for rel, args in I.facts}
        extra = {("E", (rng.choice(targets), rng.choice(targets)))
                 for _ in range(rng.randint(0, 2))}
        I2 = Instance(I.schema, set(targets),
                      image_facts | extra)
        full1 = chase_datalog(P, I).full
        full2 = chase_datalog(P, I2).full
        hp = find_homomorphism(full1, full2, bindings=h)
        assert hp is not None


def test_compiled_theory_closure_500():
    """Compiled dependency programs: the input embeds into the result, the
    result is a model, and over models the result folds back onto the
    input fixing its active domain."""
    rng = random.Random(103)
    sigma_sets = [
        list(sigma1()),
        [TGD((Atom("R", ("x", "y")),), (Atom("S", ("x", "z")),), ("z",))],
    ]
    for trial in range(TRIALS):
        sigma = sigma_sets[trial % 2]
        base = tgd_schema(sigma)
        I = random_instance(rng, rel="R")
        facts = set(I.facts)
        if "S" in base and rng.random() < 0.5:
            elems = sorted(I.domain)
            if elems:
                facts.add(("S", (rng.choice(elems), rng.choice(elems))))
        I = Instance(base, I.domain, facts)
        P = tgd_compile(sigma)
        res = chase_existential(P, instance_to_input(I, P), mode="wa")
        out = output_to_instance(res.output, base)
        # (a) the input is contained in the result
        assert set(I.facts) <= set(out.facts)
        # (b) the result is a model of the dependencies
        assert _is_model_of(sigma, out)
        # (c) over models, the result folds back onto the input
        if _is_model_of(sigma, I):
            h = find_homomorphism(out, I, fixed=sorted(I.active_domain))
            assert h is not None


def _is_model_of(sigma, A) -> bool:
    facts = set(A.facts)
    elems = sorted(A.domain)
    for t in sigma:
        for asg in _matches(t.body_atoms, facts, {}):
            ok = False
            ex = list(t.existentials)
            for combo in itertools.product(elems, repeat=len(ex)):
                full = dict(asg)
                full.update(zip(ex, combo))
                if all((h.rel, tuple(full[v] for v in h.args)) in facts
                       for h in t.head_atoms):
                    ok = True
                    break
            if not ok and not ex:
                ok = all((h.rel, tuple(asg[v] for v in h.args)) in facts
                         for h in t.head_atoms)
            if not ok:
                return False
    return True


def _tagged(I: Instance, tag: str) -> Instance:
    """Replace chase nulls by fresh named elements so unions of separate
    chases do not collide."""
    m = {e: (Element.named(f"{tag}{e.ser}") if e.kind == "null" else e)
         for e in I.domain}
    return Instance(I.schema, set(m.values()),
                    [(rel, tuple(m[e] for e in args))
                     for rel, args in I.facts])


def test_strongly_linear_union_500():
    """Bounded chase of a union is hom-equivalent (fixing the union's
    active domain) to the union of bounded chases, with depth slack."""
    P = tgd_compile(list(sigma2()))
    rng = random.Random(104)
    d, slack = 4, 10
    for _ in range(TRIALS):
        I1 = random_instance(rng, rel="R")
        I2 = random_instance(rng, rel="R")
        dom = I1.domain | I2.domain
        union = Instance(I1.schema, dom, set(I1.facts) | set(I2.facts))
        fixed = sorted(union.active_domain)

        def chase(I, depth):
            return chase_existential(P, instance_to_input(I, P),
                                     mode="bounded", budget=depth).full

        shallow_union = chase(union, d)
        deep_union = chase(union, slack)
        part = lambda depth: _union(_tagged(chase(I1, depth), "p1_"),
                                    _tagged(chase(I2, depth), "p2_"))
        assert find_homomorphism(shallow_union, part(slack),
                                 fixed=fixed) is not None
        assert find_homomorphism(part(d), deep_union,
                                 fixed=fixed) is not None


def _union(A: Instance, B: Instance) -> Instance:
    return Instance(A.schema, A.domain | B.domain,
                    set(A.facts) | set(B.facts))


def test_chase_idempotent_100():
    P = make_tc_program()
    rng = random.Random(105)
    for _ in range(100):
        I = random_instance(rng)
        full = chase_datalog(P, I).full
        closure = naive_closure(P.rules, set(I.facts))
        assert set(full.facts) == closure
