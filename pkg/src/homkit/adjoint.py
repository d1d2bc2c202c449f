"""Right-adjoint constructions for program functors.

Given a program P and an instance J over its output schema, a (generalized)
right adjoint produces a finite set of members (J', iota) over the input
schema such that, for every input instance I, P(I) maps homomorphically into
J exactly when I maps into some member.  Each iota is a partial map from the
member's domain into J's domain witnessing the commuting diagram.

Three constructions are provided: ``tam_adjoint`` for tree-shaped
almost-monadic Datalog programs (pair-element construction), ``sl_adjoint``
for strongly linear programs (greedy maximal-subinstance construction), and
``compose_adjoints`` for compositions of program functors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx

from .core import (
    BOTTOM,
    CapExceeded,
    Element,
    HomkitError,
    Instance,
    Schema,
)
from .program import (
    Atom,
    Program,
    ProgramError,
    Rule,
    articulation_search,
    classify,
    fresh_name,
    to_simple_tam,
)

DEFAULT_FACT_CAP = 10 ** 6


class AdjointError(HomkitError):
    pass


@dataclass(frozen=True)
class AdjointResult:
    """Members (j_prime, iota) of a right adjoint applied to ``source``.

    ``iota`` is a partial map represented as a dict; keys outside it are
    undefined.  Every defined image lies in the source's domain.
    """

    members: tuple  # tuple[(Instance, dict[Element, Element])]
    source: Instance
    method: str

    def __post_init__(self):
        for j_prime, iota in self.members:
            for e, target in iota.items():
                if e not in j_prime.domain:
                    raise AdjointError("iota defined outside member domain")
                if target not in self.source.domain:
                    raise AdjointError("iota image outside source domain")


# ---------------------------------------------------------------------------
# TAM construction
# ---------------------------------------------------------------------------


def _connect_rules(P: Program) -> tuple[Program, str]:
    """Add a fresh binary input relation and use it to connect every
    disconnected rule body.  Returns (augmented program, connector name)."""
    conn = fresh_name("Conn", set(P.full_schema().names))
    s_in = P.s_in.union(Schema([(conn, 2)]))
    new_rules = []
    for rule in P.rules:
        comps = _var_components(rule.body_atoms)
        if len(comps) <= 1:
            new_rules.append(rule)
            continue
        reps = []
        for comp in comps:
            if not comp:
                raise AdjointError(
                    "cannot connect a rule with a variable-free body atom")
            reps.append(sorted(comp)[0])
        extra = tuple(
            Atom(conn, (reps[i], reps[i + 1])) for i in range(len(reps) - 1)
        )
        new_rules.append(Rule(rule.head_atoms, rule.body_atoms + extra,
                              rule.existentials))
    return (
        Program(s_in, P.s_out, P.s_aux, new_rules, P.articulation),
        conn,
    )


def _var_components(body: tuple[Atom, ...]) -> list[set[str]]:
    """Connected components of the body's variable graph (variables linked
    when they co-occur in an atom).  One (possibly empty) set per component
    of the atom graph."""
    g = nx.Graph()
    for idx, atom in enumerate(body):
        node = ("atom", idx)
        g.add_node(node)
        for v in atom.args:
            g.add_edge(node, ("var", v))
    comps = []
    for comp in nx.connected_components(g):
        comps.append({name for kind, name in comp if kind == "var"})
    return sorted(comps, key=lambda c: sorted(c))


def _pair_candidates(D, aux_schema: Schema, art: dict):
    """For each base element b: the aux facts over D with b in articulation
    position, in canonical order."""
    out = {}
    for b in D:
        facts = []
        for rel, arity in aux_schema.relations:
            pos = art[rel] - 1
            rest = arity - 1
            for combo in itertools.product(D, repeat=rest):
                args = list(combo[:pos]) + [b] + list(combo[pos:])
                facts.append((rel, tuple(args)))
        out[b] = sorted(facts, key=lambda f: (f[0], [e.ser for e in f[1]]))
    return out


def tam_adjoint(P: Program, J: Instance,
                cap: int = DEFAULT_FACT_CAP) -> AdjointResult:
    """Right adjoint of a tree-shaped almost-monadic Datalog program.

    Members are built over pair elements (b, X): a base element of
    domain(J) ∪ {⊥} together with a set of aux facts carrying b in
    articulation position.  An input fact over such elements is accepted when
    the closure conditions induced by the (simple-normal-form) rules hold.
    Disconnected programs are first made connected with a fresh binary
    connector relation; members are then the connector-clique components.
    """
    if J.schema.relations != P.s_out.relations:
        raise AdjointError("J must be an instance over the output schema")
    cls = classify(P)
    if not cls.tam:
        raise AdjointError("the pair-element construction requires a "
                           "tree-shaped almost-monadic program")
    if not P.is_datalog:
        raise AdjointError("the pair-element construction requires a "
                           "Datalog program")

    connector = None
    work = P
    if not cls.connected:
        work, connector = _connect_rules(P)
    simple = to_simple_tam(work)
    if not classify(simple).simple:
        raise AdjointError("program admits no simple normal form "
                           "(a rule body cannot be anchored to the input)")
    art = articulation_search(simple, total=True)
    if art is None:
        raise AdjointError("no total articulation witness exists")

    D = sorted(J.domain) + [BOTTOM]
    per_base = _pair_candidates(D, simple.s_aux, art)

    # candidate pair elements per base, as (base, frozenset-of-facts)
    elems_per_base = {}
    total_elems = 0
    for b in D:
        n = len(per_base[b])
        if n > 60 or 2 ** n > cap:
            raise CapExceeded(
                f"pair-element enumeration too large: 2^{n} subsets")
        subsets = []
        for r in range(n + 1):
            for combo in itertools.combinations(per_base[b], r):
                subsets.append(frozenset(combo))
        elems_per_base[b] = subsets
        total_elems += len(subsets)

    j_facts = set(J.facts)
    rules_by_input: dict[str, list] = {}
    for rule in simple.rules:
        in_atoms = [a for a in rule.body_atoms if a.rel in simple.s_in]
        input_atom = in_atoms[0]
        aux_atoms = [a for a in rule.body_atoms if a.rel in simple.s_aux]
        head = rule.head_atoms[0]
        # index in the input atom of each aux atom's articulated variable
        p = []
        for atom in aux_atoms:
            v = atom.args[art[atom.rel] - 1]
            if v not in input_atom.args:
                raise AdjointError(
                    "articulated body variable does not occur in the "
                    f"input atom: {rule}")
            p.append(input_atom.args.index(v))
        if head.rel in simple.s_aux:
            v0 = head.args[art[head.rel] - 1]
            if v0 not in input_atom.args:
                raise AdjointError(
                    "articulated head variable does not occur in the "
                    f"input atom: {rule}")
            p0 = input_atom.args.index(v0)
        else:
            p0 = None
        rules_by_input.setdefault(input_atom.rel, []).append(
            (rule, input_atom, aux_atoms, head, p, p0))

    def fact_ok(rel: str, elems: tuple[Element, ...]) -> bool:
        bases = [e.base for e in elems]
        xsets = [e.facts for e in elems]
        for rule, input_atom, aux_atoms, head, p, p0 in \
                rules_by_input.get(rel, ()):
            pin = {}
            conflict = False
            for var, val in zip(input_atom.args, bases):
                if pin.get(var, val) != val:
                    conflict = True
                    break
                pin[var] = val
            if conflict:
                continue
            free = sorted(
                v for v in rule.all_vars() if v not in pin)
            for combo in itertools.product(D, repeat=len(free)):
                g = dict(pin)
                g.update(zip(free, combo))
                if all(
                    (atom.rel, tuple(g[v] for v in atom.args)) in xsets[pi]
                    for atom, pi in zip(aux_atoms, p)
                ):
                    concl = (head.rel, tuple(g[v] for v in head.args))
                    if p0 is not None:
                        if concl not in xsets[p0]:
                            return False
                    elif concl not in j_facts:
                        return False
        return True

    facts = []
    for rel, arity in simple.s_in.relations:
        count = 1
        for _ in range(arity):
            count *= total_elems
        if count > cap:
            raise CapExceeded(
                f"candidate fact enumeration for {rel} exceeds cap {cap}")
        pools = []
        for _ in range(arity):
            pools.append([
                Element.pair(b, x)
                for b in D for x in elems_per_base[b]
            ])
        for elems in itertools.product(*pools):
            if fact_ok(rel, elems):
                facts.append((rel, elems))

    domain = {e for _, args in facts for e in args}
    domain.update(Element.pair(b, frozenset()) for b in D)
    big = Instance(simple.s_in, domain, facts)
    iota = {
        e: e.base for e in domain
        if e.base != BOTTOM and e.base in J.domain
    }

    if connector is None:
        member = Instance(P.s_in, big.domain, big.facts)
        return AdjointResult(((member, iota),), J, "tam")

    # connector-clique components: maximal element sets with the connector
    # fact present for every ordered pair (loops included)
    g = nx.Graph()
    conn_facts = {args for r, args in big.facts if r == connector}
    for e in big.domain:
        if (e, e) in conn_facts:
            g.add_node(e)
    for e, f in itertools.combinations(sorted(g.nodes), 2):
        if (e, f) in conn_facts and (f, e) in conn_facts:
            g.add_edge(e, f)
    members = []
    seen = set()
    for clique in nx.find_cliques(g):
        comp = frozenset(clique)
        sub_facts = [
            (r, args) for r, args in big.facts
            if r != connector and all(e in comp for e in args)
        ]
        member = Instance(P.s_in, comp, sub_facts)
        sub_iota = {e: iota[e] for e in comp if e in iota}
        key = (member.canonical_key(),
               tuple(sorted((e.ser, v.ser) for e, v in sub_iota.items())))
        if key not in seen:
            seen.add(key)
            members.append((member, sub_iota))
    members.sort(key=lambda m: m[0].canonical_key())
    return AdjointResult(tuple(members), J, "tam")


# ---------------------------------------------------------------------------
# Strongly linear construction
# ---------------------------------------------------------------------------


def sl_adjoint(P: Program, J: Instance) -> AdjointResult:
    """Right adjoint of a strongly linear program.

    The single member is the maximal input-schema instance over
    domain(J) ∪ {⊥} whose facts all chase into J: start from all input/aux
    facts over that domain plus exactly J's facts, then greedily remove any
    input/aux fact whose rule body match has no remaining head witness.
    """
    if J.schema.relations != P.s_out.relations:
        raise AdjointError("J must be an instance over the output schema")
    if not classify(P).strongly_linear:
        raise AdjointError("the greedy construction requires every rule "
                           "body to be a single repetition-free atom")

    D = sorted(J.domain) + [BOTTOM]
    k: dict[str, set] = {}
    for rel, arity in P.s_in.union(P.s_aux).relations:
        k[rel] = set(itertools.product(D, repeat=arity))
    for rel, _ in P.s_out.relations:
        k[rel] = set()
    for rel, args in J.facts:
        k[rel].add(args)

    rules_by_body: dict[str, list[Rule]] = {}
    for rule in P.rules:
        rules_by_body.setdefault(rule.body_atoms[0].rel, []).append(rule)

    def supported(rel: str, args: tuple) -> bool:
        for rule in rules_by_body.get(rel, ()):
            body = rule.body_atoms[0]
            g = dict(zip(body.args, args))
            exts = list(rule.existentials)
            witnessed = False
            for combo in itertools.product(D, repeat=len(exts)):
                full = dict(g)
                full.update(zip(exts, combo))
                if all(
                    tuple(full[v] for v in a.args) in k[a.rel]
                    for a in rule.head_atoms
                ):
                    witnessed = True
                    break
            if not witnessed:
                return False
        return True

    removable = set(P.s_in.names) | set(P.s_aux.names)
    changed = True
    while changed:
        changed = False
        for rel in sorted(removable):
            dead = {args for args in k[rel] if not supported(rel, args)}
            if dead:
                k[rel] -= dead
                changed = True

    facts = [(rel, args) for rel in P.s_in.names for args in k[rel]]
    member = Instance(P.s_in, D, facts)
    iota = {d: d for d in J.domain}
    return AdjointResult(((member, iota),), J, "sl")


# ---------------------------------------------------------------------------
# Composition and dispatch
# ---------------------------------------------------------------------------


def compose_adjoints(omega2, omega1, rename: dict | None = None):
    """Adjoint of a composed functor: apply P1 first, then P2.

    ``omega2`` and ``omega1`` are callables J -> AdjointResult for P2 and P1.
    Each member of omega2(J) is an instance over P2's input schema; when P1's
    output schema spells those relations differently, ``rename`` maps the
    former names to the latter before omega1 is applied.  Member maps are
    composed where both legs are defined.
    """

    def omega(J: Instance) -> AdjointResult:
        res2 = omega2(J)
        members = []
        for j_prime, iota in res2.members:
            mid = j_prime.rename_relations(rename) if rename else j_prime
            res1 = omega1(mid)
            for j_second, kappa in res1.members:
                composed = {
                    e: iota[v] for e, v in kappa.items() if v in iota
                }
                members.append((j_second, composed))
        members.sort(key=lambda m: m[0].canonical_key())
        return AdjointResult(tuple(members), J, "composed")

    return omega


def adjoint(P: Program, J: Instance, method: str = "auto",
            cap: int = DEFAULT_FACT_CAP) -> AdjointResult:
    """Dispatch to the applicable construction."""
    if method == "tam":
        return tam_adjoint(P, J, cap=cap)
    if method == "sl":
        return sl_adjoint(P, J)
    if method != "auto":
        raise AdjointError(f"unknown adjoint method {method!r}")
    cls = classify(P)
    if cls.tam and P.is_datalog:
        return tam_adjoint(P, J, cap=cap)
    if cls.strongly_linear:
        return sl_adjoint(P, J)
    raise AdjointError(
        "no adjoint construction applies: the program is neither "
        "tree-shaped almost-monadic Datalog nor strongly linear")
