"""Relational instances, pointed instances, homomorphism search, and
structural checks on the incidence multigraph (acyclicity, connectedness,
c-acyclicity).

Instances carry an explicit finite domain that may strictly contain the
active domain (the elements occurring in facts), and optionally a
distinguished tuple of elements ("points").  Homomorphisms are total maps on
the explicit domain that preserve facts and points and may be required to fix
a set of elements pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional


class HomkitError(Exception):
    """Base class for all structured errors raised by the library."""


class SchemaMismatch(HomkitError):
    pass


class CapExceeded(HomkitError):
    """A configured resource cap was exceeded."""


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schema:
    """A finite collection of relation symbols with arities."""

    relations: tuple[tuple[str, int], ...]

    def __init__(self, relations):
        items = dict(relations)
        for name, arity in items.items():
            if arity < 0:
                raise HomkitError(f"negative arity for relation {name}")
        object.__setattr__(
            self, "relations", tuple(sorted(items.items()))
        )

    def arity(self, name: str) -> int:
        for rel, ar in self.relations:
            if rel == name:
                return ar
        raise SchemaMismatch(f"unknown relation {name}")

    def __contains__(self, name: str) -> bool:
        return any(rel == name for rel, _ in self.relations)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(rel for rel, _ in self.relations)

    def as_dict(self) -> dict[str, int]:
        return dict(self.relations)

    def restrict(self, names: Iterable[str]) -> "Schema":
        keep = set(names)
        return Schema([(r, a) for r, a in self.relations if r in keep])

    def union(self, other: "Schema") -> "Schema":
        merged = self.as_dict()
        for rel, ar in other.relations:
            if rel in merged and merged[rel] != ar:
                raise SchemaMismatch(f"relation {rel} has conflicting arities")
            merged[rel] = ar
        return Schema(merged)


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


class Element:
    """A domain element.

    Four kinds exist:

    - ``named``: a user-supplied constant;
    - ``null``: a labeled null ``_n<k>`` introduced by the chase;
    - ``bottom``: the single reserved element ``_bot``;
    - ``pair``: an element ``(b | {facts...})`` pairing a base element with a
      finite set of facts; these arise in adjoint outputs.

    Equality, hashing and ordering all go through the canonical injective
    serialization string.
    """

    __slots__ = ("kind", "name", "serial", "base", "facts", "ser")

    def __init__(self, kind, name="", serial=0, base=None, facts=frozenset()):
        self.kind = kind
        self.name = name
        self.serial = serial
        self.base = base
        self.facts = facts
        if kind == "named":
            self.ser = name
        elif kind == "null":
            self.ser = f"_n{serial}"
        elif kind == "bottom":
            self.ser = "_bot"
        elif kind == "pair":
            inner = ",".join(sorted(fact_ser(f) for f in facts))
            self.ser = f"({base.ser}|{{{inner}}})"
        else:  # pragma: no cover
            raise HomkitError(f"unknown element kind {kind}")

    @staticmethod
    def named(name: str) -> "Element":
        return Element("named", name=name)

    @staticmethod
    def null(serial: int) -> "Element":
        return Element("null", serial=serial)

    @staticmethod
    def pair(base: "Element", facts) -> "Element":
        return Element("pair", base=base, facts=frozenset(facts))

    def __eq__(self, other):
        return isinstance(other, Element) and self.ser == other.ser

    def __hash__(self):
        return hash(self.ser)

    def __lt__(self, other):
        return self.ser < other.ser

    def __le__(self, other):
        return self.ser <= other.ser

    def __repr__(self):
        return f"Element({self.ser!r})"


BOTTOM = Element("bottom")

Fact = tuple  # (relation_name, tuple[Element, ...])


def fact_ser(fact: Fact) -> str:
    rel, args = fact
    return f"{rel}({','.join(e.ser for e in args)})"


def sort_facts(facts: Iterable[Fact]) -> list[Fact]:
    return sorted(facts, key=fact_ser)


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


class Instance:
    """A finite relational instance with explicit domain and optional points."""

    __slots__ = ("schema", "domain", "facts", "points", "_hash")

    def __init__(self, schema: Schema, domain, facts, points=()):
        self.schema = schema
        self.domain = frozenset(domain)
        norm = set()
        for rel, args in facts:
            args = tuple(args)
            if rel not in schema:
                raise SchemaMismatch(f"fact relation {rel} not in schema")
            if len(args) != schema.arity(rel):
                raise SchemaMismatch(
                    f"fact {rel}/{len(args)} does not match arity "
                    f"{schema.arity(rel)}"
                )
            for e in args:
                if e not in self.domain:
                    raise HomkitError(
                        f"fact element {e.ser} not in domain"
                    )
            norm.add((rel, args))
        self.facts = frozenset(norm)
        self.points = tuple(points)
        for e in self.points:
            if e not in self.domain:
                raise HomkitError(f"point {e.ser} not in domain")
        self._hash = None

    # -- basic structure ---------------------------------------------------

    @property
    def active_domain(self) -> frozenset:
        out = set()
        for _, args in self.facts:
            out.update(args)
        return frozenset(out)

    def sorted_domain(self) -> list[Element]:
        return sorted(self.domain)

    def sorted_facts(self) -> list[Fact]:
        return sort_facts(self.facts)

    def facts_of(self, rel: str) -> set:
        return {f for f in self.facts if f[0] == rel}

    def with_points(self, points) -> "Instance":
        return Instance(self.schema, self.domain, self.facts, tuple(points))

    def reduct(self, names: Iterable[str]) -> "Instance":
        """Restrict to the given relation names, keeping the domain."""
        sub = self.schema.restrict(names)
        return Instance(
            sub, self.domain,
            [f for f in self.facts if f[0] in sub], self.points,
        )

    def with_schema(self, schema: Schema) -> "Instance":
        return Instance(schema, self.domain, self.facts, self.points)

    def rename_relations(self, mapping: dict[str, str]) -> "Instance":
        schema = Schema(
            [(mapping.get(r, r), a) for r, a in self.schema.relations]
        )
        facts = [(mapping.get(r, r), args) for r, args in self.facts]
        return Instance(schema, self.domain, facts, self.points)

    def union(self, other: "Instance") -> "Instance":
        schema = self.schema.union(other.schema)
        return Instance(
            schema,
            self.domain | other.domain,
            list(self.facts) + list(other.facts),
            self.points,
        )

    # -- equality / canonical form ----------------------------------------

    def canonical_key(self):
        return (
            self.schema.relations,
            tuple(sorted(e.ser for e in self.domain)),
            tuple(fact_ser(f) for f in self.sorted_facts()),
            tuple(e.ser for e in self.points),
        )

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.canonical_key() == other.canonical_key()
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.canonical_key())
        return self._hash

    def __repr__(self):
        facts = " ".join(fact_ser(f) for f in self.sorted_facts())
        pts = "" if not self.points else (
            " points=" + ",".join(e.ser for e in self.points))
        return f"Instance(|dom|={len(self.domain)} {facts}{pts})"


def empty_instance(schema: Schema) -> Instance:
    return Instance(schema, (), ())


# ---------------------------------------------------------------------------
# Homomorphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Homomorphism:
    """A total map from the domain of a source instance into a target."""

    mapping: tuple[tuple[Element, Element], ...]

    @staticmethod
    def of(mapping: dict) -> "Homomorphism":
        return Homomorphism(
            tuple(sorted(mapping.items(), key=lambda kv: kv[0].ser))
        )

    def as_dict(self) -> dict:
        return dict(self.mapping)

    def __call__(self, e: Element) -> Element:
        for src, dst in self.mapping:
            if src == e:
                return dst
        raise KeyError(e.ser)


def _check_hom_inputs(A: Instance, B: Instance, fixed, bindings):
    if A.schema.relations != B.schema.relations:
        raise SchemaMismatch("homomorphism endpoints have different schemas")
    for e in fixed:
        if e not in A.domain or e not in B.domain:
            raise HomkitError(f"fixed element {e.ser} not in both domains")
    if A.points and B.points and len(A.points) != len(B.points):
        raise HomkitError("point-arity mismatch")
    if bindings:
        for src, dst in bindings.items():
            if src not in A.domain:
                raise HomkitError(f"binding source {src.ser} not in domain(A)")
            if dst not in B.domain:
                raise HomkitError(f"binding target {dst.ser} not in domain(B)")


def find_homomorphism(
    A: Instance,
    B: Instance,
    fixed: Iterable[Element] = (),
    bindings: Optional[dict] = None,
) -> Optional[Homomorphism]:
    """Search for a homomorphism A -> B.

    ``fixed`` elements must be mapped to themselves; ``bindings`` is a partial
    map the result must extend.  If both instances are pointed, points map to
    points componentwise.  Backtracking explores elements and candidate
    targets in canonical serialization order, so the witness returned is
    deterministic.
    """
    fixed = set(fixed)
    _check_hom_inputs(A, B, fixed, bindings)

    assignment: dict[Element, Element] = {}

    def bind(src: Element, dst: Element) -> bool:
        if src in assignment:
            return assignment[src] == dst
        assignment[src] = dst
        return True

    for e in fixed:
        if not bind(e, e):
            return None
    if bindings:
        for src, dst in bindings.items():
            if not bind(src, dst):
                return None
    if A.points and B.points:
        for src, dst in zip(A.points, B.points):
            if not bind(src, dst):
                return None

    order = [e for e in A.sorted_domain() if e not in assignment]
    order = sorted(assignment) + order
    pos = {e: i for i, e in enumerate(order)}

    # facts become checkable once their latest element is assigned
    closing: dict[Element, list[Fact]] = {e: [] for e in order}
    for fact in A.facts:
        _, args = fact
        if args:
            last = max(args, key=lambda e: pos[e])
            closing[last].append(fact)
        else:
            # zero-ary fact: must be present in B outright
            if fact not in B.facts:
                return None

    b_facts = B.facts
    b_elems = sorted(B.domain)
    if order and not b_elems:
        return None

    def consistent(e: Element) -> bool:
        for rel, args in closing[e]:
            image = tuple(assignment[a] for a in args)
            if (rel, image) not in b_facts:
                return False
        return True

    n_pre = len(assignment)

    def search(i: int) -> bool:
        if i == len(order):
            return True
        e = order[i]
        if i < n_pre:
            return consistent(e) and search(i + 1)
        for cand in b_elems:
            assignment[e] = cand
            if consistent(e) and search(i + 1):
                return True
            del assignment[e]
        return False

    if search(0):
        return Homomorphism.of(assignment)
    return None


def hom_equivalent(A: Instance, B: Instance, fixed=()) -> bool:
    """True iff homomorphisms exist in both directions fixing ``fixed``."""
    return (
        find_homomorphism(A, B, fixed) is not None
        and find_homomorphism(B, A, fixed) is not None
    )


def isomorphic(A: Instance, B: Instance) -> bool:
    """True iff a fact- and point-preserving bijection exists."""
    if A.schema.relations != B.schema.relations:
        raise SchemaMismatch("isomorphism endpoints have different schemas")
    if len(A.domain) != len(B.domain) or len(A.facts) != len(B.facts):
        return False
    if len(A.points) != len(B.points):
        return False
    counts_a = {}
    counts_b = {}
    for rel, _ in A.facts:
        counts_a[rel] = counts_a.get(rel, 0) + 1
    for rel, _ in B.facts:
        counts_b[rel] = counts_b.get(rel, 0) + 1
    if counts_a != counts_b:
        return False

    def profile(inst: Instance):
        """Occurrence profile per element, an isomorphism invariant."""
        prof = {e: [] for e in inst.domain}
        for rel, args in inst.facts:
            for i, e in enumerate(args):
                prof[e].append((rel, i))
        pts = {e: [] for e in inst.domain}
        for i, e in enumerate(inst.points):
            pts[e].append(i)
        return {
            e: (tuple(sorted(prof[e])), tuple(pts[e])) for e in inst.domain
        }

    pa, pb = profile(A), profile(B)
    order = sorted(A.domain)
    b_elems = sorted(B.domain)
    assignment: dict[Element, Element] = {}
    used: set[Element] = set()

    pos = {e: i for i, e in enumerate(order)}
    closing: dict[Element, list[Fact]] = {e: [] for e in order}
    for fact in A.facts:
        _, args = fact
        if args:
            closing[max(args, key=lambda e: pos[e])].append(fact)
        elif fact not in B.facts:
            return False

    for i, e in enumerate(A.points):
        t = B.points[i]
        if assignment.get(e, t) != t:
            return False
        if e not in assignment and t in used:
            return False
        assignment[e] = t
        used.add(t)

    free = [e for e in order if e not in assignment]

    def search(i: int) -> bool:
        if i == len(free):
            return True
        e = free[i]
        for cand in b_elems:
            if cand in used or pa[e] != pb[cand]:
                continue
            assignment[e] = cand
            used.add(cand)
            ok = all(
                (rel, tuple(assignment[a] for a in args)) in B.facts
                for rel, args in closing[e]
            )
            if ok and search(i + 1):
                return True
            del assignment[e]
            used.discard(cand)
        return False

    # check facts closed by pre-assigned points
    for e in assignment:
        for rel, args in closing[e]:
            if not all(a in assignment for a in args):
                continue
            if (rel, tuple(assignment[a] for a in args)) not in B.facts:
                return False
    return search(0)


# ---------------------------------------------------------------------------
# Incidence multigraph checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureReport:
    acyclic: bool
    connected: bool
    c_acyclic: bool


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        """Merge; returns False if a and b were already connected."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _incidence_forest(facts, skip=frozenset()):
    """Forest-check the incidence multigraph of the given facts.

    Element nodes in ``skip`` are removed (with their incident edges).
    Returns (is_forest, components) where components counts the connected
    components among the remaining element/fact nodes.
    """
    uf = _UnionFind()
    nodes = set()
    forest = True
    for idx, (rel, args) in enumerate(facts):
        fnode = ("f", idx)
        nodes.add(fnode)
        uf.find(fnode)
        for e in args:
            if e in skip:
                continue
            enode = ("e", e)
            nodes.add(enode)
            if not uf.union(fnode, enode):
                forest = False
    roots = {uf.find(n) for n in nodes}
    return forest, len(roots)


def structure_report(A: Instance) -> StructureReport:
    """Acyclicity / connectedness / c-acyclicity of the incidence multigraph.

    The incidence multigraph has one node per active-domain element and one
    per fact, with a distinct edge for every occurrence of an element in a
    fact (a repeated element within one fact is a 2-cycle).  c-acyclicity
    deletes the point elements first and asks for forest-ness of the rest.
    """
    facts = A.sorted_facts()
    acyclic, comps = _incidence_forest(facts)
    connected = comps <= 1
    c_acyclic, _ = _incidence_forest(facts, skip=frozenset(A.points))
    return StructureReport(
        acyclic=acyclic, connected=connected, c_acyclic=c_acyclic
    )


# ---------------------------------------------------------------------------
# Cores (exhaustive retract search, small scale)
# ---------------------------------------------------------------------------


def _endomorphisms(A: Instance) -> Iterator[dict]:
    """All point-preserving endomorphisms of A, lazily."""
    order = sorted(A.domain)
    pos = {e: i for i, e in enumerate(order)}
    closing: dict[Element, list[Fact]] = {e: [] for e in order}
    for fact in A.facts:
        _, args = fact
        if args:
            closing[max(args, key=lambda e: pos[e])].append(fact)
    assignment: dict[Element, Element] = {}
    pinned = {}
    for i, e in enumerate(A.points):
        if pinned.get(e, e) != e:
            return
        pinned[e] = e

    def search(i: int) -> Iterator[dict]:
        if i == len(order):
            yield dict(assignment)
            return
        e = order[i]
        cands = [e] if e in pinned else order
        for cand in cands:
            assignment[e] = cand
            if all(
                (rel, tuple(assignment[a] for a in args)) in A.facts
                for rel, args in closing[e]
            ):
                yield from search(i + 1)
            del assignment[e]

    yield from search(0)


def core_of(A: Instance, cap: int = 8) -> Instance:
    """A minimal retract of A, by exhaustive endomorphism search.

    Points are fixed pointwise.  Instances with more than ``cap`` domain
    elements are returned unchanged (the search is exponential).
    """
    current = A
    while len(current.domain) <= cap:
        shrunk = None
        for h in _endomorphisms(current):
            image = set(h.values())
            if len(image) < len(current.domain):
                facts = {
                    (rel, tuple(h[a] for a in args))
                    for rel, args in current.facts
                }
                shrunk = Instance(
                    current.schema, image, facts,
                    tuple(h[p] for p in current.points),
                )
                break
        if shrunk is None:
            break
        current = shrunk
    return current
