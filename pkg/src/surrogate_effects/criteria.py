"""Graphical identifiability criteria.

Covers the single-door, back-door and conditional-instrument criteria for
observed treatment/response pairs, plus the surrogate-variable criteria for a
single latent variable (:func:`theorem1_check`) and for a latent
treatment-response pair (:func:`theorem2_check`). :func:`find_strategies`
enumerates role assignments for which one of the four identification
strategies in :mod:`surrogate_effects.gaussian` applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations, permutations
from typing import Dict, List, Mapping, Optional, Tuple

from .exceptions import RoleError
from .graph import (
    PathDiagram,
    _as_set,
    d_separates,
    delete_edge,
    delete_outgoing,
    moralize,
    u_separates,
)

STRATEGIES = (
    "backdoor-latent-response",
    "backdoor-latent-treatment",
    "civ-latent-response",
    "double-latent",
)


def _names(vertices) -> Tuple[str, ...]:
    return tuple(sorted(_as_set(vertices)))


@dataclass(frozen=True)
class RoleAssignment:
    """Roles for the single-latent criterion.

    ``y`` is the unobserved variable; ``x``, ``u``, ``w`` are its three
    observed pivots, ``z`` and ``t`` observed conditioning blocks.
    ``y_kind`` records whether ``y`` is the latent response or treatment.
    """

    x: str
    y: str
    u: str
    w: str
    z: Tuple[str, ...] = ()
    t: Tuple[str, ...] = ()
    y_kind: str = "response"

    def __post_init__(self):
        object.__setattr__(self, "z", _names(self.z))
        object.__setattr__(self, "t", _names(self.t))
        if self.y_kind not in ("response", "treatment"):
            raise RoleError(f"y_kind must be 'response' or 'treatment', got {self.y_kind!r}")
        named = [self.x, self.y, self.u, self.w, *self.z, *self.t]
        if len(set(named)) != len(named):
            raise RoleError(f"roles must be pairwise disjoint: {named}")

    @property
    def observed(self) -> Tuple[str, ...]:
        """The observed set S in pivot order: x, u, w, then z, then t."""
        return (self.x, self.u, self.w, *self.z, *self.t)

    def validate(self, g: PathDiagram):
        missing = set(self.observed) | {self.y}
        missing -= g.vertices
        if missing:
            raise RoleError(f"roles name vertices absent from the diagram: {sorted(missing)}")
        if self.y not in g.latent:
            raise RoleError(f"{self.y} must be a latent vertex")
        latent = [v for v in self.observed if v in g.latent]
        if latent:
            raise RoleError(f"roles x, u, w, z, t must be observed; latent: {latent}")

    def swap_uw(self) -> "RoleAssignment":
        return RoleAssignment(self.x, self.y, self.w, self.u, self.z, self.t, self.y_kind)

    def sort_key(self):
        return (self.x, self.y, self.u, self.w, self.z, self.t)

    def to_dict(self):
        return {
            "x": self.x,
            "y": self.y,
            "u": self.u,
            "w": self.w,
            "z": list(self.z),
            "t": list(self.t),
            "y_kind": self.y_kind,
        }


@dataclass(frozen=True)
class DoubleRoleAssignment:
    """Roles for a latent treatment ``x1`` and latent response ``x2``."""

    x1: str
    x2: str
    u1: str
    w1: str
    u2: str
    w2: str
    z: Tuple[str, ...] = ()
    t1: Tuple[str, ...] = ()
    t2: Tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("z", "t1", "t2"):
            object.__setattr__(self, name, _names(getattr(self, name)))
        if self.x1 == self.x2:
            raise RoleError("x1 and x2 must differ")
        named = [self.x1, self.x2, self.u1, self.w1, self.u2, self.w2, *self.z]
        if len(set(named)) != len(named):
            raise RoleError(f"roles must be pairwise disjoint: {named}")
        # t1 and t2 may share vertices, but neither may reuse a named role
        for block in ("t1", "t2"):
            clash = set(getattr(self, block)) & set(named)
            if clash:
                raise RoleError(f"{block} overlaps named roles: {sorted(clash)}")

    @property
    def observed(self) -> Tuple[str, ...]:
        rest = sorted(set(self.t1) | set(self.t2))
        return (self.u1, self.w1, self.u2, self.w2, *self.z, *rest)

    def validate(self, g: PathDiagram):
        missing = (set(self.observed) | {self.x1, self.x2}) - g.vertices
        if missing:
            raise RoleError(f"roles name vertices absent from the diagram: {sorted(missing)}")
        for v in (self.x1, self.x2):
            if v not in g.latent:
                raise RoleError(f"{v} must be a latent vertex")
        latent = [v for v in self.observed if v in g.latent]
        if latent:
            raise RoleError(f"surrogate and conditioning roles must be observed; latent: {latent}")

    def first_embedding(self) -> RoleAssignment:
        """Single-latent roles around ``x1``: pivots u1, u2, w1; t = t1."""
        return RoleAssignment(self.u1, self.x1, self.u2, self.w1, self.z, self.t1, "treatment")

    def second_embedding(self) -> RoleAssignment:
        """Single-latent roles around ``x2``: pivots u1, u2, w2; t = {w1} and t2."""
        t = set(self.t2) | {self.w1}
        return RoleAssignment(self.u1, self.x2, self.u2, self.w2, self.z, t, "response")

    def sort_key(self):
        return (self.x1, self.x2, self.u1, self.w1, self.u2, self.w2, self.z, self.t1, self.t2)

    def to_dict(self):
        return {
            "x1": self.x1,
            "x2": self.x2,
            "u1": self.u1,
            "w1": self.w1,
            "u2": self.u2,
            "w2": self.w2,
            "z": list(self.z),
            "t1": list(self.t1),
            "t2": list(self.t2),
        }


@dataclass(frozen=True)
class Separation:
    """One recorded separation query; ``kind`` is ``"moral"`` or ``"d"``."""

    label: str
    a: Tuple[str, ...]
    b: Tuple[str, ...]
    c: Tuple[str, ...]
    holds: bool
    kind: str = "moral"

    def to_dict(self):
        return {
            "label": self.label,
            "kind": self.kind,
            "a": list(self.a),
            "b": list(self.b),
            "given": list(self.c),
            "holds": self.holds,
        }


@dataclass(frozen=True)
class CriterionCertificate:
    criterion: str
    satisfied: bool
    witnesses: Optional[Mapping] = None
    failed_condition: Optional[str] = None
    separations: Tuple[Separation, ...] = ()
    moral_vertices: Tuple[str, ...] = ()
    sub_certificates: Tuple["CriterionCertificate", ...] = ()
    notes: Tuple[str, ...] = ()
    roles: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        if self.satisfied != (self.failed_condition is None):
            raise ValueError("satisfied must be true exactly when no condition failed")
        if self.satisfied != (self.witnesses is not None):
            raise ValueError("witnesses are recorded exactly for satisfied certificates")

    def to_dict(self):
        out = {
            "criterion": self.criterion,
            "satisfied": self.satisfied,
            "failed_condition": self.failed_condition,
            "witnesses": None,
            "separations": [s.to_dict() for s in self.separations],
        }
        if self.roles is not None:
            out["roles"] = self.roles.to_dict()
        if self.witnesses is not None:
            out["witnesses"] = {
                k: (v.to_dict() if isinstance(v, CriterionCertificate) else list(v))
                for k, v in self.witnesses.items()
            }
        if self.moral_vertices:
            out["moral_vertices"] = list(self.moral_vertices)
        if self.sub_certificates:
            out["sub_certificates"] = [c.to_dict() for c in self.sub_certificates]
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def single_door(g: PathDiagram, i: str, j: str, z=()) -> bool:
    """Whether ``z`` licenses reading the coefficient of ``i -> j`` as a regression slope."""
    z = _as_set(z)
    cut = delete_edge(g, i, j)
    if {i, j} & z:
        raise RoleError("conditioning set must exclude both edge endpoints")
    if z & g.descendants(j):
        return False
    return d_separates(cut, {i}, {j}, z)


def back_door(g: PathDiagram, x: str, y: str, t=()) -> bool:
    t = _as_set(t)
    if x == y:
        raise RoleError("treatment and response must differ")
    if {x, y} & t:
        raise RoleError("adjustment set must exclude treatment and response")
    if t & g.descendants(x):
        return False
    return d_separates(delete_outgoing(g, {x}), {x}, {y}, t)


def conditional_iv(g: PathDiagram, x: str, y: str, z: str, t=()) -> bool:
    """Whether ``z`` is an instrument for ``x -> y`` once ``t`` is conditioned on.

    Besides the separation conditions in the graph with the arrows out of
    ``x`` deleted, ``z`` and ``t`` must be nondescendants of ``x``. Without
    that, deleting the arrows changes the instrument itself and the ratio
    ``sigma_yz.t / sigma_xz.t`` no longer equals the total effect.
    """
    t = _as_set(t)
    if len({x, y, z}) != 3:
        raise RoleError("x, y and the instrument must be distinct")
    if {x, y, z} & t:
        raise RoleError("conditioning set must exclude x, y and the instrument")
    if t & g.descendants(y) or (t | {z}) & g.descendants(x):
        return False
    cut = delete_outgoing(g, {x})
    return d_separates(cut, {z}, {y}, t) and not d_separates(cut, {z}, {x}, t)


def _failed(name, label, seps, moral, roles, notes=()):
    return CriterionCertificate(
        name, False, None, label, tuple(seps), moral, notes=tuple(notes), roles=roles
    )


def theorem1_check(g: PathDiagram, roles: RoleAssignment) -> CriterionCertificate:
    """Check the moral-graph conditions for recovering the latent cross-products.

    Conditions are checked in the moral graph of the ancestral closure of
    ``{x, y, u, w} | z | t``:

    1. ``{y} | z | t`` separates each of x, u, w from the other two;
       each of x, u, w must also stay connected to y given the rest of S,
       otherwise its concentration entries vanish structurally;
    2. some nonempty ``R1`` within {x, u, w} is separated from ``t`` by the
       remaining vertices of ``{y, x, u, w} | z`` (skipped when t is empty);
    3. some nonempty ``R2`` within ``{x, u, w} | t`` is separated from ``z`` by
       the remaining vertices of ``{y, x, u, w} | t`` (skipped when z is empty).

    The certificate records the maximal ``R1`` and ``R2``. Admissible sets
    are closed under union, so the maximal set is the union of all admissible
    single pivots.
    """
    name = "theorem1"
    roles.validate(g)
    x, y, u, w, z, t = roles.x, roles.y, roles.u, roles.w, set(roles.z), set(roles.t)
    core = (x, u, w)
    s = set(roles.observed)
    m = moralize(g, s | {y})
    moral = tuple(sorted(m.vertices))
    notes = []
    extra = sorted(v for v in m.vertices - s - {y} if v in g.observed)
    if extra:
        notes.append(f"observed ancestors outside the role set are marginalized: {extra}")
    seps = []

    given = {y} | z | t
    for e in core:
        others = tuple(o for o in core if o != e)
        ok = u_separates(m, {e}, others, given)
        seps.append(Separation("(1) pivot separation", (e,), others, _names(given), ok))
        if not ok:
            return _failed(name, f"(1) {e} not separated from {list(others)}", seps, moral, roles, notes)

    for e in core:
        cut_off = u_separates(m, {e}, {y}, s - {e})
        seps.append(Separation("nonzero-concentration", (e,), (y,), _names(s - {e}), cut_off))
        if cut_off:
            return _failed(name, "nonzero-concentration assumption", seps, moral, roles, notes)

    witnesses: Dict[str, Tuple[str, ...]] = {"R1": (), "R1_pivots": (), "R2": (), "R2_pivots": ()}
    role_of = {x: "x", u: "u", w: "w"}

    if t:
        pool = {y, x, u, w} | z
        r1 = tuple(e for e in core if u_separates(m, {e}, t, pool - {e}))
        if not r1:
            seps.append(Separation("(2) R1 from t", core, _names(t), _names(pool - set(core)), False))
            return _failed(name, "(2) no pivot in {x, u, w} is separated from t", seps, moral, roles, notes)
        seps.append(Separation("(2) R1 from t", r1, _names(t), _names(pool - set(r1)), True))
        witnesses["R1"] = r1
        witnesses["R1_pivots"] = tuple(role_of[e] for e in r1)

    if z:
        pool = {y, x, u, w} | t
        candidates = core + tuple(sorted(t))
        r2 = tuple(e for e in candidates if u_separates(m, {e}, z, pool - {e}))
        if not r2:
            seps.append(Separation("(3) R2 from z", candidates, _names(z), (y,), False))
            return _failed(name, "(3) no pivot in {x, u, w} | t is separated from z", seps, moral, roles, notes)
        seps.append(Separation("(3) R2 from z", r2, _names(z), _names(pool - set(r2)), True))
        witnesses["R2"] = r2
        pivots = [role_of[e] for e in r2 if e in role_of]
        if set(r2) & t:
            pivots.append("t")
        witnesses["R2_pivots"] = tuple(pivots)

    return CriterionCertificate(
        name, True, witnesses, None, tuple(seps), moral, notes=tuple(notes), roles=roles
    )


def theorem2_check(g: PathDiagram, roles: DoubleRoleAssignment) -> CriterionCertificate:
    """Check the latent treatment/response criterion.

    Requires the single-latent conditions around ``x1`` (pivots u1, u2, w1)
    and around ``x2`` (pivots u1, u2, w2 with w1 moved into t), and that
    ``{x1} | z`` d-separates u1 from x2. The last condition is waived when u1
    is a conditional instrument for ``x1 -> x2`` given z.
    """
    name = "theorem2"
    roles.validate(g)
    first = theorem1_check(g, roles.first_embedding())
    second = theorem1_check(g, roles.second_embedding())
    given = set(roles.z) | {roles.x1}
    dsep = d_separates(g, {roles.u1}, {roles.x2}, given)
    civ = conditional_iv(g, roles.x1, roles.x2, roles.u1, roles.z)
    sep = Separation("(3) u1 from x2", (roles.u1,), (roles.x2,), _names(given), dsep, kind="d")
    notes = [
        "first embedding: x=u1, y=x1, u=u2, w=w1, t=t1",
        "second embedding: x=u1, y=x2, u=u2, w=w2, t={w1} | t2",
    ]
    if civ:
        notes.append("condition (3) optional: u1 is a conditional instrument given z")
    subs = (first, second)
    failed = None
    if not first.satisfied:
        failed = f"(1) first embedding: {first.failed_condition}"
    elif not second.satisfied:
        failed = f"(2) second embedding: {second.failed_condition}"
    elif not (dsep or civ):
        failed = "(3) {x1} | z does not d-separate u1 from x2"
    witnesses = None if failed else {"first": first, "second": second}
    return CriterionCertificate(
        name, failed is None, witnesses, failed, (sep,), (), subs, tuple(notes), roles=roles
    )


def replay_certificate(g: PathDiagram, cert: CriterionCertificate) -> bool:
    """Re-run every recorded separation and compare with the recorded outcome."""
    if cert.criterion == "theorem2":
        return all(replay_certificate(g, c) for c in cert.sub_certificates) and all(
            d_separates(g, s.a, s.b, s.c) == s.holds for s in cert.separations
        )
    roles = cert.roles
    m = moralize(g, set(roles.observed) | {roles.y})
    # ``holds`` is the raw separation outcome; for the nonzero-concentration
    # records the check passes when it is False
    return all(u_separates(m, s.a, s.b, s.c) == s.holds for s in cert.separations)


def _subsets(pool, max_size):
    pool = sorted(pool)
    return chain.from_iterable(combinations(pool, k) for k in range(min(max_size, len(pool)) + 1))


def find_strategies(g: PathDiagram, x: str, y: str, max_set_size: int = 4) -> List[Tuple[str, object]]:
    """Enumerate role assignments under which the effect of ``x`` on ``y`` is identified.

    ``x`` is the treatment and ``y`` the response. Which strategies are tried
    depends on which of the two is latent; when both are observed the list is
    empty because none of the surrogate strategies applies.
    """
    if x == y:
        raise RoleError("treatment and response must differ")
    g._require((x, y))
    observed = sorted(g.observed)
    found = []
    memo = {}

    def t1(roles):
        if roles not in memo:
            memo[roles] = theorem1_check(g, roles).satisfied
        return memo[roles]

    if x in g.observed and y in g.latent:
        pool = [v for v in observed if v != x]
        for z in _subsets(pool, max_set_size):
            if not back_door(g, x, y, z):
                continue
            rest = [v for v in pool if v not in z]
            for u, w in permutations(rest, 2):
                others = [v for v in rest if v not in (u, w)]
                for t in _subsets(others, max_set_size):
                    roles = RoleAssignment(x, y, u, w, z, t, "response")
                    if t1(roles):
                        found.append(("backdoor-latent-response", roles))
        for inst in pool:
            rest = [v for v in pool if v != inst]
            for t in _subsets(rest, max_set_size):
                if not conditional_iv(g, x, y, inst, t):
                    continue
                others = [v for v in rest if v not in t]
                for u, w in permutations(others, 2):
                    roles = RoleAssignment(x, y, u, w, (inst,), t, "response")
                    if t1(roles):
                        found.append(("civ-latent-response", roles))
    elif x in g.latent and y in g.observed:
        pool = [v for v in observed if v != y]
        for z in _subsets(pool, max_set_size):
            if not back_door(g, x, y, z):
                continue
            rest = [v for v in pool if v not in z]
            for u, w in permutations(rest, 2):
                others = [v for v in rest if v not in (u, w)]
                for t in _subsets(others, max_set_size):
                    roles = RoleAssignment(y, x, u, w, z, t, "treatment")
                    if t1(roles):
                        found.append(("backdoor-latent-treatment", roles))
    elif x in g.latent and y in g.latent:
        for z in _subsets(observed, max_set_size):
            rest = [v for v in observed if v not in z]
            for u1 in rest:
                if not (
                    d_separates(g, {u1}, {y}, set(z) | {x}) or conditional_iv(g, x, y, u1, z)
                ):
                    continue
                for u2, w1, w2 in permutations([v for v in rest if v != u1], 3):
                    others = [v for v in rest if v not in (u1, u2, w1, w2)]
                    firsts = [
                        t for t in _subsets(others, max_set_size)
                        if t1(RoleAssignment(u1, x, u2, w1, z, t, "treatment"))
                    ]
                    if not firsts:
                        continue
                    seconds = [
                        t for t in _subsets(others, max_set_size)
                        if t1(RoleAssignment(u1, y, u2, w2, z, set(t) | {w1}, "response"))
                    ]
                    for ta in firsts:
                        for tb in seconds:
                            roles = DoubleRoleAssignment(x, y, u1, w1, u2, w2, z, ta, tb)
                            if theorem2_check(g, roles).satisfied:
                                found.append(("double-latent", roles))
    found.sort(key=lambda item: (item[0], item[1].sort_key()))
    return found
