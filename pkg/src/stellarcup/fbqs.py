"""Federated Byzantine quorum systems: slices, quorums, intertwined sets, clusters.

Sets of processes are handled as Python ints (bit ``k`` set means the
``k``-th smallest id of the universe is a member) inside the enumeration
code; the public functions accept and return ordinary sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator, Mapping

from .errors import MissingSlicesError, SliceError, UniverseTooLargeError
from .graph_core import FaultAssignment, ProcessId

DEFAULT_ENUMERATION_BOUND = 20
DEFAULT_CLUSTER_BOUND = 14
EXPLICIT_EXPANSION_BOUND = 4096


@dataclass(frozen=True)
class SliceSet:
    """The quorum slices of one process.

    Either an explicit family of sets, or the threshold family of every
    ``size``-subset of ``base``.  Build instances with :meth:`explicit` or
    :meth:`threshold`.
    """

    owner: ProcessId
    family: tuple[frozenset[ProcessId], ...] | None = None
    base: frozenset[ProcessId] | None = None
    size: int | None = None

    def __post_init__(self):
        if (self.family is None) == (self.base is None):
            raise SliceError("a SliceSet is either explicit or threshold, not both")
        if self.family is not None:
            if not self.family:
                raise SliceError(f"process {self.owner} declares no slices")
            if any(not s for s in self.family):
                raise SliceError(f"process {self.owner} declares an empty slice")
        else:
            if self.size is None or not 1 <= self.size <= len(self.base):
                raise SliceError(
                    f"threshold size {self.size} outside 1..{len(self.base)}"
                )

    @classmethod
    def explicit(cls, owner: ProcessId, slices: Iterable[Iterable[ProcessId]]) -> SliceSet:
        uniq = {frozenset(s) for s in slices}
        family = tuple(sorted(uniq, key=lambda s: (len(s), sorted(s))))
        return cls(owner, family=family)

    @classmethod
    def threshold(cls, owner: ProcessId, base: Iterable[ProcessId], size: int) -> SliceSet:
        return cls(owner, base=frozenset(base), size=size)

    @property
    def is_threshold(self) -> bool:
        return self.base is not None

    def satisfied_by(self, q: Iterable[ProcessId] | frozenset) -> bool:
        """True iff some slice is contained in ``q``."""
        q = q if isinstance(q, (set, frozenset)) else set(q)
        if self.is_threshold:
            return len(self.base & q) >= self.size
        return any(s <= q for s in self.family)

    def members(self) -> frozenset[ProcessId]:
        """Union of all slices."""
        if self.is_threshold:
            return self.base
        return frozenset().union(*self.family)

    def count(self) -> int:
        if self.is_threshold:
            return comb(len(self.base), self.size)
        return len(self.family)

    def slices(self, bound: int = EXPLICIT_EXPANSION_BOUND) -> Iterator[frozenset[ProcessId]]:
        if not self.is_threshold:
            yield from self.family
            return
        if self.count() > bound:
            raise UniverseTooLargeError(
                f"expanding {self.count()} slices exceeds bound {bound}"
            )
        for combo in itertools.combinations(sorted(self.base), self.size):
            yield frozenset(combo)

    def expand(self, bound: int = EXPLICIT_EXPANSION_BOUND) -> SliceSet:
        return SliceSet.explicit(self.owner, self.slices(bound))

    def tolerated_faults(self) -> int:
        """Largest ``t`` such that every ``t``-subset of members is avoided by some slice."""
        if self.is_threshold:
            return len(self.base) - self.size
        universe = sorted(self.members())
        t = 0
        while t < len(universe):
            for blocked in itertools.combinations(universe, t + 1):
                b = set(blocked)
                if not any(not (s & b) for s in self.family):
                    return t
            t += 1
        return t

    def as_dict(self) -> dict:
        if self.is_threshold:
            return {"threshold": {"base": sorted(self.base), "size": self.size}}
        return {"slices": [sorted(s) for s in self.family]}

    @classmethod
    def from_dict(cls, owner: ProcessId, data) -> SliceSet:
        if isinstance(data, list):
            return cls.explicit(owner, data)
        if "threshold" in data:
            t = data["threshold"]
            return cls.threshold(owner, t["base"], int(t["size"]))
        return cls.explicit(owner, data["slices"])

    def __str__(self) -> str:
        if self.is_threshold:
            return f"all {self.size}-subsets of {sorted(self.base)}"
        return "{" + ", ".join(str(sorted(s)) for s in self.family) + "}"


Slices = Mapping[ProcessId, SliceSet]


def is_quorum(q: Iterable[ProcessId], slices: Slices) -> bool:
    q = frozenset(q)
    for i in sorted(q):
        if i not in slices:
            raise MissingSlicesError(i)
        if not slices[i].satisfied_by(q):
            return False
    return True


def with_faulty_defaults(slices: Slices, fa: FaultAssignment) -> dict[ProcessId, SliceSet]:
    """Give every faulty process without declared slices the trivial slice ``{i}``.

    A Byzantine process can declare anything, so the most permissive choice is
    the adversarial one: it never stops a set containing it from being a quorum.
    """
    out = dict(slices)
    for i in fa.faulty:
        out.setdefault(i, SliceSet.explicit(i, [[i]]))
    return out


class QuorumSpace:
    """Slices compiled to bitmasks over a fixed, bounded universe."""

    def __init__(self, slices: Slices, universe: Iterable[ProcessId], bound: int = DEFAULT_ENUMERATION_BOUND):
        self.ids = sorted(set(universe))
        if len(self.ids) > bound:
            raise UniverseTooLargeError(
                f"universe of {len(self.ids)} processes exceeds enumeration bound {bound}"
            )
        self.bit = {p: 1 << k for k, p in enumerate(self.ids)}
        self.full = (1 << len(self.ids)) - 1
        self._checks = []
        for p in self.ids:
            if p not in slices:
                raise MissingSlicesError(p)
            ss = slices[p]
            if ss.is_threshold:
                base = self.mask(ss.base & set(self.ids))
                self._checks.append((True, base, ss.size))
            else:
                fam = [self.mask(s) for s in ss.family if s <= set(self.ids)]
                self._checks.append((False, fam, None))
        self._quorums: list[int] | None = None
        self._minimal: dict[int, list[int]] = {}

    def mask(self, members: Iterable[ProcessId]) -> int:
        m = 0
        for p in members:
            m |= self.bit[p]
        return m

    def unmask(self, m: int) -> frozenset[ProcessId]:
        return frozenset(p for k, p in enumerate(self.ids) if m >> k & 1)

    def satisfied(self, k: int, m: int) -> bool:
        is_thr, data, size = self._checks[k]
        if is_thr:
            return (data & m).bit_count() >= size
        return any(s & m == s for s in data)

    def is_quorum_mask(self, m: int) -> bool:
        k = 0
        rest = m
        while rest:
            if rest & 1 and not self.satisfied(k, m):
                return False
            rest >>= 1
            k += 1
        return True

    def quorums(self) -> list[int]:
        """Every non-empty quorum inside the universe."""
        if self._quorums is None:
            self._quorums = [m for m in range(1, self.full + 1) if self.is_quorum_mask(m)]
        return self._quorums

    def quorums_of(self, p: ProcessId) -> list[int]:
        b = self.bit[p]
        return [m for m in self.quorums() if m & b]

    def minimal_quorums_of(self, p: ProcessId) -> list[int]:
        if p not in self._minimal:
            qs = sorted(self.quorums_of(p), key=lambda m: m.bit_count())
            keep: list[int] = []
            for m in qs:
                if not any(k & m == k for k in keep):
                    keep.append(m)
            self._minimal[p] = keep
        return self._minimal[p]

    def sort_key(self, m: int):
        members = sorted(self.unmask(m))
        return (len(members), members)


def quorums_of(
    i: ProcessId,
    slices: Slices,
    universe: Iterable[ProcessId],
    minimal_only: bool = False,
    bound: int = DEFAULT_ENUMERATION_BOUND,
) -> list[frozenset[ProcessId]]:
    space = QuorumSpace(slices, universe, bound)
    masks = space.minimal_quorums_of(i) if minimal_only else space.quorums_of(i)
    return [space.unmask(m) for m in sorted(masks, key=space.sort_key)]


@dataclass(frozen=True)
class IntertwinedResult:
    holds: bool
    members: tuple[ProcessId, ProcessId] | None = None
    quorums: tuple[frozenset[ProcessId], frozenset[ProcessId]] | None = None

    def __bool__(self) -> bool:
        return self.holds


def _pair_ok(a: int, b: int, f: int, correct_mask: int | None) -> bool:
    if correct_mask is None:
        return (a & b).bit_count() > f
    return bool(a & b & correct_mask)


def _intertwined(space: QuorumSpace, members: list[ProcessId], f: int, correct_mask: int | None) -> IntertwinedResult:
    # checking inclusion-minimal quorums is exact: growing a quorum never shrinks an intersection
    fams = {p: space.minimal_quorums_of(p) for p in members}
    for x, p in enumerate(members):
        for q in members[x:]:
            for a in fams[p]:
                for b in fams[q]:
                    if not _pair_ok(a, b, f, correct_mask):
                        return IntertwinedResult(False, (p, q), (space.unmask(a), space.unmask(b)))
    return IntertwinedResult(True)


def is_intertwined(
    members: Iterable[ProcessId],
    slices: Slices,
    universe: Iterable[ProcessId],
    fa: FaultAssignment,
    *,
    strict: bool = False,
    bound: int = DEFAULT_ENUMERATION_BOUND,
) -> IntertwinedResult:
    """Do all quorums of all pairs of ``members`` intersect in more than ``f`` processes?

    With ``strict=True`` the requirement is instead a common correct process.
    """
    space = QuorumSpace(with_faulty_defaults(slices, fa), universe, bound)
    correct_mask = space.mask(set(space.ids) - fa.faulty) if strict else None
    return _intertwined(space, sorted(set(members)), fa.f, correct_mask)


@dataclass(frozen=True)
class ClusterReport:
    candidate: frozenset[ProcessId]
    intertwined: bool
    available: bool
    violating_members: tuple[ProcessId, ProcessId] | None = None
    violating_quorum_pair: tuple[frozenset[ProcessId], frozenset[ProcessId]] | None = None
    unavailable_member: ProcessId | None = None

    @property
    def is_cluster(self) -> bool:
        return self.intertwined and self.available

    def as_dict(self) -> dict:
        pair = self.violating_quorum_pair
        return {
            "candidate": sorted(self.candidate),
            "intertwined": self.intertwined,
            "available": self.available,
            "is_cluster": self.is_cluster,
            "violating_members": None if self.violating_members is None else list(self.violating_members),
            "violating_quorum_pair": None if pair is None else [sorted(pair[0]), sorted(pair[1])],
            "unavailable_member": self.unavailable_member,
        }


def is_consensus_cluster(
    candidate: Iterable[ProcessId],
    slices: Slices,
    universe: Iterable[ProcessId],
    fa: FaultAssignment,
    *,
    strict: bool = False,
    bound: int = DEFAULT_ENUMERATION_BOUND,
) -> ClusterReport:
    cand = frozenset(candidate)
    space = QuorumSpace(with_faulty_defaults(slices, fa), universe, bound)
    correct_mask = space.mask(set(space.ids) - fa.faulty) if strict else None
    inter = _intertwined(space, sorted(cand), fa.f, correct_mask)
    cmask = space.mask(cand)
    missing = None
    for p in sorted(cand):
        if not any(m & cmask == m for m in space.minimal_quorums_of(p)):
            missing = p
            break
    return ClusterReport(
        cand, inter.holds, missing is None, inter.members, inter.quorums, missing
    )


def maximal_consensus_clusters(
    slices: Slices,
    universe: Iterable[ProcessId],
    fa: FaultAssignment,
    *,
    strict: bool = False,
    bound: int = DEFAULT_CLUSTER_BOUND,
) -> list[frozenset[ProcessId]]:
    """Every inclusion-maximal non-empty consensus cluster among the correct processes."""
    universe = sorted(set(universe))
    correct = [p for p in universe if p not in fa.faulty]
    if len(correct) > bound:
        raise UniverseTooLargeError(
            f"{len(correct)} correct processes exceed cluster enumeration bound {bound}"
        )
    space = QuorumSpace(with_faulty_defaults(slices, fa), universe, max(bound, len(universe)))
    correct_mask = space.mask(correct) if strict else None
    fams = {p: space.minimal_quorums_of(p) for p in correct}

    n = len(correct)
    # compat[x] = bitmask over positions in ``correct`` that are pairwise intertwined with x
    compat = [0] * n
    for x in range(n):
        for y in range(x, n):
            ok = all(
                _pair_ok(a, b, fa.f, correct_mask)
                for a in fams[correct[x]]
                for b in fams[correct[y]]
            )
            if ok:
                compat[x] |= 1 << y
                compat[y] |= 1 << x

    clusters: list[int] = []
    for sub in range(1, 1 << n):
        members = [x for x in range(n) if sub >> x & 1]
        if any(compat[x] & sub != sub for x in members):
            continue
        umask = space.mask(correct[x] for x in members)
        if all(any(m & umask == m for m in fams[correct[x]]) for x in members):
            clusters.append(umask)
    maximal = [c for c in clusters if not any(c != d and c & d == c for d in clusters)]
    return [space.unmask(c) for c in sorted(maximal, key=space.sort_key)]
