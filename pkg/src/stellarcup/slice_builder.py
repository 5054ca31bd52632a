"""The two slice constructions: PD-only local slices and sink-detector slices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import TooFewNeighborsError, ViewTooSmallError
from .fbqs import SliceSet
from .graph_core import ProcessId


@dataclass(frozen=True)
class SinkResult:
    """Output of the sink detector: membership flag and a view of the sink."""

    in_sink: bool
    view: frozenset[ProcessId]

    def __post_init__(self):
        object.__setattr__(self, "view", frozenset(self.view))

    def as_dict(self) -> dict:
        return {"in_sink": self.in_sink, "view": sorted(self.view)}

    @classmethod
    def from_dict(cls, data: dict) -> SinkResult:
        return cls(bool(data["in_sink"]), frozenset(data["view"]))


def local_slices(owner: ProcessId, pd: Iterable[ProcessId], f: int) -> SliceSet:
    """Every ``(|pd| - 1)``-subset of ``pd``; a single neighbour gives the slice ``pd``.

    ``f`` does not change the construction.  Whether the result leaves an
    all-correct slice against any ``f`` faulty neighbours is
    ``slices.tolerated_faults() >= f``.
    """
    pd = frozenset(pd)
    if not pd:
        raise TooFewNeighborsError(f"process {owner} has an empty participant detector")
    if f < 0:
        raise ValueError("f must be non-negative")
    return SliceSet.threshold(owner, pd, max(len(pd) - 1, 1))


def sink_slice_size(view_size: int, f: int) -> int:
    """ceil((|V| + f + 1) / 2) without floats."""
    return (view_size + f + 2) // 2


def sd_slices(owner: ProcessId, result: SinkResult, f: int) -> SliceSet:
    """Slices from a sink-detector answer.

    Sink members take every ``ceil((|V|+f+1)/2)``-subset of the sink; everybody
    else takes every ``(f+1)``-subset of the view.
    """
    size = sink_slice_size(len(result.view), f) if result.in_sink else f + 1
    if len(result.view) < max(size, f + 1):
        raise ViewTooSmallError(
            f"view of {len(result.view)} processes cannot hold slices of size {size}"
        )
    return SliceSet.threshold(owner, result.view, size)


def avoids_every_fault_set(slices: SliceSet, f: int) -> bool:
    """For every set of at most ``f`` members, some slice misses it entirely."""
    return slices.tolerated_faults() >= min(f, len(slices.members()))
