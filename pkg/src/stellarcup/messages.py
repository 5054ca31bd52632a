"""Wire messages of the discovery stack and their canonical serialisation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

from .fbqs import SliceSet
from .graph_core import ProcessId


class Kind(str, Enum):
    DISCOVER = "DISCOVER"
    PD_REPLY = "PD_REPLY"
    KNOWN_EXCHANGE = "KNOWN_EXCHANGE"
    GET_SINK = "GET_SINK"
    SINK_REPLY = "SINK_REPLY"


@dataclass(frozen=True)
class ProtocolMessage:
    """One message.

    ``body`` is a process set for PD_REPLY / KNOWN_EXCHANGE / SINK_REPLY and a
    string tag for GET_SINK.  ``origin`` and ``path`` are only used by relayed
    GET_SINK copies; ``path`` starts at the origin and ends at the sender.
    """

    kind: Kind
    sender: ProcessId
    body: frozenset[ProcessId] | str | None = None
    origin: ProcessId | None = None
    path: tuple[ProcessId, ...] = ()
    slices: SliceSet | None = None

    def record(self) -> dict:
        body = self.body
        if isinstance(body, frozenset):
            body = sorted(body)
        return {
            "kind": self.kind.value,
            "sender": self.sender,
            "body": body,
            "origin": self.origin,
            "path": list(self.path),
            "slices": None if self.slices is None else self.slices.as_dict(),
        }

    def digest(self) -> str:
        blob = json.dumps(self.record(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_record(cls, data: dict) -> ProtocolMessage:
        body = data.get("body")
        if isinstance(body, list):
            body = frozenset(body)
        slices = data.get("slices")
        sender = int(data["sender"])
        return cls(
            Kind(data["kind"]),
            sender,
            body,
            data.get("origin"),
            tuple(data.get("path") or ()),
            None if slices is None else SliceSet.from_dict(sender, slices),
        )


def discover(sender: ProcessId) -> ProtocolMessage:
    return ProtocolMessage(Kind.DISCOVER, sender)


def pd_reply(sender: ProcessId, pd) -> ProtocolMessage:
    return ProtocolMessage(Kind.PD_REPLY, sender, frozenset(pd))


def known_exchange(sender: ProcessId, known) -> ProtocolMessage:
    return ProtocolMessage(Kind.KNOWN_EXCHANGE, sender, frozenset(known))


def sink_reply(sender: ProcessId, view) -> ProtocolMessage:
    return ProtocolMessage(Kind.SINK_REPLY, sender, frozenset(view))


def get_sink_copy(sender: ProcessId, origin: ProcessId, path, tag: str = "GET_SINK") -> ProtocolMessage:
    return ProtocolMessage(Kind.GET_SINK, sender, tag, origin, tuple(path))
