"""Deterministic discrete-event network with authenticated reliable channels.

Time is logical.  Every send draws a delay from a seeded generator, events
are processed in ``(deliver_at, seq)`` order, and a run is a pure function
of the initial knowledge, the adversary, the config and the processes.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Protocol

from .errors import BudgetExceededError, UnknownRecipientError
from .graph_core import ProcessId
from .messages import Kind, ProtocolMessage, known_exchange, sink_reply


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    max_delay: int = 5
    gst: int = 0
    pre_gst_max_delay: int = 50
    budget: int = 500_000

    def __post_init__(self):
        if self.max_delay < 1 or self.pre_gst_max_delay < 1:
            raise ValueError("delays must be at least 1")
        if self.budget < 0 or self.gst < 0:
            raise ValueError("budget and gst must be non-negative")


# -- adversary ---------------------------------------------------------------


class Behavior:
    """How a faulty process deviates.  The default forwards traffic untouched."""

    def on_start(self, ctx: Context) -> None:
        pass

    def outgoing(self, ctx: Context, to: ProcessId, msg: ProtocolMessage) -> list[ProtocolMessage]:
        return [msg]

    def as_dict(self) -> dict:
        raise NotImplementedError


class Silent(Behavior):
    def outgoing(self, ctx, to, msg):
        return []

    def as_dict(self):
        return {"type": "Silent"}

    def __eq__(self, other):
        return isinstance(other, Silent)

    def __hash__(self):
        return hash("Silent")


@dataclass(frozen=True)
class LieAboutPd(Behavior):
    """Answers discovery with ``fake_pd`` instead of its real neighbourhood."""

    fake_pd: frozenset[ProcessId]

    def outgoing(self, ctx, to, msg):
        if msg.kind is Kind.PD_REPLY:
            return [replace(msg, body=frozenset(self.fake_pd))]
        return [msg]

    def as_dict(self):
        return {"type": "LieAboutPd", "fake_pd": sorted(self.fake_pd)}


@dataclass(frozen=True)
class EquivocateSink(Behavior):
    """Feeds each target its own fake sink view.

    Fake views go out unprompted at start, and replace every SINK_REPLY and
    KNOWN_EXCHANGE addressed to a target.
    """

    views: Mapping[ProcessId, frozenset[ProcessId]]

    def on_start(self, ctx):
        for to in sorted(self.views):
            if to in ctx.known:
                ctx.network.enqueue(ctx.pid, to, sink_reply(ctx.pid, self.views[to]))

    def outgoing(self, ctx, to, msg):
        if to in self.views:
            if msg.kind is Kind.SINK_REPLY:
                return [sink_reply(ctx.pid, self.views[to])]
            if msg.kind is Kind.KNOWN_EXCHANGE:
                return [known_exchange(ctx.pid, self.views[to])]
        return [msg]

    def __hash__(self):
        return hash(tuple(sorted((k, tuple(sorted(v))) for k, v in self.views.items())))

    def as_dict(self):
        return {
            "type": "EquivocateSink",
            "views": {str(k): sorted(v) for k, v in sorted(self.views.items())},
        }


@dataclass(frozen=True)
class Arbitrary(Behavior):
    """Sends ``script`` at start; honest traffic goes through ``rewrite`` (dropped by default)."""

    script: tuple[tuple[ProcessId, ProtocolMessage], ...] = ()
    rewrite: Callable[[ProcessId, ProtocolMessage], list[ProtocolMessage]] | None = field(
        default=None, compare=False
    )

    def on_start(self, ctx):
        for to, msg in self.script:
            if to in ctx.known:
                ctx.network.enqueue(ctx.pid, to, msg)

    def outgoing(self, ctx, to, msg):
        if self.rewrite is None:
            return []
        return self.rewrite(to, msg)

    def as_dict(self):
        return {
            "type": "Arbitrary",
            "script": [[to, msg.record()] for to, msg in self.script],
        }


def behavior_from_dict(data: dict) -> Behavior:
    kind = data["type"]
    if kind == "Silent":
        return Silent()
    if kind == "LieAboutPd":
        return LieAboutPd(frozenset(data["fake_pd"]))
    if kind == "EquivocateSink":
        return EquivocateSink({int(k): frozenset(v) for k, v in data["views"].items()})
    if kind == "Arbitrary":
        return Arbitrary(
            tuple((int(to), ProtocolMessage.from_record(m)) for to, m in data.get("script", []))
        )
    raise ValueError(f"unknown behavior type {kind!r}")


# -- processes ---------------------------------------------------------------


class Process(Protocol):
    def start(self, ctx: Context) -> None: ...

    def receive(self, ctx: Context, sender: ProcessId, msg: ProtocolMessage) -> None: ...


class Context:
    """A process's handle on the network; the only way it can act."""

    __slots__ = ("network", "pid")

    def __init__(self, network: Network, pid: ProcessId):
        self.network = network
        self.pid = pid

    @property
    def known(self) -> frozenset[ProcessId]:
        return frozenset(self.network.known[self.pid])

    @property
    def now(self) -> int:
        return self.network.now

    def send(self, to: ProcessId, msg: ProtocolMessage) -> None:
        self.network.send(self.pid, to, msg)

    def learn(self, ids: Iterable[ProcessId]) -> None:
        self.network.known[self.pid].update(i for i in ids if i != self.pid)

    def record(self, event: str, **data) -> None:
        self.network.log(event, process=self.pid, **data)


@dataclass
class Trace:
    records: list[dict] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records
        )

    @classmethod
    def from_jsonl(cls, text: str) -> Trace:
        return cls([json.loads(line) for line in text.splitlines() if line.strip()])

    def events(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["event"] == kind]

    def __len__(self) -> int:
        return len(self.records)


class Network:
    """Event queue plus the per-process known sets that gate ``send``."""

    def __init__(
        self,
        processes: Mapping[ProcessId, Process],
        initial_known: Mapping[ProcessId, Iterable[ProcessId]],
        behaviors: Mapping[ProcessId, Behavior] | None = None,
        config: SimConfig = SimConfig(),
    ):
        self.processes = dict(processes)
        self.known = {p: set(initial_known.get(p, ())) - {p} for p in self.processes}
        self.behaviors = dict(behaviors or {})
        stray = set(self.behaviors) - set(self.processes)
        if stray:
            raise ValueError(f"behaviors for unknown processes {sorted(stray)}")
        self.config = config
        self.rng = random.Random(config.seed)
        self.now = 0
        self.steps = 0
        self._seq = 0
        self._queue: list[tuple[int, int, ProcessId, ProcessId, ProtocolMessage]] = []
        self.trace = Trace()
        self._started = False

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def log(self, event: str, **data) -> None:
        self.trace.records.append({"event": event, "t": self.now, "seq": self._next_seq(), **data})

    def context(self, pid: ProcessId) -> Context:
        return Context(self, pid)

    def send(self, frm: ProcessId, to: ProcessId, msg: ProtocolMessage) -> None:
        if to not in self.known[frm]:
            raise UnknownRecipientError(f"{frm} does not know {to}")
        behavior = self.behaviors.get(frm)
        outgoing = [msg] if behavior is None else behavior.outgoing(self.context(frm), to, msg)
        for m in outgoing:
            self.enqueue(frm, to, m)

    def enqueue(self, frm: ProcessId, to: ProcessId, msg: ProtocolMessage) -> None:
        if msg.sender != frm:
            # channels are authenticated: the claimed sender is overwritten, never trusted
            self.log("forgery-blocked", **{"from": frm, "to": to, "claimed": msg.sender})
            msg = replace(msg, sender=frm)
        cap = self.config.max_delay if self.now >= self.config.gst else self.config.pre_gst_max_delay
        at = self.now + self.rng.randint(1, cap)
        seq = self._next_seq()
        heapq.heappush(self._queue, (at, seq, frm, to, msg))
        self.trace.records.append(
            {"event": "send", "t": self.now, "seq": seq, "from": frm, "to": to,
             "kind": msg.kind.value, "digest": msg.digest(), "deliver_at": at}
        )

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for pid in sorted(self.processes):
            ctx = self.context(pid)
            self.processes[pid].start(ctx)
            if pid in self.behaviors:
                self.behaviors[pid].on_start(ctx)

    @property
    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> bool:
        if not self._queue:
            return False
        if self.steps >= self.config.budget:
            raise BudgetExceededError(
                f"step budget {self.config.budget} exhausted with {len(self._queue)} events pending"
            )
        at, seq, frm, to, msg = heapq.heappop(self._queue)
        self.steps += 1
        self.now = at
        if to not in self.processes:
            self.log("drop", **{"from": frm, "to": to, "kind": msg.kind.value})
            return True
        self.log("deliver", **{"from": frm, "to": to, "kind": msg.kind.value,
                               "digest": msg.digest(), "sent_seq": seq})
        self.known[to].add(frm)
        self.processes[to].receive(self.context(to), frm, msg)
        return True

    def run(self, stop: Callable[[], bool] | None = None) -> Trace:
        """Deliver events until quiescence or until ``stop()`` becomes true."""
        self.start()
        while not (stop is not None and stop()):
            if not self.step():
                break
        return self.trace


def run(
    processes: Mapping[ProcessId, Process],
    initial_known: Mapping[ProcessId, Iterable[ProcessId]],
    behaviors: Mapping[ProcessId, Behavior] | None = None,
    config: SimConfig = SimConfig(),
) -> Trace:
    return Network(processes, initial_known, behaviors, config).run()
