"""Scenario files: one JSON document describing a full experiment.

Top-level keys: ``name, f, pd, faulty, behaviors, slices, seed, gst, budget``.
``pd`` maps an id (as a string, JSON keys being strings) to a list of ids;
``slices`` maps an id to either a list of slices or
``{"threshold": {"base": [...], "size": s}}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ScenarioError, UnknownFigureError
from .fbqs import SliceSet
from .graph_core import FaultAssignment, KnowledgeGraph, ProcessId
from .simnet import Behavior, LieAboutPd, Silent, SimConfig, behavior_from_dict

KEYS = ("name", "f", "pd", "faulty", "behaviors", "slices", "seed", "gst", "budget")


@dataclass
class Scenario:
    name: str
    f: int
    pd: dict[ProcessId, frozenset[ProcessId]]
    faulty: frozenset[ProcessId] = frozenset()
    behaviors: dict[ProcessId, Behavior] = field(default_factory=dict)
    explicit_slices: dict[ProcessId, SliceSet] | None = None
    seed: int = 0
    gst: int = 0
    budget: int = 500_000

    def __post_init__(self):
        self.pd = {int(k): frozenset(int(x) for x in v) for k, v in self.pd.items()}
        self.faulty = frozenset(self.faulty)
        self.validate()

    def validate(self) -> None:
        ids = set(self.pd)
        if not ids:
            raise ScenarioError("scenario has no processes")
        if self.f < 0:
            raise ScenarioError("f must be non-negative")
        for i, js in self.pd.items():
            if not js <= ids:
                raise ScenarioError(f"pd[{i}] names unknown ids {sorted(js - ids)}")
            if i in js:
                raise ScenarioError(f"pd[{i}] contains {i} itself")
        if not self.faulty <= ids:
            raise ScenarioError(f"faulty ids {sorted(self.faulty - ids)} are not processes")
        if len(self.faulty) > self.f:
            raise ScenarioError(f"|faulty| = {len(self.faulty)} exceeds f = {self.f}")
        if not set(self.behaviors) <= self.faulty:
            raise ScenarioError("behaviors may only be attached to faulty processes")
        for i, b in self.behaviors.items():
            if isinstance(b, LieAboutPd) and not b.fake_pd <= self.pd[i]:
                raise ScenarioError(
                    f"LieAboutPd for {i} may only understate its PD, got {sorted(b.fake_pd)}"
                )
        if self.explicit_slices is not None:
            for i, ss in self.explicit_slices.items():
                if i not in ids or ss.owner != i:
                    raise ScenarioError(f"slices for unknown or mismatched process {i}")

    @property
    def graph(self) -> KnowledgeGraph:
        return KnowledgeGraph(self.pd)

    @property
    def faults(self) -> FaultAssignment:
        return FaultAssignment(self.f, self.faulty)

    @property
    def processes(self) -> list[ProcessId]:
        return sorted(self.pd)

    @property
    def correct(self) -> frozenset[ProcessId]:
        return frozenset(self.pd) - self.faulty

    def behaviors_for_run(self) -> dict[ProcessId, Behavior]:
        """Faulty processes without an explicit behavior stay silent."""
        return {i: self.behaviors.get(i, Silent()) for i in sorted(self.faulty)}

    def sim_config(self, seed: int | None = None, budget: int | None = None) -> SimConfig:
        return SimConfig(
            seed=self.seed if seed is None else seed,
            gst=self.gst,
            budget=self.budget if budget is None else budget,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "f": self.f,
            "pd": {str(i): sorted(self.pd[i]) for i in self.processes},
            "faulty": sorted(self.faulty),
            "behaviors": {str(i): b.as_dict() for i, b in sorted(self.behaviors.items())},
            "slices": None
            if self.explicit_slices is None
            else {str(i): s.as_dict() for i, s in sorted(self.explicit_slices.items())},
            "seed": self.seed,
            "gst": self.gst,
            "budget": self.budget,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> Scenario:
        if not isinstance(data, Mapping):
            raise ScenarioError("scenario must be a JSON object")
        unknown = set(data) - set(KEYS)
        if unknown:
            raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
        for key in ("name", "f", "pd"):
            if key not in data:
                raise ScenarioError(f"scenario is missing {key!r}")
        try:
            slices = data.get("slices")
            return cls(
                name=str(data["name"]),
                f=int(data["f"]),
                pd={int(k): v for k, v in data["pd"].items()},
                faulty=frozenset(int(x) for x in data.get("faulty", [])),
                behaviors={
                    int(k): behavior_from_dict(v) for k, v in (data.get("behaviors") or {}).items()
                },
                explicit_slices=None
                if slices is None
                else {int(k): SliceSet.from_dict(int(k), v) for k, v in slices.items()},
                seed=int(data.get("seed", 0)),
                gst=int(data.get("gst", 0)),
                budget=int(data.get("budget", 500_000)),
            )
        except ScenarioError:
            raise
        except (TypeError, ValueError, KeyError, AttributeError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> Scenario:
        if not text.strip():
            raise ScenarioError("empty scenario document")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        return cls.loads(Path(path).read_text())


FIG1_PD = {
    1: [2, 5], 2: [4], 3: [5, 7], 4: [5, 6, 8],
    5: [6, 7], 6: [5, 7, 8], 7: [5, 6, 8], 8: [6, 7],
}
# slices of the correct processes in the worked FBQS example; 8 is faulty and declares none
FIG1_SLICES = {
    1: [[2, 5]], 2: [[4]], 3: [[5, 7]], 4: [[5, 6], [6, 8]],
    5: [[6, 7]], 6: [[5, 7], [7, 8]], 7: [[5, 6], [6, 8]],
}
FIG2_PD = {
    1: [2, 3, 4], 2: [1, 3, 4], 3: [1, 2, 4], 4: [1, 2, 3],
    5: [1, 6, 7], 6: [4, 5, 7], 7: [3, 5, 6],
}


def fig1() -> Scenario:
    return Scenario(
        name="fig1",
        f=1,
        pd=FIG1_PD,
        faulty=frozenset({8}),
        behaviors={8: Silent()},
        explicit_slices={i: SliceSet.explicit(i, s) for i, s in FIG1_SLICES.items()},
    )


def fig2() -> Scenario:
    return Scenario(name="fig2", f=1, pd=FIG2_PD)


BUILTINS = {"fig1": fig1, "fig2": fig2}


def builtin(name: str) -> Scenario:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise UnknownFigureError(f"unknown figure {name!r}, choose from {sorted(BUILTINS)}") from None


def resolve(ref: str) -> Scenario:
    """A built-in figure name or a path to a scenario file."""
    if ref in BUILTINS:
        return builtin(ref)
    path = Path(ref)
    if not path.exists():
        raise ScenarioError(f"no built-in scenario or file named {ref!r}")
    return Scenario.load(path)
