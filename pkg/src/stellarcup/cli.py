"""Command-line front end.

Exit codes: 0 when the checked property holds or the reproduction matches,
1 when it fails, 2 on usage or parse errors.  ``--json`` switches the output
to one JSON record per line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis
from .errors import ScenarioError, StellarCupError, UnknownFigureError
from .fbqs import (
    is_consensus_cluster,
    is_intertwined,
    is_quorum,
    maximal_consensus_clusters,
    quorums_of,
    with_faulty_defaults,
)
from .graph_core import (
    check_k_osr,
    generate_k_osr,
    is_byzantine_safe,
    sink_components,
)
from .scenario import Scenario, builtin, resolve
from .protocols import run_sink_detection
from .slice_builder import local_slices, sd_slices

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class Report:
    """Ordered list of flat records; ``emit`` and ``parse`` are inverse."""

    records: list[dict] = field(default_factory=list)

    def add(self, kind: str, **data) -> None:
        self.records.append({"record": kind, **data})

    def emit(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def parse(cls, text: str) -> Report:
        return cls([json.loads(line) for line in text.splitlines() if line.strip()])

    def human(self) -> str:
        lines = []
        for r in self.records:
            body = ", ".join(f"{k}={_fmt(v)}" for k, v in r.items() if k != "record")
            lines.append(f"{r['record']}: {body}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, list):
        return "{" + ", ".join(_fmt(x) for x in v) + "}" if all(
            not isinstance(x, list) for x in v
        ) else "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _ids(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _seed_range(s: str) -> list[int]:
    a, _, b = s.partition("..")
    lo, hi = int(a), int(b or a)
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {s}")
    return list(range(lo, hi + 1))


# -- commands ----------------------------------------------------------------


def cmd_check_osr(args) -> tuple[Report, int]:
    sc = resolve(args.scenario)
    g = sc.graph
    osr = check_k_osr(g, args.k)
    rep = Report()
    rep.add("osr", scenario=sc.name, **osr.as_dict())
    rep.add("byzantine-safe", faulty=sorted(sc.faulty), f=sc.f,
            holds=is_byzantine_safe(g, sc.faults))
    return rep, EXIT_OK if osr.holds else EXIT_FAIL


def cmd_sink(args) -> tuple[Report, int]:
    sc = resolve(args.scenario)
    out = run_sink_detection(
        sc.graph, sc.faults, sc.behaviors_for_run(), sc.sim_config(args.seed, args.budget)
    )
    rep = Report()
    sinks = sink_components(sc.graph)
    rep.add("ground-truth", sinks=[sorted(s) for s in sinks])
    for p in sc.processes:
        r = out.results[p]
        rep.add("sink-result", process=p, faulty=p in sc.faulty,
                in_sink=None if r is None else r.in_sink,
                view=None if r is None else sorted(r.view))
    bad = analysis.def8_violations(sc.graph, sc.faults, out.results) if len(sinks) == 1 else [
        (None, "graph does not have exactly one sink")]
    rep.add("verdict", contract_holds=not bad, violations=[[p, why] for p, why in bad])
    return rep, EXIT_OK if not bad else EXIT_FAIL


def cmd_local_slices(args) -> tuple[Report, int]:
    sc = resolve(args.scenario)
    f = sc.f if args.f is None else args.f
    rep = Report()
    ok = True
    for p in sc.processes:
        ss = local_slices(p, sc.pd[p], f)
        tol = ss.tolerated_faults()
        avoids_f = tol >= f
        ok = ok and (avoids_f or p in sc.faulty)
        rep.add("local-slices", process=p, base=sorted(ss.base), size=ss.size,
                tolerated_faults=tol, avoids_f_faults=avoids_f)
    return rep, EXIT_OK if ok else EXIT_FAIL


def cmd_sd_slices(args) -> tuple[Report, int]:
    sc = resolve(args.scenario)
    f = sc.f if args.f is None else args.f
    results = analysis.ground_truth_results(sc.graph)
    rep = Report()
    for p in sc.processes:
        r = results[p]
        ss = sd_slices(p, r, f)
        rep.add("sd-slices", process=p, in_sink=r.in_sink, base=sorted(ss.base), size=ss.size)
    return rep, EXIT_OK


def _slice_system(sc: Scenario, source: str):
    if source == "explicit":
        if sc.explicit_slices is None:
            raise ScenarioError("scenario declares no slices")
        return dict(sc.explicit_slices)
    if source == "local":
        return {p: local_slices(p, sc.pd[p], sc.f) for p in sc.processes if p not in sc.faulty}
    results = analysis.ground_truth_results(sc.graph)
    return analysis.sd_slice_system(results, sc.f, skip=sc.faulty)


def cmd_verify_cluster(args) -> tuple[Report, int]:
    sc = resolve(args.scenario)
    source = args.slices or ("explicit" if sc.explicit_slices else "sd")
    slices = _slice_system(sc, source)
    rep = Report()
    universe = sc.processes
    if args.candidate:
        cr = is_consensus_cluster(_ids(args.candidate), slices, universe, sc.faults)
        rep.add("cluster", slices=source, **cr.as_dict())
        return rep, EXIT_OK if cr.is_cluster else EXIT_FAIL
    clusters = maximal_consensus_clusters(slices, universe, sc.faults)
    single = clusters == [sc.correct]
    rep.add("maximal-clusters", slices=source, clusters=[sorted(c) for c in clusters])
    rep.add("verdict", single_maximal_cluster_is_W=single, correct=sorted(sc.correct))
    return rep, EXIT_OK if single else EXIT_FAIL


def cmd_simulate(args) -> tuple[Report, int]:
    sc = resolve(args.scenario)
    seeds = args.seeds or [sc.seed if args.seed is None else args.seed]
    rep = Report()
    all_ok = True
    for seed in seeds:
        out = analysis.simulate_scenario(sc, seed=seed, budget=args.budget)
        if out.run is not None:
            for p in sc.processes:
                r = out.run.results[p]
                ss = out.slices.get(p)
                rep.add("process", seed=seed, process=p, faulty=p in sc.faulty,
                        in_sink=None if r is None else r.in_sink,
                        view=None if r is None else sorted(r.view),
                        slice_size=None if ss is None or not ss.is_threshold else ss.size)
            if args.trace:
                path = Path(args.trace)
                if len(seeds) > 1:
                    path = path.with_name(f"{path.stem}.seed{seed}{path.suffix}")
                path.write_text(out.run.trace.to_jsonl())
        rep.add("verdict", seed=seed, single_maximal_cluster_is_W=out.verdict,
                liveness_failure=out.liveness_failure,
                clusters=[sorted(c) for c in out.clusters], reason=out.reason)
        all_ok = all_ok and out.verdict
    return rep, EXIT_OK if all_ok else EXIT_FAIL


def repro_fig2() -> tuple[Report, bool]:
    sc = builtin("fig2")
    slices = {p: local_slices(p, sc.pd[p], sc.f) for p in sc.processes}
    q1, q2 = frozenset({5, 6, 7}), frozenset({1, 2, 3, 4})
    rep = Report()
    for p in sc.processes:
        rep.add("local-slices", process=p, base=sorted(slices[p].base), size=slices[p].size)
    ok1, ok2 = is_quorum(q1, slices), is_quorum(q2, slices)
    in1 = q1 in quorums_of(5, slices, sc.processes)
    in2 = q2 in quorums_of(1, slices, sc.processes)
    inter = q1 & q2
    rep.add("quorum", members=sorted(q1), is_quorum=ok1, quorum_of=5, listed=in1)
    rep.add("quorum", members=sorted(q2), is_quorum=ok2, quorum_of=1, listed=in2)
    res = is_intertwined({1, 5}, slices, sc.processes, sc.faults)
    violated = ok1 and ok2 and in1 and in2 and len(inter) <= sc.f and not res.holds
    rep.add("intersection", size=len(inter), f=sc.f,
            first_violation=None if res.holds else [sorted(q) for q in res.quorums])
    rep.add("verdict", result="quorum intersection violated" if violated else "no violation")
    return rep, violated


def repro_fig1() -> tuple[Report, bool]:
    sc = builtin("fig1")
    slices = sc.explicit_slices
    universe, fa = sc.processes, sc.faults
    rep = Report()
    checks = {}
    for cand in ({5, 6, 7}, set(range(1, 8))):
        cr = is_consensus_cluster(cand, slices, universe, fa)
        checks[frozenset(cand)] = cr.is_cluster
        rep.add("cluster", **cr.as_dict())
    q3 = quorums_of(3, with_faulty_defaults(slices, fa), universe, minimal_only=True)
    rep.add("quorums", process=3, minimal=[sorted(q) for q in q3])
    clusters = maximal_consensus_clusters(slices, universe, fa)
    rep.add("maximal-clusters", clusters=[sorted(c) for c in clusters])
    ok = all(checks.values()) and clusters == [frozenset(range(1, 8))]
    rep.add("verdict", result="single maximal cluster {1..7}" if ok else "mismatch")
    return rep, ok


REPROS = {"fig1": repro_fig1, "fig2": repro_fig2}


def cmd_repro(args) -> tuple[Report, int]:
    if args.figure not in REPROS:
        raise UnknownFigureError(f"unknown figure {args.figure!r}, choose from {sorted(REPROS)}")
    rep, ok = REPROS[args.figure]()
    return rep, EXIT_OK if ok else EXIT_FAIL


def cmd_gen(args) -> tuple[Report, int]:
    g = generate_k_osr(args.n_sink, args.n_nonsink, args.k, args.seed)
    faulty = _ids(args.faulty) if args.faulty else []
    sc = Scenario(
        name=f"gen-{args.n_sink}-{args.n_nonsink}-{args.k}-{args.seed}",
        f=args.f, pd=g.as_dict(), faulty=frozenset(faulty), seed=args.seed,
    )
    if args.out:
        Path(args.out).write_text(sc.dumps())
    rep = Report()
    rep.add("scenario", **sc.to_dict())
    return rep, EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stellarcup", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--json", action="store_true", help="one JSON record per line")
        return sp

    sp = command("check-osr", cmd_check_osr, "check k-OSR and Byzantine safety")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--k", type=int, required=True)

    sp = command("sink", cmd_sink, "simulate the sink detector")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--budget", type=int)

    sp = command("local-slices", cmd_local_slices, "PD-only slices per process")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--f", type=int)

    sp = command("sd-slices", cmd_sd_slices, "sink-detector slices from the true sink")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--f", type=int)

    sp = command("verify-cluster", cmd_verify_cluster, "consensus-cluster verification")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--slices", choices=("explicit", "local", "sd"))
    sp.add_argument("--candidate", help="comma-separated ids to check as one cluster")

    sp = command("simulate", cmd_simulate, "get_sink -> slices -> cluster verdict")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--seeds", type=_seed_range, help="inclusive range a..b")
    sp.add_argument("--budget", type=int)
    sp.add_argument("--trace", help="write the event trace (JSON lines) here")

    sp = command("repro", cmd_repro, "reproduce a worked figure")
    sp.add_argument("figure")

    sp = command("gen", cmd_gen, "generate a k-OSR scenario")
    sp.add_argument("--n-sink", type=int, required=True)
    sp.add_argument("--n-nonsink", type=int, default=0)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--f", type=int, default=0)
    sp.add_argument("--faulty", help="comma-separated faulty ids")
    sp.add_argument("--out")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rep, code = args.fn(args)
    except (ScenarioError, UnknownFigureError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except StellarCupError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(rep.emit() if args.json else rep.human())
    return code


if __name__ == "__main__":
    sys.exit(main())
