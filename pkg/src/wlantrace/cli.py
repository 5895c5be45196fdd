"""``trace``: command-line front end for every pipeline stage.

Precedence for every tunable is flag > config file > built-in default.
Each output file gets a sibling ``<name>.meta.json`` holding the config
hash, the master seed, the producing command and digests of its inputs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from . import config as config_mod
from .analysis import accumulated_week_matrix, data_span, weeks_covered
from .centrality import Measure, centrality, read_ranking, top_k, write_scores
from .config import ConfigError, RunConfig
from .contact import ContactGraph, GraphMode, build_graph, read_graph, write_graph
from .harness import (ScoreCache, budget_sweep, default_fracs,
                      monotone_violations, paper_strategies, run_table, turning_point)
from .seir import ensemble, write_metrics, write_trace
from .synth import CampusSpec, generate
from .trajectory import (DAY, Event, WalkTimeMatrix, build_trajectories, parse_window, read_trajectories,
                         restrict, write_trajectories)
from .wlan_log import (ApDirectory, FilterStats, ParseStats, parse_log_file, read_events,
                       validate_and_filter, write_events)

log = logging.getLogger("wlantrace")

META_SUFFIX = ".meta.json"
MODES = [m.value for m in GraphMode]
MEASURES = [m.value for m in Measure]


# ---------------------------------------------------------------------------
# provenance


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file() and not p.name.endswith(META_SUFFIX)):
            h.update(f.relative_to(path).as_posix().encode())
            h.update(_digest(f).encode())
    else:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


def stamp(target, cfg: RunConfig, command: str, inputs: dict | None = None, extra: dict | None = None) -> None:
    """Write ``<file>.meta.json`` next to ``target`` (or next to every file under it)."""
    target = Path(target)
    files = ([p for p in sorted(target.rglob("*")) if p.is_file() and not p.name.endswith(META_SUFFIX)]
             if target.is_dir() else [target])
    digests = {k: _digest(Path(v)) for k, v in sorted((inputs or {}).items()) if v is not None}
    for f in files:
        meta = {"command": command, "config_sha256": cfg.hash(), "seed": cfg.seed,
                "inputs": digests, "version": __version__}
        if extra:
            meta.update(extra)
        f.with_name(f.name + META_SUFFIX).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# shared stage helpers


def _walk_matrix(cfg: RunConfig) -> WalkTimeMatrix:
    if cfg.trajectory.walk:
        return WalkTimeMatrix.from_csv(cfg.trajectory.walk, default_walk=cfg.trajectory.default_walk)
    log.info("no walking-time matrix given, every building change costs %d s", cfg.trajectory.default_walk)
    return WalkTimeMatrix({}, default_walk=cfg.trajectory.default_walk)


def _ingest(cfg: RunConfig, log_path, out) -> tuple[ParseStats, FilterStats]:
    if not cfg.ingest.ap_directory:
        raise ValueError("an AP directory is required (--ap-dir or ingest.ap_directory)")
    directory = ApDirectory.from_csv(cfg.ingest.ap_directory)
    pstats, fstats = ParseStats(), FilterStats()
    entries = parse_log_file(log_path, cfg.ingest.ssid_filter or None, pstats)
    write_events(validate_and_filter(entries, directory, fstats), directory, out)
    if fstats.passed == 0:
        raise ValueError(f"no events passed validation ({fstats.failed_auth} failed auth, "
                         f"{fstats.unknown_ap} with unknown APs, {fstats.missing_ids} missing ids)")
    log.info("ingest: %d lines accepted, %d malformed, %d invalid, %d on filtered SSIDs; "
             "%d events kept, %d dropped by validation", pstats.accepted, pstats.malformed,
             pstats.invalid, pstats.ssid_filtered, fstats.passed, fstats.dropped)
    return pstats, fstats


def _build(cfg: RunConfig, events_path, window: str | None):
    t = cfg.trajectory
    win = parse_window(window, t.utc_offset) if window else None
    events = [Event(*e) for e in read_events(events_path)]
    return build_trajectories(events, _walk_matrix(cfg), t.session_timeout, t.max_terminal_stay,
                              win, t.utc_offset)


def _graph(cfg: RunConfig, trajs, mode, window: tuple[int, int] | None) -> ContactGraph:
    if window is not None:
        trajs = restrict(trajs, window[0], window[1], keep_empty=True)
    return build_graph(trajs, cfg.contact_config(), mode)


def _read_people(path) -> list[str]:
    """Person ids from a plain list (one per line) or a ranking CSV."""
    path = Path(path)
    text = path.read_text(encoding="utf-8").splitlines()
    if text and text[0].startswith("person_id,"):
        return read_ranking(path)
    return [line.strip() for line in text if line.strip() and line.strip() != "person_id"]


def _sweep_fracs(cfg: RunConfig) -> tuple[list[float], list[float]]:
    h = cfg.harness
    infected = [f for f in default_fracs(h.sweep_step, h.sweep_infected_max) if f > 0]
    quarantined = default_fracs(h.sweep_step, h.sweep_quarantine_max)
    return infected, quarantined


def _write_report(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_csv(out_dir / "report.csv")
    rows = [{"method": r.strategy.kind.value,
             "measure": r.strategy.measure.value if r.strategy.measure else None,
             "k": r.strategy.k, **r.result.to_dict()} for r in report.rows]
    deltas = {m.value: d for m, d in report.deltas().items()}
    payload = {"metadata": report.metadata, "rows": rows, "hybrid_minus_symc": deltas}
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_sweep(grid, cfg: RunConfig, out_dir: Path, measure: str) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    grid.to_csv(out_dir / "grid.csv")
    grid.stderr_csv(out_dir / "grid_stderr.csv")
    summary = {
        "measure": measure,
        "turning_point": turning_point(grid, cfg.harness.turning_threshold, cfg.harness.sweep_step),
        "turning_threshold": cfg.harness.turning_threshold,
        "monotone_violations": [list(v) for v in monotone_violations(grid)],
    }
    (out_dir / "turning_point.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cfg: RunConfig) -> int:
    cfg = cfg.with_overrides(**{"ingest.ap_directory": args.ap_dir, "ingest.ssid_filter": args.ssid})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pstats, fstats = _ingest(cfg, args.log, out)
    stamp(out, cfg, "ingest", {"log": args.log, "ap_directory": cfg.ingest.ap_directory},
          {"parse": pstats.as_dict(), "filter": fstats.as_dict()})
    return 0


def cmd_build(args, cfg: RunConfig) -> int:
    cfg = cfg.with_overrides(**{"trajectory.walk": args.walk})
    trajs = _build(cfg, args.events, args.window)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectories(trajs, out)
    stamp(out, cfg, "build", {"events": args.events, "walk": cfg.trajectory.walk},
          {"window": args.window, "people": len(trajs)})
    return 0


def cmd_graph(args, cfg: RunConfig) -> int:
    trajs = read_trajectories(args.trajectories)
    window = parse_window(args.window, cfg.trajectory.utc_offset) if args.window else None
    g = _graph(cfg, trajs, args.mode, window)
    out = write_graph(g, args.out)
    stamp(out, cfg, "graph", {"trajectories": args.trajectories}, {"mode": args.mode, "window": args.window})
    log.info("graph: %r", g)
    return 0


def cmd_rank(args, cfg: RunConfig) -> int:
    g = read_graph(args.graph)
    scores = centrality(g, args.measure)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scores(scores, out)
    produced = [out, out.with_suffix(".summary.json")]
    if args.k is not None:
        top = out.with_suffix(".top.txt")
        top.write_text("".join(f"{v}\n" for v in top_k(scores, args.k)))
        produced.append(top)
    for p in produced:
        stamp(p, cfg, "rank", {"graph": args.graph}, {"measure": args.measure, "k": args.k})
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    g = read_graph(args.graph)
    quarantine = _read_people(args.quarantine) if args.quarantine else []
    params = cfg.seir_params(g.n)
    result = ensemble(g, params, quarantine)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(result.mean_counts, out / "mean_trace.csv")
    write_metrics(result, out / "metrics.json")
    stamp(out, cfg, "simulate", {"graph": args.graph, "quarantine": args.quarantine},
          {"quarantined": len(quarantine), "initial_infected": params.initial_infected})
    return 0


def cmd_experiment(args, cfg: RunConfig) -> int:
    cfg = cfg.with_overrides(**{"harness.k": args.k})
    sym, hyb = read_graph(args.sym), read_graph(args.hybrid)
    measures = args.measures.split(",") if args.measures else cfg.harness.measures
    k = cfg.quarantine_k(hyb.n)
    report = run_table(paper_strategies(k, [Measure(m) for m in measures]), sym, hyb,
                       cfg.seir_params(hyb.n), threads=cfg.threads,
                       metadata={"config_sha256": cfg.hash(), "k": k, "window": args.label})
    out = Path(args.out)
    _write_report(report, out)
    stamp(out, cfg, "experiment", {"sym": args.sym, "hybrid": args.hybrid})
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    cfg = cfg.with_overrides(**{"harness.sweep_measure": args.measure})
    hyb = read_graph(args.hybrid)
    infected, quarantined = _sweep_fracs(cfg)
    grid = budget_sweep(hyb, cfg.harness.sweep_measure, infected, quarantined,
                        cfg.seir_params(hyb.n), threads=cfg.threads)
    out = Path(args.out)
    summary = _write_sweep(grid, cfg, out, cfg.harness.sweep_measure)
    stamp(out, cfg, "sweep", {"hybrid": args.hybrid})
    log.info("sweep: turning point %s", summary["turning_point"])
    return 0


def cmd_stability(args, cfg: RunConfig) -> int:
    cfg = cfg.with_overrides(**{"analysis.weeks": args.weeks, "analysis.measure": args.measure,
                                "analysis.k": args.k, "analysis.p": args.p})
    trajs = read_trajectories(args.trajectories)
    a = cfg.analysis
    weeks = a.weeks if a.weeks is not None else weeks_covered(trajs, cfg.trajectory.utc_offset)
    matrix = accumulated_week_matrix(trajs, weeks, a.measure, a.k, cfg.contact_config(), a.p,
                                     cfg.trajectory.utc_offset, cfg.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    matrix.to_csv(out)
    stamp(out, cfg, "stability", {"trajectories": args.trajectories}, {"weeks": weeks})
    return 0


def _load_spec(path, cfg: RunConfig) -> CampusSpec:
    if path is None:
        return cfg.synth
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"campus spec {path} must be a mapping")
    if "synth" in data:
        return config_mod.from_dict(data).synth
    return config_mod.from_dict({"synth": data}, log_defaults=False).synth


def cmd_synth(args, cfg: RunConfig) -> int:
    spec = _load_spec(args.spec, cfg)
    if args.synth_seed is not None:
        spec = CampusSpec.from_dict({**spec.__dict__, "seed": args.synth_seed})
    cfg = cfg.with_overrides(**{f"synth.{k}": v for k, v in spec.__dict__.items()})
    log_path = Path(args.out)
    manifest = Path(args.manifest) if args.manifest else log_path.with_name(log_path.stem + ".manifest.json")
    out = generate(spec, log_path, manifest)
    for p in (out.log, out.manifest, out.ap_directory, out.walk):
        stamp(p, cfg, "synth", extra={"synth_seed": spec.seed})
    log.info("synth: %d log lines, %d planted spreaders", len(out.campus.lines), spec.planted_spreaders)
    return 0


# ---------------------------------------------------------------------------
# pipeline


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class _Run:
    cfg: RunConfig
    out: Path
    log_path: Path
    trajs: dict = field(default_factory=dict)
    windows: dict = field(default_factory=dict)
    graphs: dict = field(default_factory=dict)
    scores: ScoreCache = field(default_factory=ScoreCache)


def _resolve_inputs(args, cfg: RunConfig) -> RunConfig:
    log_path = Path(args.log)
    if not log_path.is_file():
        raise FileNotFoundError(f"input log {log_path} does not exist")
    ap_dir = args.ap_dir or cfg.ingest.ap_directory
    if ap_dir is None and (log_path.parent / "ap_directory.csv").is_file():
        ap_dir = str(log_path.parent / "ap_directory.csv")
    walk = args.walk or cfg.trajectory.walk
    if walk is None and (log_path.parent / "walk.csv").is_file():
        walk = str(log_path.parent / "walk.csv")
    return cfg.with_overrides(**{"ingest.ap_directory": ap_dir, "trajectory.walk": walk})


def _stage_ingest(run: _Run):
    events = run.out / "events.csv"
    pstats, fstats = _ingest(run.cfg, run.log_path, events)
    stamp(events, run.cfg, "pipeline:ingest", {"log": run.log_path, "ap_directory": run.cfg.ingest.ap_directory},
          {"parse": pstats.as_dict(), "filter": fstats.as_dict()})


def _stage_build(run: _Run):
    path = run.out / "trajectories.csv"
    run.trajs = _build(run.cfg, run.out / "events.csv", None)
    if not run.trajs:
        raise ValueError("no trajectories survived ingest")
    write_trajectories(run.trajs, path)
    stamp(path, run.cfg, "pipeline:build", {"events": run.out / "events.csv", "walk": run.cfg.trajectory.walk})


def _stage_graph(run: _Run):
    p, off = run.cfg.pipeline, run.cfg.trajectory.utc_offset
    first, _ = data_span(run.trajs, off)
    run.windows = {
        "daily": parse_window(p.window, off) if p.window else (first, first + DAY),
        "weekly": parse_window(p.weekly_window, off) if p.weekly_window else (first, first + 7 * DAY),
    }
    for scope, window in run.windows.items():
        for mode in MODES:
            g = _graph(run.cfg, run.trajs, mode, window)
            run.graphs[(scope, mode)] = g
            d = write_graph(g, run.out / "graphs" / scope / mode)
            stamp(d, run.cfg, "pipeline:graph", {"trajectories": run.out / "trajectories.csv"},
                  {"mode": mode, "window": list(window)})
            log.info("graph %s/%s: %r", scope, mode, g)


def _stage_rank(run: _Run):
    for (scope, mode), g in run.graphs.items():
        for m in MEASURES:
            path = run.out / "rankings" / scope / mode / f"{m}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_scores(run.scores.get(g, m), path)
            for f in (path, path.with_suffix(".summary.json")):
                stamp(f, run.cfg, "pipeline:rank", {"graph": run.out / "graphs" / scope / mode},
                      {"measure": m})


def _stage_experiment(run: _Run):
    cfg = run.cfg
    tables = {"daily": [Measure(m) for m in cfg.harness.measures], "weekly": [Measure.BETWEENNESS]}
    for scope, measures in tables.items():
        sym, hyb = run.graphs[(scope, "sym")], run.graphs[(scope, "hybrid")]
        k = cfg.quarantine_k(hyb.n)
        report = run_table(paper_strategies(k, measures), sym, hyb, cfg.seir_params(hyb.n),
                           threads=cfg.threads, scores=run.scores,
                           metadata={"config_sha256": cfg.hash(), "k": k,
                                     "window": list(run.windows[scope]), "scope": scope})
        d = run.out / "experiment" / scope
        _write_report(report, d)
        stamp(d, cfg, "pipeline:experiment",
              {"sym": run.out / "graphs" / scope / "sym", "hybrid": run.out / "graphs" / scope / "hybrid"})


def _stage_sweep(run: _Run):
    cfg = run.cfg
    hyb = run.graphs[("daily", "hybrid")]
    infected, quarantined = _sweep_fracs(cfg)
    grid = budget_sweep(hyb, cfg.harness.sweep_measure, infected, quarantined,
                        cfg.seir_params(hyb.n), scores=run.scores, threads=cfg.threads)
    d = run.out / "sweep"
    summary = _write_sweep(grid, cfg, d, cfg.harness.sweep_measure)
    stamp(d, cfg, "pipeline:sweep", {"hybrid": run.out / "graphs" / "daily" / "hybrid"})
    log.info("sweep: turning point %s", summary["turning_point"])


def _stage_stability(run: _Run):
    cfg, a = run.cfg, run.cfg.analysis
    weeks = a.weeks if a.weeks is not None else weeks_covered(run.trajs, cfg.trajectory.utc_offset)
    matrix = accumulated_week_matrix(run.trajs, weeks, a.measure, a.k, cfg.contact_config(), a.p,
                                     cfg.trajectory.utc_offset, cfg.threads)
    path = run.out / "stability" / "matrix.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix.to_csv(path)
    stamp(path, cfg, "pipeline:stability", {"trajectories": run.out / "trajectories.csv"}, {"weeks": weeks})


STAGES = [
    ("ingest", _stage_ingest),
    ("build", _stage_build),
    ("graph", _stage_graph),
    ("rank", _stage_rank),
    ("experiment", _stage_experiment),
    ("sweep", _stage_sweep),
    ("stability", _stage_stability),
]


def run_pipeline(cfg: RunConfig, log_path, out_dir) -> Path:
    """Run every stage in order; raises :class:`StageError` naming the failed stage."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.to_yaml())
    stamp(out / "config.yaml", cfg, "pipeline", {"log": log_path})
    run = _Run(cfg, out, Path(log_path))
    for name, stage in STAGES:
        log.info("pipeline: %s", name)
        try:
            stage(run)
        except Exception as e:  # noqa: BLE001 - any failure is reported with its stage
            raise StageError(name, e) from e
    return out


def cmd_pipeline(args, cfg: RunConfig) -> int:
    try:
        cfg = _resolve_inputs(args, cfg)
    except (OSError, ConfigError) as e:
        raise StageError("setup", e) from e
    run_pipeline(cfg, args.log, args.out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=d, help="master seed (overrides config)")
    p.add_argument("--threads", type=int, default=d, help="worker threads (overrides config)")
    p.add_argument("--out", default=d, help="output file or directory")
    p.add_argument("--log-level", default=argparse.SUPPRESS if suppress else "INFO",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trace", description="WLAN-log contact tracing and superspreader analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "parse and validate a raw WLAN log")
    p.add_argument("--log", required=True)
    p.add_argument("--ap-dir")
    p.add_argument("--ssid", action="append", help="keep only these SSIDs (repeatable)")

    p = add("build", cmd_build, "build trajectories from ingested events")
    p.add_argument("--events", required=True)
    p.add_argument("--walk")
    p.add_argument("--window", help="YYYY-MM-DD or YYYY-MM-DD/YYYY-MM-DD")

    p = add("graph", cmd_graph, "build a contact graph from trajectories")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--mode", choices=MODES, default="hybrid")
    p.add_argument("--window")

    p = add("rank", cmd_rank, "score and rank vertices of a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--measure", choices=MEASURES, required=True)
    p.add_argument("--k", type=int)

    p = add("simulate", cmd_simulate, "SEIR ensemble on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--quarantine", help="person list (one id per line) or ranking CSV")
    p.add_argument("--params", dest="config_alias", help="config file with a [seir] section")

    p = add("experiment", cmd_experiment, "quarantine strategy table")
    p.add_argument("--sym", required=True)
    p.add_argument("--hybrid", required=True)
    p.add_argument("--params", dest="config_alias")
    p.add_argument("--k", type=int)
    p.add_argument("--measures", help="comma-separated subset of degree,closeness,betweenness")
    p.add_argument("--label", default=None, help="window label stored in the report metadata")

    p = add("sweep", cmd_sweep, "initial-infected x quarantine budget sweep")
    p.add_argument("--hybrid", required=True)
    p.add_argument("--measure", choices=MEASURES)

    p = add("stability", cmd_stability, "RBO similarity of accumulated-week rankings")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--weeks", type=int)
    p.add_argument("--measure", choices=MEASURES)
    p.add_argument("--k", type=int)
    p.add_argument("--p", type=float)

    p = add("synth", cmd_synth, "generate a synthetic campus log")
    p.add_argument("--spec", help="YAML campus spec (bare fields or a full config)")
    p.add_argument("--manifest")
    p.add_argument("--synth-seed", type=int, help="generator seed (overrides the spec)")

    p = add("pipeline", cmd_pipeline, "run ingest through stability in one go")
    p.add_argument("--log", required=True)
    p.add_argument("--ap-dir")
    p.add_argument("--walk")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=args.log_level,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if args.out is None:
        parser.error(f"{args.command}: --out is required")
    try:
        cfg = config_mod.load(getattr(args, "config_alias", None) or args.config)
        cfg = cfg.with_overrides(seed=args.seed, threads=args.threads)
        return args.func(args, cfg)
    except StageError as e:
        print(f"trace {args.command}: {e}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError, KeyError) as e:
        print(f"trace {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
