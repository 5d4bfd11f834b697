"""Command-line surface: simulate, detect, align, featurize, train, evaluate, report.

Exit codes: 0 success, 1 pipeline error, 2 usage or I/O error. Every command
is deterministic given its inputs, config, and seed. A JSON config file can
supply any long-form option; explicit flags win over the config file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import report as report_mod
from .align import AlignedSegment, align_site
from .evaluate import evaluate_site
from .features import (DEFAULT_DIMS, feature_names, featurize, fit_pca_model,
                       PcaModel)
from .ingest import LogParseError, MissingSignalError, densify, parse_log
from .model.forest import ForestParams, save_model, train_forest
from .signals import COLUMNS, REQUIRED_FOR_DETECTION
from .simgen import FleetConfig, InfeasibleRouteError, gen_fleet, write_log
from .turndetect import (RawSegment, cluster_turn_sites, detect_turns,
                         extract_after_segment, extract_segment,
                         sites_from_json, sites_to_json)

USAGE_ERROR = 2
PIPELINE_ERROR = 1


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    """Defaults for pipeline commands; any field may come from --config."""

    input: str | None = None
    sites: str | None = None
    out: str | None = None
    drivers: int = 2
    seed: int = 0
    reps: int = 10
    threads: int = 1
    top: int = 12
    trees: int = 200
    features_per_split: int | None = None
    max_depth: int | None = None
    min_leaf: int = 1
    dims: int = DEFAULT_DIMS
    keep: str = "latest"
    straightaway: bool = False
    gap_m: float = 60.0

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    def merged(self, args: argparse.Namespace) -> "RunConfig":
        """Apply explicitly passed flags on top of this config."""
        updates = {}
        for f in fields(self):
            value = getattr(args, f.name, None)
            if value is not None:
                updates[f.name] = value
        merged = RunConfig(**{**asdict(self), **updates})
        return merged


def _forest_params(cfg: RunConfig) -> ForestParams:
    return ForestParams(n_trees=cfg.trees,
                        features_per_split=cfg.features_per_split,
                        max_depth=cfg.max_depth,
                        min_samples_leaf=cfg.min_leaf,
                        seed=cfg.seed)


def _load_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return base.merged(args)


# -- commands ----------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg = FleetConfig.from_file(args.fleet_config)
        if args.seed is not None:
            cfg.seed = args.seed
        if cfg.drivers < 1 or cfg.sessions_per_driver < 1 or cfg.noise < 0:
            raise ValueError("drivers and sessions must be >= 1, noise >= 0")
        out = args.out or "fleet.jsonl"
        _, sessions = gen_fleet(cfg.drivers, cfg.separation, cfg.sessions_per_driver,
                                cfg.route, cfg.seed, noise=cfg.noise, axes=cfg.axes,
                                threads=args.threads or 1)
    except (ValueError, KeyError, InfeasibleRouteError) as exc:
        raise UsageError(f"invalid fleet config: {exc}") from exc
    write_log(sessions, out)
    n_events = sum(len(s) for s in sessions)
    print(f"wrote {n_events} events from {len(sessions)} sessions to {out}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.input:
        raise ValueError("detect needs --input")
    sessions = parse_log(cfg.input)
    events = []
    for session in sessions:
        trace = densify(session, signals=REQUIRED_FOR_DETECTION)
        events.extend(detect_turns(trace))
    sites = cluster_turn_sites(events)[:cfg.top]
    payload = sites_to_json(sites)
    out = cfg.out or "sites.json"
    Path(out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"{'Site':>5}  {'Lat':>11}  {'Lon':>11}  {'Count':>5}")
    for site in sites:
        print(f"{site.site_id:>5}  {site.lat:>11.6f}  {site.lon:>11.6f}  {site.count:>5}")
    print(f"wrote {len(sites)} sites to {out}")
    return 0


def _collect_segments(cfg: RunConfig) -> dict[int, list[RawSegment]]:
    sessions = parse_log(cfg.input)
    sites = sites_from_json(json.loads(Path(cfg.sites).read_text()))
    per_site: dict[int, list[RawSegment]] = {s.site_id: [] for s in sites}
    for session in sessions:
        trace = densify(session)
        for site in sites:
            if cfg.straightaway:
                seg = extract_after_segment(trace, site, gap_m=cfg.gap_m)
            else:
                seg = extract_segment(trace, site)
            if seg is not None and seg.n >= 2:
                per_site[site.site_id].append(seg)
    return per_site


def cmd_align(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.input or not cfg.sites:
        raise ValueError("align needs --input and --sites")
    out = cfg.out or "aligned.csv"
    per_site = _collect_segments(cfg)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site", "driver", "session", "row", "lat", "lon",
                         *COLUMNS])
        n_segments = 0
        for site_id, segments in sorted(per_site.items()):
            if len(segments) < 1:
                continue
            _, aligned = align_site(segments)
            for seg in aligned:
                n_segments += 1
                for row in range(seg.k):
                    writer.writerow([site_id, seg.driver_id, seg.session_id, row,
                                     repr(float(seg.locations[row, 0])),
                                     repr(float(seg.locations[row, 1])),
                                     *[repr(float(v)) for v in seg.matrix[row]]])
    print(f"wrote {n_segments} aligned segments to {out}")
    return 0


def read_aligned_csv(path: str | Path) -> dict[int, list[AlignedSegment]]:
    """Load the aligned-tensor CSV written by the align command."""
    rows_by_key: dict[tuple[int, str, str], list[list[str]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["site", "driver", "session", "row", "lat", "lon", *COLUMNS]
        if header != expected:
            raise ValueError("aligned CSV header does not match the expected layout")
        for row in reader:
            key = (int(row[0]), row[1], row[2])
            rows_by_key.setdefault(key, []).append(row)
    per_site: dict[int, list[AlignedSegment]] = {}
    for (site_id, driver, session), rows in rows_by_key.items():
        rows.sort(key=lambda r: int(r[3]))
        locations = np.array([[float(r[4]), float(r[5])] for r in rows])
        matrix = np.array([[float(v) for v in r[6:]] for r in rows])
        per_site.setdefault(site_id, []).append(AlignedSegment(
            site_id=site_id, driver_id=driver, session_id=session,
            matrix=matrix, locations=locations, session_start=0.0))
    for segments in per_site.values():
        segments.sort(key=lambda s: s.session_id)
    return per_site


def cmd_featurize(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.input:
        raise ValueError("featurize needs --input (an aligned CSV)")
    out = cfg.out or "features.csv"
    per_site = read_aligned_csv(cfg.input)
    names = feature_names(cfg.dims)
    pca_models = {}
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site", "driver", "session", *names])
        for site_id, segments in sorted(per_site.items()):
            # exploratory export: PCA on everything given; the evaluate
            # command refits per fold instead
            pca = fit_pca_model(segments, dims=cfg.dims)
            pca_models[site_id] = pca
            for seg in segments:
                vec = featurize(seg, pca)
                writer.writerow([site_id, seg.driver_id, seg.session_id,
                                 *[repr(float(v)) for v in vec.values]])
    if args.pca_out:
        payload = {str(site): pca.to_dict() for site, pca in pca_models.items()}
        Path(args.pca_out).write_text(json.dumps(payload, sort_keys=True))
    print(f"wrote features for {sum(len(v) for v in per_site.values())} "
          f"segments to {out}")
    return 0


def read_features_csv(path: str | Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    sites = sorted({int(r[0]) for r in rows})
    return header, rows, sites


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.input:
        raise ValueError("train needs --input (a features CSV)")
    out = cfg.out or "model.json"
    header, rows, sites = read_features_csv(cfg.input)
    if args.site is not None:
        rows = [r for r in rows if int(r[0]) == args.site]
    elif len(sites) > 1:
        raise ValueError(f"features cover sites {sites}; pick one with --site")
    if not rows:
        raise ValueError("no feature rows to train on")
    x = np.array([[float(v) for v in r[3:]] for r in rows])
    y = [r[1] for r in rows]
    model = train_forest(x, y, _forest_params(cfg), threads=cfg.threads)
    if args.pca:
        payload = json.loads(Path(args.pca).read_text())
        site = str(rows[0][0])
        if site in payload:
            model.pca = PcaModel.from_dict(payload[site])
    save_model(model, out)
    print(f"trained {cfg.trees} trees on {len(rows)} sessions; model at {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.input or not cfg.sites:
        raise ValueError("evaluate needs --input and --sites")
    out_dir = Path(cfg.out or "report")
    out_dir.mkdir(parents=True, exist_ok=True)
    per_site = _collect_segments(cfg)

    reports = []
    skipped = []
    for site_id, segments in sorted(per_site.items()):
        drivers = {s.driver_id for s in segments}
        if len(drivers) < cfg.drivers:
            reason = (f"{len(drivers)} drivers with segments, "
                      f"need {cfg.drivers}")
            print(f"warning: site {site_id} skipped ({reason})", file=sys.stderr)
            skipped.append({"site": site_id, "reason": reason})
            continue
        _, aligned = align_site(segments)
        rep = evaluate_site(aligned, cfg.drivers, params=_forest_params(cfg),
                            seed=cfg.seed, reps=cfg.reps, dims=cfg.dims,
                            keep=cfg.keep, threads=cfg.threads)
        rep_dict = rep.to_dict()
        reports.append(rep_dict)
        site_path = out_dir / f"site_{site_id}_report.json"
        site_path.write_text(json.dumps(rep_dict, sort_keys=True,
                                        separators=(",", ":")))

    aggregate = {"reports": reports, "skipped": skipped,
                 "config": {"drivers": cfg.drivers, "seed": cfg.seed,
                            "reps": cfg.reps, "trees": cfg.trees,
                            "straightaway": cfg.straightaway}}
    (out_dir / "report.json").write_text(
        json.dumps(aggregate, sort_keys=True, separators=(",", ":")))
    table = report_mod.summary_table(reports, skipped)
    (out_dir / "summary.txt").write_text(table)
    print(table, end="")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.input:
        raise ValueError("report needs --input (an evaluate output dir or report.json)")
    src = Path(cfg.input)
    if src.is_dir():
        src = src / "report.json"
    aggregate = json.loads(src.read_text())
    out_dir = Path(cfg.out or (src.parent / "rendered"))
    written = report_mod.render_report_files(aggregate["reports"], out_dir,
                                             aggregate.get("skipped"))
    print(report_mod.summary_table(aggregate["reports"],
                                   aggregate.get("skipped")), end="")
    for path in written:
        print(f"wrote {path}")
    return 0


# -- argument plumbing --------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, *names: str) -> None:
    if "input" in names:
        parser.add_argument("--input", help="input file path")
    if "sites" in names:
        parser.add_argument("--sites", help="sites JSON from the detect command")
    if "out" in names:
        parser.add_argument("--out", help="output path")
    if "seed" in names:
        parser.add_argument("--seed", type=int)
    if "threads" in names:
        parser.add_argument("--threads", type=int)
    if "config" in names:
        parser.add_argument("--config", help="JSON run-config file; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turnid",
        description="Driver identification from sensor traces at recurring turns")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic fleet log")
    p.add_argument("--fleet-config", required=True, help="fleet JSON config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="detect turns and rank recurring sites")
    _add_common(p, "input", "out", "config", "seed", "threads")
    p.add_argument("--top", type=int, help="keep at most this many sites")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("align", help="cut and align per-site segments")
    _add_common(p, "input", "sites", "out", "config", "seed", "threads")
    p.add_argument("--straightaway", action="store_true", default=None,
                   help="use the post-turn straightaway window instead")
    p.add_argument("--gap-m", dest="gap_m", type=float,
                   help="straightaway start, meters past the site exit")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("featurize", help="feature CSV from an aligned CSV")
    _add_common(p, "input", "out", "config")
    p.add_argument("--dims", type=int)
    p.add_argument("--pca-out", dest="pca_out", help="write per-site PCA JSON here")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a forest from a features CSV")
    _add_common(p, "input", "out", "config", "seed", "threads")
    p.add_argument("--site", type=int, help="site to train on")
    p.add_argument("--pca", help="PCA JSON from featurize to embed in the model")
    p.add_argument("--trees", type=int)
    p.add_argument("--features-per-split", dest="features_per_split", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--min-leaf", dest="min_leaf", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated per-site accuracy")
    _add_common(p, "input", "sites", "out", "config", "seed", "threads")
    p.add_argument("--drivers", type=int, help="number of drivers n")
    p.add_argument("--reps", type=int, help="reshuffle repetitions")
    p.add_argument("--trees", type=int)
    p.add_argument("--features-per-split", dest="features_per_split", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--min-leaf", dest="min_leaf", type=int)
    p.add_argument("--keep", choices=["latest", "earliest"],
                   help="which sessions survive balancing")
    p.add_argument("--straightaway", action="store_true", default=None)
    p.add_argument("--gap-m", dest="gap_m", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render tables and figures from a report")
    _add_common(p, "input", "out", "config")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (LogParseError, json.JSONDecodeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (MissingSignalError, InfeasibleRouteError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PIPELINE_ERROR


if __name__ == "__main__":
    sys.exit(main())
