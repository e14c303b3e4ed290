"""Command-line pipeline: gen-city, simulate, clean, analyze, report.

Stages communicate only through files, so each is independently runnable and
reruns are byte-identical given the same inputs and seeds. Exit codes:
0 success, 1 data error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from . import analysis, engine, ledger, scenarios, solar
from .citygen import config_from_dict, engineered_site_ids, generate_city
from .geo import CityModel

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class CommandSpec:
    """What was invoked; embedded in manifests so runs are reconstructable."""

    subcommand: str
    inputs: dict
    output: str | None
    seed: int | None = None
    overrides: tuple[str, ...] = ()


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


def _load_json(path, what: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"{what} not found: {path}")
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise UsageError(f"corrupt {what} {path}: {e}") from e


def _apply_overrides(d: dict, overrides) -> None:
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"override must look like key.path=value: {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise UsageError(f"override path not found: {key}")
            node = node[p]
        if parts[-1] not in node:
            raise UsageError(f"override path not found: {key}")
        node[parts[-1]] = value


# -- gen-city ------------------------------------------------------------------


def cmd_gen_city(args) -> int:
    if args.config:
        gen_cfg = config_from_dict(_load_json(args.config, "city generation config"))
        seed = args.seed if args.seed is not None else 0
    else:
        builder, preset_seed = scenarios.PRESET_CITIES[args.preset]
        gen_cfg = builder()
        seed = args.seed if args.seed is not None else preset_seed
    try:
        city = generate_city(gen_cfg, seed)
    except (ValueError, RuntimeError) as e:
        raise UsageError(f"invalid city configuration: {e}") from e
    city.to_json(args.output)
    print(f"wrote {args.output}: {len(city.sites)} sites, {len(city.towers)} towers, "
          f"{len(city.buildings)} buildings, {len(city.trees)} trees")
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def _resolve_scenario(args) -> dict:
    if args.scenario:
        d = _load_json(args.scenario, "scenario file")
    elif args.preset:
        d = scenarios.PRESET_SCENARIOS[args.preset]().to_dict()
    else:
        raise UsageError("need a scenario file or --preset")
    if args.city:
        d["city"] = _load_json(args.city, "city file")
    if args.set:
        _apply_overrides(d, args.set)
    if args.seed is not None:
        d["master_seed"] = args.seed
    return d


def cmd_simulate(args) -> int:
    d = _resolve_scenario(args)
    try:
        config = engine.ScenarioConfig.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"invalid scenario: {e}") from e
    if args.dump_scenario:
        config.to_json(args.dump_scenario)
        print(f"wrote {args.dump_scenario}")
        return EXIT_OK
    if not args.output:
        raise UsageError("simulate requires -o OUTDIR")
    spec = CommandSpec("simulate",
                       {"scenario": args.scenario, "preset": args.preset,
                        "city": args.city},
                       args.output, args.seed, tuple(args.set or ()))
    if args.replicas > 1:
        return _run_replicas(config, spec, args)
    out = engine.run(config)
    out.manifest["invocation"] = asdict(spec)
    out.write(args.output)
    print(f"wrote {args.output}: {out.manifest['rows']} ledger rows, "
          f"{out.manifest['psm_episodes']} psm episodes")
    return EXIT_OK


def _run_replica(payload):
    config_dict, seed, outdir, spec_dict = payload
    config = engine.ScenarioConfig.from_dict(config_dict)
    config.master_seed = seed
    out = engine.run(config)
    out.manifest["invocation"] = spec_dict
    out.manifest["replica_seed"] = seed
    out.write(outdir)
    return outdir


def _run_replicas(config, spec, args) -> int:
    from concurrent.futures import ProcessPoolExecutor
    payloads = []
    for i in range(args.replicas):
        outdir = os.path.join(args.output, f"replica-{i:02d}")
        payloads.append((config.to_dict(), config.master_seed + i, outdir, asdict(spec)))
    workers = min(args.replicas, os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for outdir in pool.map(_run_replica, payloads):
            print(f"wrote {outdir}")
    return EXIT_OK


# -- clean ---------------------------------------------------------------------


def cmd_clean(args) -> int:
    city = _load_city(args.city)
    df = _load_ledger(args.ledger)
    kept, report = analysis.clean(df, city)
    os.makedirs(args.output, exist_ok=True)
    ledger.write_ledger(kept, os.path.join(args.output, "cleaned.csv"))
    with open(os.path.join(args.output, "clean_report.json"), "w") as f:
        json.dump(asdict(report), f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"kept {report.kept_count} of {report.input_count} rows")
    return EXIT_OK


def _load_city(path) -> CityModel:
    d = _load_json(path, "city file")
    try:
        return CityModel.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"invalid city file {path}: {e}") from e


def _load_ledger(path) -> pd.DataFrame:
    if not os.path.exists(path):
        raise UsageError(f"ledger not found: {path}")
    try:
        return ledger.read_ledger(path)
    except ValueError as e:
        raise DataError(str(e)) from e


# -- analyze -------------------------------------------------------------------


def cmd_analyze(args) -> int:
    city = _load_city(args.city)
    df = _load_ledger(args.ledger)
    site_ids = {s.id for s in city.sites}
    seen = set(df["node_id"].unique())
    unknown = sorted(seen - site_ids)
    if unknown:
        raise DataError(f"ledger references unknown site ids: {', '.join(unknown)}")
    weather = None
    if args.weather:
        if not os.path.exists(args.weather):
            raise UsageError(f"weather file not found: {args.weather}")
        weather = pd.read_csv(args.weather)
    episodes = None
    if args.psm:
        if not os.path.exists(args.psm):
            raise UsageError(f"psm file not found: {args.psm}")
        episodes = analysis_load_psm(args.psm)

    outdir = args.output
    os.makedirs(outdir, exist_ok=True)

    kept, report = analysis.clean(df, city)
    with open(os.path.join(outdir, "clean_report.json"), "w") as f:
        json.dump(asdict(report), f, indent=1, sort_keys=True)
        f.write("\n")

    analysis.latency_table(kept).to_csv(os.path.join(outdir, "latency_table.csv"), index=False)

    summaries = analysis.node_summaries(kept, sorted(site_ids))
    pd.DataFrame([asdict(s) for s in summaries]).to_csv(
        os.path.join(outdir, "node_summaries.csv"), index=False)

    dead = analysis.detect_dead_zones(summaries)
    pd.DataFrame({"site_id": dead}).to_csv(os.path.join(outdir, "dead_zones.csv"), index=False)

    forensics = {}
    eng_ids = engineered_site_ids(city)
    if eng_ids["dead"] and set(eng_ids["dead"]) <= set(dead):
        forensics["dead_vs_relocated"] = analysis.dead_vs_relocated(
            city, eng_ids["dead"], eng_ids["twin"])
    healthy = sorted(site_ids - set(dead))
    if dead and healthy:
        forensics["distance_comparison"] = analysis.distance_comparison(city, dead, healthy)
    with open(os.path.join(outdir, "dead_zone_forensics.json"), "w") as f:
        json.dump(forensics, f, indent=1, sort_keys=True)
        f.write("\n")

    for group in ("date", "node", "tower"):
        conc = analysis.delayed_concentration(kept, analysis.DELAYED_THRESHOLD_S, group)
        conc.to_csv(os.path.join(outdir, f"delayed_by_{group}.csv"), index=False)

    analysis.temporal_null_check(kept, weather, lon=city.origin_lon).to_csv(
        os.path.join(outdir, "temporal_check.csv"), index=False)

    equity = {"dead_zones": analysis.equity_report(dead, city)}
    if episodes is not None and len(episodes):
        psm_sites = sorted(set(episodes["node_id"]))
        equity["psm"] = analysis.equity_report(psm_sites, city)
    delayed_by_node = analysis.delayed_concentration(
        kept, analysis.DELAYED_THRESHOLD_S, "node")
    with_delays = delayed_by_node[delayed_by_node.delayed_count > 0]
    n_top = max(1, len(site_ids) // 10)
    most_delayed = sorted(with_delays.head(n_top)["group"].tolist())
    with_delays.head(10).to_csv(os.path.join(outdir, "most_delayed_sites.csv"), index=False)
    if most_delayed:
        equity["most_delayed"] = analysis.equity_report(most_delayed, city)
    with open(os.path.join(outdir, "equity.json"), "w") as f:
        json.dump(equity, f, indent=1, sort_keys=True)
        f.write("\n")

    if episodes is not None:
        stats = analysis.psm_stats(episodes)
        with open(os.path.join(outdir, "psm_stats.json"), "w") as f:
            json.dump(stats, f, indent=1, sort_keys=True)
            f.write("\n")
        _write_predictability(outdir, city, episodes, kept)

    with open(os.path.join(outdir, "summary.json"), "w") as f:
        json.dump({
            "input_rows": int(report.input_count),
            "kept_rows": int(report.kept_count),
            "sites": len(site_ids),
            "dead_zone_sites": len(dead),
            "dead_zone_fraction": round(len(dead) / len(site_ids), 4) if site_ids else None,
        }, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"wrote report tables to {outdir}")
    return EXIT_OK


def analysis_load_psm(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"node_id": str})
    for col in ("start_iso8601", "end_iso8601"):
        df[col] = pd.to_datetime(df[col], format="%Y-%m-%dT%H:%M:%SZ")
    return df


def _write_predictability(outdir, city, episodes, kept) -> None:
    year = int(kept["sample_time"].dt.year.min()) if len(kept) else 2021
    day = solar.winter_solstice(year)
    shadow_rows = solar.shadow_report(city, day)
    solar.write_shadow_report(shadow_rows, os.path.join(outdir, "shadow_winter.csv"))
    shadow_map = {r["site_id"]: r["shadow_minutes"] for r in shadow_rows}
    features = analysis.site_feature_table(city, shadow_map)
    totals = episodes.groupby("node_id")["duration_s"].sum()
    flags = np.array([1.0 if sid in totals.index else 0.0 for sid in features.index])
    durations = np.array([float(totals.get(sid, 0.0)) for sid in features.index])
    fits = analysis.predict_psm(features, flags, durations)
    out = {
        "features": fits["feature_names"],
        "logistic": analysis.fit_to_dict(fits["logistic"], fits["feature_names"]),
        "linear": analysis.fit_to_dict(fits["linear"], fits["feature_names"]),
        "perfect_separation": fits["perfect_separation"],
    }
    with open(os.path.join(outdir, "predict_psm.json"), "w") as f:
        json.dump(out, f, indent=1, sort_keys=True)
        f.write("\n")


# -- report --------------------------------------------------------------------


def _md_table(df: pd.DataFrame) -> str:
    cols = list(df.columns)
    lines = ["| " + " | ".join(cols) + " |",
             "|" + "|".join("---" for _ in cols) + "|"]
    for _, row in df.iterrows():
        lines.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(lines)


def cmd_report(args) -> int:
    rd = args.reportdir
    if not os.path.isdir(rd):
        raise UsageError(f"report directory not found: {rd}")
    out_md = args.output or os.path.join(rd, "report.md")
    sections = ["# Network run report\n"]

    def load_json_if(name):
        p = os.path.join(rd, name)
        if os.path.exists(p):
            with open(p) as f:
                return json.load(f)
        return None

    summary = load_json_if("summary.json")
    if summary:
        sections.append("## Overview\n")
        sections.append("\n".join(f"- {k}: {v}" for k, v in sorted(summary.items())) + "\n")
    creport = load_json_if("clean_report.json")
    if creport:
        sections.append("## Cleaning\n")
        sections.append("\n".join(f"- {k}: {v}" for k, v in sorted(creport.items())) + "\n")
    lt_path = os.path.join(rd, "latency_table.csv")
    if os.path.exists(lt_path):
        sections.append("## Latency tail\n")
        sections.append(_md_table(pd.read_csv(lt_path)) + "\n")
    dz_path = os.path.join(rd, "dead_zones.csv")
    if os.path.exists(dz_path):
        dz = pd.read_csv(dz_path)
        sections.append("## Dead zones\n")
        sections.append(f"{len(dz)} sites never connected: "
                        + ", ".join(dz["site_id"].astype(str)) + "\n")
    forensics = load_json_if("dead_zone_forensics.json")
    if forensics:
        sections.append("## Dead-zone forensics\n")
        if "dead_vs_relocated" in forensics:
            p = forensics["dead_vs_relocated"]["rank_sum_p"]
            sections.append(f"- tallest building within 100 m, dead vs relocated: "
                            f"one-sided rank-sum p = {p:.2e}")
        if "distance_comparison" in forensics:
            p = forensics["distance_comparison"]["rank_sum_p"]
            sections.append(f"- nearest-tower distance, dead vs healthy: "
                            f"two-sided rank-sum p = {p:.3f}\n")
    stats = load_json_if("psm_stats.json")
    if stats:
        sections.append("## Power-saving episodes\n")
        keep = ["episode_count", "device_count", "total_s", "median_len_s",
                "max_len_s", "min_len_s", "lost_readings_estimate"]
        sections.append("\n".join(f"- {k}: {stats[k]}" for k in keep) + "\n")
    equity = load_json_if("equity.json")
    if equity:
        sections.append("## Equity\n")
        for key, rep in sorted(equity.items()):
            if rep.get("pct_issue_in_disadvantaged") is None:
                continue
            sections.append(
                f"- {key}: {rep['pct_issue_in_disadvantaged']:.2f} in disadvantaged zones"
                f" (baseline {rep['baseline_pct_disadvantaged']:.2f})")
        sections.append("")
    tc_path = os.path.join(rd, "temporal_check.csv")
    if os.path.exists(tc_path):
        sections.append("## Temporal features\n")
        sections.append(_md_table(pd.read_csv(tc_path)) + "\n")
    date_path = os.path.join(rd, "delayed_by_date.csv")
    if os.path.exists(date_path):
        conc = pd.read_csv(date_path)
        analysis.percentages_svg(conc, os.path.join(rd, "percentages.svg"))
        sections.append("## Delayed-reading concentration\n")
        sections.append("Scatter written to percentages.svg; top dates:\n")
        sections.append(_md_table(conc.head(8)) + "\n")
    with open(out_md, "w") as f:
        f.write("\n".join(sections))
    print(f"wrote {out_md}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citysense",
        description="Urban sensor-network simulator and analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-city", help="generate a synthetic city model")
    g.add_argument("--preset", choices=sorted(scenarios.PRESET_CITIES), default="chicago-like")
    g.add_argument("--config", help="city generation config JSON (overrides --preset)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen_city)

    s = sub.add_parser("simulate", help="run a scenario")
    s.add_argument("scenario", nargs="?", help="scenario JSON file")
    s.add_argument("--preset", choices=sorted(scenarios.PRESET_SCENARIOS))
    s.add_argument("--city", help="city JSON overriding the scenario's city")
    s.add_argument("--seed", type=int, default=None, help="override master_seed")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario field by dotted path")
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--dump-scenario", help="write the resolved scenario JSON and exit")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("clean", help="apply the cleaning rules to a ledger")
    c.add_argument("ledger")
    c.add_argument("city")
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_clean)

    a = sub.add_parser("analyze", help="compute report tables from a ledger")
    a.add_argument("ledger")
    a.add_argument("city")
    a.add_argument("--psm", help="psm.csv episode file")
    a.add_argument("--weather", help="weather.csv daily series")
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="aggregate analyze output into Markdown + SVG")
    r.add_argument("reportdir")
    r.add_argument("-o", "--output", help="markdown path (default reportdir/report.md)")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        print(f"run 'citysense {args.command} --help' for usage", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
