"""Command-line entry point: ``oculo <subcommand> ...``.

Exit codes: 0 success, 1 validation or input errors, 2 usage errors.
Every subcommand writes its outputs atomically plus a ``manifest.json``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from ._io import atomic_write
from .classify import ClassifierConfig, ClassifierMode, classify, events_to_tsv, samples_by_event
from .heatmap import Normalization, Palette, build_heatmap, normalize_heatmap, render_colormap, sidecar_text, slugify
from .ingest import IngestConfig, Strictness, load_header_map, parse_gaze_export, validate_recording
from .perimetry import (
    blind_spot_search,
    parse_cartogram,
    patient_report,
    render_cartogram,
)
from .scenes import (
    UNASSIGNED,
    RankKey,
    assign_scene,
    dispersion_report,
    parse_timeline,
    rank_scenes,
    scene_stats,
    stats_to_dict,
    stats_to_tsv,
)

log = logging.getLogger("oculo")

SUBCOMMANDS = ("ingest-check", "classify", "scene-stats", "heatmap", "perimetry", "report")


class CliError(Exception):
    """Input or validation failure; each line of ``findings`` goes to stderr."""

    def __init__(self, *findings: str):
        super().__init__("\n".join(findings))
        self.findings = findings


@dataclass
class RunConfig:
    subcommand: str
    out: Optional[Path] = None
    gaze: Optional[Path] = None
    timeline: Optional[Path] = None
    cartograms: list[Path] = field(default_factory=list)
    header_map: Optional[Path] = None
    strictness: Strictness = Strictness.DEFAULT
    frame_width_px: Optional[int] = None
    frame_height_px: Optional[int] = None
    classifier: ClassifierMode = ClassifierMode.VELOCITY_THRESHOLD
    velocity_threshold: float = 30.0
    min_fixation_us: int = 60_000
    bandwidth_px: float = 25.0
    truncation: float = 3.0
    palette: Palette = Palette.THERMAL
    scenes: list[str] = field(default_factory=list)
    size_px: int = 256

    def manifest_config(self) -> dict:
        return {
            "strictness": self.strictness.value,
            "frame_width_px": self.frame_width_px,
            "frame_height_px": self.frame_height_px,
            "classifier": self.classifier.value,
            "velocity_threshold_deg_per_s": self.velocity_threshold,
            "min_fixation_duration_us": self.min_fixation_us,
            "bandwidth_px": self.bandwidth_px,
            "truncation_radius": self.truncation,
            "palette": self.palette.value,
            "scenes": list(self.scenes),
            "size_px": self.size_px,
        }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oculo", description="Gaze scene analytics and perimetry blind-spot analysis.")
    parser.add_argument("--version", action="version", version=f"oculo {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    def gaze_args(p, timeline=False, required=True):
        p.add_argument("--gaze", type=Path, required=required, help="gaze export TSV")
        if timeline:
            p.add_argument("--timeline", type=Path, required=required, help="scene timeline TSV")
        p.add_argument("--header-map", type=Path, help="vendor-to-canonical header mapping TSV")
        p.add_argument("--frame-width", type=int, help="override frame width in pixels")
        p.add_argument("--frame-height", type=int, help="override frame height in pixels")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--strict", action="store_const", dest="strictness", const=Strictness.STRICT,
                          help="also reject decreasing timestamps; validation warnings become errors")
        mode.add_argument("--lenient", action="store_const", dest="strictness", const=Strictness.LENIENT,
                          help="skip malformed rows instead of failing")
        p.set_defaults(strictness=Strictness.DEFAULT)

    def classifier_args(p):
        p.add_argument("--classifier", choices=[m.value for m in ClassifierMode], default="ivt",
                       help="ivt recomputes labels; labels trusts the export (default ivt)")
        p.add_argument("--velocity-threshold", type=float, default=30.0, help="deg/s (default 30)")
        p.add_argument("--min-fixation-us", type=int, default=60_000, help="default 60000")

    def out_arg(p, required=True):
        p.add_argument("--out", type=Path, required=required, help="output directory")

    p = sub.add_parser("ingest-check", help="parse and validate a gaze export")
    gaze_args(p)
    out_arg(p, required=False)

    p = sub.add_parser("classify", help="classify samples into fixation/saccade events")
    gaze_args(p)
    classifier_args(p)
    out_arg(p)

    p = sub.add_parser("scene-stats", help="per-scene event statistics")
    gaze_args(p, timeline=True)
    classifier_args(p)
    out_arg(p)

    p = sub.add_parser("heatmap", help="per-scene gaze heatmaps")
    gaze_args(p, timeline=True)
    classifier_args(p)
    p.add_argument("--scene", action="append", default=[], help="scene name or slug; repeatable")
    p.add_argument("--bandwidth", type=float, default=25.0, help="kernel sigma in px (default 25)")
    p.add_argument("--truncation", type=float, default=3.0, help="kernel cutoff in sigmas (default 3)")
    p.add_argument("--palette", choices=[m.value for m in Palette], default="thermal")
    out_arg(p)

    p = sub.add_parser("perimetry", help="blind-spot analysis of cartogram files")
    p.add_argument("--cartogram", type=Path, nargs="+", required=True)
    p.add_argument("--size", type=int, default=256, help="rendered image side in px (>= 64)")
    out_arg(p)

    p = sub.add_parser("report", help="combined structured report")
    gaze_args(p, timeline=True, required=False)
    classifier_args(p)
    p.add_argument("--cartogram", type=Path, nargs="*", default=[])
    out_arg(p)
    return parser


def _to_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=ns.subcommand, out=getattr(ns, "out", None))
    cfg.gaze = getattr(ns, "gaze", None)
    cfg.timeline = getattr(ns, "timeline", None)
    cfg.cartograms = list(getattr(ns, "cartogram", None) or [])
    cfg.header_map = getattr(ns, "header_map", None)
    cfg.strictness = getattr(ns, "strictness", Strictness.DEFAULT)
    cfg.frame_width_px = getattr(ns, "frame_width", None)
    cfg.frame_height_px = getattr(ns, "frame_height", None)
    if hasattr(ns, "classifier"):
        cfg.classifier = ClassifierMode(ns.classifier)
        cfg.velocity_threshold = ns.velocity_threshold
        cfg.min_fixation_us = ns.min_fixation_us
    if hasattr(ns, "bandwidth"):
        cfg.bandwidth_px = ns.bandwidth
        cfg.truncation = ns.truncation
        cfg.palette = Palette(ns.palette)
        cfg.scenes = list(ns.scene)
    if hasattr(ns, "size"):
        cfg.size_px = ns.size
    return cfg


class _Run:
    """Collects outputs so the manifest lists them in write order."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.outputs: list[str] = []
        cfg.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, data) -> None:
        atomic_write(self.cfg.out / name, data)
        self.outputs.append(name)
        log.info("wrote %s", self.cfg.out / name)

    def finish(self) -> None:
        inputs = [self.cfg.gaze, self.cfg.timeline, self.cfg.header_map, *self.cfg.cartograms]
        manifest = {
            "tool": "oculo",
            "version": __version__,
            "subcommand": self.cfg.subcommand,
            "config": self.cfg.manifest_config(),
            "inputs": [
                {"path": str(p), "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
                for p in inputs if p is not None
            ],
            "outputs": list(self.outputs),
        }
        atomic_write(self.cfg.out / "manifest.json", json.dumps(manifest, ensure_ascii=False, indent=2) + "\n")


def _load_recording(cfg: RunConfig):
    icfg = IngestConfig(
        strictness=cfg.strictness,
        frame_width_px=cfg.frame_width_px,
        frame_height_px=cfg.frame_height_px,
        header_map=load_header_map(cfg.header_map) if cfg.header_map else {},
    )
    return parse_gaze_export(cfg.gaze, icfg)


def _events(cfg: RunConfig, rec):
    ccfg = ClassifierConfig(
        mode=cfg.classifier,
        velocity_threshold_deg_per_s=cfg.velocity_threshold,
        min_fixation_duration_us=cfg.min_fixation_us,
    )
    return classify(rec, ccfg)


def _scene_pipeline(cfg: RunConfig):
    rec = _load_recording(cfg)
    events = _events(cfg, rec)
    timeline = parse_timeline(cfg.timeline)
    assignment = assign_scene(events, timeline)
    return rec, events, timeline, assignment


def cmd_ingest_check(cfg: RunConfig) -> int:
    rec = _load_recording(cfg)
    strict = Strictness.STRICT if cfg.strictness == Strictness.STRICT else Strictness.LENIENT
    report = validate_recording(rec, strict)
    lines = [
        f"samples: {len(rec.samples)}",
        f"skipped_rows: {len(rec.skipped_rows)}",
        f"unknown_columns: {rec.unknown_column_count}",
        f"errors: {len(report.errors)}",
        f"warnings: {len(report.warnings)}",
    ]
    for v in report.violations:
        print(str(v), file=sys.stderr)
    print("\n".join(lines))
    if cfg.out is not None:
        run = _Run(cfg)
        run.write("validation.txt", "\n".join(lines + [str(v) for v in report.violations]) + "\n")
        run.finish()
    return 0 if report.ok else 1


def cmd_classify(cfg: RunConfig) -> int:
    rec = _load_recording(cfg)
    events = _events(cfg, rec)
    run = _Run(cfg)
    run.write("events.tsv", events_to_tsv(events))
    run.finish()
    return 0


def cmd_scene_stats(cfg: RunConfig) -> int:
    rec, events, timeline, assignment = _scene_pipeline(cfg)
    stats = scene_stats(assignment, samples_by_event(rec, events))
    run = _Run(cfg)
    run.write("scene_stats.tsv", stats_to_tsv(stats))
    rows = ["scene\tspread_score"] + [f"{name}\t{score!r}" for name, score in dispersion_report(stats)]
    run.write("dispersion.tsv", "\n".join(rows) + "\n")
    run.finish()
    return 0


def _select_scenes(names: Sequence[str], selectors: Sequence[str]) -> list[str]:
    if not selectors:
        return list(names)
    picked = []
    for sel in selectors:
        match = [n for n in names if n == sel] or [n for n in names if slugify(n) == slugify(sel)]
        if not match:
            raise CliError(f"unknown scene {sel!r}; known: {', '.join(names)}")
        for n in match:
            if n not in picked:
                picked.append(n)
    return picked


def cmd_heatmap(cfg: RunConfig) -> int:
    rec, events, timeline, assignment = _scene_pipeline(cfg)
    chosen = _select_scenes(timeline.names, cfg.scenes)
    ext = "pgm" if cfg.palette == Palette.GRAYSCALE else "ppm"
    run = _Run(cfg)
    for name in chosen:
        points = [
            (s.gaze_x_px, s.gaze_y_px)
            for ev in assignment[name]
            for s in rec.samples[ev.sample_slice]
            if s.has_gaze
        ]
        grid = build_heatmap(points, rec.frame_width_px, rec.frame_height_px, cfg.bandwidth_px, cfg.truncation)
        grid = normalize_heatmap(grid, Normalization.MAX)
        slug = slugify(name)
        run.write(f"{slug}_heatmap.{ext}", render_colormap(grid, cfg.palette))
        run.write(f"{slug}_heatmap.txt", f"scene={name}\n" + sidecar_text(grid, cfg.palette))
    run.finish()
    return 0


def _cartogram_stem(cart, used: set) -> str:
    stem = f"{slugify(cart.patient_id)}_{cart.eye.value.lower()}"
    base, k = stem, 2
    while stem in used:
        stem = f"{base}_{k}"
        k += 1
    used.add(stem)
    return stem


def cmd_perimetry(cfg: RunConfig) -> int:
    if cfg.size_px < 64:
        raise CliError("--size must be >= 64")
    carts = [parse_cartogram(p) for p in cfg.cartograms]
    run = _Run(cfg)
    used: set = set()
    for cart in carts:
        report = blind_spot_search(cart)
        stem = _cartogram_stem(cart, used)
        run.write(f"{stem}_cartogram.ppm", render_cartogram(cart, report, cfg.size_px))
        pr = patient_report(cart, report)
        run.write(f"{stem}_report.json", pr.to_json())
        run.write(f"{stem}_report.txt", pr.to_text())
    run.finish()
    return 0


def cmd_report(cfg: RunConfig) -> int:
    if (cfg.gaze is None) != (cfg.timeline is None):
        raise CliError("--gaze and --timeline must be given together")
    if cfg.gaze is None and not cfg.cartograms:
        raise CliError("report needs --gaze/--timeline, --cartogram, or both")
    doc: dict = {"tool": "oculo", "version": __version__}
    text: list[str] = []
    if cfg.gaze is not None:
        rec, events, timeline, assignment = _scene_pipeline(cfg)
        stats = scene_stats(assignment, samples_by_event(rec, events))
        doc["recording"] = {
            "recording_id": rec.recording_id,
            "participant_id": rec.participant_id,
            "sample_count": len(rec.samples),
            "event_count": len(events),
        }
        doc["scenes"] = [stats_to_dict(s) for s in stats]
        doc["unassigned_events"] = len(assignment[UNASSIGNED])
        doc["ranking"] = {k.value: rank_scenes(stats, k) for k in RankKey}
        doc["dispersion"] = [{"scene": n, "spread_score": v} for n, v in dispersion_report(stats)]
        text.append(f"recording {rec.recording_id}: {len(rec.samples)} samples, {len(events)} events")
        for k in RankKey:
            text.append(f"ranking by {k.value}: " + " > ".join(doc["ranking"][k.value]))
        text.append("")
        text.append(stats_to_tsv(stats).rstrip("\n"))
    if cfg.cartograms:
        doc["perimetry"] = []
        for path in cfg.cartograms:
            cart = parse_cartogram(path)
            pr = patient_report(cart, blind_spot_search(cart))
            doc["perimetry"].append(pr.to_dict())
            text.append("")
            text.append(pr.to_text().rstrip("\n"))
    run = _Run(cfg)
    run.write("report.json", json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    run.write("report.txt", "\n".join(text) + "\n")
    run.finish()
    return 0


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "classify": cmd_classify,
    "scene-stats": cmd_scene_stats,
    "heatmap": cmd_heatmap,
    "perimetry": cmd_perimetry,
    "report": cmd_report,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    level = getattr(logging, os.environ.get("OCULO_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    cfg = _to_config(ns)
    try:
        return COMMANDS[ns.subcommand](cfg)
    except CliError as exc:
        for line in exc.findings:
            print(f"error: {line}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
