"""Generate a synthetic viewing session plus cartogram and run the full CLI pipeline.

Writes inputs under OUT/inputs and results under OUT/report and OUT/heatmaps.
"""
import argparse
import random
from pathlib import Path

from oculo.cli import run
from oculo.ingest import GazeSample, Recording, serialize_recording
from oculo.perimetry import Cartogram, Eye, Sex, StimulusPoint, serialize_cartogram
from oculo.scenes import SceneTimeline, serialize_timeline

SCENES = ["Эгль", "Лозанна (Собор)", "Ле Дьяблере (Ледник 3000)", "Монтрё (Рош-де-Нэ)"]


def gaze_stream(rng, n, width, height):
    """Fixations with pixel jitter separated by saccadic jumps."""
    pts = []
    x, y = width / 2, height / 2
    while len(pts) < n:
        for _ in range(rng.randint(8, 30)):
            pts.append((x + rng.gauss(0, 1.5), y + rng.gauss(0, 1.5)))
        x, y = rng.uniform(0, width - 1), rng.uniform(0, height - 1)
        pts.append((x, y))
    return pts[:n]


def recording(rng, seconds, rate=50, width=1920, height=1080):
    dt = 1_000_000 // rate
    samples = [
        GazeSample(i, i * dt, (i + 1) * dt, min(max(x, 0.0), width - 1.0), min(max(y, 0.0), height - 1.0))
        for i, (x, y) in enumerate(gaze_stream(rng, seconds * rate, width, height))
    ]
    return Recording("synthetic", "p01", rate, width, height, tuple(samples))


def cartogram(rng):
    # enlarged blind spot plus one unseen point in the ring just outside it
    unseen = {(-15.0, 15.0), (-14.0, 13.0), (-15.0, 21.0)}
    positions = {(float(m), float(e)) for m in range(-165, 181, 15) for e in (3, 9, 15, 21, 27)} | unseen
    points = [
        StimulusPoint(m, e, (m, e) not in unseen, 0.0 if (m, e) in unseen else round(rng.uniform(24, 32), 1))
        for m, e in sorted(positions)
    ]
    return Cartogram("pt-demo", Eye.RIGHT, 64, Sex.F, "glaucoma", tuple(points))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    ap.add_argument("--seconds", type=int, default=120)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    inputs = args.out / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    gaze, timeline, cart = inputs / "gaze.tsv", inputs / "timeline.tsv", inputs / "cartogram.txt"
    gaze.write_text(serialize_recording(recording(rng, args.seconds)), encoding="utf-8")
    span = args.seconds * 1_000_000 // len(SCENES)
    timeline.write_text(
        serialize_timeline(SceneTimeline.from_entries((n, k * span, (k + 1) * span) for k, n in enumerate(SCENES))),
        encoding="utf-8",
    )
    cart.write_text(serialize_cartogram(cartogram(rng)), encoding="utf-8")

    common = ["--gaze", str(gaze), "--timeline", str(timeline)]
    codes = [
        run(["report", *common, "--cartogram", str(cart), "--out", str(args.out / "report")]),
        run(["heatmap", *common, "--bandwidth", "25", "--out", str(args.out / "heatmaps")]),
        run(["perimetry", "--cartogram", str(cart), "--size", "512", "--out", str(args.out / "perimetry")]),
    ]
    print((args.out / "report" / "report.txt").read_text(encoding="utf-8"))
    raise SystemExit(max(codes))


if __name__ == "__main__":
    main()
