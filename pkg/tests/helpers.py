"""Fixture builders and independent reference implementations for the tests.

The oracles here deliberately avoid the package's own code paths.
"""
from __future__ import annotations

import math
import random
from typing import Optional, Sequence

from oculo.ingest import CANONICAL_COLUMNS, GazeSample, MovementType, Recording
from oculo.perimetry import Cartogram, Eye, Sex, StimulusPoint

Point = Optional[tuple[float, float]]


def make_recording(
    points: Sequence[Point],
    dt_us: int = 20_000,
    width: int = 1920,
    height: int = 1080,
    t0: int = 0,
    rate: int = 50,
    labels: Optional[Sequence] = None,
    label_index: Optional[Sequence] = None,
) -> Recording:
    samples = []
    for i, p in enumerate(points):
        t = t0 + i * dt_us
        x, y = p if p is not None else (None, None)
        samples.append(GazeSample(
            event_index=i,
            start_time_us=t,
            end_time_us=t + dt_us,
            gaze_x_px=x,
            gaze_y_px=y,
            movement_type=labels[i] if labels is not None else None,
            movement_type_index=label_index[i] if label_index is not None else None,
        ))
    return Recording("rec", "p01", rate, width, height, tuple(samples))


def planted_stream(rng: random.Random, n: int, rate: int, width: int = 1920, height: int = 1080) -> list[Point]:
    """Alternating fixations, saccade jumps and occasional tracking gaps."""
    jitter = 1.0 if rate == 50 else 0.5
    pts: list[Point] = []
    x, y = rng.uniform(0, width - 1), rng.uniform(0, height - 1)
    while len(pts) < n:
        kind = rng.random()
        if kind < 0.65:
            for _ in range(rng.randint(1, 40)):
                pts.append((x + rng.uniform(-jitter, jitter), y + rng.uniform(-jitter, jitter)))
        elif kind < 0.93:
            for _ in range(rng.randint(1, 4)):
                x, y = rng.uniform(0, width - 1), rng.uniform(0, height - 1)
                pts.append((x, y))
        else:
            pts.extend([None] * rng.randint(1, 6))
    return pts[:n]


def reference_ivt(rec: Recording, threshold: float, min_fix_us: int) -> list[tuple]:
    """Single-pass streaming I-VT.

    Returns (label, first_index, count, start_us, end_us) per event. A sample
    whose predecessor lacks gaze takes the label of its successor; an isolated
    gaze sample is Unclassified. Short fixations become Unclassified and fold
    into an adjacent Unclassified event as the stream is consumed.
    """
    kx = 360.0 / rec.frame_width_px
    ky = 180.0 / rec.frame_height_px
    s = rec.samples
    valid = [smp.gaze_x_px is not None and smp.gaze_y_px is not None for smp in s]
    if sum(valid) < 2:
        return [("Unclassified", 0, len(s), s[0].start_time_us, s[-1].end_time_us)]

    events: list[list] = []  # [label, first, count, start, end]
    run: Optional[list] = None  # [label, first, count]
    pending_first = None  # index awaiting its successor's label

    def emit(label, first, count):
        if label == "Fixation":
            if s[first + count - 1].end_time_us - s[first].start_time_us < min_fix_us:
                label = "Unclassified"
        if events and events[-1][0] == label:
            events[-1][2] += count
            events[-1][4] = s[first + count - 1].end_time_us
        else:
            events.append([label, first, count, s[first].start_time_us, s[first + count - 1].end_time_us])

    def push(label, i):
        nonlocal run
        if run is not None and run[0] == label:
            run[2] += 1
        else:
            if run is not None:
                emit(*run)
            run = [label, i, 1]

    for i in range(len(s)):
        if not valid[i]:
            if pending_first is not None:
                push("Unclassified", pending_first)
                pending_first = None
            push("Unclassified", i)
            continue
        if i == 0 or not valid[i - 1]:
            pending_first = i
            continue
        dt = (s[i].start_time_us - s[i - 1].start_time_us) / 1e6
        dx = (s[i].gaze_x_px - s[i - 1].gaze_x_px) * kx
        dy = (s[i].gaze_y_px - s[i - 1].gaze_y_px) * ky
        v = math.sqrt(dx * dx + dy * dy) / dt
        label = "Fixation" if v < threshold else "Saccade"
        if pending_first is not None:
            push(label, pending_first)
            pending_first = None
        push(label, i)
    if pending_first is not None:
        push("Unclassified", pending_first)
    emit(*run)
    return [tuple(e) for e in events]


def naive_heatmap(points, width: int, height: int, bandwidth: float) -> list[list[float]]:
    """Untruncated Gaussian sum by explicit loops; rows are y, columns x."""
    grid = [[0.0] * width for _ in range(height)]
    clamped = [(min(max(px, 0.0), width - 1.0), min(max(py, 0.0), height - 1.0)) for px, py in points]
    for j in range(height):
        for i in range(width):
            acc = 0.0
            for px, py in clamped:
                acc += math.exp(-((i - px) ** 2 + (j - py) ** 2) / (2.0 * bandwidth ** 2))
            grid[j][i] = acc
    return grid


def random_full_recording(rng: random.Random, n: int) -> Recording:
    """Recording with every canonical column populated (some cells absent)."""
    samples = []
    t = rng.randint(0, 10**12)
    for i in range(n):
        values = {}
        for col in CANONICAL_COLUMNS:
            if col in ("event_index", "start_time_us", "end_time_us"):
                continue
            if rng.random() < 0.1:
                values[col] = None
            elif col == "movement_type":
                values[col] = rng.choice(list(MovementType))
            elif col in ("event_duration_us", "movement_type_index"):
                values[col] = rng.randint(0, 10**6)
            else:
                values[col] = rng.uniform(-1e4, 1e4) * 10 ** rng.randint(-6, 3)
        dt = rng.choice([10_000, 20_000])
        samples.append(GazeSample(event_index=i // 3, start_time_us=t, end_time_us=t + dt, **values))
        t += dt
    return Recording("r-42", "участник-7", rng.choice([50, 100]), 3840, 1920, tuple(samples))


def humphrey_30_2() -> list[tuple[float, float]]:
    """76 (meridian, eccentricity) positions of a 6-degree 30-2 style grid."""
    out = []
    for y, count in ((27, 4), (21, 6), (15, 8), (9, 10), (3, 10)):
        xs = [3 * (2 * k + 1) for k in range(count // 2)]
        for sy in (y, -y):
            for x in xs:
                for sx in (x, -x):
                    out.append((math.degrees(math.atan2(sy, sx)), math.hypot(sx, sy)))
    return out


def grid_cartogram(
    eye: Eye = Eye.RIGHT,
    unseen: Sequence[tuple[float, float]] = (),
    diagnosis: Optional[str] = None,
    seen_grid: bool = True,
) -> Cartogram:
    points = [StimulusPoint(m, e, True, 30.0) for m, e in humphrey_30_2()] if seen_grid else []
    points += [StimulusPoint(m, e, False, 0.0) for m, e in unseen]
    return Cartogram("pt-001", eye, 61, Sex.F, diagnosis, tuple(points))


# Per-scene counts from a 15-scene 360° tour: scene, fixations, saccades, unclassified (blank cells = 0)
SWISS_SCENES = [
    ("Эгль", 856, 42, 0),
    ("Аванш", 862, 50, 1),
    ("Шато-д'О", 785, 22, 0),
    ("Жура Водуа (Шассерон)", 560, 36, 0),
    ("Лозанна (Собор)", 1435, 70, 1),
    ("Лозанна (Уши)", 1462, 56, 0),
    ("Лаво-ЮНЕСКО", 1187, 50, 0),
    ("Ле Дьяблере (Ледник 3000)", 2105, 154, 3),
    ("Лейзин (Куклос)", 1125, 52, 5),
    ("Монтре (Шильонский замок)", 508, 28, 0),
    ("Монтрё (Рош-де-Нэ)", 1776, 106, 1),
    ("Морж", 760, 48, 0),
    ("Ньон", 609, 57, 0),
    ("Вали де Жу", 689, 46, 0),
    ("Ивердон-ле-Бен", 496, 41, 0),
]
