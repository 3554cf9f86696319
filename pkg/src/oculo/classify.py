"""Fixation/saccade event extraction.

Two routes: a velocity-threshold (I-VT) pass over gaze positions, and trusting
the recorder's own ``movement_type`` labels. Both produce :class:`GazeEvent`
runs that partition the recording's samples.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .ingest import GazeSample, MovementType, Recording


class ClassifyError(ValueError):
    pass


class TooFewSamples(ClassifyError):
    def __init__(self, found: int):
        super().__init__(f"need at least 2 samples with gaze, found {found}")
        self.found = found


class ZeroTimeDelta(ClassifyError):
    def __init__(self, index: int):
        super().__init__(f"sample {index}: start time does not increase over previous gaze sample")
        self.index = index


class MissingLabel(ClassifyError):
    def __init__(self, index: int):
        super().__init__(f"sample {index} has no movement_type")
        self.index = index


class ClassifierMode(str, enum.Enum):
    RECORDED_LABELS = "labels"
    VELOCITY_THRESHOLD = "ivt"


@dataclass(frozen=True)
class ClassifierConfig:
    mode: ClassifierMode = ClassifierMode.VELOCITY_THRESHOLD
    velocity_threshold_deg_per_s: float = 30.0
    min_fixation_duration_us: int = 60_000
    # None -> equirectangular scale from the recording's frame size
    deg_per_px_x: Optional[float] = None
    deg_per_px_y: Optional[float] = None

    def __post_init__(self):
        if self.velocity_threshold_deg_per_s <= 0:
            raise ValueError("velocity threshold must be > 0")
        if self.min_fixation_duration_us < 0:
            raise ValueError("min fixation duration must be >= 0")
        for v in (self.deg_per_px_x, self.deg_per_px_y):
            if v is not None and v <= 0:
                raise ValueError("degree-per-pixel scale must be > 0")

    def scale(self, rec: Recording) -> tuple[float, float]:
        kx = self.deg_per_px_x if self.deg_per_px_x is not None else 360.0 / rec.frame_width_px
        ky = self.deg_per_px_y if self.deg_per_px_y is not None else 180.0 / rec.frame_height_px
        return kx, ky


@dataclass(frozen=True)
class GazeEvent:
    event_id: int
    movement_type: MovementType
    start_time_us: int
    end_time_us: int
    duration_us: int
    centroid_x_px: Optional[float]
    centroid_y_px: Optional[float]
    sample_count: int
    first_sample: int  # index into Recording.samples

    @property
    def sample_slice(self) -> slice:
        return slice(self.first_sample, self.first_sample + self.sample_count)


def compute_velocities(rec: Recording, cfg: ClassifierConfig) -> list[Optional[float]]:
    """Angular gaze velocity in deg/s for every sample.

    A sample without gaze gets ``None`` and breaks adjacency: the next sample
    with gaze starts a new run. The first sample of each run copies the
    velocity of the second; a run of one sample has no velocity.
    """
    samples = rec.samples
    n_valid = sum(s.has_gaze for s in samples)
    if n_valid < 2:
        raise TooFewSamples(n_valid)
    kx, ky = cfg.scale(rec)

    out: list[Optional[float]] = [None] * len(samples)
    run_start = None
    for i, s in enumerate(samples):
        if not s.has_gaze:
            run_start = None
            continue
        if run_start is None:
            run_start = i
            continue
        p = samples[i - 1]
        dt_us = s.start_time_us - p.start_time_us
        if dt_us <= 0:
            raise ZeroTimeDelta(i)
        dist = math.hypot((s.gaze_x_px - p.gaze_x_px) * kx, (s.gaze_y_px - p.gaze_y_px) * ky)
        out[i] = dist / (dt_us / 1e6)
        if i - 1 == run_start:
            out[i - 1] = out[i]
    return out


def _make_event(event_id: int, label: MovementType, samples: Sequence[GazeSample], first: int, count: int) -> GazeEvent:
    members = samples[first:first + count]
    start = members[0].start_time_us
    end = members[-1].end_time_us
    xs = [m.gaze_x_px for m in members if m.has_gaze]
    ys = [m.gaze_y_px for m in members if m.has_gaze]
    return GazeEvent(
        event_id=event_id,
        movement_type=label,
        start_time_us=start,
        end_time_us=end,
        duration_us=end - start,
        centroid_x_px=math.fsum(xs) / len(xs) if xs else None,
        centroid_y_px=math.fsum(ys) / len(ys) if ys else None,
        sample_count=count,
        first_sample=first,
    )


def _runs(keys: Sequence) -> list[tuple[int, int]]:
    """(first index, length) of each run of equal consecutive keys."""
    runs = []
    i = 0
    while i < len(keys):
        j = i + 1
        while j < len(keys) and keys[j] == keys[i]:
            j += 1
        runs.append((i, j - i))
        i = j
    return runs


def ivt_labels(rec: Recording, cfg: ClassifierConfig) -> list[MovementType]:
    """Per-sample I-VT labels before any event merging."""
    if sum(s.has_gaze for s in rec.samples) < 2:
        return [MovementType.UNCLASSIFIED] * len(rec.samples)
    labels = []
    for v in compute_velocities(rec, cfg):
        if v is None:
            labels.append(MovementType.UNCLASSIFIED)
        elif v < cfg.velocity_threshold_deg_per_s:
            labels.append(MovementType.FIXATION)
        else:
            labels.append(MovementType.SACCADE)
    return labels


def classify_ivt(rec: Recording, cfg: ClassifierConfig) -> list[GazeEvent]:
    """Velocity-threshold classification into merged events.

    Fixation runs shorter than ``cfg.min_fixation_duration_us`` become
    Unclassified and fuse with neighbouring Unclassified runs.
    """
    if not rec.samples:
        raise TooFewSamples(0)
    samples = rec.samples
    labels = ivt_labels(rec, cfg)

    for first, count in _runs(labels):
        if labels[first] != MovementType.FIXATION:
            continue
        duration = samples[first + count - 1].end_time_us - samples[first].start_time_us
        if duration < cfg.min_fixation_duration_us:
            labels[first:first + count] = [MovementType.UNCLASSIFIED] * count

    return [
        _make_event(k, labels[first], samples, first, count)
        for k, (first, count) in enumerate(_runs(labels))
    ]


def events_from_labels(rec: Recording) -> list[GazeEvent]:
    """Events from the recorder-supplied ``movement_type`` column.

    Consecutive samples merge when both ``movement_type`` and
    ``movement_type_index`` agree.
    """
    keys = []
    for i, s in enumerate(rec.samples):
        if s.movement_type is None:
            raise MissingLabel(i)
        keys.append((s.movement_type, s.movement_type_index))
    return [
        _make_event(k, keys[first][0], rec.samples, first, count)
        for k, (first, count) in enumerate(_runs(keys))
    ]


def classify(rec: Recording, cfg: ClassifierConfig) -> list[GazeEvent]:
    if cfg.mode == ClassifierMode.RECORDED_LABELS:
        return events_from_labels(rec)
    return classify_ivt(rec, cfg)


def samples_by_event(rec: Recording, events: Sequence[GazeEvent]) -> dict[int, tuple[GazeSample, ...]]:
    return {e.event_id: rec.samples[e.sample_slice] for e in events}


EVENT_COLUMNS = (
    "event_id", "movement_type", "start_time_us", "end_time_us", "duration_us",
    "centroid_x_px", "centroid_y_px", "sample_count",
)


def events_to_tsv(events: Sequence[GazeEvent]) -> str:
    out = io.StringIO()
    out.write("\t".join(EVENT_COLUMNS) + "\n")
    for e in events:
        row = [
            str(e.event_id), e.movement_type.value, str(e.start_time_us), str(e.end_time_us),
            str(e.duration_us),
            "" if e.centroid_x_px is None else repr(e.centroid_x_px),
            "" if e.centroid_y_px is None else repr(e.centroid_y_px),
            str(e.sample_count),
        ]
        out.write("\t".join(row) + "\n")
    return out.getvalue()
