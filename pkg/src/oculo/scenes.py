"""Scene timelines, per-scene event statistics, dispersion and ranking."""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from ._io import Source, read_text
from .classify import GazeEvent
from .ingest import GazeSample, MovementType

UNASSIGNED = "__unassigned__"


class TimelineError(ValueError):
    pass


class EmptyTimeline(TimelineError):
    def __init__(self):
        super().__init__("timeline has no scenes")


class UnsortedTimeline(TimelineError):
    def __init__(self, name: str):
        super().__init__(f"scene {name!r} starts before its predecessor")
        self.name = name


class OverlappingScenes(TimelineError):
    def __init__(self, a: str, b: str):
        super().__init__(f"scenes {a!r} and {b!r} overlap")
        self.a, self.b = a, b


class MalformedTimeline(TimelineError):
    pass


@dataclass(frozen=True)
class SceneEntry:
    scene_name: str
    start_us: int
    end_us: int

    def contains(self, t_us: int) -> bool:
        return self.start_us <= t_us < self.end_us


@dataclass(frozen=True)
class SceneTimeline:
    entries: tuple[SceneEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise EmptyTimeline()
        seen = set()
        for e in entries:
            if e.start_us >= e.end_us:
                raise MalformedTimeline(f"scene {e.scene_name!r}: start {e.start_us} >= end {e.end_us}")
            if e.scene_name in seen or e.scene_name == UNASSIGNED:
                raise MalformedTimeline(f"duplicate or reserved scene name {e.scene_name!r}")
            seen.add(e.scene_name)
        for a, b in zip(entries, entries[1:]):
            if b.start_us < a.start_us:
                raise UnsortedTimeline(b.scene_name)
            if b.start_us < a.end_us:
                raise OverlappingScenes(a.scene_name, b.scene_name)

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, int, int]]) -> "SceneTimeline":
        """Build a timeline from rows in any order."""
        rows = sorted((SceneEntry(*e) for e in entries), key=lambda e: (e.start_us, e.end_us))
        return cls(tuple(rows))

    @property
    def names(self) -> list[str]:
        return [e.scene_name for e in self.entries]

    def scene_at(self, t_us: int) -> str:
        # bisect would do; timelines are tens of rows
        for e in self.entries:
            if e.contains(t_us):
                return e.scene_name
        return UNASSIGNED


def parse_timeline(source: Source) -> SceneTimeline:
    """Parse ``scene_name<TAB>start_us<TAB>end_us`` rows.

    An optional header row with exactly those names is skipped. Rows must
    already be sorted by start time.
    """
    entries = []
    for n, line in enumerate(read_text(source).splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if [c.strip() for c in cells] == ["scene_name", "start_us", "end_us"]:
            continue
        if len(cells) != 3:
            raise MalformedTimeline(f"line {n}: expected 3 cells, got {len(cells)}")
        try:
            entries.append(SceneEntry(cells[0], int(cells[1]), int(cells[2])))
        except ValueError:
            raise MalformedTimeline(f"line {n}: start/end must be integers") from None
    return SceneTimeline(tuple(entries))


def serialize_timeline(timeline: SceneTimeline) -> str:
    rows = ["scene_name\tstart_us\tend_us"]
    rows += [f"{e.scene_name}\t{e.start_us}\t{e.end_us}" for e in timeline.entries]
    return "\n".join(rows) + "\n"


def assign_scene(events: Iterable[GazeEvent], timeline: SceneTimeline) -> dict[str, list[GazeEvent]]:
    """Bucket events by the scene containing their start time.

    Keys follow timeline order; :data:`UNASSIGNED` is always present last.
    """
    out: dict[str, list[GazeEvent]] = {name: [] for name in timeline.names}
    out[UNASSIGNED] = []
    for ev in events:
        out[timeline.scene_at(ev.start_time_us)].append(ev)
    return out


@dataclass(frozen=True)
class SceneStats:
    scene_name: str
    fixation_count: int = 0
    saccade_count: int = 0
    unclassified_count: int = 0
    total_fixation_duration_us: int = 0
    mean_fixation_duration_us: float = 0.0
    gaze_std_x_px: float = 0.0
    gaze_std_y_px: float = 0.0
    # None marks a scene without any gaze point
    gaze_bbox: Optional[tuple[float, float, float, float]] = None
    # sample-level counts, reported next to event counts
    fixation_samples: int = 0
    saccade_samples: int = 0
    unclassified_samples: int = 0

    @property
    def event_count(self) -> int:
        return self.fixation_count + self.saccade_count + self.unclassified_count

    @property
    def spread_score(self) -> float:
        return self.gaze_std_x_px * self.gaze_std_y_px


def _pop_std(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    mean = math.fsum(values) / len(values)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def scene_stats(
    assignment: Mapping[str, Sequence[GazeEvent]],
    samples_by_event: Mapping[int, Sequence[GazeSample]],
    include_empty_unassigned: bool = False,
) -> list[SceneStats]:
    """One :class:`SceneStats` per scene in ``assignment`` order.

    Dispersion uses the population standard deviation of the member samples'
    gaze coordinates. The unassigned bucket is reported only when non-empty
    unless ``include_empty_unassigned``.
    """
    out = []
    for name, events in assignment.items():
        if name == UNASSIGNED and not events and not include_empty_unassigned:
            continue
        counts = {t: 0 for t in MovementType}
        sample_counts = {t: 0 for t in MovementType}
        fix_total = 0
        xs: list[float] = []
        ys: list[float] = []
        for ev in events:
            counts[ev.movement_type] += 1
            sample_counts[ev.movement_type] += ev.sample_count
            if ev.movement_type == MovementType.FIXATION:
                fix_total += ev.duration_us
            for s in samples_by_event[ev.event_id]:
                if s.has_gaze:
                    xs.append(s.gaze_x_px)
                    ys.append(s.gaze_y_px)
        n_fix = counts[MovementType.FIXATION]
        out.append(SceneStats(
            scene_name=name,
            fixation_count=n_fix,
            saccade_count=counts[MovementType.SACCADE],
            unclassified_count=counts[MovementType.UNCLASSIFIED],
            total_fixation_duration_us=fix_total,
            mean_fixation_duration_us=fix_total / n_fix if n_fix else 0.0,
            gaze_std_x_px=_pop_std(xs),
            gaze_std_y_px=_pop_std(ys),
            gaze_bbox=(min(xs), min(ys), max(xs), max(ys)) if xs else None,
            fixation_samples=sample_counts[MovementType.FIXATION],
            saccade_samples=sample_counts[MovementType.SACCADE],
            unclassified_samples=sample_counts[MovementType.UNCLASSIFIED],
        ))
    return out


class RankKey(str, enum.Enum):
    FIXATION_COUNT = "fixation"
    SACCADE_COUNT = "saccade"
    STD_AREA = "std_area"


_RANK_VALUE = {
    RankKey.FIXATION_COUNT: lambda s: s.fixation_count,
    RankKey.SACCADE_COUNT: lambda s: s.saccade_count,
    RankKey.STD_AREA: lambda s: s.spread_score,
}


def rank_scenes(stats: Sequence[SceneStats], key: RankKey = RankKey.FIXATION_COUNT) -> list[str]:
    """Scene names by descending ``key``; ties by name in code-point order."""
    if not stats:
        raise ValueError("no scene statistics to rank")
    value = _RANK_VALUE[RankKey(key)]
    return [s.scene_name for s in sorted(stats, key=lambda s: (-value(s), s.scene_name))]


def dispersion_report(stats: Sequence[SceneStats]) -> list[tuple[str, float]]:
    """(scene, std_x * std_y) pairs, widest spread first."""
    scored = [(s.scene_name, s.spread_score) for s in stats]
    return sorted(scored, key=lambda p: (-p[1], p[0]))


STATS_COLUMNS = (
    "scene", "fixation", "saccade", "unclassified",
    "fixation_samples", "saccade_samples", "unclassified_samples",
    "total_fixation_duration_us", "mean_fixation_duration_us",
    "gaze_std_x_px", "gaze_std_y_px", "spread_score",
    "bbox_min_x", "bbox_min_y", "bbox_max_x", "bbox_max_y",
)


def stats_to_tsv(stats: Sequence[SceneStats]) -> str:
    out = io.StringIO()
    out.write("\t".join(STATS_COLUMNS) + "\n")
    for s in stats:
        bbox = ["", "", "", ""] if s.gaze_bbox is None else [repr(v) for v in s.gaze_bbox]
        row = [
            s.scene_name, str(s.fixation_count), str(s.saccade_count), str(s.unclassified_count),
            str(s.fixation_samples), str(s.saccade_samples), str(s.unclassified_samples),
            str(s.total_fixation_duration_us), repr(s.mean_fixation_duration_us),
            repr(s.gaze_std_x_px), repr(s.gaze_std_y_px), repr(s.spread_score),
            *bbox,
        ]
        out.write("\t".join(row) + "\n")
    return out.getvalue()


def stats_to_dict(s: SceneStats) -> dict:
    return {
        "scene": s.scene_name,
        "fixation": s.fixation_count,
        "saccade": s.saccade_count,
        "unclassified": s.unclassified_count,
        "fixation_samples": s.fixation_samples,
        "saccade_samples": s.saccade_samples,
        "unclassified_samples": s.unclassified_samples,
        "total_fixation_duration_us": s.total_fixation_duration_us,
        "mean_fixation_duration_us": s.mean_fixation_duration_us,
        "gaze_std_x_px": s.gaze_std_x_px,
        "gaze_std_y_px": s.gaze_std_y_px,
        "spread_score": s.spread_score,
        "gaze_bbox": list(s.gaze_bbox) if s.gaze_bbox else None,
    }
