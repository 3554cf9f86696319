"""Parsing and validation of wearable eye-tracker gaze exports.

Input is a UTF-8 TSV with one header row using the canonical snake_case column
names in :data:`CANONICAL_COLUMNS`. Optional leading ``# key=value`` lines carry
recording metadata (``recording_id``, ``participant_id``, ``sample_rate_hz``,
``frame_width_px``, ``frame_height_px``). Vendor exports with different header
names are handled through a header-mapping file (see :func:`load_header_map`).
"""
from __future__ import annotations

import enum
import io
import logging
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Optional

from ._io import Source, read_text

log = logging.getLogger(__name__)


class MovementType(str, enum.Enum):
    FIXATION = "Fixation"
    SACCADE = "Saccade"
    UNCLASSIFIED = "Unclassified"

    @classmethod
    def parse(cls, text: str) -> "MovementType":
        key = text.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown movement type {text!r}")


class Strictness(str, enum.Enum):
    STRICT = "strict"
    DEFAULT = "default"
    LENIENT = "lenient"


REQUIRED_COLUMNS = ("event_index", "start_time_us", "end_time_us", "gaze_x_px", "gaze_y_px")

INT_COLUMNS = frozenset(
    {"event_index", "start_time_us", "end_time_us", "event_duration_us", "movement_type_index"}
)

CANONICAL_COLUMNS = (
    "event_index", "start_time_us", "end_time_us",
    "gaze_x_px", "gaze_y_px", "deviation_x_px", "deviation_y_px",
    "gaze3d_x", "gaze3d_y", "gaze3d_z",
    "gaze_dir_left_x", "gaze_dir_left_y", "gaze_dir_left_z",
    "gaze_dir_right_x", "gaze_dir_right_y", "gaze_dir_right_z",
    "pupil_pos_left_x", "pupil_pos_left_y", "pupil_pos_left_z",
    "pupil_pos_right_x", "pupil_pos_right_y", "pupil_pos_right_z",
    "pupil_diam_left_mm", "pupil_diam_right_mm", "pupil_diam_filtered_mm",
    "movement_type", "event_duration_us", "movement_type_index",
    "fixation_x_px", "fixation_y_px",
    "gyro_x", "gyro_y", "gyro_z",
    "accel_x", "accel_y", "accel_z",
)

METADATA_KEYS = ("recording_id", "participant_id", "sample_rate_hz", "frame_width_px", "frame_height_px")

DEFAULT_FRAME = (1920, 1080)
ALLOWED_SAMPLE_RATES = (50, 100)


class IngestError(ValueError):
    """Base class for gaze-export parse failures."""


class MissingRequiredColumn(IngestError):
    def __init__(self, name: str):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class MalformedRow(IngestError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NonMonotonicTime(IngestError):
    def __init__(self, line_no: int):
        super().__init__(f"line {line_no}: start_time_us decreases")
        self.line_no = line_no


@dataclass(frozen=True)
class GazeSample:
    event_index: int
    start_time_us: int
    end_time_us: int
    gaze_x_px: Optional[float] = None
    gaze_y_px: Optional[float] = None
    deviation_x_px: Optional[float] = None
    deviation_y_px: Optional[float] = None
    gaze3d_x: Optional[float] = None
    gaze3d_y: Optional[float] = None
    gaze3d_z: Optional[float] = None
    gaze_dir_left_x: Optional[float] = None
    gaze_dir_left_y: Optional[float] = None
    gaze_dir_left_z: Optional[float] = None
    gaze_dir_right_x: Optional[float] = None
    gaze_dir_right_y: Optional[float] = None
    gaze_dir_right_z: Optional[float] = None
    pupil_pos_left_x: Optional[float] = None
    pupil_pos_left_y: Optional[float] = None
    pupil_pos_left_z: Optional[float] = None
    pupil_pos_right_x: Optional[float] = None
    pupil_pos_right_y: Optional[float] = None
    pupil_pos_right_z: Optional[float] = None
    pupil_diam_left_mm: Optional[float] = None
    pupil_diam_right_mm: Optional[float] = None
    pupil_diam_filtered_mm: Optional[float] = None
    movement_type: Optional[MovementType] = None
    event_duration_us: Optional[int] = None
    movement_type_index: Optional[int] = None
    fixation_x_px: Optional[float] = None
    fixation_y_px: Optional[float] = None
    gyro_x: Optional[float] = None
    gyro_y: Optional[float] = None
    gyro_z: Optional[float] = None
    accel_x: Optional[float] = None
    accel_y: Optional[float] = None
    accel_z: Optional[float] = None

    @property
    def has_gaze(self) -> bool:
        return self.gaze_x_px is not None and self.gaze_y_px is not None


assert tuple(f.name for f in fields(GazeSample)) == CANONICAL_COLUMNS


@dataclass(frozen=True)
class Recording:
    recording_id: str
    participant_id: str
    sample_rate_hz: int
    frame_width_px: int
    frame_height_px: int
    samples: tuple[GazeSample, ...]
    # file line of each sample; empty for recordings built in memory
    source_lines: tuple[int, ...] = ()
    unknown_columns: tuple[str, ...] = ()
    skipped_rows: tuple[int, ...] = ()

    def __post_init__(self):
        if self.frame_width_px <= 0 or self.frame_height_px <= 0:
            raise ValueError("frame dimensions must be positive")
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def unknown_column_count(self) -> int:
        return len(self.unknown_columns)

    def line_of(self, index: int) -> int:
        if self.source_lines:
            return self.source_lines[index]
        return index + 2


@dataclass
class IngestConfig:
    strictness: Strictness = Strictness.DEFAULT
    frame_width_px: Optional[int] = None
    frame_height_px: Optional[int] = None
    sample_rate_hz: Optional[int] = None
    allowed_sample_rates: tuple[int, ...] = ALLOWED_SAMPLE_RATES
    recording_id: Optional[str] = None
    participant_id: Optional[str] = None
    # vendor header -> canonical column name
    header_map: Mapping[str, str] = field(default_factory=dict)



def load_header_map(source: Source) -> dict[str, str]:
    """Read a ``vendor_header<TAB>canonical_name`` mapping file."""
    mapping = {}
    for n, line in enumerate(read_text(source).splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1].strip() not in CANONICAL_COLUMNS:
            raise IngestError(f"header map line {n}: expected '<vendor>\\t<canonical column>'")
        mapping[parts[0].strip()] = parts[1].strip()
    return mapping


def _convert(column: str, cell: str):
    if cell == "":
        return None
    if column == "movement_type":
        return MovementType.parse(cell)
    if column in INT_COLUMNS:
        return int(cell)
    value = float(cell)
    if math.isnan(value):
        return None
    return value


def _infer_rate(starts: list[int], allowed: Iterable[int]) -> Optional[int]:
    deltas = [b - a for a, b in zip(starts, starts[1:]) if b > a]
    if not deltas:
        return None
    hz = 1e6 / statistics.median(deltas)
    return min(allowed, key=lambda r: abs(r - hz))


def parse_gaze_export(source: Source, config: Optional[IngestConfig] = None) -> Recording:
    """Parse a gaze-export TSV into a :class:`Recording`.

    Malformed rows fail fast unless ``config.strictness`` is lenient, in which
    case they are skipped and their line numbers kept in ``skipped_rows``.
    Strict mode additionally rejects decreasing start times.
    """
    config = config or IngestConfig()
    lines = read_text(source).splitlines()

    meta: dict[str, str] = {}
    pos = 0
    while pos < len(lines) and (lines[pos].startswith("#") or not lines[pos].strip()):
        body = lines[pos].lstrip("#").strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
        pos += 1
    if pos >= len(lines):
        raise MissingRequiredColumn(REQUIRED_COLUMNS[0])

    header = [config.header_map.get(h.strip(), h.strip()) for h in lines[pos].split("\t")]
    for name in REQUIRED_COLUMNS:
        if name not in header:
            raise MissingRequiredColumn(name)
    known = [(i, h) for i, h in enumerate(header) if h in CANONICAL_COLUMNS]
    unknown = tuple(h for h in header if h not in CANONICAL_COLUMNS)
    if unknown:
        log.warning("ignoring %d unknown column(s): %s", len(unknown), ", ".join(unknown))

    lenient = config.strictness == Strictness.LENIENT
    samples: list[GazeSample] = []
    source_lines: list[int] = []
    skipped: list[int] = []
    for line_no, line in enumerate(lines[pos + 1:], start=pos + 2):
        if not line.strip():
            continue
        cells = line.split("\t")
        try:
            if len(cells) != len(header):
                raise MalformedRow(line_no, f"expected {len(header)} cells, got {len(cells)}")
            values = {}
            for i, name in known:
                try:
                    values[name] = _convert(name, cells[i].strip())
                except ValueError as exc:
                    raise MalformedRow(line_no, f"column {name}: {exc}") from None
            for name in ("event_index", "start_time_us", "end_time_us"):
                if values[name] is None:
                    raise MalformedRow(line_no, f"column {name} is empty")
            sample = GazeSample(**values)
        except MalformedRow:
            if not lenient:
                raise
            skipped.append(line_no)
            continue
        if (
            config.strictness == Strictness.STRICT
            and samples
            and sample.start_time_us < samples[-1].start_time_us
        ):
            raise NonMonotonicTime(line_no)
        samples.append(sample)
        source_lines.append(line_no)

    width = config.frame_width_px or int(meta.get("frame_width_px", DEFAULT_FRAME[0]))
    height = config.frame_height_px or int(meta.get("frame_height_px", DEFAULT_FRAME[1]))
    rate = config.sample_rate_hz or (int(meta["sample_rate_hz"]) if "sample_rate_hz" in meta else None)
    if rate is None:
        rate = _infer_rate([s.start_time_us for s in samples], config.allowed_sample_rates)
        rate = rate or config.allowed_sample_rates[0]
    if rate not in config.allowed_sample_rates:
        raise IngestError(f"sample rate {rate} Hz not in {config.allowed_sample_rates}")

    return Recording(
        recording_id=config.recording_id or meta.get("recording_id", ""),
        participant_id=config.participant_id or meta.get("participant_id", ""),
        sample_rate_hz=rate,
        frame_width_px=width,
        frame_height_px=height,
        samples=tuple(samples),
        source_lines=tuple(source_lines),
        unknown_columns=unknown,
        skipped_rows=tuple(skipped),
    )


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, MovementType):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_recording(rec: Recording, columns: Iterable[str] = CANONICAL_COLUMNS) -> str:
    """Write ``rec`` back to the canonical TSV form, metadata lines included."""
    columns = list(columns)
    out = io.StringIO()
    for key in METADATA_KEYS:
        out.write(f"# {key}={getattr(rec, key)}\n")
    out.write("\t".join(columns) + "\n")
    for s in rec.samples:
        out.write("\t".join(_format(getattr(s, c)) for c in columns) + "\n")
    return out.getvalue()


# --- validation ---------------------------------------------------------


class ViolationKind(str, enum.Enum):
    TIME_ORDER = "TimeOrder"
    NON_MONOTONIC = "NonMonotonic"
    DURATION_MISMATCH = "DurationMismatch"
    OUT_OF_FRAME = "OutOfFrame"
    GAZE_DIR_NORM = "GazeDirNorm"
    SAMPLE_RATE = "SampleRate"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    line_no: int
    message: str
    severity: str  # "error" or "warning"

    def __str__(self) -> str:
        return f"{self.severity}: line {self.line_no}: {self.kind.value}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    strictness: Strictness
    violations: tuple[Violation, ...]

    @property
    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == "error")

    @property
    def warnings(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors

    def by_kind(self) -> Counter:
        return Counter(v.kind for v in self.violations)


def _dir_norm(s: GazeSample, side: str) -> Optional[float]:
    comps = [getattr(s, f"gaze_dir_{side}_{a}") for a in "xyz"]
    if any(c is None for c in comps):
        return None
    return math.sqrt(sum(c * c for c in comps))


def validate_recording(
    rec: Recording,
    strictness: Strictness = Strictness.STRICT,
    allowed_sample_rates: tuple[int, ...] = ALLOWED_SAMPLE_RATES,
) -> ValidationReport:
    """Check every sample invariant; Strict reports errors, Lenient warnings."""
    severity = "error" if strictness == Strictness.STRICT else "warning"
    found: list[Violation] = []

    def add(kind, line_no, message):
        found.append(Violation(kind, line_no, message, severity))

    if rec.sample_rate_hz not in allowed_sample_rates:
        add(ViolationKind.SAMPLE_RATE, 0, f"{rec.sample_rate_hz} Hz not in {allowed_sample_rates}")

    group_sizes = Counter(s.event_index for s in rec.samples)
    prev_start = None
    for i, s in enumerate(rec.samples):
        line = rec.line_of(i)
        if s.end_time_us < s.start_time_us:
            add(ViolationKind.TIME_ORDER, line, f"end {s.end_time_us} < start {s.start_time_us}")
        if prev_start is not None and s.start_time_us < prev_start:
            add(ViolationKind.NON_MONOTONIC, line, f"start {s.start_time_us} < previous {prev_start}")
        prev_start = s.start_time_us
        if s.event_duration_us is not None:
            if s.event_duration_us < 0:
                add(ViolationKind.DURATION_MISMATCH, line, f"negative duration {s.event_duration_us}")
            elif (
                s.movement_type is not None
                and group_sizes[s.event_index] == 1
                and s.event_duration_us != s.end_time_us - s.start_time_us
            ):
                add(
                    ViolationKind.DURATION_MISMATCH, line,
                    f"duration {s.event_duration_us} != end - start {s.end_time_us - s.start_time_us}",
                )
        if s.gaze_x_px is not None and not 0 <= s.gaze_x_px < rec.frame_width_px:
            add(ViolationKind.OUT_OF_FRAME, line, f"gaze_x_px {s.gaze_x_px} outside [0, {rec.frame_width_px})")
        if s.gaze_y_px is not None and not 0 <= s.gaze_y_px < rec.frame_height_px:
            add(ViolationKind.OUT_OF_FRAME, line, f"gaze_y_px {s.gaze_y_px} outside [0, {rec.frame_height_px})")
        for side in ("left", "right"):
            norm = _dir_norm(s, side)
            if norm is not None and not 0.9 <= norm <= 1.1:
                add(ViolationKind.GAZE_DIR_NORM, line, f"{side} gaze direction norm {norm:.4f}")
    return ValidationReport(strictness, tuple(found))
