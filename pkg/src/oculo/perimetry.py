"""Static-perimetry cartograms: parsing, blind-spot localization, scotoma flag.

Coordinates are eye-relative polar: ``meridian_deg`` is measured from the
temporal horizontal of the tested eye (positive above the horizontal) and
``eccentricity_deg`` is the polar radius from fixation. With this convention
the anatomical blind-spot window is numerically the same for both eyes.

The output of this module is geometric. It carries patient metadata and
features but never a diagnostic verdict.
"""
from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ._io import Source, read_text
from .heatmap import pnm_header

Interval = tuple[float, float]


class CartogramError(ValueError):
    pass


class MissingHeaderKey(CartogramError):
    def __init__(self, name: str):
        super().__init__(f"missing header key {name!r}")
        self.name = name


class DuplicateStimulus(CartogramError):
    def __init__(self, meridian: float, eccentricity: float):
        super().__init__(f"duplicate stimulus at meridian {meridian}, eccentricity {eccentricity}")
        self.meridian = meridian
        self.eccentricity = eccentricity


class BadEyeValue(CartogramError):
    def __init__(self, value: str):
        super().__init__(f"eye must be Left or Right, got {value!r}")
        self.value = value


class Eye(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"

    @classmethod
    def parse(cls, text: str) -> "Eye":
        key = text.strip().lower()
        if key in ("left", "l", "os"):
            return cls.LEFT
        if key in ("right", "r", "od"):
            return cls.RIGHT
        raise BadEyeValue(text)


class Sex(str, enum.Enum):
    M = "M"
    F = "F"
    UNSPECIFIED = "Unspecified"

    @classmethod
    def parse(cls, text: str) -> "Sex":
        key = text.strip().upper()
        if key in ("M", "F"):
            return cls(key)
        if key in ("", "U", "UNSPECIFIED"):
            return cls.UNSPECIFIED
        raise CartogramError(f"sex must be M, F or Unspecified, got {text!r}")


@dataclass(frozen=True)
class StimulusPoint:
    meridian_deg: float
    eccentricity_deg: float
    seen: bool
    intensity_db: Optional[float] = None

    def __post_init__(self):
        if not -180.0 < self.meridian_deg <= 180.0:
            raise CartogramError(f"meridian {self.meridian_deg} outside (-180, 180]")
        if not 0.0 <= self.eccentricity_deg <= 90.0:
            raise CartogramError(f"eccentricity {self.eccentricity_deg} outside [0, 90]")

    @property
    def position(self) -> tuple[float, float]:
        return (self.meridian_deg, self.eccentricity_deg)


@dataclass(frozen=True)
class Cartogram:
    patient_id: str
    eye: Eye
    age_years: int
    sex: Sex
    diagnosis_label: Optional[str]
    points: tuple[StimulusPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise CartogramError("cartogram has no stimulus points")
        if self.age_years < 0:
            raise CartogramError("age must be >= 0")
        seen = set()
        for p in self.points:
            if p.position in seen:
                raise DuplicateStimulus(*p.position)
            seen.add(p.position)

    @property
    def unseen(self) -> list[StimulusPoint]:
        return [p for p in self.points if not p.seen]


@dataclass(frozen=True)
class PerimetryConfig:
    """Window and adjacency geometry; all intervals closed, in degrees."""

    window_meridian_deg: Interval = (-20.0, -10.0)
    window_eccentricity_deg: Interval = (10.0, 18.0)
    # where the blind spot centre usually sits; used for notes only
    typical_eccentricity_deg: Interval = (12.0, 15.0)
    near_margin_deg: float = 2.0
    ring_eccentricity_deg: Interval = (2.0, 6.0)
    ring_meridian_deg: float = 15.0


DEFAULT_CONFIG = PerimetryConfig()

HEADER_KEYS = ("patient_id", "eye", "age", "sex", "diagnosis")
POINT_COLUMNS = ("meridian_deg", "eccentricity_deg", "seen", "intensity_db")
_TRUE = {"1", "true", "yes", "y", "seen"}
_FALSE = {"0", "false", "no", "n", "unseen"}


def parse_cartogram(source: Source) -> Cartogram:
    """Parse ``key=value`` header lines followed by a TSV point table."""
    header: dict[str, str] = {}
    points = []
    for n, line in enumerate(read_text(source).splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line and "=" in line:
            key, value = line.split("=", 1)
            header[key.strip().lower()] = value.strip()
            continue
        cells = [c.strip() for c in line.split("\t")]
        if tuple(cells) == POINT_COLUMNS or tuple(cells) == POINT_COLUMNS[:3]:
            continue
        if len(cells) not in (3, 4):
            raise CartogramError(f"line {n}: expected 3 or 4 cells, got {len(cells)}")
        seen_text = cells[2].lower()
        if seen_text not in _TRUE | _FALSE:
            raise CartogramError(f"line {n}: bad seen value {cells[2]!r}")
        try:
            points.append(StimulusPoint(
                meridian_deg=float(cells[0]),
                eccentricity_deg=float(cells[1]),
                seen=seen_text in _TRUE,
                intensity_db=float(cells[3]) if len(cells) == 4 and cells[3] else None,
            ))
        except ValueError as exc:
            if isinstance(exc, CartogramError):
                raise
            raise CartogramError(f"line {n}: {exc}") from None
    for key in HEADER_KEYS:
        if key not in header:
            raise MissingHeaderKey(key)
    try:
        age = int(header["age"])
    except ValueError:
        raise CartogramError(f"age must be an integer, got {header['age']!r}") from None
    return Cartogram(
        patient_id=header["patient_id"],
        eye=Eye.parse(header["eye"]),
        age_years=age,
        sex=Sex.parse(header["sex"]),
        diagnosis_label=header["diagnosis"] or None,
        points=tuple(points),
    )


def serialize_cartogram(cart: Cartogram) -> str:
    out = io.StringIO()
    out.write(f"patient_id={cart.patient_id}\n")
    out.write(f"eye={cart.eye.value}\n")
    out.write(f"age={cart.age_years}\n")
    out.write(f"sex={cart.sex.value}\n")
    out.write(f"diagnosis={cart.diagnosis_label or ''}\n")
    out.write("\t".join(POINT_COLUMNS) + "\n")
    for p in cart.points:
        db = "" if p.intensity_db is None else repr(p.intensity_db)
        out.write(f"{p.meridian_deg!r}\t{p.eccentricity_deg!r}\t{int(p.seen)}\t{db}\n")
    return out.getvalue()


def anatomical_window(eye: Eye, config: PerimetryConfig = DEFAULT_CONFIG) -> tuple[Interval, Interval]:
    """(meridian range, eccentricity range) where the blind spot should lie.

    Because meridians are referenced to each eye's temporal horizontal, the
    left-eye window is the mirror of the right-eye one and has the same numbers.
    """
    Eye(eye)
    return tuple(config.window_meridian_deg), tuple(config.window_eccentricity_deg)


def _gap(value: float, interval: Interval) -> float:
    """Distance from ``value`` to a closed interval; 0 inside."""
    lo, hi = interval
    if value < lo:
        return lo - value
    if value > hi:
        return value - hi
    return 0.0


def _meridian_gap(meridian: float, interval: Interval) -> float:
    lo, hi = interval
    if lo <= meridian <= hi:
        return 0.0
    # angular distance, wrapping at +-180
    d_lo = (lo - meridian) % 360.0
    d_hi = (meridian - hi) % 360.0
    return min(d_lo, d_hi)


def in_window(p: StimulusPoint, window: tuple[Interval, Interval]) -> bool:
    mer, ecc = window
    return _meridian_gap(p.meridian_deg, mer) == 0.0 and _gap(p.eccentricity_deg, ecc) == 0.0


@dataclass(frozen=True)
class BlindSpotReport:
    found: bool
    centroid_meridian_deg: Optional[float] = None
    centroid_eccentricity_deg: Optional[float] = None
    member_points: tuple[StimulusPoint, ...] = ()
    within_anatomical_window: bool = False
    adjacent_absolute_scotoma: bool = False
    notes: tuple[str, ...] = ()


def _centroid(points: Sequence[StimulusPoint]) -> tuple[float, float]:
    return (
        math.fsum(p.meridian_deg for p in points) / len(points),
        math.fsum(p.eccentricity_deg for p in points) / len(points),
    )


def _band_note(ecc: float, config: PerimetryConfig) -> str:
    lo, hi = config.typical_eccentricity_deg
    gap = _gap(ecc, config.typical_eccentricity_deg)
    if gap == 0:
        return f"centroid eccentricity {ecc:.2f} deg lies within the typical {lo:g}-{hi:g} deg band"
    return f"centroid eccentricity {ecc:.2f} deg lies {gap:.2f} deg outside the typical {lo:g}-{hi:g} deg band"


def blind_spot_search(cart: Cartogram, config: PerimetryConfig = DEFAULT_CONFIG) -> BlindSpotReport:
    """Locate the blind spot from unseen stimuli in the anatomical window.

    Falls back to unseen points within ``config.near_margin_deg`` of the
    window (reported with ``within_anatomical_window=False``). The
    ``adjacent_absolute_scotoma`` flag is filled from
    :func:`adjacent_scotoma_check`.
    """
    window = anatomical_window(cart.eye, config)
    mer, ecc = window
    unseen = cart.unseen
    # canonical order so the report does not depend on input order
    unseen.sort(key=lambda p: p.position)
    scotoma = adjacent_scotoma_check(cart, config)

    members = [p for p in unseen if in_window(p, window)]
    if members:
        cm, ce = _centroid(members)
        return BlindSpotReport(
            found=True,
            centroid_meridian_deg=cm,
            centroid_eccentricity_deg=ce,
            member_points=tuple(members),
            within_anatomical_window=True,
            adjacent_absolute_scotoma=scotoma.present,
            notes=(_band_note(ce, config),),
        )

    margin = config.near_margin_deg
    near = [
        p for p in unseen
        if _meridian_gap(p.meridian_deg, mer) <= margin and _gap(p.eccentricity_deg, ecc) <= margin
    ]
    if near:
        cm, ce = _centroid(near)
        return BlindSpotReport(
            found=True,
            centroid_meridian_deg=cm,
            centroid_eccentricity_deg=ce,
            member_points=tuple(near),
            within_anatomical_window=False,
            adjacent_absolute_scotoma=scotoma.present,
            notes=(
                f"no unseen stimulus inside the anatomical window; {len(near)} unseen "
                f"stimulus point(s) within {margin:g} deg of it",
                _band_note(ce, config),
            ),
        )

    notes = ["no unseen stimulus inside or near the anatomical window"]
    notes += [
        f"candidate unseen region: meridian {p.meridian_deg:g} deg, eccentricity {p.eccentricity_deg:g} deg"
        for p in unseen
    ]
    return BlindSpotReport(found=False, adjacent_absolute_scotoma=scotoma.present, notes=tuple(notes))


@dataclass(frozen=True)
class ScotomaCheck:
    present: bool
    evidence: tuple[tuple[StimulusPoint, str], ...]

    def __bool__(self) -> bool:
        return self.present

    @property
    def automated_blind_spot_perimetry_feasible(self) -> bool:
        return not self.present


def adjacent_zone(p: StimulusPoint, window: tuple[Interval, Interval], config: PerimetryConfig = DEFAULT_CONFIG) -> Optional[str]:
    """Name of the adjacency zone containing ``p``, or None.

    ``"eccentricity_ring"``: meridian inside the window, eccentricity beyond the
    window bounds by a gap in the closed ring interval (default [2, 6] deg).
    ``"meridian_flank"``: eccentricity inside the window, meridian beyond the
    window bounds by more than 0 and at most ``ring_meridian_deg``.
    """
    mer, ecc = window
    m_gap = _meridian_gap(p.meridian_deg, mer)
    e_gap = _gap(p.eccentricity_deg, ecc)
    r_lo, r_hi = config.ring_eccentricity_deg
    if m_gap == 0.0 and r_lo <= e_gap <= r_hi:
        return "eccentricity_ring"
    if e_gap == 0.0 and 0.0 < m_gap <= config.ring_meridian_deg:
        return "meridian_flank"
    return None


def adjacent_scotoma_check(cart: Cartogram, config: PerimetryConfig = DEFAULT_CONFIG) -> ScotomaCheck:
    """Flag absolute scotoma (unseen stimuli) in the zones bordering the window."""
    window = anatomical_window(cart.eye, config)
    evidence = []
    for p in sorted(cart.unseen, key=lambda p: p.position):
        zone = adjacent_zone(p, window, config)
        if zone is not None:
            evidence.append((p, zone))
    return ScotomaCheck(bool(evidence), tuple(evidence))


# --- rendering ------------------------------------------------------------

BACKGROUND = (255, 255, 255)
GRID_COLOR = (200, 200, 200)
AXIS_COLOR = (150, 150, 150)
WINDOW_COLOR = (0, 160, 0)
SEEN_COLOR = (40, 40, 40)
UNSEEN_COLOR = (175, 175, 175)
HIGHLIGHT_COLOR = (220, 20, 20)


def outer_radius_deg(cart: Cartogram) -> float:
    """Plot radius: the farthest stimulus rounded up to 10 deg, at least 30."""
    far = max(p.eccentricity_deg for p in cart.points)
    return max(30.0, 10.0 * math.ceil(far / 10.0))


def polar_to_pixel(meridian_deg: float, eccentricity_deg: float, eye: Eye, size_px: int, outer_deg: float) -> tuple[int, int]:
    """Raster (column, row) of a field position.

    The image centre is fixation and ``outer_deg`` maps to ``size_px/2 - 4``
    pixels. Up is superior. Temporal points plot right for the right eye and
    left for the left eye, as seen by the patient.
    """
    c = (size_px - 1) / 2.0
    scale = (size_px / 2.0 - 4.0) / outer_deg
    side = 1.0 if Eye(eye) == Eye.RIGHT else -1.0
    theta = math.radians(meridian_deg)
    col = c + side * eccentricity_deg * math.cos(theta) * scale
    row = c - eccentricity_deg * math.sin(theta) * scale
    return int(round(col)), int(round(row))


def mark_radius(size_px: int) -> int:
    return max(1, size_px // 128)


class _Canvas:
    def __init__(self, size: int):
        self.size = size
        self.px = np.empty((size, size, 3), dtype=np.uint8)
        self.px[:] = BACKGROUND

    def dot(self, col: int, row: int, color, radius: int = 0):
        r0, r1 = max(0, row - radius), min(self.size, row + radius + 1)
        c0, c1 = max(0, col - radius), min(self.size, col + radius + 1)
        if r0 < r1 and c0 < c1:
            self.px[r0:r1, c0:c1] = color

    def polyline(self, pts: Iterable[tuple[int, int]], color):
        pts = list(pts)
        for (c0, r0), (c1, r1) in zip(pts, pts[1:]):
            steps = max(abs(c1 - c0), abs(r1 - r0), 1)
            for k in range(steps + 1):
                t = k / steps
                self.dot(int(round(c0 + (c1 - c0) * t)), int(round(r0 + (r1 - r0) * t)), color)


def render_cartogram(
    cart: Cartogram,
    report: BlindSpotReport,
    size_px: int = 256,
    config: PerimetryConfig = DEFAULT_CONFIG,
) -> bytes:
    """Render the cartogram as a binary PPM.

    Layers, bottom to top: eccentricity circles every 10 deg, meridian spokes
    every 30 deg, the anatomical window outline, seen marks, unseen marks,
    blind-spot members in :data:`HIGHLIGHT_COLOR`. Marks are squares of
    half-width :func:`mark_radius` centred at :func:`polar_to_pixel`.
    """
    if size_px < 64:
        raise ValueError("size_px must be >= 64")
    outer = outer_radius_deg(cart)
    canvas = _Canvas(size_px)

    def to_px(m, e):
        return polar_to_pixel(m, e, cart.eye, size_px, outer)

    arc_steps = 720
    for ring in range(10, int(outer) + 1, 10):
        canvas.polyline((to_px(360.0 * k / arc_steps - 180.0 + 1e-9, ring) for k in range(arc_steps + 1)), GRID_COLOR)
    for spoke in range(-150, 181, 30):
        canvas.polyline([to_px(spoke, 0.0), to_px(spoke, outer)], AXIS_COLOR if spoke % 90 == 0 else GRID_COLOR)

    (m_lo, m_hi), (e_lo, e_hi) = anatomical_window(cart.eye, config)
    ms = [m_lo + (m_hi - m_lo) * k / 64 for k in range(65)]
    canvas.polyline((to_px(m, e_lo) for m in ms), WINDOW_COLOR)
    canvas.polyline((to_px(m, e_hi) for m in ms), WINDOW_COLOR)
    canvas.polyline([to_px(m_lo, e_lo), to_px(m_lo, e_hi)], WINDOW_COLOR)
    canvas.polyline([to_px(m_hi, e_lo), to_px(m_hi, e_hi)], WINDOW_COLOR)

    r = mark_radius(size_px)
    ordered = sorted(cart.points, key=lambda p: p.position)
    for p in ordered:
        if p.seen:
            canvas.dot(*to_px(*p.position), SEEN_COLOR, r)
    for p in ordered:
        if not p.seen:
            canvas.dot(*to_px(*p.position), UNSEEN_COLOR, r)
    for p in sorted(report.member_points, key=lambda p: p.position):
        canvas.dot(*to_px(*p.position), HIGHLIGHT_COLOR, r)

    return pnm_header("P6", size_px, size_px) + canvas.px.tobytes()


# --- structured report ----------------------------------------------------

QUADRANTS = ("superior_temporal", "superior_nasal", "inferior_nasal", "inferior_temporal")


def quadrant_of(meridian_deg: float) -> str:
    if 0.0 <= meridian_deg < 90.0:
        return "superior_temporal"
    if meridian_deg >= 90.0:
        return "superior_nasal"
    if meridian_deg < -90.0:
        return "inferior_nasal"
    return "inferior_temporal"


def _point_dict(p: StimulusPoint) -> dict:
    return {
        "meridian_deg": p.meridian_deg,
        "eccentricity_deg": p.eccentricity_deg,
        "seen": p.seen,
        "intensity_db": p.intensity_db,
    }


@dataclass(frozen=True)
class PatientReport:
    patient_id: str
    eye: str
    age_years: int
    sex: str
    diagnosis_label: Optional[str]
    window_meridian_deg: Interval
    window_eccentricity_deg: Interval
    blind_spot: BlindSpotReport
    adjacent_absolute_scotoma: bool
    automated_blind_spot_perimetry_feasible: bool
    scotoma_evidence: tuple[tuple[StimulusPoint, str], ...]
    point_count: int
    unseen_count: int
    quadrant_unseen_fraction: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        bs = self.blind_spot
        return {
            "patient": {
                "patient_id": self.patient_id,
                "eye": self.eye,
                "age_years": self.age_years,
                "sex": self.sex,
                "diagnosis_label": self.diagnosis_label,
            },
            "window": {
                "meridian_deg": list(self.window_meridian_deg),
                "eccentricity_deg": list(self.window_eccentricity_deg),
            },
            "blind_spot": {
                "found": bs.found,
                "centroid_meridian_deg": bs.centroid_meridian_deg,
                "centroid_eccentricity_deg": bs.centroid_eccentricity_deg,
                "within_anatomical_window": bs.within_anatomical_window,
                "member_points": [_point_dict(p) for p in bs.member_points],
                "notes": list(bs.notes),
            },
            "adjacent_absolute_scotoma": self.adjacent_absolute_scotoma,
            "automated_blind_spot_perimetry_feasible": self.automated_blind_spot_perimetry_feasible,
            "scotoma_evidence": [dict(_point_dict(p), zone=z) for p, z in self.scotoma_evidence],
            "point_count": self.point_count,
            "unseen_count": self.unseen_count,
            "quadrant_unseen_fraction": dict(self.quadrant_unseen_fraction),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        bs = self.blind_spot
        lines = [
            f"patient_id: {self.patient_id}",
            f"eye: {self.eye}",
            f"age_years: {self.age_years}",
            f"sex: {self.sex}",
            f"diagnosis_label: {self.diagnosis_label or ''}",
            f"window_meridian_deg: {self.window_meridian_deg[0]:g} .. {self.window_meridian_deg[1]:g}",
            f"window_eccentricity_deg: {self.window_eccentricity_deg[0]:g} .. {self.window_eccentricity_deg[1]:g}",
            f"blind_spot_found: {str(bs.found).lower()}",
        ]
        if bs.found:
            lines.append(f"blind_spot_centroid_meridian_deg: {bs.centroid_meridian_deg:.4f}")
            lines.append(f"blind_spot_centroid_eccentricity_deg: {bs.centroid_eccentricity_deg:.4f}")
            lines.append(f"within_anatomical_window: {str(bs.within_anatomical_window).lower()}")
        lines += [
            f"adjacent_absolute_scotoma: {str(self.adjacent_absolute_scotoma).lower()}",
            f"automated_blind_spot_perimetry_feasible: {str(self.automated_blind_spot_perimetry_feasible).lower()}",
            f"point_count: {self.point_count}",
            f"unseen_count: {self.unseen_count}",
        ]
        lines += [f"unseen_fraction_{q}: {self.quadrant_unseen_fraction[q]:.4f}" for q in QUADRANTS]
        lines += [f"note: {n}" for n in bs.notes]
        lines.append("")
        lines.append("\t".join(POINT_COLUMNS + ("role",)))
        members = {p.position for p in bs.member_points}
        zones = {p.position: z for p, z in self.scotoma_evidence}
        for p in sorted(self._flagged_points(), key=lambda p: p.position):
            role = "blind_spot" if p.position in members else zones.get(p.position, "")
            db = "" if p.intensity_db is None else f"{p.intensity_db:g}"
            lines.append(f"{p.meridian_deg:g}\t{p.eccentricity_deg:g}\t{int(p.seen)}\t{db}\t{role}")
        return "\n".join(lines) + "\n"

    def _flagged_points(self) -> list[StimulusPoint]:
        flagged = {p.position: p for p in self.blind_spot.member_points}
        flagged.update((p.position, p) for p, _ in self.scotoma_evidence)
        return list(flagged.values())


def patient_report(
    cart: Cartogram,
    report: BlindSpotReport,
    config: PerimetryConfig = DEFAULT_CONFIG,
) -> PatientReport:
    """Assemble the features a downstream classifier could consume."""
    mer, ecc = anatomical_window(cart.eye, config)
    scotoma = adjacent_scotoma_check(cart, config)
    totals = {q: 0 for q in QUADRANTS}
    misses = {q: 0 for q in QUADRANTS}
    for p in cart.points:
        q = quadrant_of(p.meridian_deg)
        totals[q] += 1
        misses[q] += not p.seen
    return PatientReport(
        patient_id=cart.patient_id,
        eye=cart.eye.value,
        age_years=cart.age_years,
        sex=cart.sex.value,
        diagnosis_label=cart.diagnosis_label,
        window_meridian_deg=mer,
        window_eccentricity_deg=ecc,
        blind_spot=report,
        adjacent_absolute_scotoma=scotoma.present,
        automated_blind_spot_perimetry_feasible=scotoma.automated_blind_spot_perimetry_feasible,
        scotoma_evidence=scotoma.evidence,
        point_count=len(cart.points),
        unseen_count=sum(misses.values()),
        quadrant_unseen_fraction={q: (misses[q] / totals[q] if totals[q] else 0.0) for q in QUADRANTS},
    )
