"""Wavelength rules, hybrid-cell fit check and the interleaved panel layout.

Panel grid: reflective cells on a square lattice of pitch lambda/8. Every 4th
site in both axes (pitch lambda/2) hosts a sensing cell of group A (pol X,
feeder 1); group B (pol Y, feeder 2) sits on the same sub-lattice shifted by
two sites (lambda/4) along the interleave axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import C0
from .errors import HRISError, InvalidInput

SENSE_STRIDE = 4  # lambda/2 in units of the lambda/8 pitch
SENSE_OFFSET = 2  # lambda/4
SPACING_TOLERANCE = 0.05


class PanelTooSmall(HRISError):
    pass


class Kind(str, Enum):
    SENSE_A = "SenseA"
    SENSE_B = "SenseB"
    REFLECT = "Reflect"


class Polarization(str, Enum):
    X = "X"
    Y = "Y"


def free_space_wavelength(f: float) -> float:
    if not f > 0:
        raise InvalidInput("frequency must be positive")
    return C0 / f


def guided_quarter_wave(f: float, eps_r: float) -> float:
    """lambda_g/4 = lambda/(4*sqrt(eps_r))."""
    if eps_r < 1:
        raise InvalidInput("relative permittivity must be >= 1")
    return free_space_wavelength(f) / (4.0 * math.sqrt(eps_r))


@dataclass(frozen=True)
class UnitCellSpec:
    """Hybrid cell dimensions (SI units). Defaults are the 5.5 GHz design."""

    cell_pitch: float = 7.0e-3
    outer_ring_diameter: float = 6.4e-3
    inner_disc_diameter: float = 3.8e-3
    substrate_thickness: float = 0.8e-3
    eps_ring: float = 3.5
    eps_disc: float = 10.2
    design_frequency: float = 5.5e9

    def __post_init__(self):
        if not (0 < self.inner_disc_diameter < self.outer_ring_diameter < self.cell_pitch):
            raise InvalidInput(
                "need 0 < inner_disc_diameter < outer_ring_diameter < cell_pitch, got "
                f"{self.inner_disc_diameter}, {self.outer_ring_diameter}, {self.cell_pitch}"
            )
        if self.eps_ring < 1 or self.eps_disc < 1:
            raise InvalidInput("relative permittivities must be >= 1")
        if self.substrate_thickness <= 0 or self.design_frequency <= 0:
            raise InvalidInput("substrate thickness and design frequency must be positive")


@dataclass
class FitCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class FitReport:
    wavelength: float
    eighth_wavelength: float
    guided_quarter: float
    checks: list[FitCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'}: hybrid cell fit"]
        for c in self.checks:
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "wavelength_m": self.wavelength,
            "eighth_wavelength_m": self.eighth_wavelength,
            "guided_quarter_wave_m": self.guided_quarter,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def check_fit(spec: UnitCellSpec, slack: float = 0.0) -> FitReport:
    """Check that the miniaturised disc antenna fits the lambda/8 cell.

    ``slack`` lets the disc exceed lambda_g/4 by a relative amount; the shorting
    pin only ever shrinks the disc, so the default is 0.
    """
    f = spec.design_frequency
    lam = free_space_wavelength(f)
    eighth = lam / 8.0
    quarter_g = guided_quarter_wave(f, spec.eps_disc)
    mm = 1e3
    checks = [
        FitCheck(
            "guided quarter wave below lambda/8",
            quarter_g < eighth,
            f"lambda_g/4 = {quarter_g * mm:.4f} mm {'<' if quarter_g < eighth else '>='} "
            f"lambda/8 = {eighth * mm:.4f} mm (eps_disc = {spec.eps_disc:g}, needs > 4)",
        ),
        FitCheck(
            "disc within guided quarter wave",
            spec.inner_disc_diameter <= quarter_g * (1 + slack),
            f"disc {spec.inner_disc_diameter * mm:.4f} mm vs lambda_g/4 = {quarter_g * mm:.4f} mm"
            + (f" (+{slack:.0%} slack)" if slack else ""),
        ),
    ]
    ring_clear = spec.cell_pitch - spec.outer_ring_diameter
    disc_clear = spec.outer_ring_diameter - spec.inner_disc_diameter
    checks.append(
        FitCheck(
            "nesting clearances",
            ring_clear > 0 and disc_clear > 0,
            f"pitch - ring = {ring_clear * mm:.4f} mm, ring - disc = {disc_clear * mm:.4f} mm",
        )
    )
    return FitReport(lam, eighth, quarter_g, checks)


@dataclass(frozen=True)
class Element:
    x: float
    y: float
    kind: Kind
    pol: Polarization
    feeder: int | None = None


@dataclass
class PanelLayout:
    elements: list[Element]
    design_frequency: float
    panel_extent: tuple[float, float]
    interleave_axis: str = "x"

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def positions(self) -> np.ndarray:
        return np.array([[e.x, e.y] for e in self.elements], dtype=float).reshape(-1, 2)

    def indices(self, kind: Kind) -> np.ndarray:
        return np.array([i for i, e in enumerate(self.elements) if e.kind == kind], dtype=int)

    def group_indices(self, group: int) -> np.ndarray:
        return self.indices(Kind.SENSE_A if group == 1 else Kind.SENSE_B)

    @property
    def is_hybrid(self) -> np.ndarray:
        return np.array([e.kind != Kind.REFLECT for e in self.elements], dtype=bool)

    def to_dict(self) -> dict:
        return {
            "design_frequency_hz": self.design_frequency,
            "panel_extent_m": list(self.panel_extent),
            "interleave_axis": self.interleave_axis,
            "elements": [
                {"x_m": e.x, "y_m": e.y, "kind": e.kind.value, "pol": e.pol.value, "feeder": e.feeder}
                for e in self.elements
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "PanelLayout":
        elements = [
            Element(float(e["x_m"]), float(e["y_m"]), Kind(e["kind"]), Polarization(e["pol"]),
                    None if e.get("feeder") is None else int(e["feeder"]))
            for e in data["elements"]
        ]
        ext = data["panel_extent_m"]
        return cls(elements, float(data["design_frequency_hz"]), (float(ext[0]), float(ext[1])),
                   data.get("interleave_axis", "x"))

    @classmethod
    def from_json(cls, text: str) -> "PanelLayout":
        return cls.from_dict(json.loads(text))


def generate_layout(panel_cells_x: int, panel_cells_y: int, f: float, interleave_axis: str = "x",
                    pitch: float | None = None) -> PanelLayout:
    """Build the interleaved HRIS panel.

    ``pitch`` overrides the lambda/8 reflective pitch (e.g. a fabricated 7 mm
    cell); all sensing spacings follow it in grid units. The panel is centred
    on the origin.
    """
    if panel_cells_x < 8 or panel_cells_y < 8:
        raise PanelTooSmall(f"panel must be at least 8x8 cells, got {panel_cells_x}x{panel_cells_y}")
    if interleave_axis not in ("x", "y"):
        raise InvalidInput("interleave_axis must be 'x' or 'y'")
    p = free_space_wavelength(f) / 8.0 if pitch is None else float(pitch)
    cx, cy = (panel_cells_x - 1) / 2.0, (panel_cells_y - 1) / 2.0
    elements = []
    for row in range(panel_cells_y):
        for col in range(panel_cells_x):
            along, across = (col, row) if interleave_axis == "x" else (row, col)
            if across % SENSE_STRIDE == 0 and along % SENSE_STRIDE == 0:
                kind, pol, feeder = Kind.SENSE_A, Polarization.X, 1
            elif across % SENSE_STRIDE == 0 and along % SENSE_STRIDE == SENSE_OFFSET:
                kind, pol, feeder = Kind.SENSE_B, Polarization.Y, 2
            else:
                kind, pol, feeder = Kind.REFLECT, Polarization.X, None
            elements.append(Element((col - cx) * p, (row - cy) * p, kind, pol, feeder))
    return PanelLayout(elements, f, (panel_cells_x * p, panel_cells_y * p), interleave_axis)


@dataclass
class Violation:
    rule: str
    indices: list[int]
    message: str


@dataclass
class ValidationReport:
    tolerance: float
    deviations: dict[str, float] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)
    note: str = ("'almost lambda/2' is read as within the relative tolerance above; "
                 "the tolerance is a toolkit choice")

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "tolerance": self.tolerance,
            "deviations": self.deviations,
            "violations": [vars(v) for v in self.violations],
            "note": self.note,
        }


def _nearest(points: np.ndarray, others: np.ndarray | None = None):
    """Nearest-neighbour displacement from each point to ``others`` (or its own set)."""
    ref = points if others is None else others
    d = points[:, None, :] - ref[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    if others is None:
        np.fill_diagonal(dist, np.inf)
    j = np.argmin(dist, axis=1)
    return dist[np.arange(len(points)), j], d[np.arange(len(points)), j]


def validate_layout(layout: PanelLayout, tolerance: float = SPACING_TOLERANCE) -> ValidationReport:
    """Check every panel rule; deviations are relative to the nominal spacing."""
    rep = ValidationReport(tolerance)
    els = layout.elements
    lam = free_space_wavelength(layout.design_frequency)
    pos = layout.positions

    def flag(rule, idx, msg):
        rep.violations.append(Violation(rule, [int(i) for i in idx], msg))

    bad = [i for i, e in enumerate(els)
           if (e.kind == Kind.SENSE_A and e.feeder != 1) or (e.kind == Kind.SENSE_B and e.feeder != 2)
           or (e.kind == Kind.REFLECT and e.feeder is not None)]
    if bad:
        flag("feeder_group", bad, "SenseA must use feeder 1, SenseB feeder 2, Reflect none")

    a = layout.indices(Kind.SENSE_A)
    b = layout.indices(Kind.SENSE_B)
    if len(a) == 0 or len(b) == 0:
        flag("sensing_groups", [], "both sensing groups must be present")
    pols_a = {els[i].pol for i in a}
    pols_b = {els[i].pol for i in b}
    if len(pols_a) > 1 or len(pols_b) > 1 or (pols_a and pols_a == pols_b):
        same = [int(i) for i in a if els[i].pol in pols_b] + [int(i) for i in b if els[i].pol in pols_a]
        flag("polarization", same, "SenseA and SenseB must have single, mutually orthogonal polarizations")

    if len(pos) > 1:
        dist, _ = _nearest(pos)
        dup = np.flatnonzero(dist < 1e-12 * lam)
        if len(dup):
            flag("site_overlap", dup, "elements share a grid site")
        dev = float(np.max(np.abs(dist - lam / 8) / (lam / 8)))
        rep.deviations["grid_pitch"] = dev
        if dev > tolerance:
            worst = np.flatnonzero(np.abs(dist - lam / 8) / (lam / 8) > tolerance)
            flag("grid_pitch", worst, f"grid pitch deviates {dev:.2%} from lambda/8")

    for name, idx in (("SenseA", a), ("SenseB", b)):
        if len(idx) < 2:
            continue
        dist, _ = _nearest(pos[idx])
        dev = float(np.max(np.abs(dist - lam / 2) / (lam / 2)))
        rep.deviations[f"{name}_spacing"] = dev
        if dev > tolerance:
            flag(f"{name}_spacing", idx[np.abs(dist - lam / 2) / (lam / 2) > tolerance],
                 f"{name} spacing deviates {dev:.2%} from lambda/2")

    if len(a) and len(b):
        _, disp = _nearest(pos[b], pos[a])
        ax = 0 if layout.interleave_axis == "x" else 1
        along = np.abs(disp[:, ax])
        across = np.abs(disp[:, 1 - ax])
        q = lam / 4
        err = np.maximum(np.abs(along - q), across) / q
        dev = float(err.max())
        rep.deviations["interleave_offset"] = dev
        if dev > tolerance:
            flag("interleave_offset", b[err > tolerance],
                 f"SenseB offset from SenseA deviates {dev:.2%} from lambda/4 along {layout.interleave_axis}")
    return rep
