"""Lookup-table calibration and the sense -> configure -> reflect loop."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import HRISError, InvalidInput
from .fields import (Direction, GridSpec, amplitude_weights, angular_distance, array_factor, gammas_for,
                     quantized_load_matrix)
from .geometry import PanelLayout
from .sensing import Scene, estimate_doa, snapshot_model
from .unitcell import LoadBank, SwitchState

_TIE = 1e-12


class EpisodeError(HRISError):
    def __init__(self, scene_index: int, cause: Exception):
        self.scene_index = scene_index
        self.cause = cause
        super().__init__(f"scene {scene_index}: {cause}")


def direction_grid(thetas_deg=(0, 10, 20, 30, 40, 50, 60), phis_deg=(0, 90, 180, 270)) -> list[Direction]:
    """theta x phi product with the degenerate theta = 0 row collapsed to one node."""
    out = []
    for t in thetas_deg:
        if t == 0:
            out.append(Direction(0.0, 0.0))
        else:
            out.extend(Direction.deg(t, p) for p in phis_deg)
    return out


@dataclass
class CalibrationTable:
    incident_grid: list[Direction]
    target_grid: list[Direction]
    entries: np.ndarray  # (n_incident, n_target, n_elements) switch-state values
    frequency: float

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.entries[i, j]

    def to_dict(self) -> dict:
        return {
            "frequency_hz": self.frequency,
            "incident_grid_deg": [[d.theta_deg, d.phi_deg] for d in self.incident_grid],
            "target_grid_deg": [[d.theta_deg, d.phi_deg] for d in self.target_grid],
            "entries": [
                {"incident": i, "target": j, "states": [SwitchState(int(s)).name for s in self.entries[i, j]]}
                for i in range(len(self.incident_grid)) for j in range(len(self.target_grid))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationTable":
        inc = [Direction.deg(t, p) for t, p in data["incident_grid_deg"]]
        tgt = [Direction.deg(t, p) for t, p in data["target_grid_deg"]]
        rows = data["entries"]
        n_el = len(rows[0]["states"]) if rows else 0
        entries = np.zeros((len(inc), len(tgt), n_el), dtype=int)
        seen = np.zeros((len(inc), len(tgt)), dtype=bool)
        for r in rows:
            entries[r["incident"], r["target"]] = [SwitchState[s].value for s in r["states"]]
            seen[r["incident"], r["target"]] = True
        if not seen.all():
            raise InvalidInput("calibration table is incomplete")
        return cls(inc, tgt, entries, float(data["frequency_hz"]))

    @classmethod
    def from_json(cls, text: str) -> "CalibrationTable":
        return cls.from_dict(json.loads(text))


def build_lut(layout: PanelLayout, bank: LoadBank, incident_grid, target_grid, f: float | None = None,
              rho: float = 0.5) -> CalibrationTable:
    """Quantized load matrix for every (incident, target) grid pair."""
    incident_grid, target_grid = list(incident_grid), list(target_grid)
    if not incident_grid or not target_grid:
        raise InvalidInput("calibration grids must be non-empty")
    f = layout.design_frequency if f is None else f
    entries = np.empty((len(incident_grid), len(target_grid), len(layout)), dtype=int)
    for i, inc in enumerate(incident_grid):
        for j, tgt in enumerate(target_grid):
            entries[i, j] = quantized_load_matrix(layout, bank, inc, tgt, f, rho)
    return CalibrationTable(incident_grid, target_grid, entries, f)


def _nearest_node(grid: list[Direction], d: Direction) -> int:
    dist = np.array([angular_distance(g, d) for g in grid])
    return int(np.flatnonzero(dist <= dist.min() + _TIE)[0])


def lookup_indices(table: CalibrationTable, incident_est: Direction, target_est: Direction) -> tuple[int, int]:
    """Nearest grid pair by great-circle distance; ties go to the lower index.

    Estimates outside the grid hull snap to the nearest boundary node.
    """
    return _nearest_node(table.incident_grid, incident_est), _nearest_node(table.target_grid, target_est)


def lookup(table: CalibrationTable, incident_est: Direction, target_est: Direction) -> np.ndarray:
    i, j = lookup_indices(table, incident_est, target_est)
    return table.entries[i, j]


@dataclass
class StepRecord:
    step: int
    tx_theta_deg: float
    tx_phi_deg: float
    rx_theta_deg: float
    rx_phi_deg: float
    est_tx_theta_deg: float
    est_tx_phi_deg: float
    est_rx_theta_deg: float
    est_rx_phi_deg: float
    tx_error_deg: float
    rx_error_deg: float
    lut_incident: int
    lut_target: int
    achieved_gain_db: float
    ideal_gain_db: float
    loss_db: float
    quantization_loss_db: float
    coincident: bool


@dataclass
class EpisodeLog:
    steps: list[StepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(StepRecord.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for s in self.steps:
            row = asdict(s)
            w.writerow([repr(v) if isinstance(v, float) else int(v) if isinstance(v, bool) else v
                        for v in (row[n] for n in names)])
        return buf.getvalue()


def _gain_db(af: complex) -> float:
    return 20 * math.log10(abs(af)) if af != 0 else -math.inf


def run_episode(layout: PanelLayout, bank: LoadBank, table: CalibrationTable, scenes, rho: float = 0.5,
                grid: GridSpec | None = None) -> EpisodeLog:
    """Sense both nodes, apply the looked-up load matrix, score reflection toward RX.

    ``ideal_gain_db`` is the continuous-phase coherent maximum; the
    quantization-only loss uses the load matrix built from the true directions.
    """
    f = layout.design_frequency
    if abs(table.frequency - f) > 1e-6 * f or table.entries.shape[2] != len(layout):
        raise InvalidInput("calibration table was built for a different layout or frequency")
    ideal = float(np.sum(amplitude_weights(layout, rho) * np.abs(bank.reflections()).max()))
    log = EpisodeLog()
    for n, scene in enumerate(scenes):
        try:
            g1, g2 = snapshot_model(layout, scene, rho)
            tx_est = estimate_doa(g1, layout, 1, grid).direction
            rx_est = estimate_doa(g2, layout, 2, grid).direction
            i, j = lookup_indices(table, tx_est, rx_est)
            tx, rx = scene.tx_direction, scene.rx_direction
            achieved = array_factor(layout, gammas_for(table.entries[i, j], bank), tx, rx, f, rho)
            q_true = quantized_load_matrix(layout, bank, tx, rx, f, rho)
            q_only = array_factor(layout, gammas_for(q_true, bank), tx, rx, f, rho)
        except HRISError as exc:
            raise EpisodeError(n, exc) from exc
        ideal_db = _gain_db(ideal)
        log.steps.append(StepRecord(
            step=n,
            tx_theta_deg=tx.theta_deg, tx_phi_deg=tx.phi_deg,
            rx_theta_deg=rx.theta_deg, rx_phi_deg=rx.phi_deg,
            est_tx_theta_deg=tx_est.theta_deg, est_tx_phi_deg=tx_est.phi_deg,
            est_rx_theta_deg=rx_est.theta_deg, est_rx_phi_deg=rx_est.phi_deg,
            tx_error_deg=math.degrees(angular_distance(tx, tx_est)),
            rx_error_deg=math.degrees(angular_distance(rx, rx_est)),
            lut_incident=i, lut_target=j,
            achieved_gain_db=_gain_db(achieved),
            ideal_gain_db=ideal_db,
            loss_db=ideal_db - _gain_db(achieved),
            quantization_loss_db=ideal_db - _gain_db(q_only),
            coincident=angular_distance(tx, rx) < 1e-9,
        ))
    return log


def random_scenes(count: int, seed: int = 0, theta_max_deg: float = 60.0, **scene_kwargs) -> list[Scene]:
    """Seeded scenes with TX/RX directions uniform in theta <= ``theta_max_deg``."""
    rng = np.random.default_rng(seed)
    scenes = []
    for k in range(count):
        t = rng.uniform(0, theta_max_deg, 2)
        p = rng.uniform(0, 360, 2)
        scenes.append(Scene(Direction.deg(t[0], p[0]), Direction.deg(t[1], p[1]),
                            seed=int(rng.integers(2**31)), **scene_kwargs))
    return scenes
