"""Interleaved sensing arrays: snapshot model and beam-scan DoA estimation.

Group 1 (SenseA, pol X) looks at the TX node, group 2 (SenseB, pol Y) at the
RX node. Orthogonal polarization is modelled as a scalar cross-pol leakage
amplitude: each group also sees the other node's wave scaled by ``leak``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import C0
from .errors import HRISError, InvalidInput
from .fields import Direction, GridSpec, steering_phase
from .geometry import PanelLayout

DEFAULT_LEAK = 10 ** (-30 / 20)
ISOLATION_CAP_DB = 300.0


class MissingSensingGroup(HRISError):
    pass


@dataclass(frozen=True)
class Scene:
    tx_direction: Direction
    rx_direction: Direction
    tx_amplitude: complex = 1.0
    rx_amplitude: complex = 1.0
    snr_db: float = 30.0
    snapshots: int = 64
    seed: int = 0
    leak: float = DEFAULT_LEAK

    def __post_init__(self):
        if self.snapshots < 1:
            raise InvalidInput("snapshots must be >= 1")
        if not (np.isfinite(self.tx_amplitude) and np.isfinite(self.rx_amplitude)):
            raise InvalidInput("amplitudes must be finite")
        if self.leak < 0:
            raise InvalidInput("leak must be non-negative")


@dataclass
class Snapshot:
    group: int
    element_indices: np.ndarray
    samples: np.ndarray  # elements x snapshots

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["element", "snapshot", "re", "im"])
        for i, el in enumerate(self.element_indices):
            for k, v in enumerate(self.samples[i]):
                w.writerow([int(el), k, repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


@dataclass
class DoAEstimate:
    direction: Direction
    spectrum_peak: float
    group: int

    def to_dict(self) -> dict:
        return {"theta_deg": self.direction.theta_deg, "phi_deg": self.direction.phi_deg,
                "peak": self.spectrum_peak, "group": self.group}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def steering_vector(positions, direction: Direction, f: float) -> np.ndarray:
    return np.exp(1j * steering_phase(positions, direction, f))


def _group_positions(layout: PanelLayout, group: int):
    idx = layout.group_indices(group)
    if len(idx) == 0:
        raise MissingSensingGroup(f"layout has no elements in sensing group {group}")
    return idx, layout.positions[idx]


def snapshot_model(layout: PanelLayout, scene: Scene, rho: float = 0.5) -> tuple[Snapshot, Snapshot]:
    """Simulate both groups' baseband samples.

    Each node transmits a narrowband tone whose phase is independent per
    snapshot (unit modulus). Noise is circular Gaussian with per-element power
    set by ``snr_db`` relative to the intended source. All randomness comes
    from ``numpy.random.default_rng(scene.seed)``, drawn in a fixed order.
    """
    if not 0 <= rho <= 1:
        raise InvalidInput("rho must lie in [0, 1]")
    idx1, pos1 = _group_positions(layout, 1)
    idx2, pos2 = _group_positions(layout, 2)
    f = layout.design_frequency
    K = scene.snapshots
    rng = np.random.default_rng(scene.seed)
    s_tx = np.exp(1j * rng.uniform(0, 2 * np.pi, K))
    s_rx = np.exp(1j * rng.uniform(0, 2 * np.pi, K))
    amp = math.sqrt(rho)

    out = []
    for group, idx, pos, (a_int, d_int, s_int), (a_lk, d_lk, s_lk) in (
        (1, idx1, pos1, (scene.tx_amplitude, scene.tx_direction, s_tx),
         (scene.rx_amplitude, scene.rx_direction, s_rx)),
        (2, idx2, pos2, (scene.rx_amplitude, scene.rx_direction, s_rx),
         (scene.tx_amplitude, scene.tx_direction, s_tx)),
    ):
        X = amp * (a_int * np.outer(steering_vector(pos, d_int, f), s_int)
                   + scene.leak * a_lk * np.outer(steering_vector(pos, d_lk, f), s_lk))
        if math.isfinite(scene.snr_db):
            sigma2 = rho * abs(a_int) ** 2 / 10 ** (scene.snr_db / 10)
            noise = rng.standard_normal((len(idx), K)) + 1j * rng.standard_normal((len(idx), K))
            X = X + math.sqrt(sigma2 / 2) * noise
        out.append(Snapshot(group, idx, X))
    return out[0], out[1]


def _manifold(pos: np.ndarray, theta, phi, f: float) -> np.ndarray:
    k = 2 * np.pi * f / C0
    u = np.sin(theta) * np.cos(phi)
    v = np.sin(theta) * np.sin(phi)
    return np.exp(1j * k * (np.outer(u, pos[:, 0]) + np.outer(v, pos[:, 1])))


_MANIFOLD_CACHE: dict = {}


def _grid_manifold(pos: np.ndarray, grid: GridSpec, f: float):
    key = (pos.tobytes(), grid, f)
    hit = _MANIFOLD_CACHE.get(key)
    if hit is None:
        theta, phi = grid.directions()
        if len(_MANIFOLD_CACHE) > 16:
            _MANIFOLD_CACHE.clear()
        A = _manifold(pos, theta, phi, f)
        hit = _MANIFOLD_CACHE[key] = (theta, phi, A, np.ascontiguousarray(A.conj()))
    return hit


def _spectrum_from_cov(A: np.ndarray, A_conj: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Bartlett power a^H R a / |a|^2, with R = X X^H / K (equals |a^H X|^2 / (|a|^2 K))."""
    B = A_conj @ R
    B *= A
    return B.sum(axis=1).real / A.shape[1]


def beam_scan(X: np.ndarray, pos: np.ndarray, theta, phi, f: float) -> np.ndarray:
    """Beam-scan spectrum ||a^H X||^2 / (||a||^2 K) at the given directions."""
    A = _manifold(pos, np.atleast_1d(theta), np.atleast_1d(phi), f)
    Y = A.conj() @ X
    return np.sum(np.abs(Y) ** 2, axis=1) / (pos.shape[0] * X.shape[1])


def _parabolic_offset(pm: float, p0: float, pp: float) -> float:
    den = pm - 2 * p0 + pp
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (pm - pp) / den, -0.5, 0.5))


def _fold(theta: float, phi: float) -> tuple[float, float]:
    # negative theta is the same direction mirrored through the normal
    if theta < 0:
        theta, phi = -theta, phi + np.pi
    return min(theta, np.pi / 2), phi


def estimate_doa(snapshot: Snapshot, layout: PanelLayout, group: int | None = None,
                 grid: GridSpec | None = None, refine_iterations: int = 8) -> DoAEstimate:
    """Beam-scan DoA over ``grid`` followed by parabolic refinement.

    Refinement fits a parabola through three spectrum samples along theta,
    then along phi, and repeats with the step halved each round.
    """
    group = snapshot.group if group is None else group
    grid = grid or GridSpec()
    idx, pos = _group_positions(layout, group)
    X = snapshot.samples
    if X.shape[0] != len(idx):
        raise InvalidInput(f"snapshot has {X.shape[0]} rows, group {group} has {len(idx)} elements")
    f = layout.design_frequency
    theta, phi, A, A_conj = _grid_manifold(pos, grid, f)
    R = X @ X.conj().T / X.shape[1]
    P = _spectrum_from_cov(A, A_conj, R)
    k = int(np.argmax(P))
    th, ph, p0 = float(theta[k]), float(phi[k]), float(P[k])
    dth = math.radians(grid.theta_step_deg)
    dph = math.radians(grid.phi_step_deg)

    def P_at(t, p):
        t, p = _fold(t, p)
        return float(beam_scan(X, pos, t, p, f)[0])

    for _ in range(refine_iterations):
        pm, pp = P_at(th - dth, ph), P_at(th + dth, ph)
        th = th + _parabolic_offset(pm, p0, pp) * dth
        th, ph = _fold(th, ph)
        if th > 1e-9:
            pm, pp = P_at(th, ph - dph), P_at(th, ph + dph)
            ph = ph + _parabolic_offset(pm, P_at(th, ph), pp) * dph
        p0 = P_at(th, ph)
        dth /= 2
        dph /= 2
    if th <= 1e-9:
        th, ph = 0.0, 0.0
    return DoAEstimate(Direction(th, ph), p0, group)


def array_gain(positions, steer: Direction, source: Direction, f: float) -> float:
    """Power gain |a(steer)^H a(source)|^2 / N of a conventional beam."""
    a = steering_vector(positions, steer, f)
    b = steering_vector(positions, source, f)
    return float(abs(np.vdot(a, b)) ** 2 / len(a))


def isolation_report(layout: PanelLayout, scene: Scene) -> dict[int, float]:
    """Intended-to-leaked power ratio (dB) per group after beamforming to the intended node.

    Capped at 300 dB when the leaked term vanishes.
    """
    f = layout.design_frequency
    out = {}
    for group, (a_int, d_int), (a_lk, d_lk) in (
        (1, (scene.tx_amplitude, scene.tx_direction), (scene.rx_amplitude, scene.rx_direction)),
        (2, (scene.rx_amplitude, scene.rx_direction), (scene.tx_amplitude, scene.tx_direction)),
    ):
        _, pos = _group_positions(layout, group)
        g_int = array_gain(pos, d_int, d_int, f)
        g_lk = array_gain(pos, d_int, d_lk, f)
        p_int = abs(a_int) ** 2 * g_int
        p_lk = (scene.leak * abs(a_lk)) ** 2 * g_lk
        if p_lk <= 0 or p_int / p_lk > 10 ** (ISOLATION_CAP_DB / 10):
            out[group] = ISOLATION_CAP_DB
        else:
            out[group] = 10 * math.log10(p_int / p_lk)
    return out
