"""Reflected-beam synthesis: phase profiles, 2-bit quantization, array factor.

Directions are outward from the panel (theta from the normal, phi azimuth).
Element patterns are isotropic unless an element-factor exponent ``q`` is
given (cos(theta)**q).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import HRISError, InvalidInput
from .geometry import PanelLayout, free_space_wavelength
from .unitcell import LoadBank, SwitchState

_TWO_PI = 2 * math.pi
_TIE = 1e-12


class EmptyGrid(HRISError):
    pass


class DimensionMismatch(HRISError):
    pass


@dataclass(frozen=True)
class Direction:
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (-1e-12 <= self.theta <= math.pi / 2 + 1e-12) or not math.isfinite(self.phi):
            raise InvalidInput(f"theta must lie in [0, pi/2], got {self.theta!r}")
        object.__setattr__(self, "theta", min(max(self.theta, 0.0), math.pi / 2))
        object.__setattr__(self, "phi", math.fmod(self.phi, _TWO_PI) % _TWO_PI)

    @classmethod
    def deg(cls, theta_deg: float, phi_deg: float = 0.0) -> "Direction":
        return cls(math.radians(theta_deg), math.radians(phi_deg))

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi)

    def unit(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


def angular_distance(a: Direction, b: Direction) -> float:
    """Great-circle angle between two directions (radians)."""
    u, v = a.unit(), b.unit()
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(u @ v))


def steering_phase(position, direction: Direction, f: float):
    """k*(x*sin(theta)*cos(phi) + y*sin(theta)*sin(phi)) for one or many positions."""
    pos = np.asarray(position, dtype=float)
    k = _TWO_PI / free_space_wavelength(f)
    st = math.sin(direction.theta)
    return k * (pos[..., 0] * st * math.cos(direction.phi) + pos[..., 1] * st * math.sin(direction.phi))


def required_cell_phase(incident: Direction, target: Direction, position, f: float):
    """Phase-gradient profile redirecting ``incident`` into ``target``, in [0, 2*pi)."""
    total = steering_phase(position, incident, f) + steering_phase(position, target, f)
    return np.mod(-total, _TWO_PI)


def circular_distance(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), _TWO_PI)
    return np.minimum(d, _TWO_PI - d)


def quantize_phase(phi, bank: LoadBank):
    """Nearest-phase switch state; ties go to the lower state index.

    Accepts a scalar (returns a :class:`SwitchState`) or an array (returns an
    int array of state values).
    """
    phases = bank.phases()
    phi_arr = np.asarray(phi, dtype=float)
    dist = circular_distance(phi_arr[..., None], phases)
    best = dist.min(axis=-1, keepdims=True)
    # argmax of the first True picks the lowest index among (near-)ties
    idx = np.argmax(dist <= best + _TIE, axis=-1)
    if phi_arr.ndim == 0:
        return SwitchState(int(idx))
    return idx


def amplitude_weights(layout: PanelLayout, rho: float = 0.5) -> np.ndarray:
    """Reflection amplitude of each element: 1 for split-ring cells, sqrt(1-rho) for hybrid rings."""
    if not 0 <= rho <= 1:
        raise InvalidInput("rho must lie in [0, 1]")
    return np.where(layout.is_hybrid, math.sqrt(1 - rho), 1.0)


def _element_factor(directions_theta, q: float):
    if q == 0:
        return 1.0
    return np.cos(directions_theta) ** q


def array_factor(layout: PanelLayout, gammas, incident: Direction, observe: Direction, f: float,
                 rho: float = 0.5, q: float = 0.0) -> complex:
    gammas = np.asarray(gammas, dtype=complex)
    if gammas.shape != (len(layout),):
        raise DimensionMismatch(f"expected {len(layout)} reflection coefficients, got {gammas.shape}")
    pos = layout.positions
    ph = steering_phase(pos, incident, f) + steering_phase(pos, observe, f)
    w = amplitude_weights(layout, rho) * gammas
    return complex(np.sum(w * np.exp(1j * ph)) * _element_factor(observe.theta, q))


@dataclass(frozen=True)
class GridSpec:
    """Upper-hemisphere sampling; theta = 0 appears once (phi = 0)."""

    theta_step_deg: float = 1.0
    phi_step_deg: float = 1.0
    theta_max_deg: float = 90.0
    theta_min_deg: float = 0.0

    def directions(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (theta, phi) arrays in radians."""
        if self.theta_step_deg <= 0 or self.phi_step_deg <= 0 or self.theta_max_deg < self.theta_min_deg:
            raise EmptyGrid("grid steps must be positive and the theta range non-empty")
        nt = int(round((self.theta_max_deg - self.theta_min_deg) / self.theta_step_deg))
        thetas = self.theta_min_deg + self.theta_step_deg * np.arange(nt + 1)
        thetas = thetas[thetas <= self.theta_max_deg + 1e-9]
        phis = self.phi_step_deg * np.arange(int(round(360.0 / self.phi_step_deg)))
        th, ph = [], []
        for t in thetas:
            if t == 0:
                th.append(0.0)
                ph.append(0.0)
            else:
                th.extend([t] * len(phis))
                ph.extend(phis)
        if not th:
            raise EmptyGrid("grid has no directions")
        return np.radians(th), np.radians(ph)


@dataclass
class FarFieldPattern:
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    frequency: float

    def __len__(self) -> int:
        return len(self.values)

    def peak(self) -> Direction:
        k = int(np.argmax(np.abs(self.values)))
        return Direction(float(self.theta[k]), float(self.phi[k]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_deg", "phi_deg", "af_re", "af_im", "af_db"])
        mag = np.abs(self.values)
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(mag)
        for t, p, v, d in zip(np.degrees(self.theta), np.degrees(self.phi), self.values, db):
            w.writerow([f"{t:.6g}", f"{p:.6g}", f"{v.real:.12g}", f"{v.imag:.12g}", f"{d:.12g}"])
        return buf.getvalue()


def gammas_for(load_matrix, bank: LoadBank) -> np.ndarray:
    """Per-element reflection coefficients for a load matrix (sequence of states)."""
    return bank.reflections()[np.asarray(load_matrix, dtype=int)]


def pattern_from_gammas(layout: PanelLayout, gammas, incident: Direction, f: float,
                        grid: GridSpec | None = None, rho: float = 0.5, q: float = 0.0) -> FarFieldPattern:
    grid = grid or GridSpec()
    gammas = np.asarray(gammas, dtype=complex)
    if gammas.shape != (len(layout),):
        raise DimensionMismatch(f"expected {len(layout)} reflection coefficients, got {gammas.shape}")
    theta, phi = grid.directions()
    pos = layout.positions
    k = _TWO_PI / free_space_wavelength(f)
    w = amplitude_weights(layout, rho) * gammas * np.exp(1j * steering_phase(pos, incident, f))
    u = np.sin(theta) * np.cos(phi)
    v = np.sin(theta) * np.sin(phi)
    values = np.empty(len(theta), dtype=complex)
    # chunked so memory stays bounded for large panels
    step = max(1, 2_000_000 // max(1, len(pos)))
    for s in range(0, len(theta), step):
        ph = k * (np.outer(u[s:s + step], pos[:, 0]) + np.outer(v[s:s + step], pos[:, 1]))
        values[s:s + step] = np.exp(1j * ph) @ w
    values = values * _element_factor(theta, q)
    return FarFieldPattern(theta, phi, values, f)


def pattern(layout: PanelLayout, load_matrix, bank: LoadBank, incident: Direction, f: float,
            grid: GridSpec | None = None, rho: float = 0.5, q: float = 0.0) -> FarFieldPattern:
    """Array factor over ``grid`` with per-element reflections from the load matrix."""
    return pattern_from_gammas(layout, gammas_for(load_matrix, bank), incident, f, grid, rho, q)


def directivity_db(pat: FarFieldPattern, at: Direction, af_at: complex | None = None) -> float:
    """10*log10(|AF(at)|^2 / <|AF|^2>) with sin(theta)-weighted hemisphere average.

    ``af_at`` supplies AF at ``at`` when it is not a grid node; otherwise the
    nearest grid sample is used.
    """
    if len(pat) == 0:
        raise EmptyGrid("pattern has no samples")
    w = np.sin(pat.theta)
    p = np.abs(pat.values) ** 2
    mean = np.sum(w * p) / np.sum(w) if np.sum(w) > 0 else float(np.mean(p))
    if af_at is None:
        d = [angular_distance(at, Direction(float(t), float(ph))) for t, ph in zip(pat.theta, pat.phi)]
        af_at = pat.values[int(np.argmin(d))]
    return 10 * math.log10(abs(af_at) ** 2 / mean)


def continuous_gammas(layout: PanelLayout, incident: Direction, target: Direction, f: float) -> np.ndarray:
    return np.exp(1j * required_cell_phase(incident, target, layout.positions, f))


def quantize_profile(phases, bank: LoadBank, weights=None, optimize_offset: bool = True) -> np.ndarray:
    """Nearest-phase quantization of a whole phase profile.

    A profile is only defined up to a common phase. With ``optimize_offset``
    the common offset is chosen to maximise the coherent sum
    |sum_n w_n * gamma(q_n) * exp(-i*phase_n)|, i.e. the gain toward the
    target; every cell is still rounded to its nearest state. The offset is
    swept over one full turn, visiting every interval on which the quantized
    profile is constant. For a constant-modulus bank this is the exact
    optimum over all 4**N configurations. Offset 0 wins ties.
    """
    phases = np.mod(np.asarray(phases, dtype=float), _TWO_PI)
    q0 = quantize_phase(phases, bank)
    if not optimize_offset or phases.size == 0:
        return q0
    w = np.ones(phases.shape) if weights is None else np.asarray(weights, dtype=float)
    gam = bank.reflections()
    ref = w * np.exp(-1j * phases)

    order = np.argsort(bank.phases(), kind="stable")
    bp = bank.phases()[order]
    gaps = np.diff(np.append(bp, bp[0] + _TWO_PI))
    bounds = bp + gaps / 2  # boundary between sorted state k and k+1
    # offset at which cell n crosses boundary k, measured from a generic start offset
    edge = np.mod(bounds[None, :] - phases[:, None], _TWO_PI)
    flat = np.sort(edge.ravel())
    spacing = np.diff(np.append(flat, flat[0] + _TWO_PI))
    k0 = int(np.argmax(spacing))
    start = flat[k0] + spacing[k0] / 2
    rel = np.mod(edge - start, _TWO_PI)

    q_start = quantize_phase(np.mod(phases + start, _TWO_PI), bank)
    cell, bnd = np.unravel_index(np.argsort(rel, axis=None, kind="stable"), rel.shape)
    t = rel[cell, bnd]
    delta = ref[cell] * (gam[order[(bnd + 1) % len(order)]] - gam[order[bnd]])
    sums = np.sum(ref * gam[q_start]) + np.cumsum(delta)
    # only positions after the last of a group of coincident edges are realisable
    valid = np.diff(np.append(t, _TWO_PI)) > 1e-12
    vals = np.where(valid, np.abs(sums), -1.0)
    k = int(np.argmax(vals))
    c_best = start + t[k] + (np.append(t, _TWO_PI)[k + 1] - t[k]) / 2
    q_best = quantize_phase(np.mod(phases + c_best, _TWO_PI), bank)
    if abs(np.sum(ref * gam[q_start])) > abs(np.sum(ref * gam[q_best])):
        q_best = q_start
    v0 = abs(np.sum(ref * gam[q0]))
    return q_best if abs(np.sum(ref * gam[q_best])) > v0 * (1 + 1e-12) else q0


def quantized_load_matrix(layout: PanelLayout, bank: LoadBank, incident: Direction, target: Direction,
                          f: float, rho: float = 0.5, optimize_offset: bool = True) -> np.ndarray:
    """Per-element switch states steering ``incident`` into ``target``."""
    phases = required_cell_phase(incident, target, layout.positions, f)
    return quantize_profile(phases, bank, amplitude_weights(layout, rho), optimize_offset)


def offset_candidates(phases, bank: LoadBank) -> np.ndarray:
    """Every distinct nearest-phase rounding of ``phases`` under a common offset.

    Returns an (M, N) array of switch states, one row per offset interval on
    which the rounded profile is constant.
    """
    phases = np.mod(np.asarray(phases, dtype=float), _TWO_PI)
    bp = np.sort(bank.phases())
    bounds = bp + np.diff(np.append(bp, bp[0] + _TWO_PI)) / 2
    edges = np.unique(np.round(np.mod(bounds[None, :] - phases[:, None], _TWO_PI), 12))
    mids = (edges + np.diff(np.append(edges, edges[0] + _TWO_PI)) / 2) % _TWO_PI
    cands = quantize_phase(np.mod(phases[None, :] + mids[:, None], _TWO_PI), bank)
    return np.unique(cands, axis=0)


def _nearest_grid_node(theta: np.ndarray, phi: np.ndarray, d: Direction) -> int:
    st = np.sin(theta)
    u = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=1)
    return int(np.argmax(u @ d.unit()))


def pointed_load_matrix(layout: PanelLayout, bank: LoadBank, incident: Direction, target: Direction, f: float,
                        grid: GridSpec | None = None, rho: float = 0.5) -> np.ndarray:
    """2-bit load matrix whose pattern peak sits on the grid node nearest ``target``.

    Candidates are the nearest-phase roundings over all common offsets (see
    :func:`offset_candidates`), tried in order of decreasing gain toward
    ``target``. The first whose ``grid`` pattern peaks at the target node is
    returned; if none does, the highest-gain candidate is returned, which is
    the :func:`quantized_load_matrix` result.
    """
    grid = grid or GridSpec()
    w = amplitude_weights(layout, rho)
    phases = required_cell_phase(incident, target, layout.positions, f)
    cands = offset_candidates(phases, bank)
    gains = np.abs((bank.reflections()[cands] * (w * np.exp(-1j * phases))).sum(axis=1))
    theta, phi = grid.directions()
    node = _nearest_grid_node(theta, phi, target)
    # cheap screen: the node must beat its neighbourhood before a full pattern is computed
    st = np.sin(theta)
    u = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=1)
    near = np.flatnonzero(u @ u[node] >= math.cos(math.radians(3 * max(grid.theta_step_deg, grid.phi_step_deg))))
    k = _TWO_PI / free_space_wavelength(f)
    pos = layout.positions
    obs = k * (np.outer(st[near] * np.cos(phi[near]), pos[:, 0]) + np.outer(st[near] * np.sin(phi[near]), pos[:, 1]))
    steer = np.exp(1j * (obs + steering_phase(pos, incident, f)[None, :]))
    local = np.abs((bank.reflections()[cands] * w) @ steer.T)
    at_node = int(np.flatnonzero(near == node)[0])
    for c in np.argsort(-gains, kind="stable"):
        if int(np.argmax(local[c])) != at_node:
            continue
        pat = pattern(layout, cands[c], bank, incident, f, grid, rho)
        if int(np.argmax(np.abs(pat.values))) == node:
            return cands[c]
    return quantized_load_matrix(layout, bank, incident, target, f, rho)


def load_matrix_to_json(load_matrix) -> str:
    return json.dumps([SwitchState(int(s)).name for s in load_matrix])


def load_matrix_from_json(text: str) -> np.ndarray:
    return np.array([SwitchState[s].value for s in json.loads(text)], dtype=int)
