"""Effective-parameter retrieval for a homogenised metamaterial slab.

Time convention is exp(-i*omega*t): a passive medium has Im(n) >= 0,
Im(eps) >= 0, Im(mu) >= 0 and the slab transmission phase is exp(+i*n*k0*d).

The forward model :func:`slab_forward` (Airy summation of a slab in vacuum) is
the oracle used to round-trip the inversion in :func:`unwrap_branch`.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import C0
from .errors import HRISError, InvalidInput
from .touchstone import SParamTable

TOL_S21 = 1e-6
TOL_Z = 1e-3


class NonFiniteResult(HRISError):
    pass


class DegenerateDenominator(HRISError):
    pass


class TransmissionTooSmall(HRISError):
    pass


class EmptySweep(HRISError):
    pass


@dataclass(frozen=True)
class SlabSpec:
    thickness: float
    f_min: float | None = None
    f_max: float | None = None

    def __post_init__(self):
        if not (self.thickness > 0 and math.isfinite(self.thickness)):
            raise InvalidInput(f"slab thickness must be positive, got {self.thickness!r}")


@dataclass(frozen=True)
class Lorentzian:
    """Single Lorentz oscillator: ``static + strength*f0**2/(f0**2 - f**2 - i*gamma*f)``."""

    static: float = 1.0
    strength: float = 0.0
    f0: float = 1e9
    gamma: float = 0.0

    def __post_init__(self):
        if not self.f0 > 0:
            raise InvalidInput("resonance frequency f0 must be positive")
        if self.gamma < 0:
            raise InvalidInput("damping gamma must be non-negative")

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        return self.static + self.strength * self.f0**2 / (self.f0**2 - f**2 - 1j * self.gamma * f)


@dataclass(frozen=True)
class MaterialModel:
    eps: Lorentzian
    mu: Lorentzian

    def to_dict(self) -> dict:
        return {
            name: {"static": p.static, "strength": p.strength, "f0_hz": p.f0, "gamma_hz": p.gamma}
            for name, p in (("eps", self.eps), ("mu", self.mu))
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialModel":
        def one(d):
            return Lorentzian(float(d["static"]), float(d["strength"]), float(d["f0_hz"]), float(d["gamma_hz"]))

        return cls(one(data["eps"]), one(data["mu"]))


def dng_fixture_model() -> MaterialModel:
    """Double-negative fixture with both oscillators at 4.8 GHz.

    Re(eps) and Re(mu) turn negative just above 4.8 GHz and stay negative
    past 7 GHz (plasma-like zero crossings near 7.6 and 7.3 GHz).
    """
    return MaterialModel(
        eps=Lorentzian(static=1.0, strength=1.5, f0=4.8e9, gamma=0.10e9),
        mu=Lorentzian(static=1.0, strength=1.3, f0=4.8e9, gamma=0.08e9),
    )


def evaluate_material(model: MaterialModel, f):
    """Return ``(eps, mu)`` at frequency ``f`` (scalar or array, Hz)."""
    if np.any(np.asarray(f) <= 0):
        raise InvalidInput("frequency must be positive")
    return model.eps(f), model.mu(f)


def wavenumber(f):
    return 2.0 * np.pi * np.asarray(f, dtype=float) / C0


def slab_forward(eps, mu, d: float, f):
    """S11 and S21 of a homogeneous slab of thickness ``d`` in vacuum.

    Vectorised over ``eps``, ``mu`` and ``f``. The impedance branch has
    Re(z) >= 0 and n = z*eps, which for passive media is the Im(n) >= 0 branch
    and also resolves the lossless double-negative case (eps = mu = -1 -> n = -1).
    """
    eps = np.asarray(eps, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    f = np.asarray(f, dtype=float)
    if d <= 0 or np.any(f <= 0):
        raise InvalidInput("thickness and frequency must be positive")
    if np.any(eps == 0) or np.any(mu == 0) or not (np.all(np.isfinite(eps)) and np.all(np.isfinite(mu))):
        raise InvalidInput("eps and mu must be finite and nonzero")
    z = np.sqrt(mu / eps)
    z = np.where(z.real < 0, -z, z)
    n = z * eps
    r = (z - 1) / (z + 1)
    t = np.exp(1j * n * wavenumber(f) * d)
    denom = 1 - r**2 * t**2
    if np.any(denom == 0):
        raise NonFiniteResult("1 - r^2 t^2 vanished (lossless resonant cavity)")
    s11 = r * (1 - t**2) / denom
    s21 = (1 - r**2) * t / denom
    if not (np.all(np.isfinite(s11)) and np.all(np.isfinite(s21))):
        raise NonFiniteResult("slab response overflowed")
    if s11.ndim == 0:
        return complex(s11), complex(s21)
    return s11, s21


def retrieve_impedance(s11: complex, s21: complex, previous: complex | None = None, tol_z: float = TOL_Z) -> complex:
    """Normalised wave impedance from slab S-parameters, Re(z) >= 0 branch.

    When |Re(z)| < ``tol_z`` the sign is instead chosen closest to ``previous``.
    """
    den = (1 - s11) ** 2 - s21**2
    if den == 0:
        raise DegenerateDenominator("(1 - S11)^2 == S21^2")
    z = cmath.sqrt(((1 + s11) ** 2 - s21**2) / den)
    if abs(z.real) < tol_z and previous is not None:
        return z if abs(z - previous) <= abs(-z - previous) else -z
    return -z if z.real < 0 else z


def _transfer(s11: complex, s21: complex, z: complex) -> complex:
    return s21 / (1 - s11 * (z - 1) / (z + 1))


def retrieve_index(s11: complex, s21: complex, z: complex, d: float, f: float, m: int = 0,
                   tol_s21: float = TOL_S21) -> complex:
    """Refractive index on branch ``m``: (arg T + 2*pi*m - i*ln|T|)/(k0*d)."""
    if abs(s21) <= tol_s21:
        raise TransmissionTooSmall(f"|S21| = {abs(s21):.3g} <= {tol_s21:g}")
    T = _transfer(s11, s21, z)
    k0d = float(wavenumber(f)) * d
    return complex(cmath.phase(T) + 2 * math.pi * m, -math.log(abs(T))) / k0d


@dataclass
class EffectiveParams:
    """Per-frequency retrieval results; gap rows hold NaN."""

    frequency: np.ndarray
    n: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    mu: np.ndarray
    branch: np.ndarray
    gap: np.ndarray

    def __len__(self) -> int:
        return len(self.frequency)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_hz", "n_re", "n_im", "z_re", "z_im", "eps_re", "eps_im", "mu_re", "mu_im",
                    "branch", "gap_flag"])
        for k in range(len(self)):
            w.writerow([repr(float(self.frequency[k]))]
                       + [repr(float(p)) for v in (self.n[k], self.z[k], self.eps[k], self.mu[k])
                          for p in (v.real, v.imag)]
                       + [int(self.branch[k]), int(self.gap[k])])
        return buf.getvalue()


def _nearest_branch(arg_T: float, k0d: float, target_re: float) -> int:
    m = round((target_re * k0d - arg_T) / (2 * math.pi))
    # check neighbours explicitly so the choice is locally optimal
    return min((m - 1, m, m + 1), key=lambda mm: (abs((arg_T + 2 * math.pi * mm) / k0d - target_re), mm))


def unwrap_branch(table: SParamTable, slab: SlabSpec, initial_branch: int | None = None,
                  index_hint: complex | None = None, tol_s21: float = TOL_S21,
                  tol_z: float = TOL_Z) -> EffectiveParams:
    """Full-sweep retrieval with branch continuity.

    The first valid point uses ``initial_branch`` if given, else the branch
    closest to ``index_hint``, else m = 0 (thin-slab guess). Every later point
    takes the branch whose index is closest to the previous valid point;
    inside or just after a gap the target is instead the linear extrapolation
    of the last two tracked indices. Points with |S21| <= ``tol_s21`` or a degenerate impedance are gaps. A
    weak but nonzero S21 still updates the branch tracking so that continuity
    survives a deep resonance; its values are not reported.
    """
    if len(table) < 2:
        raise EmptySweep("retrieval needs at least two frequency points")
    f = table.frequency
    s11, s21 = table.s11, table.s21
    N = len(f)
    n = np.full(N, np.nan + 1j * np.nan)
    z = np.full(N, np.nan + 1j * np.nan)
    branch = np.zeros(N, dtype=int)
    gap = np.zeros(N, dtype=bool)

    prev_n = prev_z = None
    track: list[tuple[float, float]] = []  # (frequency, Re n) of the last two tracked points
    for k in range(N):
        weak = abs(s21[k]) <= tol_s21
        if weak and not (s21[k] != 0 and cmath.isfinite(s21[k])):
            gap[k] = True
            continue
        try:
            zk = retrieve_impedance(s11[k], s21[k], prev_z, tol_z)
        except DegenerateDenominator:
            gap[k] = True
            continue
        k0d = float(wavenumber(f[k])) * slab.thickness
        T = _transfer(s11[k], s21[k], zk)
        if T == 0 or not cmath.isfinite(T):
            gap[k] = True
            continue
        arg_T = cmath.phase(T)
        if prev_n is not None:
            target = prev_n.real
            inside_gap = weak or k == 0 or gap[k - 1]
            if inside_gap and len(track) == 2:
                # across a resonance gap Re(n) can swing by more than half a branch
                # spacing per sample; follow the local slope instead of the last value
                (fa, na), (fb, nb) = track
                target = nb + (nb - na) * (f[k] - fb) / (fb - fa)
            m = _nearest_branch(arg_T, k0d, target)
        elif initial_branch is not None:
            m = int(initial_branch)
        elif index_hint is not None:
            m = _nearest_branch(arg_T, k0d, complex(index_hint).real)
        else:
            m = 0
        nk = complex(arg_T + 2 * math.pi * m, -math.log(abs(T))) / k0d
        prev_n, prev_z = nk, zk
        track = (track + [(float(f[k]), nk.real)])[-2:]
        if weak:
            # ill-conditioned point: still carries branch continuity, but is never emitted
            gap[k] = True
            continue
        n[k], z[k], branch[k] = nk, zk, m

    if gap.all():
        raise EmptySweep("every point of the sweep was a gap")
    with np.errstate(invalid="ignore"):
        eps, mu = n / z, n * z
    return EffectiveParams(frequency=f, n=n, z=z, eps=eps, mu=mu, branch=branch, gap=gap)


def classify_dng_bands(params: EffectiveParams) -> list[tuple[float, float]]:
    """Maximal frequency intervals with Re(eps) < 0 and Re(mu) < 0.

    Interior interval edges sit halfway between the neighbouring samples;
    a band touching the sweep boundary ends at the boundary sample.
    """
    if len(params) == 0:
        raise InvalidInput("empty parameter set")
    f = params.frequency
    with np.errstate(invalid="ignore"):
        dng = (~params.gap) & (params.eps.real < 0) & (params.mu.real < 0)
    bands = []
    k = 0
    N = len(f)
    while k < N:
        if not dng[k]:
            k += 1
            continue
        start = k
        while k + 1 < N and dng[k + 1]:
            k += 1
        lo = f[0] if start == 0 else 0.5 * (f[start - 1] + f[start])
        hi = f[-1] if k == N - 1 else 0.5 * (f[k] + f[k + 1])
        bands.append((float(lo), float(hi)))
        k += 1
    return bands


def forward_table(model: MaterialModel, slab: SlabSpec, frequency, reference_impedance: float = 50.0) -> SParamTable:
    """Sweep :func:`slab_forward` over ``frequency`` into an S-parameter table (reciprocal, symmetric)."""
    frequency = np.asarray(frequency, dtype=float)
    eps, mu = evaluate_material(model, frequency)
    s11, s21 = slab_forward(eps, mu, slab.thickness, frequency)
    return SParamTable.from_arrays(frequency, s11, s21, reference_impedance=reference_impedance)
