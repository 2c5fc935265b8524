"""Independent reference computations used by the tests.

None of these call into the code path they check.
"""

import cmath
import itertools
import math

import numpy as np

C0 = 299792458.0


def slab_abcd(eps, mu, d, f):
    """Slab S-parameters from the transmission-line ABCD matrix (exp(-i w t))."""
    z = cmath.sqrt(mu / eps)
    if z.real < 0:
        z = -z
    n = z * eps
    th = n * 2 * math.pi * f / C0 * d
    A = D = cmath.cos(th)
    B = -1j * z * cmath.sin(th)
    C = -1j * cmath.sin(th) / z
    den = A + B + C + D
    return (A + B - C - D) / den, 2 / den


def lorentz(static, strength, f0, gamma, f):
    return static + strength * f0**2 / (f0**2 - f**2 - 1j * gamma * f)


def exhaustive_best(ref, gammas):
    """max over all 4**N state assignments of |sum_n gamma[q_n] * ref_n|."""
    N = len(ref)
    combos = np.array(list(itertools.product(range(len(gammas)), repeat=N)))
    return float(np.abs((np.asarray(gammas)[combos] * ref).sum(axis=1)).max())


def mc_two_bit_loss_db(n_cells, trials, rng):
    """Mean 2-bit quantization loss for random required phases, nearest rounding."""
    levels = np.arange(4) * np.pi / 2
    losses = []
    for _ in range(trials):
        phi = rng.uniform(0, 2 * np.pi, n_cells)
        d = np.angle(np.exp(1j * (phi[:, None] - levels[None, :])))
        err = d[np.arange(n_cells), np.argmin(np.abs(d), axis=1)]
        losses.append(-20 * math.log10(abs(np.mean(np.exp(1j * err)))))
    return float(np.mean(losses))


def af_loop(positions, weights, gammas, inc, obs, f):
    """Array factor by an explicit per-element loop over unit vectors."""
    k = 2 * math.pi * f / C0
    ui = (math.sin(inc[0]) * math.cos(inc[1]), math.sin(inc[0]) * math.sin(inc[1]))
    uo = (math.sin(obs[0]) * math.cos(obs[1]), math.sin(obs[0]) * math.sin(obs[1]))
    total = 0j
    for (x, y), w, g in zip(positions, weights, gammas):
        total += w * g * cmath.exp(1j * k * (x * (ui[0] + uo[0]) + y * (ui[1] + uo[1])))
    return total


def parallel_resonance(C, L, L_pin):
    L_eff = L if math.isinf(L_pin) else L * L_pin / (L + L_pin)
    return 1 / (2 * math.pi * math.sqrt(L_eff * C))


def random_lorentz_params(rng):
    """Random passive Lorentz parameters (eps_s, F, f0, gamma) as used by the round-trip tests."""
    return (rng.uniform(1, 4), rng.uniform(0, 3), rng.uniform(4e9, 7e9), rng.uniform(0.05e9, 0.5e9))
