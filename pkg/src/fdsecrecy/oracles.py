"""Brute-force references for the solvers.

* :func:`scalar_sum_secrecy_oracle` grids the power simplex of a
  single-antenna instance and evaluates the secrecy sum in closed form.
* :func:`adversarial_error_search` grids every error ball (radius levels
  ``{0, eps/2, eps}`` times a deterministic direction grid) and returns the
  worst-case SINRs a design sees.
"""
import math
from dataclasses import dataclass

import numpy as np

from .channel import SystemInstance, WorstCaseRates, _qf_many, db_to_linear

ORACLE_CHUNK = 256
DINKELBACH_ITERS = 100


# --- scalar sum-secrecy oracle ---------------------------------------------

@dataclass
class ScalarOracleResult:
    sum_max: float
    split: tuple          # (phi1, psi1, phi2, psi2) at the maximum
    steps: int


def _simplex(p, steps):
    """Grid points ``(phi, psi)`` with ``phi + psi <= p`` and step ``p/steps``."""
    i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
    keep = i + j <= steps
    return i[keep] * p / steps, j[keep] * p / steps


def scalar_sum_secrecy_oracle(inst, steps=200):
    """Exhaustive power-grid maximum of ``R1 + R2 - RE`` for M1 = M2 = 1.

    Every pair of grid points of the two users' simplices is evaluated; the
    result is clamped at 0 (the all-zero split gives 0).
    """
    if inst.m1 != 1 or inst.m2 != 1:
        raise ValueError("scalar oracle needs single-antenna users")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    g21, g12 = abs(inst.h21[0]) ** 2, abs(inst.h12[0]) ** 2
    gz1, gz2 = abs(inst.z1[0]) ** 2, abs(inst.z2[0]) ** 2
    n0 = inst.n0
    phi1, psi1 = _simplex(inst.p1, steps)
    phi2, psi2 = _simplex(inst.p2, steps)
    r1 = np.log2(1.0 + g21 * phi1 / (n0 + g21 * psi1))
    r2 = np.log2(1.0 + g12 * phi2 / (n0 + g12 * psi2))
    a1, b1 = gz1 * phi1, gz1 * psi1
    a2, b2 = gz2 * phi2, gz2 * psi2
    best, arg = 0.0, (0.0, 0.0, 0.0, 0.0)
    for lo in range(0, r1.size, ORACLE_CHUNK):
        s = slice(lo, lo + ORACLE_CHUNK)
        val = (r1[s, None] + r2[None, :]
               - np.log2(1.0 + (a1[s, None] + a2[None, :])
                         / (n0 + b1[s, None] + b2[None, :])))
        k = int(np.argmax(val))
        v = float(val.flat[k])
        if v > best:
            i, j = divmod(k, r2.size)
            best = v
            arg = (float(phi1[lo + i]), float(psi1[lo + i]),
                   float(phi2[j]), float(psi2[j]))
    return ScalarOracleResult(best, arg, steps)


def random_scalar_instance(seed, p_db=3.0, n0=1.0):
    """Seeded single-antenna instance with CN(0, 1) channels."""
    rng = np.random.default_rng(seed)
    c = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / math.sqrt(2.0)
    p = db_to_linear(p_db)
    return SystemInstance(1, 1, c[0:1], c[1:2], c[2:3], c[3:4], n0=n0, p1=p, p2=p)


# --- adversarial error search ----------------------------------------------

def direction_grid(m, steps):
    """Deterministic unit vectors in ``C^m`` (m <= 2).

    ``m = 1``: ``steps`` phases. ``m = 2``: hyperspherical angles
    ``(cos a e^{i b}, sin a e^{i c})`` with ``a`` on ``steps`` levels in
    ``[0, pi/2]`` and ``b, c`` on ``steps`` levels each in ``[0, 2 pi)``.
    """
    if m == 1:
        ph = 2 * np.pi * np.arange(steps) / steps
        return np.exp(1j * ph)[:, None]
    if m == 2:
        a = np.linspace(0.0, np.pi / 2, steps)
        ph = 2 * np.pi * np.arange(steps) / steps
        aa, bb, cc = (g.ravel() for g in np.meshgrid(a, ph, ph, indexing="ij"))
        return np.stack([np.cos(aa) * np.exp(1j * bb),
                         np.sin(aa) * np.exp(1j * cc)], axis=1)
    raise ValueError("adversarial search supports at most 2 antennas per user")


def error_grid(m, eps, steps):
    """Error vectors on radius levels ``{0, eps/2, eps}`` x directions."""
    if eps == 0:
        return np.zeros((1, m), dtype=complex)
    dirs = direction_grid(m, steps)
    return np.vstack([np.zeros((1, m))] + [r * dirs for r in (eps / 2, eps)])


def _min_ratio(num, den):
    return float(np.min(num / den))


def _max_ratio_separable(n1, d1, n2, d2, n0):
    """``max (n1[i] + n2[j]) / (n0 + d1[i] + d2[j])`` over all pairs ``(i, j)``.

    Dinkelbach on the finite product set: for fixed ``t`` the objective
    ``n - t d`` separates over ``i`` and ``j``; the iteration reaches the
    exact maximum in finitely many steps.
    """
    i, j = int(np.argmax(n1)), int(np.argmax(n2))
    t = (n1[i] + n2[j]) / (n0 + d1[i] + d2[j])
    for _ in range(DINKELBACH_ITERS):
        i = int(np.argmax(n1 - t * d1))
        j = int(np.argmax(n2 - t * d2))
        t_new = (n1[i] + n2[j]) / (n0 + d1[i] + d2[j])
        if t_new <= t * (1 + 1e-15) + 1e-300:
            return float(max(t, t_new))
        t = t_new
    return float(t)


def adversarial_error_search(inst, d, steps=12):
    """Deterministic worst-case SINRs of design ``d`` over gridded error balls.

    The self-interference terms ``e22 (Phi2+Psi2) e22*`` and
    ``e11 (Phi1+Psi1) e11*`` are maximized exactly (largest eigenvalue times
    the squared radius); their errors are independent of the rest.
    Returns :class:`WorstCaseRates`.
    """
    if max(inst.m1, inst.m2) > 2:
        raise ValueError("adversarial search supports at most 2 antennas per user")
    lam2 = max(float(np.linalg.eigvalsh(d.phi2 + d.psi2)[-1]), 0.0)
    lam1 = max(float(np.linalg.eigvalsh(d.phi1 + d.psi1)[-1]), 0.0)
    si2 = inst.eps22 ** 2 * lam2
    si1 = inst.eps11 ** 2 * lam1
    h21 = inst.h21 + error_grid(inst.m1, inst.eps21, steps)
    s1 = _min_ratio(_qf_many(h21, d.phi1),
                    inst.n0 + si2 + _qf_many(h21, d.psi1))
    h12 = inst.h12 + error_grid(inst.m2, inst.eps12, steps)
    s2 = _min_ratio(_qf_many(h12, d.phi2),
                    inst.n0 + si1 + _qf_many(h12, d.psi2))
    z1 = inst.z1 + error_grid(inst.m1, inst.eps1, steps)
    z2 = inst.z2 + error_grid(inst.m2, inst.eps2, steps)
    se = _max_ratio_separable(_qf_many(z1, d.phi1), _qf_many(z1, d.psi1),
                              _qf_many(z2, d.phi2), _qf_many(z2, d.psi2),
                              inst.n0)
    return WorstCaseRates(s1, s2, se)


def brute_force_eve_max(inst, d, steps=6):
    """Joint (non-separated) grid maximum of the eavesdropper SINR.

    Quadratic in the grid size; used to cross-check the separable search.
    """
    z1 = inst.z1 + error_grid(inst.m1, inst.eps1, steps)
    z2 = inst.z2 + error_grid(inst.m2, inst.eps2, steps)
    n1, d1 = _qf_many(z1, d.phi1), _qf_many(z1, d.psi1)
    n2, d2 = _qf_many(z2, d.phi2), _qf_many(z2, d.psi2)
    return float(np.max((n1[:, None] + n2[None, :])
                        / (inst.n0 + d1[:, None] + d2[None, :])))


def combined_worst_case(inst, d, samples=10000, seed=0, steps=12):
    """Elementwise worst of the Monte-Carlo and grid searches."""
    from .channel import worst_case_rates_mc
    mc = worst_case_rates_mc(inst, d, samples, seed)
    gr = adversarial_error_search(inst, d, steps)
    return WorstCaseRates(min(mc.sinr1_min, gr.sinr1_min),
                          min(mc.sinr2_min, gr.sinr2_min),
                          max(mc.sinr_e_max, gr.sinr_e_max))


def phase_rotated(inst, phases):
    """Instance with each channel multiplied by a unit phase (4 angles)."""
    rot = [np.exp(1j * a) for a in phases]
    return SystemInstance(inst.m1, inst.m2, inst.h12 * rot[0], inst.h21 * rot[1],
                          inst.z1 * rot[2], inst.z2 * rot[3], inst.n0, inst.p1,
                          inst.p2, **inst.eps)



def robust_scalar_no_jamming_oracle(inst, steps=1000, error_steps=1000):
    """Worst-case sum secrecy without jamming for M1 = M2 = 1, by brute force.

    Each error disc is scanned on ``error_steps`` radius levels times
    ``error_steps`` phases; the worst gains then enter a ``steps x steps``
    power grid. Returns ``(sum_max, (phi1, phi2))``.
    """
    if inst.m1 != 1 or inst.m2 != 1:
        raise ValueError("scalar oracle needs single-antenna users")

    def disc(eps):
        if eps == 0:
            return np.zeros(1, dtype=complex)
        r = np.linspace(0.0, eps, error_steps)
        ph = np.exp(2j * np.pi * np.arange(error_steps) / error_steps)
        return (r[:, None] * ph[None, :]).ravel()

    g1 = np.min(np.abs(inst.h21[0] + disc(inst.eps21)) ** 2)
    g2 = np.min(np.abs(inst.h12[0] + disc(inst.eps12)) ** 2)
    s22 = np.max(np.abs(disc(inst.eps22)) ** 2)
    s11 = np.max(np.abs(disc(inst.eps11)) ** 2)
    ge1 = np.max(np.abs(inst.z1[0] + disc(inst.eps1)) ** 2)
    ge2 = np.max(np.abs(inst.z2[0] + disc(inst.eps2)) ** 2)
    n0 = inst.n0
    phi1 = np.linspace(0.0, inst.p1, steps + 1)
    phi2 = np.linspace(0.0, inst.p2, steps + 1)
    a, b = phi1[:, None], phi2[None, :]
    val = (np.log2(1.0 + g1 * a / (n0 + s22 * b))
           + np.log2(1.0 + g2 * b / (n0 + s11 * a))
           - np.log2(1.0 + (ge1 * a + ge2 * b) / n0))
    k = int(np.argmax(val))
    i, j = divmod(k, phi2.size)
    return max(0.0, float(val.flat[k])), (float(phi1[i]), float(phi2[j]))
