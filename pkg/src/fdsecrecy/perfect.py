"""Sum secrecy rate under perfect CSI: rate grid, leakage bisection, region."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .bisection import bisect_chunked
from .channel import CovarianceDesign, capacity_bounds
from .region import RegionResult
from .sdp import FEAS_TOL, LmiProblem

log = logging.getLogger(__name__)

DEFAULT_K = 40
DEFAULT_ZETA = 1e-4


class InfeasibleAtCapacity(RuntimeError):
    """Even the eavesdropper's capacity level admits no design for the targets."""


class CellFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    k: int = DEFAULT_K
    l: int = DEFAULT_K
    zeta: float = DEFAULT_ZETA

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("grid subdivisions must be >= 1")
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")


def _rowvec(v):
    return np.asarray(v, dtype=complex).reshape(1, -1)


def _qf(v, X):
    """Affine 1x1 expression ``v X v^H``."""
    v = _rowvec(v)
    return v @ X @ v.conj().T


def perfect_problem(inst, t, a1, a2, jamming=True):
    """Feasibility system at leakage level ``t`` and SINR targets ``a1, a2``.

    ``t``, ``a1``, ``a2`` are arrays of equal length (one entry per batch
    member). Constraint names: ``leak``, ``rate1``, ``rate2``, ``power1``,
    ``power2`` plus the automatic ``psd:*`` cones.
    """
    t = np.atleast_1d(np.asarray(t, float))
    a1 = np.broadcast_to(np.asarray(a1, float), t.shape)
    a2 = np.broadcast_to(np.asarray(a2, float), t.shape)
    p = LmiProblem(batch=t.size)
    phi1 = p.hermitian("phi1", inst.m1)
    phi2 = p.hermitian("phi2", inst.m2)
    if jamming:
        psi1 = p.hermitian("psi1", inst.m1)
        psi2 = p.hermitian("psi2", inst.m2)
        jam_e = _qf(inst.z1, psi1) + _qf(inst.z2, psi2)
        jam1, jam2 = _qf(inst.h21, psi1), _qf(inst.h12, psi2)
        pw1, pw2 = (phi1 + psi1).trace(), (phi2 + psi2).trace()
    else:
        jam_e = jam1 = jam2 = 0.0
        pw1, pw2 = phi1.trace(), phi2.trace()
    n0 = inst.n0
    p.add_le(_qf(inst.z1, phi1) + _qf(inst.z2, phi2) - (jam_e + n0) * t, "leak")
    p.add_le((jam1 + n0) * a1 - _qf(inst.h21, phi1), "rate1")
    p.add_le((jam2 + n0) * a2 - _qf(inst.h12, phi2), "rate2")
    p.add_le(pw1 - inst.p1, "power1")
    p.add_le(pw2 - inst.p2, "power2")
    return p


def rate_grid(c1, c2, grid):
    """Cell list ``(k, l, rk1, rl2)`` with ``rk1 = k c1/K``, ``rl2 = l c2/L``."""
    kk, ll = np.meshgrid(np.arange(grid.k + 1), np.arange(grid.l + 1),
                         indexing="ij")
    kk, ll = kk.ravel(), ll.ravel()
    return kk, ll, kk * c1 / grid.k, ll * c2 / grid.l


def _designs(problem, x, names=("phi1", "psi1", "phi2", "psi2"), dims=None):
    out = {}
    for name in names:
        try:
            out[name] = problem.variable(name).unpack(x)
        except KeyError:
            out[name] = np.zeros((x.shape[0],) + (dims[name], dims[name]),
                                 dtype=complex)
    return out


def _min_leakage_cells(inst, rk1, rl2, zeta, feas_tol, jamming=True,
                       chunk=4096, workers=1):
    if not inst.perfect:
        raise ValueError("perfect-CSI solver needs all error bounds zero")
    rk1 = np.atleast_1d(np.asarray(rk1, float))
    rl2 = np.atleast_1d(np.asarray(rl2, float))
    a1 = np.expm1(rk1 * math.log(2.0))
    a2 = np.expm1(rl2 * math.log(2.0))
    t_cap = 2.0 ** capacity_bounds(inst)[2] - 1.0

    def build(t, idx):
        return perfect_problem(inst, t, a1[idx], a2[idx], jamming)

    res = bisect_chunked(build, np.full(rk1.size, t_cap), zeta, feas_tol,
                         chunk=chunk, workers=workers)
    proto = build(np.zeros(1), np.zeros(1, int))
    dims = {"phi1": inst.m1, "psi1": inst.m1, "phi2": inst.m2, "psi2": inst.m2}
    mats = _designs(proto, res.x, dims=dims)
    bad = res.status != "optimal"
    for m in mats.values():
        m[bad] = np.nan
    return res, mats


def min_leakage_at_rates(inst, rk1, rl2, zeta=DEFAULT_ZETA, feas_tol=FEAS_TOL):
    """Smallest leakage SINR level ``t`` for the rate targets, by bisection.

    Returns ``(t_min, design)`` where ``t_min`` is the feasible end of the
    final bracket (width <= zeta) and ``design`` is feasible at ``t_min``.
    """
    c1, c2, _ = capacity_bounds(inst)
    if not (0 <= rk1 <= c1 + 1e-12 and 0 <= rl2 <= c2 + 1e-12):
        raise ValueError("rate targets outside [0, C1] x [0, C2]")
    res, mats = _min_leakage_cells(inst, [rk1], [rl2], zeta, feas_tol)
    if res.status[0] == "infeasibleAtCapacity":
        raise InfeasibleAtCapacity(f"targets ({rk1}, {rl2}) not achievable")
    if res.status[0] != "optimal":
        raise CellFailure("SDP solver failed on this cell")
    d = CovarianceDesign(*(mats[n][0] for n in ("phi1", "psi1", "phi2", "psi2")))
    d.aux = {"t": float(res.t_min[0]), "lower": float(res.lower[0])}
    return float(res.t_min[0]), d


def sweep_cells(inst, rk1, rl2, zeta=DEFAULT_ZETA, feas_tol=FEAS_TOL,
                jamming=True, chunk=4096, workers=1, k=None, l=None):
    """Batched leakage minimization over arbitrary target pairs."""
    rk1 = np.atleast_1d(np.asarray(rk1, float))
    rl2 = np.atleast_1d(np.asarray(rl2, float))
    res, mats = _min_leakage_cells(inst, rk1, rl2, zeta, feas_tol, jamming,
                                   chunk, workers)
    ok = res.status == "optimal"
    re = np.where(ok, np.log2(1.0 + res.t_min), np.nan)
    s = np.where(ok, np.maximum(0.0, rk1 + rl2 - re), np.nan)
    k = np.arange(rk1.size) if k is None else np.asarray(k)
    l = np.zeros(rk1.size, int) if l is None else np.asarray(l)
    return RegionResult(k, l, rk1, rl2, res.t_min, re, s, res.status,
                        mats["phi1"], mats["psi1"], mats["phi2"], mats["psi2"],
                        aux={"t_lower": res.lower},
                        meta={"zeta": zeta, "steps": res.steps,
                              "retried": res.retried})


def max_sum_secrecy(inst, grid=GridSpec(), feas_tol=FEAS_TOL, chunk=4096,
                    workers=1):
    """Evaluate every grid cell and report the best secrecy sum."""
    c1, c2, ce = capacity_bounds(inst)
    k, l, rk1, rl2 = rate_grid(c1, c2, grid)
    r = sweep_cells(inst, rk1, rl2, grid.zeta, feas_tol, chunk=chunk,
                    workers=workers, k=k, l=l)
    r.meta.update({"c1": c1, "c2": c2, "cE": ce, "K": grid.k, "L": grid.l})
    log.info("perfect sweep: %d cells, best sum %.6g", len(r), r.sum_max)
    return r
