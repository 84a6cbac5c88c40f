"""Worst-case secrecy rates under norm-bounded CSI errors.

Each worst-case quadratic term is bounded by its own auxiliary scalar
(t1 ... t10), and every "for all errors in the ball" condition becomes one
LMI through the S-procedure. A bisection on the eavesdropper SINR level
then gives, per rate-target cell, certified lower bounds on both user
rates and an upper bound on the leakage rate.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .bisection import bisect_chunked
from .channel import CovarianceDesign, capacity_bounds
from .perfect import (DEFAULT_ZETA, CellFailure, GridSpec, InfeasibleAtCapacity,
                      rate_grid)
from .region import RegionResult
from .sdp import FEAS_TOL, LmiProblem, block

log = logging.getLogger(__name__)

# (block number, S-procedure multiplier, error-bound attribute)
BLOCKS = {
    1: "eps1", 2: "eps1", 3: "eps2", 4: "eps2", 5: "eps21",
    6: "eps21", 7: "eps22", 8: "eps12", 9: "eps12", 10: "eps11",
}
JAMMING_BLOCKS = (2, 4, 6, 9)
NONNEG_T = (3, 4, 5, 6, 8, 9)
JAMMING_T = (3, 4, 7, 10)


def _row(v):
    return np.asarray(v, dtype=complex).reshape(1, -1)


def add_sprocedure(p, name, a, h, c, eps, lam_name):
    """Require ``(h + e) A (h + e)^H + c >= 0`` for every ``||e|| <= eps``.

    ``a`` is an affine Hermitian expression, ``h`` a constant row vector and
    ``c`` an affine scalar. For ``eps > 0`` this adds the equivalent LMI

        [[A + lam I,  A h^H            ],
         [h A,        h A h^H + c - lam eps^2]]  >= 0,   lam >= 0.

    For ``eps == 0`` the condition is the plain scalar constraint (the LMI
    form would only be attained as ``lam -> inf``). Returns ``lam`` or None.
    """
    h = _row(h)
    nominal = h @ a @ h.conj().T + c
    if eps == 0:
        p.add_le(-nominal, name)
        return None
    lam = p.scalar(lam_name, nonneg=True)
    m = h.shape[1]
    lmi = block([[a + lam * np.eye(m), a @ h.conj().T],
                 [h @ a, nominal - lam * (eps * eps)]])
    p.add_lmi(lmi, name)
    return lam


@dataclass
class RobustVars:
    phi1: object
    psi1: object
    phi2: object
    psi2: object
    t: dict


def robust_constraints(p, inst, jamming=True, eavesdropper=True):
    """Declare the covariances and t1..t10 and add the ten robust blocks.

    Returns :class:`RobustVars`. Power caps are added as ``power1/2``;
    the SINR couplings are left to the caller. Without jamming the
    Psi variables, t3, t4, t7, t10 and blocks 2, 4, 6, 9 are dropped;
    with ``eavesdropper=False`` t1..t4 and blocks 1..4 are dropped.
    """
    phi1 = p.hermitian("phi1", inst.m1)
    phi2 = p.hermitian("phi2", inst.m2)
    psi1 = p.hermitian("psi1", inst.m1) if jamming else None
    psi2 = p.hermitian("psi2", inst.m2) if jamming else None
    t = {}
    for i in range(1, 11):
        if (not jamming and i in JAMMING_T) or (not eavesdropper and i <= 4):
            continue
        t[i] = p.scalar(f"t{i}", nonneg=i in NONNEG_T)
    zero1 = np.zeros(inst.m1)
    zero2 = np.zeros(inst.m2)
    tot1 = phi1 + psi1 if jamming else phi1
    tot2 = phi2 + psi2 if jamming else phi2
    spec = {
        1: (-phi1, inst.z1, t.get(1)),
        2: (psi1, inst.z1, -t[3] if 3 in t else None),
        3: (-phi2, inst.z2, t.get(2)),
        4: (psi2, inst.z2, -t[4] if 4 in t else None),
        5: (phi1, inst.h21, -t[5]),
        6: (None if not jamming else -psi1, inst.h21, t.get(7)),
        7: (-tot2, zero2, t[6]),
        8: (phi2, inst.h12, -t[8]),
        9: (None if not jamming else -psi2, inst.h12, t.get(10)),
        10: (-tot1, zero1, t[9]),
    }
    for j in range(1, 11):
        if (not jamming and j in JAMMING_BLOCKS) or (not eavesdropper and j <= 4):
            continue
        a, h, c = spec[j]
        add_sprocedure(p, f"block{j}", a, h, c, getattr(inst, BLOCKS[j]),
                       f"lam{j}")
    p.add_le(tot1.trace() - inst.p1, "power1")
    p.add_le(tot2.trace() - inst.p2, "power2")
    return RobustVars(phi1, psi1, phi2, psi2, t)


def _tsum(v, *idx):
    out = 0.0
    for i in idx:
        if i in v.t:
            out = v.t[i] + out
    return out


def robust_problem(inst, t, a1, a2, jamming=True):
    """Batched robust feasibility system at level ``t`` with SINR targets.

    Couplings (named ``leak``, ``rate1``, ``rate2``):
    ``(t1+t2) - t (N0+t3+t4) <= 0``, ``a1 (N0+t6+t7) - t5 <= 0`` and
    ``a2 (N0+t9+t10) - t8 <= 0``.
    """
    t = np.atleast_1d(np.asarray(t, float))
    a1 = np.broadcast_to(np.asarray(a1, float), t.shape)
    a2 = np.broadcast_to(np.asarray(a2, float), t.shape)
    p = LmiProblem(batch=t.size)
    v = robust_constraints(p, inst, jamming)
    n0 = inst.n0
    p.add_le(v.t[1] + v.t[2] - (_tsum(v, 3, 4) + n0) * t, "leak")
    p.add_le((_tsum(v, 6, 7) + n0) * a1 - v.t[5], "rate1")
    p.add_le((_tsum(v, 9, 10) + n0) * a2 - v.t[8], "rate2")
    return p


def build_robust_lmis(inst, rk1, rl2, t, jamming=True):
    """Single robust feasibility problem for rate targets (bits) and level t."""
    return robust_problem(inst, [t], 2.0 ** rk1 - 1.0, 2.0 ** rl2 - 1.0, jamming)


def _unpack(problem, x, inst):
    out = {}
    for name, m in (("phi1", inst.m1), ("psi1", inst.m1), ("phi2", inst.m2),
                    ("psi2", inst.m2)):
        try:
            out[name] = problem.variable(name).unpack(x)
        except KeyError:
            out[name] = np.zeros((x.shape[0], m, m), dtype=complex)
    aux = {}
    for i in range(1, 11):
        for pre in ("t", "lam"):
            try:
                aux[f"{pre}{i}"] = problem.variable(f"{pre}{i}").unpack(x)
            except KeyError:
                aux[f"{pre}{i}"] = np.zeros(x.shape[0])
    return out, aux


def robust_cells(inst, rk1, rl2, zeta=DEFAULT_ZETA, feas_tol=FEAS_TOL,
                 jamming=True, t_cap=None, chunk=2048, workers=1, k=None,
                 l=None):
    """Robust leakage bisection for arbitrary target pairs (batched).

    ``t_cap`` defaults to ``2^cE - 1`` with the best-case eavesdropper
    capacity; the lower end is 0.
    """
    rk1 = np.atleast_1d(np.asarray(rk1, float))
    rl2 = np.atleast_1d(np.asarray(rl2, float))
    a1 = np.expm1(rk1 * math.log(2.0))
    a2 = np.expm1(rl2 * math.log(2.0))
    if t_cap is None:
        t_cap = 2.0 ** capacity_bounds(inst)[2] - 1.0

    def build(t, idx):
        return robust_problem(inst, t, a1[idx], a2[idx], jamming)

    res = bisect_chunked(build, np.full(rk1.size, float(t_cap)), zeta,
                         feas_tol, chunk=chunk, workers=workers)
    proto = build(np.zeros(1), np.zeros(1, int))
    mats, aux = _unpack(proto, res.x, inst)
    ok = res.status == "optimal"
    n0 = inst.n0
    with np.errstate(invalid="ignore"):
        r1l = np.log2(1.0 + np.maximum(aux["t5"], 0.0)
                      / (n0 + aux["t6"] + aux["t7"]))
        r2l = np.log2(1.0 + np.maximum(aux["t8"], 0.0)
                      / (n0 + aux["t9"] + aux["t10"]))
    re = np.log2(1.0 + res.t_min)
    s = np.maximum(0.0, r1l + r2l - re)
    for arr in (r1l, r2l, re, s):
        arr[~ok] = np.nan
    for m in mats.values():
        m[~ok] = np.nan
    for a in aux.values():
        a[~ok] = np.nan
    k = np.arange(rk1.size) if k is None else np.asarray(k)
    l = np.zeros(rk1.size, int) if l is None else np.asarray(l)
    aux["t_lower"] = res.lower
    return RegionResult(k, l, rk1, rl2, res.t_min, re, s, res.status,
                        mats["phi1"], mats["psi1"], mats["phi2"], mats["psi2"],
                        r1_lower=r1l, r2_lower=r2l, aux=aux,
                        meta={"zeta": zeta, "steps": res.steps,
                              "retried": res.retried, "eps": inst.eps})


@dataclass
class RobustCell:
    rk1_target: float
    rl2_target: float
    t_min: float
    r1_lower: float
    r2_lower: float
    re_upper: float
    sum_lower: float
    design: CovarianceDesign
    status: str = "optimal"


def robust_min_leakage(inst, rk1, rl2, zeta=DEFAULT_ZETA, feas_tol=FEAS_TOL,
                       jamming=True):
    """Bisection for one target pair; returns a :class:`RobustCell`."""
    c1, c2, _ = capacity_bounds(inst)
    if not (0 <= rk1 <= c1 + 1e-12 and 0 <= rl2 <= c2 + 1e-12):
        raise ValueError("rate targets outside the worst-case capacity ranges")
    r = robust_cells(inst, [rk1], [rl2], zeta, feas_tol, jamming)
    if r.status[0] == "infeasibleAtCapacity":
        raise InfeasibleAtCapacity(f"targets ({rk1}, {rl2}) not achievable")
    if r.status[0] != "optimal":
        raise CellFailure("SDP solver failed on this cell")
    return RobustCell(float(rk1), float(rl2), float(r.t_min[0]),
                      float(r.r1_lower[0]), float(r.r2_lower[0]),
                      float(r.re[0]), float(r.sum[0]), r.design(0))


def robust_max_sum_secrecy(inst, grid=GridSpec(), feas_tol=FEAS_TOL,
                           jamming=True, chunk=2048, workers=1):
    """Grid sweep over the worst-case capacity ranges.

    A zero worst-case capacity collapses that axis to the single target 0.
    """
    c1, c2, ce = capacity_bounds(inst)
    g = GridSpec(grid.k if c1 > 0 else 1, grid.l if c2 > 0 else 1, grid.zeta)
    k, l, rk1, rl2 = rate_grid(c1, c2, g)
    if c1 == 0:
        keep = k == 0
        k, l, rk1, rl2 = k[keep], l[keep], rk1[keep], rl2[keep]
    if c2 == 0:
        keep = l == 0
        k, l, rk1, rl2 = k[keep], l[keep], rk1[keep], rl2[keep]
    r = robust_cells(inst, rk1, rl2, grid.zeta, feas_tol, jamming,
                     chunk=chunk, workers=workers, k=k, l=l)
    r.meta.update({"c1": c1, "c2": c2, "cE": ce, "K": grid.k, "L": grid.l})
    log.info("robust sweep (eps=%s): %d cells, best sum %.6g", inst.eps,
             len(r), r.sum_max)
    return r


def _expand(sub, mask, k, l, rk1, rl2):
    """Place a sub-sweep result back onto the full grid (others infeasible)."""
    n = mask.size

    def full(a, fill=np.nan):
        a = np.asarray(a)
        out = np.full((n,) + a.shape[1:], fill, dtype=a.dtype if a.dtype != int
                      else float)
        out[mask] = a
        return out

    status = np.full(n, "infeasibleAtCapacity", dtype=object)
    status[mask] = sub.status
    aux = {name: full(v) for name, v in sub.aux.items()}
    return RegionResult(k, l, rk1, rl2, full(sub.t_min), full(sub.re),
                        full(sub.sum), status, full(sub.phi1), full(sub.psi1),
                        full(sub.phi2), full(sub.psi2), full(sub.r1_lower),
                        full(sub.r2_lower), aux, dict(sub.meta))


def shared_grid_sweep(instances, grid=GridSpec(), feas_tol=FEAS_TOL,
                      jamming=True, chunk=2048, workers=1):
    """Robust sweeps of several instances on one common target grid.

    ``instances`` maps a key (e.g. ``(p_db, eps)``) to a SystemInstance.
    The grid spans the largest worst-case capacity ranges among them and
    every cell bisects over the same bracket ``[0, max 2^cE - 1]``, so
    results for nested feasible sets are ordered cell by cell. Cells whose
    targets exceed an instance's own worst-case capacities are reported as
    ``infeasibleAtCapacity`` without solving.
    """
    caps = {key: capacity_bounds(inst) for key, inst in instances.items()}
    c1 = max(c[0] for c in caps.values())
    c2 = max(c[1] for c in caps.values())
    t_cap = max(2.0 ** c[2] - 1.0 for c in caps.values())
    k, l, rk1, rl2 = rate_grid(c1, c2, grid)
    out = {}
    for key, inst in instances.items():
        ci1, ci2, cie = caps[key]
        mask = (rk1 <= ci1 * (1 + 1e-12)) & (rl2 <= ci2 * (1 + 1e-12))
        sub = robust_cells(inst, rk1[mask], rl2[mask], grid.zeta, feas_tol,
                           jamming, t_cap=t_cap, chunk=chunk, workers=workers,
                           k=k[mask], l=l[mask])
        r = _expand(sub, mask, k, l, rk1, rl2)
        r.meta.update({"c1": ci1, "c2": ci2, "cE": cie, "K": grid.k,
                       "L": grid.l, "t_cap": t_cap, "grid_c1": c1,
                       "grid_c2": c2})
        out[key] = r
        log.info("shared sweep %s: best sum %.6g", key, r.sum_max)
    return out


@dataclass
class NoJammingReport:
    """Decoupled bound versus sampled worst case without jamming."""

    bound_sum: float          # certified sum of the best no-jamming cell
    exact_sum: float          # worst case of that design (MC + error grid)
    gap: float                # exact_sum - bound_sum (>= 0 when sound)
    max_violation: float      # largest one-sided bound violation over cells
    jamming_sum: float        # best certified sum with jamming enabled
    leak_excess: float        # max over cells of reE(jamming) - reE(none)
    jamming_dominates: bool   # leak_excess <= tol
    cells: int


def no_jamming_exactness(inst, grid=GridSpec(), samples=10000, seed=0,
                         steps=12, tol=1e-6, feas_tol=FEAS_TOL):
    """Check the decoupled bound when jamming is switched off.

    Every ok cell's design is attacked with Monte-Carlo samples plus the
    deterministic error grid; ``max_violation`` is the largest amount by
    which a sampled rate falls below (or the sampled leakage exceeds) the
    certified value, so it should be <= 0 up to sampling. ``gap`` compares
    the best cell's certified sum with its sampled worst case.

    Jamming dominance is checked cell by cell on the leakage bound: with the
    same rate targets, enabling jamming enlarges the feasible set, so its
    bisected leakage may not exceed the no-jamming one by more than the
    bisection resolution ``2 zeta`` (converted to bits) plus ``tol``.
    """
    from .oracles import combined_worst_case

    nj = robust_max_sum_secrecy(inst, grid, feas_tol, jamming=False)
    jam = robust_max_sum_secrecy(inst, grid, feas_tol, jamming=True)
    ok = np.nonzero(nj.ok)[0]
    best = nj.best_cell
    violation, exact = -math.inf, math.nan
    for i in ok:
        w = combined_worst_case(inst, nj.design(i), samples, seed + int(i), steps)
        r1, r2, re = w.as_tuple()
        violation = max(violation, nj.r1_lower[i] - r1, nj.r2_lower[i] - r2,
                        re - nj.re[i])
        if i == best:
            exact = max(0.0, r1 + r2 - re)
    jam_re = {(int(a), int(b)): float(r) for a, b, r, s in
              zip(jam.k, jam.l, jam.re, jam.status) if s == "optimal"}
    excess = -math.inf
    for i in ok:
        key = (int(nj.k[i]), int(nj.l[i]))
        if key in jam_re:
            # 2 zeta in SINR units bounds the bisection error; in bits it is
            # at most 2 zeta / ln 2
            excess = max(excess, jam_re[key] - nj.re[i]
                         - 2.0 * grid.zeta / math.log(2.0))
    bound = nj.sum_max
    return NoJammingReport(bound, exact, exact - bound, float(violation),
                           jam.sum_max, float(excess), bool(excess <= tol),
                           len(ok))
