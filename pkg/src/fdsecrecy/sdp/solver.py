"""Public entry points of the SDP engine: optimization and Phase-I feasibility."""
from dataclasses import dataclass, replace

import numpy as np

from ..linalg import real_unembed
from .ipm import (DUAL_INFEASIBLE, FAILED, OPTIMAL, PRIMAL_INFEASIBLE, STOPPED,
                  IpmOptions, solve_conic)
from .problem import BlockPart, ConicData, LpPart, compile_problem

FEAS_TOL = 1e-8
GAP_TOL = 1e-7
PHASE1_FLOOR = 1.0

_STATUS = {OPTIMAL: "optimal", PRIMAL_INFEASIBLE: "infeasible",
           DUAL_INFEASIBLE: "unbounded", FAILED: "numericalFailure",
           STOPPED: "optimal"}


class SolverError(RuntimeError):
    pass


def constraint_slacks(data, x):
    """Slack of every constraint at ``x``: LP slacks and block min-eigenvalues.

    Returns ``(lp_slack (B, m), block_min_eig list of (B,))``.
    """
    x = np.atleast_2d(x)[:, :data.n]
    B = x.shape[0]
    G = np.broadcast_to(data.lp.G, (B,) + data.lp.G.shape[1:])
    h = np.broadcast_to(data.lp.h, (B,) + data.lp.h.shape[1:])
    lp = h - np.einsum("bmn,bn->bm", G, x)
    mins = []
    for blk in data.blocks:
        Gb = np.broadcast_to(blk.G, (B,) + blk.G.shape[1:])
        hb = np.broadcast_to(blk.h, (B,) + blk.h.shape[1:])
        F = hb - np.einsum("bj,bjrs->brs", x[:, blk.cols], Gb)
        mins.append(np.linalg.eigvalsh(F)[:, 0] if F.shape[-1] else np.full(B, np.inf))
    return lp, mins


def max_violation(data, x):
    """Largest constraint violation per batch member (inf for non-finite x)."""
    x = np.atleast_2d(x)
    finite = np.all(np.isfinite(x), axis=1)
    lp, mins = constraint_slacks(data, np.where(finite[:, None], x, 0.0))
    v = np.where(finite, 0.0, np.inf)
    if lp.shape[1]:
        v = np.maximum(v, -lp.min(axis=1))
    for m in mins:
        v = np.maximum(v, -m)
    return v


@dataclass
class SdpSolution:
    """Batched solver output; every array field has the batch as first axis."""

    problem: object
    data: ConicData
    status: np.ndarray
    x: np.ndarray
    objective: np.ndarray
    max_violation: np.ndarray
    raw: dict

    def value(self, name):
        return self.problem.variable(name).unpack(self.x)

    def dual(self, name):
        """Multiplier of a named constraint.

        Scalar constraints give an array ``(B,)``; LMIs give the Hermitian
        multiplier ``A`` entering the Lagrangian as ``-Re tr(A F(x))``.
        """
        if name in self.data.lp.names:
            return self.raw["z_lp"][:, self.data.lp.names.index(name)]
        for j, blk in enumerate(self.data.blocks):
            if blk.name == name:
                z = self.raw["z_blocks"][j]
                return 2.0 * real_unembed(z) if blk.embedded else z.astype(complex)
        raise KeyError(name)

    @property
    def ok(self):
        return self.status == "optimal"


def solve(problem, feas_tol=FEAS_TOL, gap_tol=GAP_TOL, options=None):
    """Minimize the problem objective over the LMI constraints.

    ``status == "optimal"`` members satisfy every constraint to within
    ``feas_tol`` (checked by direct evaluation, not taken from the solver's
    residuals) and carry a duality gap below ``gap_tol``.
    """
    if feas_tol <= 0 or gap_tol <= 0:
        raise ValueError("tolerances must be positive")
    data = compile_problem(problem)
    opts = replace(options or IpmOptions(), feas_tol=feas_tol, abs_tol=gap_tol)
    raw = solve_conic(data, opts)
    x = raw["x"]
    viol = max_violation(data, x)
    status = np.array([_STATUS[int(s)] for s in raw["status"]], dtype=object)
    status[(status == "optimal") & (viol > feas_tol)] = "numericalFailure"
    c = np.broadcast_to(data.c, x.shape)
    obj = np.sum(c * x, axis=1) + np.broadcast_to(data.c0, (x.shape[0],))
    return SdpSolution(problem, data, status, x, obj, viol, raw)


@dataclass
class FeasibilityResult:
    """Phase-I outcome per batch member."""

    problem: object
    data: ConicData
    feasible: np.ndarray   # bool
    failed: np.ndarray     # bool: neither certificate was reached
    margin: np.ndarray     # Phase-I optimum estimate (<= 0 means feasible)
    violation: np.ndarray  # direct max violation at the returned point
    x: np.ndarray

    def value(self, name):
        return self.problem.variable(name).unpack(self.x)


def phase1_data(data, floor=PHASE1_FLOOR):
    """Append the shift variable ``s``: every constraint is relaxed by ``s``.

    Blocks become ``F(x) + s I >= 0``, scalar rows ``g(x) <= s``, and
    ``s >= -floor`` keeps the problem bounded.
    """
    n = data.n + 1
    B = data.batch
    Gl = data.lp.G
    nb = Gl.shape[0]
    G = np.concatenate([Gl, -np.ones((nb, Gl.shape[1], 1))], axis=2)
    floor_row = np.zeros((nb, 1, n))
    floor_row[:, 0, -1] = -1.0
    G = np.concatenate([G, floor_row], axis=1)
    h = np.concatenate([data.lp.h, np.full((data.lp.h.shape[0], 1), floor)], axis=1)
    lp = LpPart(G, h, data.lp.names + ["phase1:floor"])
    blocks = []
    for blk in data.blocks:
        k = blk.h.shape[-1]
        eye = np.broadcast_to(-np.eye(k), (blk.G.shape[0], 1, k, k))
        blocks.append(BlockPart(blk.name, np.append(blk.cols, data.n),
                                np.concatenate([blk.G, eye], axis=1),
                                blk.h, blk.embedded))
    c = np.zeros((1, n))
    c[0, -1] = 1.0
    return ConicData(n, B, c, np.zeros(1), lp, blocks)


def check_feasible(problem, feas_tol=FEAS_TOL, options=None):
    """Phase-I feasibility test of the constraints (objective ignored).

    A member is feasible when a point violating no constraint by more than
    ``feas_tol`` is found (verified directly), and infeasible when the
    Phase-I dual bound certifies an optimum above ``feas_tol``, or when
    Phase-I converges to a point still violating by more than ``feas_tol``.
    Feasible sets without interior (targets exactly at a worst-case
    capacity) can land in the latter case.
    """
    data = compile_problem(problem)
    p1 = phase1_data(data)
    opts = replace(options or IpmOptions(), feas_tol=feas_tol,
                   abs_tol=0.1 * feas_tol)
    B = data.batch
    verdict = np.zeros(B, int)  # 1 feasible, -1 infeasible

    def monitor(idx, info):
        x = info["x"]
        viol = max_violation(_subset(data, idx), x[:, :data.n])
        codes = np.zeros(idx.size, int)
        feas = viol <= feas_tol
        # weak duality with an inexact dual: s* >= dcost - |r_dual| |x*|
        xn = np.maximum(1.0, np.linalg.norm(x, axis=1))
        infeas = ~feas & (info["dcost"] - 10.0 * info["dres_abs"] * xn > feas_tol)
        codes[feas] = STOPPED
        codes[infeas] = STOPPED
        verdict[idx[feas]] = 1
        verdict[idx[infeas]] = -1
        return codes

    raw = solve_conic(p1, opts, monitor=monitor)
    x = raw["x"][:, :data.n]
    viol = max_violation(data, x)
    status = raw["status"]
    feasible = verdict == 1
    # converged without an early verdict: decide on the Phase-I optimum
    conv = (verdict == 0) & (status == OPTIMAL)
    feasible |= conv & (viol <= feas_tol)
    failed = (verdict == 0) & ~conv
    margin = raw["pcost"]
    return FeasibilityResult(problem, data, feasible, failed, margin, viol, x)


def _subset(data, idx):
    """View of ``data`` restricted to batch members ``idx``."""
    def pick(a):
        return a if a.shape[0] == 1 else a[idx]
    lp = LpPart(pick(data.lp.G), pick(data.lp.h), data.lp.names)
    blocks = [BlockPart(b.name, b.cols, pick(b.G), pick(b.h), b.embedded)
              for b in data.blocks]
    return ConicData(data.n, len(idx), pick(data.c), pick(data.c0), lp, blocks)
