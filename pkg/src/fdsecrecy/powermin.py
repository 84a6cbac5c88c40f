"""Minimum total transmit power under worst-case SINR requirements.

User SINR floors must hold for every channel error in the balls, and the
eavesdropper's best-case SINR must stay below a cap. The problem is one SDP
with the same S-procedure blocks as the robust secrecy solver.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import CovarianceDesign, capacity_bounds
from .robust import _tsum, _unpack, robust_constraints
from .sdp import FEAS_TOL, GAP_TOL, IpmOptions, LmiProblem, check_feasible, solve

log = logging.getLogger(__name__)

RETRY_FACTOR = 10.0


@dataclass(frozen=True)
class SinrSpec:
    """SINR thresholds: ``gamma_s2`` protects user 1's message at S2,
    ``gamma_s1`` user 2's message at S1; ``gamma_e`` caps the eavesdropper
    (``math.inf`` drops that constraint)."""

    gamma_e: float
    gamma_s1: float
    gamma_s2: float

    def __post_init__(self):
        for name in ("gamma_s1", "gamma_s2"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative")
        if not self.gamma_e >= 0:
            raise ValueError("gamma_e must be nonnegative")


@dataclass
class PowerMinResult:
    status: str              # optimal | infeasible | numericalFailure
    total_power: float
    design: CovarianceDesign
    margin: float = 0.0      # Phase-I optimum when infeasible (> 0)
    spec: SinrSpec = None


def power_problem(inst, gamma_s1, gamma_s2, gamma_e=math.inf, jamming=True):
    """Batched power-minimization SDP; thresholds are arrays or scalars.

    ``gamma_e`` must be either infinite for the whole batch or finite.
    """
    gs1 = np.atleast_1d(np.asarray(gamma_s1, float))
    gs2 = np.atleast_1d(np.asarray(gamma_s2, float))
    ge = np.atleast_1d(np.asarray(gamma_e, float))
    B = max(gs1.size, gs2.size, ge.size)
    gs1, gs2, ge = (np.broadcast_to(a, (B,)) for a in (gs1, gs2, ge))
    no_cap = np.isinf(ge)
    if no_cap.any() and not no_cap.all():
        raise ValueError("mixing finite and infinite gamma_e in one batch")
    uncapped = bool(no_cap.all())
    p = LmiProblem(batch=B)
    # without an eavesdropper cap its blocks and t1..t4 are omitted
    v = robust_constraints(p, inst, jamming, eavesdropper=not uncapped)
    n0 = inst.n0
    if not uncapped:
        p.add_le(v.t[1] + v.t[2] - (_tsum(v, 3, 4) + n0) * ge, "leak")
    p.add_le((_tsum(v, 6, 7) + n0) * gs2 - v.t[5], "rate1")
    p.add_le((_tsum(v, 9, 10) + n0) * gs1 - v.t[8], "rate2")
    obj = v.phi1.trace() + v.phi2.trace()
    if jamming:
        obj = obj + v.psi1.trace() + v.psi2.trace()
    p.minimize(obj)
    return p


def _designs(problem, x, inst):
    mats, aux = _unpack(problem, x, inst)
    out = []
    for i in range(x.shape[0]):
        d = CovarianceDesign(*(mats[n][i] for n in ("phi1", "psi1", "phi2", "psi2")))
        d.aux = {k: float(a[i]) for k, a in aux.items()}
        out.append(d)
    return out


def min_total_power_batch(inst, gamma_s1, gamma_s2, gamma_e=math.inf,
                          feas_tol=FEAS_TOL, gap_tol=GAP_TOL, jamming=True):
    """Solve a batch of power-minimization problems; list of results."""
    gs1 = np.atleast_1d(np.asarray(gamma_s1, float))
    gs2 = np.atleast_1d(np.asarray(gamma_s2, float))
    ge = np.atleast_1d(np.asarray(gamma_e, float))
    B = max(gs1.size, gs2.size, ge.size)
    gs1, gs2, ge = (np.broadcast_to(a, (B,)).copy() for a in (gs1, gs2, ge))
    specs = [SinrSpec(float(ge[i]), float(gs1[i]), float(gs2[i]))
             for i in range(B)]
    results = [None] * B
    # zero floors: the all-zero design is feasible and optimal
    for i in range(B):
        if gs1[i] == 0 and gs2[i] == 0:
            results[i] = PowerMinResult("optimal", 0.0,
                                        CovarianceDesign.zeros(inst.m1, inst.m2),
                                        spec=specs[i])
    todo = np.array([i for i in range(B) if results[i] is None], int)
    base = IpmOptions()
    # the retry also loosens the stall rule: an inactive eavesdropper cap
    # leaves the dual degenerate and the dual residual can stall near 1e-6
    attempts = ((feas_tol, base),
                (RETRY_FACTOR * feas_tol,
                 replace(base, stall_tol=RETRY_FACTOR * base.stall_tol)))
    for tol, opts in attempts:
        if todo.size == 0:
            break
        p = power_problem(inst, gs1[todo], gs2[todo], ge[todo], jamming)
        sol = solve(p, feas_tol=tol, gap_tol=gap_tol, options=opts)
        designs = _designs(p, sol.x, inst)
        infeas = np.nonzero(sol.status != "optimal")[0]
        margins = {}
        if infeas.size:
            f = check_feasible(power_problem(inst, gs1[todo[infeas]],
                                             gs2[todo[infeas]], ge[todo[infeas]],
                                             jamming), tol)
            for j, i in enumerate(infeas):
                if not f.feasible[j] and not f.failed[j]:
                    margins[i] = max(float(f.margin[j]), 0.0)
        retry = []
        for j, i in enumerate(todo):
            if sol.status[j] == "optimal":
                results[i] = PowerMinResult("optimal", float(sol.objective[j]),
                                            designs[j], spec=specs[i])
            elif j in margins:
                results[i] = PowerMinResult("infeasible", math.nan, designs[j],
                                            margin=margins[j], spec=specs[i])
            else:
                retry.append(i)
                results[i] = PowerMinResult("numericalFailure", math.nan,
                                            designs[j], spec=specs[i])
        todo = np.array(retry, int)
    return results


def min_total_power(inst, spec, feas_tol=FEAS_TOL, gap_tol=GAP_TOL,
                    jamming=True):
    """Minimum of ``Tr(Phi1+Psi1) + Tr(Phi2+Psi2)`` for one threshold set."""
    return min_total_power_batch(inst, spec.gamma_s1, spec.gamma_s2,
                                 spec.gamma_e, feas_tol, gap_tol, jamming)[0]


def power_vs_sinr_sweep(inst, floors, gamma_e=math.inf, **kw):
    """Total power for symmetric user floors ``gamma_s1 = gamma_s2 = f``.

    Returns a list of dicts with keys gamma_s1, gamma_s2, gamma_e,
    total_power, status.
    """
    floors = np.asarray(floors, float)
    res = min_total_power_batch(inst, floors, floors, gamma_e, **kw)
    return [{"gamma_s1": float(f), "gamma_s2": float(f), "gamma_e": float(gamma_e),
             "total_power": r.total_power, "status": r.status, "margin": r.margin,
             "result": r} for f, r in zip(floors, res)]


def single_link_power(inst, gamma):
    """Closed-form power for SINR ``gamma`` on user 1's worst-case link alone.

    With no jamming, no eavesdropper cap and user 2 silent, the worst-case
    gain is ``(||h21|| - eps21)^2`` so the power is ``gamma N0 / gain``.
    """
    g = (np.linalg.norm(inst.h21) - inst.eps21) ** 2
    return gamma * inst.n0 / g if g > 0 else math.inf


def power_csv(rows):
    from .region import fmt
    lines = ["gammaS1,gammaS2,gammaE,totalPower,status"]
    for r in rows:
        lines.append(",".join([fmt(r["gamma_s1"]), fmt(r["gamma_s2"]),
                               "inf" if math.isinf(r["gamma_e"]) else fmt(r["gamma_e"]),
                               fmt(r["total_power"]), r["status"]]))
    return "\n".join(lines) + "\n"


def capacity_floor(inst):
    """SINR floors equal to the worst-case single-link capacities."""
    c1, c2, _ = capacity_bounds(inst)
    return 2.0 ** c1 - 1.0, 2.0 ** c2 - 1.0
