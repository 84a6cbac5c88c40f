"""Lockstep bisection on the leakage level for many grid cells at once.

Every cell runs the same bisection, so all cells still bracketing are
tested together as one batched Phase-I problem per step.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .sdp import FEAS_TOL, check_feasible

log = logging.getLogger(__name__)

RETRY_FACTOR = 10.0
DEFAULT_CHUNK = 4096


@dataclass
class BisectionResult:
    t_min: np.ndarray    # feasible end of the final bracket (nan unless optimal)
    lower: np.ndarray
    upper: np.ndarray
    status: np.ndarray   # "optimal" | "infeasibleAtCapacity" | "failed"
    x: np.ndarray        # variable vector of the design certified at t_min
    steps: np.ndarray
    retried: np.ndarray


def feasible_with_retry(build, t, idx, feas_tol=FEAS_TOL):
    """Batched feasibility test; undecided members are retried once at 10x tol.

    Returns ``(feasible, failed, x, retried)``.
    """
    res = check_feasible(build(t, idx), feas_tol)
    feasible, failed, x = res.feasible.copy(), res.failed.copy(), res.x.copy()
    retried = failed.copy()
    if failed.any():
        sel = np.nonzero(failed)[0]
        log.debug("retrying %d undecided cells at feasTol %.1e", sel.size,
                  RETRY_FACTOR * feas_tol)
        r2 = check_feasible(build(t[sel], idx[sel]), RETRY_FACTOR * feas_tol)
        feasible[sel], failed[sel], x[sel] = r2.feasible, r2.failed, r2.x
    return feasible, failed, x, retried


def bisect(build, t_cap, zeta, feas_tol=FEAS_TOL):
    """Bisection over ``t in [0, t_cap]`` for every cell.

    ``build(t, idx)`` returns the batched LmiProblem for cells ``idx``
    (indices into the cell list) at levels ``t``. The cap is tested first;
    cells infeasible there are reported as ``infeasibleAtCapacity``.
    """
    t_cap = np.asarray(t_cap, float)
    B = t_cap.size
    idx = np.arange(B)
    feas, failed, x0, retried = feasible_with_retry(build, t_cap, idx, feas_tol)
    status = np.full(B, "optimal", dtype=object)
    status[~feas] = "infeasibleAtCapacity"
    status[failed] = "failed"
    lo = np.zeros(B)
    hi = t_cap.copy()
    xbest = x0
    steps = np.zeros(B, int)
    active = feas.copy()
    while True:
        act = active & (hi - lo > zeta)
        if not act.any():
            break
        sel = np.nonzero(act)[0]
        mid = 0.5 * (lo[sel] + hi[sel])
        f, fl, xs, rt = feasible_with_retry(build, mid, sel, feas_tol)
        steps[sel] += 1
        retried[sel] |= rt
        good = sel[f]
        hi[good] = mid[f]
        xbest[good] = xs[f]
        bad = ~f & ~fl
        lo[sel[bad]] = mid[bad]
        status[sel[fl]] = "failed"
        active[sel[fl]] = False
    t_min = np.where(status == "optimal", hi, np.nan)
    return BisectionResult(t_min, lo, hi, status, xbest, steps, retried)


def bisect_chunked(build, t_cap, zeta, feas_tol=FEAS_TOL, chunk=DEFAULT_CHUNK,
                   workers=1):
    """:func:`bisect` over chunks of cells; results keep the cell order.

    With ``workers > 1`` chunks run on a thread pool (numpy's linear
    algebra releases the GIL); the output does not depend on ``workers``.
    """
    t_cap = np.asarray(t_cap, float)
    B = t_cap.size
    starts = list(range(0, B, chunk)) or [0]

    def run(s):
        sl = np.arange(s, min(B, s + chunk))
        return bisect(lambda t, idx: build(t, sl[idx]), t_cap[sl], zeta, feas_tol)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return BisectionResult(*(np.concatenate([getattr(p, f) for p in parts])
                             for f in BisectionResult.__dataclass_fields__))
