import math

import numpy as np
import pytest

from fdsecrecy.channel import (SystemInstance, capacity_bounds, reference_instance,
                               worst_case_rates_mc)
from fdsecrecy.oracles import (random_scalar_instance,
                               robust_scalar_no_jamming_oracle)
from fdsecrecy.perfect import GridSpec, sweep_cells
from fdsecrecy.robust import (build_robust_lmis, no_jamming_exactness,
                              robust_cells, robust_max_sum_secrecy,
                              robust_min_leakage, robust_problem,
                              shared_grid_sweep)
from fdsecrecy.sdp import check_feasible

ZETA = 1e-4


def test_zero_error_matches_perfect(inst3):
    c1, c2, _ = capacity_bounds(inst3)
    rk1 = np.array([0.0, 0.3, 0.5, 0.9]) * c1
    rl2 = np.array([0.2, 0.8, 0.5, 0.1]) * c2
    rob = robust_cells(inst3, rk1, rl2)
    per = sweep_cells(inst3, rk1, rl2)
    assert rob.ok.all() and per.ok.all()
    np.testing.assert_allclose(rob.t_min, per.t_min, atol=2 * ZETA)
    assert np.all(rob.r1_lower >= rk1 - 1e-6)
    assert np.all(rob.r2_lower >= rl2 - 1e-6)


def test_zero_design_feasible_at_zero_targets():
    inst = reference_instance(3.0, eps=0.03)
    f = check_feasible(build_robust_lmis(inst, 0.0, 0.0, 0.0))
    assert f.feasible[0]


def test_zero_targets_leak_nothing():
    cell = robust_min_leakage(reference_instance(3.0, eps=0.03), 0.0, 0.0)
    assert cell.re_upper <= math.log2(1 + ZETA) * (1 + 1e-9)


def test_midpoint_bounds_hold_under_sampling():
    inst = reference_instance(3.0, eps=0.03)
    c1, c2, _ = capacity_bounds(inst)
    cell = robust_min_leakage(inst, c1 / 2, c2 / 2)
    assert cell.r1_lower >= c1 / 2 - 1e-6 and cell.r2_lower >= c2 / 2 - 1e-6
    w = worst_case_rates_mc(inst, cell.design, samples=10000, seed=11)
    assert w.r1_min >= cell.r1_lower - 1e-6
    assert w.r2_min >= cell.r2_lower - 1e-6
    assert w.re_max <= cell.re_upper + 1e-6
    lams = [v for k, v in cell.design.aux.items() if k.startswith("lam")]
    assert len(lams) == 10 and min(lams) >= -1e-9


def _scalar_feasible(inst, t, a1, a2, slack, steps=400, error_steps=1000):
    """Brute force: does a no-jamming power pair meet the worst-case targets?

    Error discs are scanned with radial step eps/error_steps; ``slack``
    tightens (> 0) or loosens (< 0) every constraint multiplicatively.
    """
    def disc(eps):
        r = np.linspace(0.0, eps, error_steps + 1)
        ph = np.exp(2j * np.pi * np.arange(360) / 360)
        return (r[:, None] * ph[None, :]).ravel()

    g1 = np.min(np.abs(inst.h21[0] + disc(inst.eps21)) ** 2)
    g2 = np.min(np.abs(inst.h12[0] + disc(inst.eps12)) ** 2)
    ge1 = np.max(np.abs(inst.z1[0] + disc(inst.eps1)) ** 2)
    ge2 = np.max(np.abs(inst.z2[0] + disc(inst.eps2)) ** 2)
    s22, s11 = inst.eps22 ** 2, inst.eps11 ** 2
    f = 1.0 + slack
    a = np.linspace(0.0, inst.p1, steps + 1)[:, None]
    b = np.linspace(0.0, inst.p2, steps + 1)[None, :]
    ok = ((g1 * a >= f * a1 * (inst.n0 + s22 * b))
          & (g2 * b >= f * a2 * (inst.n0 + s11 * a))
          & (f * (ge1 * a + ge2 * b) <= t * inst.n0))
    return bool(ok.any())


def test_single_antenna_lmi_matches_error_scan():
    inst = SystemInstance(1, 1, [0.6 * np.exp(1j)], [0.8], [0.25], [0.3j],
                          p1=2.0, p2=2.0).with_eps(0.1)
    pts = [(t, a1, a2) for t in (0.05, 0.2, 0.5) for a1 in (0.1, 0.4, 0.8)
           for a2 in (0.05, 0.3, 0.6)]
    t, a1, a2 = (np.array(v) for v in zip(*pts))
    lmi = check_feasible(robust_problem(inst, t, a1, a2, jamming=False)).feasible
    decided = 0
    for i, p in enumerate(pts):
        sure_yes = _scalar_feasible(inst, *p, slack=0.02)
        sure_no = not _scalar_feasible(inst, *p, slack=-0.02)
        if sure_yes:
            assert lmi[i], p
            decided += 1
        elif sure_no:
            assert not lmi[i], p
            decided += 1
    assert decided >= 20


def test_single_antenna_no_jamming_optimum_matches_oracle():
    inst = random_scalar_instance(2).with_eps(0.05)
    ref, _ = robust_scalar_no_jamming_oracle(inst, steps=1000, error_steps=400)
    r = robust_max_sum_secrecy(inst, GridSpec(40, 40), jamming=False)
    assert abs(r.sum_max - ref) <= 1e-3


def test_no_jamming_exact_at_zero_error():
    rep = no_jamming_exactness(reference_instance(3.0), GridSpec(6, 6), samples=500)
    assert abs(rep.gap) <= 1e-6
    assert rep.max_violation <= 1e-6


def test_jamming_never_leaks_more():
    rep = no_jamming_exactness(reference_instance(3.0, eps=0.02), GridSpec(6, 6),
                               samples=1000)
    assert rep.max_violation <= 1e-6
    assert rep.gap >= -1e-6
    assert rep.jamming_dominates


def test_sum_nonincreasing_in_error():
    insts = {e: reference_instance(3.0, eps=e) for e in (0.0, 0.03, 0.06)}
    res = shared_grid_sweep(insts, GridSpec(5, 5))
    sums = [res[e].sum_max for e in (0.0, 0.03, 0.06)]
    assert sums[0] >= sums[1] - 1e-6 >= sums[2] - 2e-6


def test_capacity_zero_axis_collapses():
    inst = reference_instance(3.0).with_eps(eps21=1.0)
    r = robust_max_sum_secrecy(inst, GridSpec(3, 3))
    assert np.all(r.k == 0) and len(r) == 4
