import numpy as np
import pytest

from fdsecrecy.channel import (SystemInstance, capacity_bounds, rate_user1,
                               rate_user2, sinr_eve)
from fdsecrecy.perfect import (GridSpec, InfeasibleAtCapacity, max_sum_secrecy,
                               min_leakage_at_rates, perfect_problem, sweep_cells)
from fdsecrecy.sdp import check_feasible

ZETA = 1e-4


def test_zero_targets_need_no_leakage(inst3):
    t, d = min_leakage_at_rates(inst3, 0.0, 0.0)
    assert t <= ZETA


def test_silent_eavesdropper_path(inst3):
    inst = SystemInstance(2, 2, inst3.h12, inst3.h21, [0, 0], inst3.z2,
                          p1=inst3.p1, p2=inst3.p2)
    c1, _, _ = capacity_bounds(inst)
    t, _ = min_leakage_at_rates(inst, c1, 0.0)
    assert t <= ZETA


def test_midpoint_matches_linear_scan(inst3):
    c1, c2, _ = capacity_bounds(inst3)
    rk1, rl2 = c1 / 2, c2 / 2
    t_min, d = min_leakage_at_rates(inst3, rk1, rl2)
    # independent oracle: first feasible level on a scan with step zeta/10
    ts = np.arange(0.0, t_min + 3 * ZETA, ZETA / 10)
    a1, a2 = 2 ** rk1 - 1, 2 ** rl2 - 1
    feas = check_feasible(perfect_problem(inst3, ts, a1, a2)).feasible
    assert feas.any()
    t_scan = ts[np.argmax(feas)]
    assert abs(t_min - t_scan) <= 2 * ZETA


def test_design_certifies_targets(inst3):
    c1, c2, _ = capacity_bounds(inst3)
    rk1, rl2 = 0.7 * c1, 0.4 * c2
    t_min, d = min_leakage_at_rates(inst3, rk1, rl2)
    assert d.is_valid(inst3, tol=1e-7)
    assert rate_user1(inst3, d) >= rk1 - 1e-6
    assert rate_user2(inst3, d) >= rl2 - 1e-6
    assert sinr_eve(inst3, d) <= t_min + 1e-6


def test_leakage_monotone_in_target(inst3):
    c1, c2, _ = capacity_bounds(inst3)
    r = sweep_cells(inst3, np.linspace(0, c1, 6), np.full(6, 0.8 * c2))
    assert r.ok.all()
    assert np.all(np.diff(r.t_min) >= -2 * ZETA)


def test_targets_outside_capacity_rejected(inst3):
    c1, _, _ = capacity_bounds(inst3)
    with pytest.raises(ValueError):
        min_leakage_at_rates(inst3, c1 * 1.01, 0.0)


def test_no_eavesdropper_gives_full_sum(inst3):
    inst = SystemInstance(2, 2, inst3.h12, inst3.h21, [0, 0], [0, 0],
                          p1=inst3.p1, p2=inst3.p2)
    c1, c2, _ = capacity_bounds(inst)
    r = max_sum_secrecy(inst, GridSpec(4, 4))
    assert r.sum_max == pytest.approx(c1 + c2, abs=1e-9)


def test_zero_power_gives_zero(inst3):
    r = max_sum_secrecy(inst3.with_power(0.0), GridSpec(3, 3))
    assert r.sum_max == 0.0


def test_sweep_grid_layout(perfect_k40, inst3):
    c1, c2, _ = capacity_bounds(inst3)
    r = perfect_k40
    assert len(r) == 41 * 41 and r.ok.all()
    np.testing.assert_allclose(r.r1, r.k * c1 / 40)
    np.testing.assert_allclose(r.r2, r.l * c2 / 40)
    assert r.sum_max > 2.3
    assert r.best_cell is not None


def test_infeasible_at_capacity_is_reported():
    # single antenna, targets above capacity are refused before solving
    inst = SystemInstance(1, 1, [0.5], [0.5], [0.1], [0.1])
    c1, c2, _ = capacity_bounds(inst)
    with pytest.raises((ValueError, InfeasibleAtCapacity)):
        min_leakage_at_rates(inst, c1 + 0.1, c2)
