"""Acceptance criteria, one test each, at the tolerances they state.

Runtime is dominated by criterion 5 (twenty 200 x 200 sweeps, several
minutes) and criterion 3 (fourteen robust sweeps, under two minutes).
"""
import math

import numpy as np
import pytest

from fdsecrecy.channel import capacity_bounds, reference_instance, worst_case_rates_mc
from fdsecrecy.kkt import DUAL_MARGIN, NONZERO_TOL, verify_region
from fdsecrecy.linalg import numerical_rank
from fdsecrecy.oracles import (adversarial_error_search, random_scalar_instance,
                               scalar_sum_secrecy_oracle)
from fdsecrecy.perfect import GridSpec, max_sum_secrecy, perfect_problem
from fdsecrecy.powermin import power_vs_sinr_sweep
from fdsecrecy.region import region_excess, region_polygon
from fdsecrecy.robust import (robust_max_sum_secrecy, robust_problem,
                              shared_grid_sweep)
from fdsecrecy.sdp import check_feasible

ZETA = 1e-4
EPS_SWEEP = (0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06)

# worst-case capacities (c1, c2, cE) at 3 dB, evaluated by hand from
# log2(1 + (||h|| -/+ eps)^2 P / N0) with the channel constants
CAPACITIES_3DB = {
    0.0: (1.539831843153863, 0.8292532491777032, 0.04484850066662323),
    0.02: (1.500988896837288, 0.7889081387434334, 0.06671656730748557),
    0.06: (1.4225968687957151, 0.7088995052343556, 0.12223352846457551),
}


@pytest.fixture(scope="module")
def robust_003():
    inst = reference_instance(3.0, eps=0.03)
    return inst, robust_max_sum_secrecy(inst, GridSpec(10, 10))


def test_criterion1_zero_error_reduction(inst3, perfect_k40):
    rob = robust_max_sum_secrecy(inst3, GridSpec(40, 40))
    per = perfect_k40
    assert len(rob) == len(per) == 41 * 41
    np.testing.assert_array_equal(rob.status, per.status)
    ok = per.ok
    assert np.max(np.abs(rob.re[ok] - per.re[ok])) <= 2 * ZETA
    assert np.max(np.abs(rob.t_min[ok] - per.t_min[ok])) <= 2 * ZETA
    # both sweeps use the same targets; the robust cells certify them
    assert np.max(np.abs(rob.r1 - per.r1)) <= 1e-6
    assert np.max(np.abs(rob.r2 - per.r2)) <= 1e-6
    assert np.all(rob.r1_lower[ok] >= per.r1[ok] - 1e-6)
    assert np.all(rob.r2_lower[ok] >= per.r2[ok] - 1e-6)


@pytest.mark.parametrize("eps", sorted(CAPACITIES_3DB))
def test_criterion2_closed_form_capacities(eps):
    got = capacity_bounds(reference_instance(3.0, eps=eps))
    for g, want in zip(got, CAPACITIES_3DB[eps]):
        assert abs(g - want) <= 1e-12 * abs(want)


def test_criterion3_region_monotonicity():
    instances = {(db, e): reference_instance(db, eps=e)
                 for db in (3.0, 6.0) for e in EPS_SWEEP}
    res = shared_grid_sweep(instances, GridSpec(10, 10))
    poly = {key: region_polygon(r, basis="targets") for key, r in res.items()}
    for key, r in res.items():
        assert not (np.asarray(r.status) == "failed").any(), key
        assert poly[key], key
    for i, e in enumerate(EPS_SWEEP):
        for e2 in EPS_SWEEP[i + 1:]:
            excess = region_excess(poly[(3.0, e)], poly[(3.0, e2)])
            assert excess <= 1e-6, (e, e2, excess)
        excess = region_excess(poly[(6.0, e)], poly[(3.0, e)])
        assert excess <= 1e-6, (e, excess)


def test_criterion4_sprocedure_soundness(robust_003):
    inst, r = robust_003
    ok = np.nonzero(r.ok)[0]
    assert ok.size >= 100
    worst = -math.inf
    for i in ok:
        d = r.design(i)
        for w in (worst_case_rates_mc(inst, d, 10000, seed=int(i)),
                  adversarial_error_search(inst, d, steps=12)):
            r1, r2, re = w.as_tuple()
            worst = max(worst, r.r1_lower[i] - r1, r.r2_lower[i] - r2,
                        re - r.re[i])
    assert worst <= 1e-3


def test_criterion5_scalar_oracle_equivalence():
    diffs = []
    for seed in range(20):
        inst = random_scalar_instance(seed)
        ref = scalar_sum_secrecy_oracle(inst, steps=200).sum_max
        got = max_sum_secrecy(inst, GridSpec(200, 200)).sum_max
        diffs.append(abs(got - ref))
    assert max(diffs) <= 0.01, diffs


def _bracket(inst, r, build, idx):
    a1 = 2.0 ** r.r1[idx] - 1.0
    a2 = 2.0 ** r.r2[idx] - 1.0
    t = r.t_min[idx]
    below = check_feasible(build(inst, t - 2 * ZETA, a1, a2))
    above = check_feasible(build(inst, t + 2 * ZETA, a1, a2))
    return below.feasible, above.feasible


def test_criterion6_bisection_bracketing(inst3, perfect_k40, robust_003):
    rng = np.random.default_rng(6)
    for inst, r, build in ((inst3, perfect_k40, perfect_problem),
                           (*robust_003, robust_problem)):
        idx = rng.choice(np.nonzero(r.ok)[0], 50, replace=False)
        below, above = _bracket(inst, r, build, idx)
        assert not below.any()
        assert above.all()


def test_criterion7_rank_one_and_kkt(inst3, perfect_k40):
    r = perfect_k40
    c1, c2, _ = capacity_bounds(inst3)
    rows = verify_region(inst3, r)
    assert len(rows) == int(r.ok.sum())
    certified = [row for row in rows if row["status"] == "optimal"]
    uncertified = [row for row in rows if row["status"] != "optimal"]
    # multipliers do not exist on the full-capacity edges (no interior point)
    assert all(row["status"] == "noDualCertificate" for row in uncertified)
    assert {(row["k"], row["l"]) for row in uncertified} == {
        (k, l) for k in range(41) for l in range(41) if k == 40 or l == 40}
    assert max(row["max_residual"] for row in certified) <= 1e-6
    checked = 0
    for row in certified:
        cert = row["cert"]
        for lam, phi in ((cert.duals.lam1, cert.design.phi1),
                         (cert.duals.lam2, cert.design.phi2)):
            if abs(lam) > DUAL_MARGIN and np.real(np.trace(phi)) > NONZERO_TOL:
                assert numerical_rank(phi) == 1, (row["k"], row["l"])
                checked += 1
        assert row["rank"].verdict != "fail", (row["k"], row["l"])
    assert checked > 500


def test_criterion8_power_minimization():
    for db, gamma_e in ((3.0, math.inf), (6.0, 0.1)):
        inst = reference_instance(db, eps=0.02)
        floors = np.linspace(0.0, 1.5, 16)
        rows = power_vs_sinr_sweep(inst, floors, gamma_e)
        assert rows[0]["total_power"] == 0.0 and rows[0]["status"] == "optimal"
        status = [row["status"] for row in rows]
        assert "numericalFailure" not in status
        n_ok = status.count("optimal")
        assert n_ok >= 8 and status[:n_ok] == ["optimal"] * n_ok
        power = [row["total_power"] for row in rows[:n_ok]]
        assert all(b >= a for a, b in zip(power, power[1:]))
        for row in rows[1:n_ok]:
            d = row["result"].design
            f = row["gamma_s1"]
            floor_rate = math.log2(1.0 + f)
            for w in (worst_case_rates_mc(inst, d, 10000, seed=8),
                      adversarial_error_search(inst, d, steps=12)):
                r1, r2, re = w.as_tuple()
                assert r1 >= floor_rate - 1e-3 and r2 >= floor_rate - 1e-3
                if math.isfinite(gamma_e):
                    assert re <= math.log2(1.0 + gamma_e) + 1e-3
