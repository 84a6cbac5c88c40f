import math

import numpy as np
import pytest

from fdsecrecy.channel import capacity_bounds, reference_instance, worst_case_rates_mc
from fdsecrecy.linalg import numerical_rank
from fdsecrecy.oracles import adversarial_error_search
from fdsecrecy.powermin import (SinrSpec, capacity_floor, min_total_power,
                                min_total_power_batch, power_csv,
                                power_vs_sinr_sweep, single_link_power)


@pytest.fixture(scope="module")
def inst02():
    return reference_instance(3.0, eps=0.02)


def test_zero_floors_give_exactly_zero(inst02):
    for ge in (0.0, 0.1, math.inf):
        r = min_total_power(inst02, SinrSpec(ge, 0.0, 0.0))
        assert r.status == "optimal" and r.total_power == 0.0
        assert all(np.all(m == 0) for m in (r.design.phi1, r.design.psi1,
                                            r.design.phi2, r.design.psi2))


def test_capacity_floor_needs_full_power(inst02):
    # the exact floor leaves a single feasible point; back off by 1e-9
    f1, _ = capacity_floor(inst02)
    r = min_total_power(inst02, SinrSpec(math.inf, 0.0, f1 * (1 - 1e-9)))
    assert r.status == "optimal"
    assert r.total_power == pytest.approx(inst02.p1, rel=1e-4)
    assert numerical_rank(r.design.phi1, rel_tol=1e-4) == 1


def test_single_link_closed_form(inst02):
    g = 0.5
    r = min_total_power(inst02, SinrSpec(math.inf, 0.0, g))
    assert r.total_power == pytest.approx(single_link_power(inst02, g), rel=1e-5)


def test_design_passes_sampled_validation():
    inst = reference_instance(6.0, eps=0.02)
    spec = SinrSpec(0.1, 1.0, 1.0)
    r = min_total_power(inst, spec)
    assert r.status == "optimal"
    d = r.design
    assert d.is_valid(inst, tol=1e-7)
    for w in (worst_case_rates_mc(inst, d, 10000, seed=3),
              adversarial_error_search(inst, d, steps=12)):
        assert w.sinr1_min >= spec.gamma_s2 - 1e-6
        assert w.sinr2_min >= spec.gamma_s1 - 1e-6
        assert w.sinr_e_max <= spec.gamma_e + 1e-6


def test_example_floor_infeasible_at_low_power(inst02):
    # 3 dB cannot deliver SINR 1 to user 2 in the worst case
    _, c2, _ = capacity_bounds(inst02)
    assert 2 ** c2 - 1 < 1.0
    r = min_total_power(inst02, SinrSpec(0.1, 1.0, 1.0))
    assert r.status == "infeasible" and r.margin > 0


def test_sweep_monotone_and_infeasible_beyond_capacity(inst02):
    f1, f2 = capacity_floor(inst02)
    top = min(f1, f2)
    floors = [0.0, 0.25 * top, 0.5 * top, 0.9 * top, 1.05 * max(f1, f2)]
    rows = power_vs_sinr_sweep(inst02, floors)
    st = [r["status"] for r in rows]
    assert st[:4] == ["optimal"] * 4 and st[4] == "infeasible"
    p = [r["total_power"] for r in rows[:4]]
    assert p[0] == 0.0 and all(np.diff(p) >= -1e-7)
    assert rows[4]["margin"] > 0
    for r in rows[:4]:
        d = r["result"].design
        assert d.power1() <= inst02.p1 + 1e-7 and d.power2() <= inst02.p2 + 1e-7


def test_power_nonincreasing_in_eavesdropper_cap():
    inst = reference_instance(6.0, eps=0.02)
    caps = [0.05, 0.1, 0.3, 1.0]
    res = min_total_power_batch(inst, 0.5, 0.5, caps)
    assert all(r.status == "optimal" for r in res)
    p = [r.total_power for r in res]
    assert all(np.diff(p) <= 1e-7)
    free = min_total_power(inst, SinrSpec(math.inf, 0.5, 0.5)).total_power
    assert free <= p[-1] + 1e-7


def test_mixed_caps_rejected(inst02):
    with pytest.raises(ValueError):
        min_total_power_batch(inst02, [0.1, 0.1], [0.1, 0.1], [0.1, math.inf])


def test_spec_validation():
    with pytest.raises(ValueError):
        SinrSpec(0.1, -1.0, 0.0)
    with pytest.raises(ValueError):
        SinrSpec(0.1, math.inf, 0.0)


def test_power_csv_format(inst02):
    rows = power_vs_sinr_sweep(inst02, [0.0])
    assert power_csv(rows) == ("gammaS1,gammaS2,gammaE,totalPower,status\n"
                               "0,0,inf,0,optimal\n")
