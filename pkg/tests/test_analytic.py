import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ijsim.analytic import (
    PR_CEILING,
    AnalyticParams,
    GridSpec,
    InfeasibleError,
    calibrate_lambda,
    error_count,
    n_sym_total,
    optimize_schedule,
    overall_errors,
    qfunc,
    seree,
    ser_closed_form,
    weight,
)
from ijsim.channel import ChannelSpec
from ijsim.frame_layout import plan_message
from ijsim.jamming import build_schedule, make_perj_samples, make_perjpt

mpmath.mp.dps = 40
PLAN96 = plan_message(219600)
PLAN2 = plan_message(2 * 2304)
E_B = 80 / 234


def q_oracle(x):
    return mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2


def pr_oracle(ratio):
    q = q_oracle(mpmath.sqrt(mpmath.mpf(2) / 7 * ratio))
    return float(1 - (1 - mpmath.mpf(3) / 4 * q) ** 2)


@pytest.mark.parametrize("x", [0.0, 0.5, 1.0, 2.0, 3.7, 6.0])
def test_qfunc_against_mpmath(x):
    assert float(qfunc(x)) == pytest.approx(float(q_oracle(x)), rel=1e-12)


def test_spot_values():
    assert ser_closed_form(14.0, 1.0) == pytest.approx(0.033834, abs=1e-6)
    assert ser_closed_form(14.0, 1.0) == pytest.approx(pr_oracle(14), abs=1e-12)
    assert ser_closed_form(1.0, 0.0) == 0.0
    assert ser_closed_form(1.0, 1e300) == pytest.approx(0.609375, abs=1e-6)
    assert PR_CEILING == 0.609375


def test_gains_enter_as_power_ratio():
    a = ser_closed_form(7.0, 1.0, h_ae=2.0, h_je=1.0)
    b = ser_closed_form(28.0, 1.0)
    assert a == pytest.approx(b)
    assert ser_closed_form(1.0, 5.0, h_je=0) == 0.0
    with pytest.raises(ValueError):
        ser_closed_form(-1.0, 1.0)


@given(st.floats(1e-6, 1e4), st.floats(1e-6, 1e4), st.floats(1.01, 10))
def test_ser_monotone_and_bounded(e_b, p_j, k):
    pr = ser_closed_form(e_b, p_j)
    assert 0 <= pr <= PR_CEILING
    assert ser_closed_form(e_b, p_j * k) >= pr
    assert ser_closed_form(e_b * k, p_j) <= pr


def test_error_count_examples():
    params = AnalyticParams()
    # one 80-sample pulse per frame over 96 frames covers 96 * 52 symbols
    s = make_perj_samples(PLAN96, PLAN96.layout, 80, 720, 1.0)
    pr = ser_closed_form(14.0, 1.0)
    assert error_count(s, pr, params, PLAN96) == pytest.approx(96 * 52 * 0.033834, abs=1e-2)
    assert n_sym_total(PLAN96) == 96 * 80 * 52 == 399360
    big = AnalyticParams(lam=1e6)
    assert error_count(s, PR_CEILING, big, PLAN96) == 399360
    assert error_count(np.zeros(10), 0.5, params, PLAN96) == 0


def test_weight_rules():
    lay = PLAN2.layout
    full = make_perjpt(PLAN2, 160.0)  # power 1 on the window
    assert weight(full, lay) == 1
    weak = make_perjpt(PLAN2, 80.0)  # power 0.5 < signal power
    assert weight(weak, lay) == 0
    assert weight(weak, lay, AnalyticParams(w_min_jsr=0)) == 1
    part = make_perj_samples(PLAN2, lay, 60, 650, 1e6)
    assert weight(part, lay) == 0
    data = build_schedule(PLAN2, "PerJDT", 1e6, 0.5)
    assert weight(data, lay) == 0
    cjs = build_schedule(PLAN2, "CJS", 2 * 7120 * 2.0)
    assert weight(cjs, lay) == 1
    assert weight(full, lay, h_jam=0.0) == 0


def test_overall_errors():
    assert overall_errors(1, 5.0, PLAN2) == 2 * 80 * 52
    assert overall_errors(0, 5.0, PLAN2) == 5.0


def test_seree_saturated_is_inverse_energy():
    s = make_perjpt(PLAN2, 320.0)
    rep = seree(s, AnalyticParams(), PLAN2, ChannelSpec(), E_B)
    assert rep.w == 1
    assert rep.seree == pytest.approx(1 / 320.0)
    assert rep.feasible


def test_seree_constraints():
    s = make_perjpt(PLAN2, 320.0)
    bad = seree(s, AnalyticParams(), PLAN2, ChannelSpec(h_jb=1.0), E_B)
    assert not bad.constraints["bob_error_free"]
    over = seree(s, AnalyticParams(), PLAN2, ChannelSpec(), E_B, e_j_avail=100.0)
    assert not over.constraints["energy"]
    assert over.constraints["binary"]


def test_seree_unsaturated_matches_formula():
    s = build_schedule(PLAN2, "PerJDT", 100.0, 0.2)
    rep = seree(s, AnalyticParams(), PLAN2, ChannelSpec(), E_B)
    pr = pr_oracle(E_B / s.power)
    covered = s.n_jammed / 80 * 52
    assert rep.n_error == pytest.approx(covered * pr, rel=1e-9)
    assert rep.seree == pytest.approx(covered * pr / (n_sym_total(PLAN2) * 100.0), rel=1e-9)


def test_optimizer_prefers_preamble_when_affordable():
    res = optimize_schedule(320.0, AnalyticParams(), PLAN2, ChannelSpec(), E_B)
    assert res.point["scheme"] == "PerJPT"
    assert res.report.w == 1


def test_optimizer_matches_independent_reevaluation():
    grid = GridSpec(rhos=(0.05, 0.2, 0.6))
    res = optimize_schedule(20.0, AnalyticParams(), PLAN2, ChannelSpec(), E_B, grid)
    best, best_val = None, -math.inf
    for p in grid.points():
        s = build_schedule(PLAN2, p["scheme"], 20.0, p["rho"], p["n_pulse"] or 12, 0)
        r = seree(s, AnalyticParams(), PLAN2, ChannelSpec(), E_B, 20.0)
        if r.feasible and r.seree > best_val:
            best, best_val = p, r.seree
    assert res.point == best
    assert res.report.seree == pytest.approx(best_val)
    threaded = optimize_schedule(20.0, AnalyticParams(), PLAN2, ChannelSpec(), E_B, grid, workers=4)
    assert threaded.point == res.point


def test_optimizer_infeasible():
    with pytest.raises(InfeasibleError):
        optimize_schedule(0.0, AnalyticParams(), PLAN2, ChannelSpec(), E_B)
    with pytest.raises(InfeasibleError):
        optimize_schedule(320.0, AnalyticParams(), PLAN2, ChannelSpec(h_jb=1.0), E_B)


def test_optimizer_json(tmp_path):
    res = optimize_schedule(320.0, AnalyticParams(), PLAN2, ChannelSpec(), E_B, GridSpec(rhos=(0.1,)))
    path = tmp_path / "opt.json"
    res.export_json(path)
    d = json.loads(path.read_text())
    assert d["scheme"] == "PerJPT"
    assert len(d["grid"]) == 6


def test_grid_points_dedup():
    pts = list(GridSpec(rhos=(0.1, 0.2)).points())
    assert [p["scheme"] for p in pts].count("CJS") == 1
    assert [p["scheme"] for p in pts].count("PerJDT") == 2
    with pytest.raises(ValueError):
        list(GridSpec(schemes=("Bad",)).points())


def test_calibrate_lambda():
    m = np.array([1.0, 2.0, 4.0])
    assert calibrate_lambda(m, 3 * m) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        calibrate_lambda([0, 0], [1, 2])


def test_params_validation():
    with pytest.raises(ValueError):
        AnalyticParams(lam=0)
    with pytest.raises(ValueError):
        AnalyticParams(w_min_jsr=-1)
