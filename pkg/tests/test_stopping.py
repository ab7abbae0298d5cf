import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmgan.errors import ConstructionError, ThresholdUnreachable
from hmgan.rng import rng_stream
from hmgan.stopping import (DecayConfig, check_proposition, loss_curves, sample_rates, simulate,
                            stop_time_product, stop_time_sum, stop_times)


def test_curves_at_zero():
    assert loss_curves(DecayConfig((1.0, 2.0, 3.0), 0.5), 0.0) == (3.0, 1.0)


def test_curves_hand_value():
    l_h, l_d = loss_curves(DecayConfig((1.0, 1.0), 0.5), math.log(2))
    assert l_h == pytest.approx(1.0, abs=1e-15)
    assert l_d == pytest.approx(0.25, abs=1e-15)


def test_curves_strictly_decreasing():
    cfg = DecayConfig((0.3, 2.0, 5.0), 0.5)
    ts = np.linspace(0, 5, 50)
    vals = np.array([loss_curves(cfg, t) for t in ts])
    assert np.all(np.diff(vals, axis=0) < 0)


def test_stop_times_equal_rates():
    t_h, t_d = stop_times(DecayConfig((1.0, 1.0), 0.25))
    assert t_d == pytest.approx(math.log(4) / 2, abs=1e-15)
    assert t_h == pytest.approx(math.log(8), abs=1e-11)


def test_threshold_already_met():
    t_h, t_d = stop_times(DecayConfig((1.0, 1.0), 5.0))
    assert t_h == 0.0 and t_d == 0.0


def test_unreachable_threshold():
    with pytest.raises(ThresholdUnreachable):
        stop_times(DecayConfig((1.0, 1.0), 1e-9, t_max=1.0))


def test_invalid_config():
    with pytest.raises(ValueError):
        DecayConfig((1.0, -1.0), 0.5)
    with pytest.raises(ValueError):
        DecayConfig((1.0,), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 50), min_size=2, max_size=7), st.floats(1e-6, 0.999))
def test_sum_stops_no_earlier_than_product(rates, h):
    cfg = DecayConfig(tuple(rates), h, t_max=1e4)
    t_h, t_d = stop_times(cfg)
    assert t_h >= t_d - 1e-12


def test_closed_form_matches_bisection():
    rng = rng_stream(0, 7)
    for _ in range(200):
        cfg = DecayConfig(tuple(rng.uniform(0.01, 10, size=int(rng.integers(2, 8)))),
                          float(rng.uniform(1e-6, 0.99)), t_max=1e4)
        assert abs(stop_times(cfg)[1] - stop_time_product(cfg, tol=0.0)) <= 1e-10


def test_bisection_tolerance():
    cfg = DecayConfig((0.5, 1.5, 4.0), 0.3)
    t = stop_time_sum(cfg)
    assert abs(loss_curves(cfg, t)[0] - 0.3) <= 1e-12


def test_proposition_example():
    rep = check_proposition((100.0, 1.0, 1.0), min_rho=100)
    assert rep.premise_met and rep.holds
    assert rep.l_d_bar < rep.threshold < rep.l_h_bar
    assert rep.t_h > rep.t_d
    # with equal slow rates: (n-2)(a + e) + e - (n-2)a = (n-1) e, e = exp(-r t_bar)
    assert rep.margin_h == pytest.approx(3 * math.exp(-100 * rep.t_bar), rel=1e-9)
    assert rep.margin_h > 0
    assert set(rep.record()) == {"rates", "H", "t_h", "t_d", "premise_met"}


def test_proposition_premise_gate():
    rep = check_proposition((1.0, 1.0, 1.0))
    assert not rep.premise_met and rep.holds is None


def test_infeasible_construction():
    # with rho just above the gate, exp(-r' t_bar) is too close to exp(-r t_bar)
    with pytest.raises(ConstructionError):
        check_proposition((10.0, 9.0), min_rho=1.0, fast_floor=0.9)


def test_sampled_rates_shape():
    rng = rng_stream(1, 7)
    for _ in range(50):
        rates = sample_rates(rng)
        assert 3 <= len(rates) + 1 <= 8
        fast = max(rates)
        others = sorted(rates)[:-1]
        assert fast / max(others) >= 100


def test_simulate_deterministic():
    a = [r.record() for r in simulate(20, seed=5)]
    b = [r.record() for r in simulate(20, seed=5)]
    assert a == b
