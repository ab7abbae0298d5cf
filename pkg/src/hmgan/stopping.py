"""Stopping times of the two regularizers under exponential ratio decay.

Each layer ratio decays as ``exp(-r_j t)``. With all targets at zero, the
hierarchical loss is the sum of the ratios and the single-ratio loss is their
product. Training stops the first time a loss reaches the threshold ``H``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, ThresholdUnreachable
from .rng import PROP, rng_stream


@dataclass(frozen=True)
class DecayConfig:
    rates: tuple
    threshold: float
    t_max: float = 1e3

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates or min(self.rates) <= 0:
            raise ValueError("decay rates must be positive")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")

    @property
    def n(self):
        return len(self.rates) + 1


def loss_curves(config, t):
    """(sum loss, product loss) at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    r = np.asarray(config.rates)
    return float(np.sum(np.exp(-r * t))), math.exp(-float(r.sum()) * t)


def _bisect(f, level, t_max, tol):
    # f decreasing; smallest t in [0, t_max] with f(t) <= level
    if f(0.0) <= level:
        return 0.0
    if f(t_max) > level:
        raise ThresholdUnreachable(f"level {level:g} not reached within t_max={t_max:g}")
    lo, hi = 0.0, t_max
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val - level) <= tol:
            return mid
        if val > level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * math.ulp(hi):
            break
    return 0.5 * (lo + hi)


def stop_time_sum(config, tol=1e-12):
    return _bisect(lambda t: loss_curves(config, t)[0], config.threshold, config.t_max, tol)


def stop_time_product(config, tol=1e-12):
    """Product-loss stop time found numerically (the closed form lives in :func:`stop_times`)."""
    return _bisect(lambda t: loss_curves(config, t)[1], config.threshold, config.t_max, tol)


def stop_times(config):
    """(t_h, t_d): stop times of the sum loss (bisection) and the product loss (closed form)."""
    total_rate = sum(config.rates)
    if config.threshold >= 1.0:
        t_d = 0.0
    else:
        t_d = math.log(1.0 / config.threshold) / total_rate
        if t_d > config.t_max:
            raise ThresholdUnreachable(f"product loss reaches {config.threshold:g} only at t={t_d:g}")
    return stop_time_sum(config), t_d


@dataclass
class PropositionReport:
    rates: tuple
    rho: float
    premise_met: bool
    t_bar: float = None
    a: float = None
    threshold: float = None
    l_h_bar: float = None
    l_d_bar: float = None
    t_h: float = None
    t_d: float = None
    holds: bool = None

    @property
    def margin_h(self):
        return None if self.l_h_bar is None else self.l_h_bar - self.threshold

    @property
    def margin_d(self):
        return None if self.l_d_bar is None else self.threshold - self.l_d_bar

    def record(self):
        return {"rates": list(self.rates), "H": self.threshold, "t_h": self.t_h,
                "t_d": self.t_d, "premise_met": self.premise_met}


def check_proposition(rates, min_rho=10.0, fast_floor=1e-6):
    """Build the threshold from one dominant rate and compare stop times.

    The dominant rate ``r`` must be at least ``min_rho`` times every other rate.
    ``t_bar`` is the first time with ``exp(-r t_bar) <= fast_floor``; with ``r'``
    the largest of the other rates, ``a = exp(-r' t_bar) - exp(-r t_bar)`` and the
    threshold is ``(n - 2) a``.
    """
    rates = tuple(float(r) for r in rates)
    n = len(rates) + 1
    if n < 3:
        raise ValueError("need at least 3 layers (2 rates)")
    k = int(np.argmax(rates))
    fast = rates[k]
    slow = max(r for j, r in enumerate(rates) if j != k)
    rho = fast / slow
    if rho < min_rho:
        return PropositionReport(rates, rho, premise_met=False)

    t_bar = math.log(1.0 / fast_floor) / fast
    e_fast = math.exp(-fast * t_bar)
    a = math.exp(-slow * t_bar) - e_fast
    if a <= 0 or math.exp(-slow * t_bar) <= 2 * e_fast:
        raise ConstructionError(f"dominant rate does not separate at t_bar={t_bar:g} (a={a:g})")
    threshold = (n - 2) * a

    probe = DecayConfig(rates, threshold, t_max=1.0)
    l_h_bar, l_d_bar = loss_curves(probe, t_bar)
    # the sum stays above (n-2) exp(-slow t); this horizon is past its crossing
    t_max = 2.0 * (t_bar + math.log((n - 1) / threshold + 1.0) / min(rates)) + 1.0
    cfg = DecayConfig(rates, threshold, t_max)
    t_h, t_d = stop_times(cfg)
    holds = l_d_bar < threshold < l_h_bar and t_h > t_d
    return PropositionReport(rates, rho, True, t_bar, a, threshold, l_h_bar, l_d_bar,
                             t_h, t_d, holds)


def sample_rates(rng, n_range=(3, 8), min_rho=100.0, max_rho=1000.0, slow_range=(0.01, 10.0)):
    """Rates for one config: a random layer decays ``rho`` times faster than the rest."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    slow = float(np.exp(rng.uniform(np.log(slow_range[0]), np.log(slow_range[1]))))
    rho = float(rng.uniform(min_rho, max_rho))
    rates = [slow] * (n - 1)
    rates[int(rng.integers(n - 1))] = slow * rho
    return tuple(rates)


def simulate(count, seed=0, n_range=(3, 8), min_rho=100.0, max_rho=1000.0):
    """``count`` reports from randomly drawn rate vectors, reproducible from ``seed``."""
    rng = rng_stream(seed, PROP)
    return [check_proposition(sample_rates(rng, n_range, min_rho, max_rho)) for _ in range(count)]
