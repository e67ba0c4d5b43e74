import numpy as np
import pytest
from scipy.integrate import solve_ivp

from isomon.errors import StepUnderflow
from isomon.integrate import StepStats, integrate


def test_exponential_matches_closed_form():
    y = integrate(lambda s, y: 1j * y, np.array([1.0 + 0j]), 0.0, 10.0, 1e-10)
    assert abs(y[0] - np.exp(10j)) < 1e-8


def test_backward_integration_recovers_start():
    f = lambda s, y: np.array([y[1], -y[0] * (1 + 0.1 * s)])
    y1 = integrate(f, np.array([1.0, 0.0]), 0.0, 5.0, 1e-11)
    y0 = integrate(f, y1, 5.0, 0.0, 1e-11)
    assert np.max(np.abs(y0 - [1.0, 0.0])) < 1e-8


def test_agrees_with_scipy_on_complex_linear_system():
    a = np.array([[0.3 + 0.1j, 1.0], [-0.7, -0.2j]])
    f = lambda s, y: (np.cos(s) * a) @ y
    y0 = np.array([1.0 + 0j, 0.5j])
    ours = integrate(f, y0, 0.0, 3.0, 1e-11)
    ref = solve_ivp(f, (0.0, 3.0), y0, method="DOP853", rtol=1e-13, atol=1e-13).y[:, -1]
    assert np.max(np.abs(ours - ref)) < 1e-8


def test_stats_and_callback():
    stats = StepStats()
    seen = []
    integrate(lambda s, y: -y, np.array([1.0]), 0.0, 1.0, 1e-8, stats=stats,
              on_step=lambda s, y: seen.append(s))
    assert stats.accepted == len(seen) > 0
    assert seen[-1] == 1.0
    assert all(a < b for a, b in zip(seen, seen[1:]))
    assert stats.max_error <= 1e-8


def test_zero_span_is_identity():
    y0 = np.array([2.0 + 1j])
    assert np.array_equal(integrate(lambda s, y: y, y0, 1.0, 1.0, 1e-10), y0)


def test_blow_up_reports_underflow_position():
    # y' = y^2, y(0) = 1 blows up at s = 1
    with pytest.raises(StepUnderflow) as info:
        integrate(lambda s, y: y ** 2, np.array([1.0 + 0j]), 0.0, 2.0, 1e-10)
    assert info.value.s == pytest.approx(1.0, abs=1e-3)
