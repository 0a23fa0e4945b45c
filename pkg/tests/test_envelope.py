import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import envelope as ev
from displab.errors import UsageError


def test_identity_ratio_fit():
    s = ev.log_grid(1e-2, 1e2, 4)
    s2 = ev.log_grid(1e-2, 1e2, 4, 2)
    rep = ev.fit_envelope([({"s": x}, x ** -2) for x in s], lambda q: q["s"] ** -2, "id",
                          refined=[({"s": x}, x ** -2) for x in s2])
    assert rep.fitted_constant == pytest.approx(1.0, rel=1e-15) and rep.refinement_stable


def test_empty_samples():
    with pytest.raises(UsageError):
        ev.fit_envelope([], lambda q: 1.0, "x")


def test_nonpositive_envelope():
    with pytest.raises(UsageError):
        ev.fit_envelope([({"s": 1.0}, 1.0)], lambda q: 0.0, "x")


def test_no_refinement_leaves_flag_open():
    rep = ev.fit_envelope([({"s": 1.0}, 2.0)], lambda q: 1.0, "x")
    assert rep.refinement_stable is None and not rep.ok


def test_unstable_flag():
    rep = ev.fit_envelope([({"s": 1.0}, 1.0)], lambda q: 1.0, "x", refined=[({"s": 1.0}, 1.2)])
    assert rep.refinement_stable is False and rep.drift == pytest.approx(0.2)


@given(lo=st.floats(1e-3, 1.0), span=st.floats(1.0, 4.0), pd=st.integers(2, 10))
def test_prop_log_grid_nested(lo, span, pd):
    hi = lo * 10 ** span
    g1, g2 = ev.log_grid(lo, hi, pd, 1), ev.log_grid(lo, hi, pd, 2)
    assert np.allclose(g2[::2], g1, rtol=1e-12)


@given(C=st.floats(0.1, 10.0), beta=st.floats(-2.0, 3.0))
def test_prop_power_law_recovery(C, beta):
    x = np.array([4.0, 8.0, 16.0, 32.0])
    c, b = ev.fit_power_law(x, C * x ** -beta)
    assert c == pytest.approx(C, rel=1e-9) and b == pytest.approx(beta, abs=1e-9)


def test_trend_decay_and_bounded():
    h = [4, 8, 16, 32]
    assert ev.h_trend("d", h, [1.0, 0.5, 0.25, 0.125]).ok
    assert not ev.h_trend("d", h, [1.0, 0.5, 0.6, 0.1]).ok
    # h^2-scaled values of h^-2 norms are constant: bounded, not decaying
    r = ev.h_trend("b", h, [1 / 16, 1 / 64, 1 / 256, 1 / 1024], 2.0, "bounded")
    assert r.ok and abs(r.beta) < 1e-12
    assert not ev.h_trend("b", h, [1.0, 2.0, 4.0, 8.0], 0.0, "bounded").ok
    assert not ev.h_trend("d", h, [1.0, math.inf, 1.0, 1.0]).ok


def test_polished_sampling_finds_peak():
    # narrow peak between grid points
    f = lambda pts: np.array([math.exp(-((p["x"] - 0.537) / 0.01) ** 2) for p in pts])
    rep = ev.polished_fit(f, lambda q: 1.0, {"x": ev.Axis(0.0, 1.0, 11, "lin")}, "peak")
    assert rep.fitted_constant > 0.99 and rep.refinement_stable


def test_csv_round_trip():
    rep = ev.fit_envelope([({"s": 2.0}, 3.0)], lambda q: 1.5, "x")
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "s,abs_value,envelope,ratio"
    assert float(lines[1].split(",")[-1]) == 2.0
