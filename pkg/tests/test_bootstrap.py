import datetime as dt

import numpy as np
import pytest

from pinvcurve.bootstrap import BootstrapCurve, bootstrap, interpolation_weight, roughness
from pinvcurve.errors import CurveError
from pinvcurve.instruments import Conventions, DayCount, Deposit, ForwardRateAgreement, ParSwap

ORIGIN = dt.date(2012, 1, 2)
CONV = Conventions(spot_lag=0, money_market=DayCount.THIRTY_360)


@pytest.fixture(scope="module")
def usd_boot(usd):
    return bootstrap(usd[0])


def test_single_deposit():
    curve = bootstrap([Deposit("6m", 0.01, dt.date(2012, 7, 2))], ORIGIN, CONV)
    assert curve.factors[-1] == pytest.approx(1 / 1.005, abs=1e-15)
    assert curve.factors[-1] == pytest.approx(0.9950249, abs=1e-7)


def test_interpolation_weight_midpoint():
    w = interpolation_weight(DayCount.THIRTY_360, dt.date(2012, 3, 2), dt.date(2012, 4, 2), dt.date(2012, 5, 2))
    assert w == 0.5


def test_interpolation_weight_outside():
    with pytest.raises(CurveError):
        interpolation_weight(DayCount.ACT_360, dt.date(2012, 3, 2), dt.date(2012, 6, 2), dt.date(2012, 5, 2))


def test_futures_chain_and_interpolated_spot():
    deps = [Deposit("1m", 0.01, dt.date(2012, 2, 2)), Deposit("3m", 0.012, dt.date(2012, 4, 2))]
    fut = ForwardRateAgreement("f1", 0.015, dt.date(2012, 3, 2), dt.date(2012, 6, 2))
    curve = bootstrap(deps + [fut], ORIGIN, CONV)
    # 30/360: 1m = 30 days, 2m = 60 days, 3m = 90 days, so w = 0.5.
    spot = 0.5 * 0.01 + 0.5 * 0.012
    g_start = 1 / (1 + 60 / 360 * spot)
    g_end = g_start / (1 + 0.25 * 0.015)
    assert dict(zip(curve.dates, curve.factors[1:]))[dt.date(2012, 6, 2)] == pytest.approx(g_end, abs=1e-15)


def test_chain_gap():
    deps = [Deposit("1m", 0.01, dt.date(2012, 2, 2)), Deposit("3m", 0.012, dt.date(2012, 4, 2))]
    futs = [
        ForwardRateAgreement("f1", 0.015, dt.date(2012, 3, 2), dt.date(2012, 6, 2)),
        ForwardRateAgreement("f2", 0.015, dt.date(2012, 7, 2), dt.date(2012, 10, 2)),
    ]
    with pytest.raises(CurveError, match="gap"):
        bootstrap(deps + futs, ORIGIN, CONV)


def test_chain_ordering():
    deps = [Deposit("3m", 0.012, dt.date(2012, 4, 2))]
    fut = ForwardRateAgreement("f1", 0.015, dt.date(2012, 3, 2), dt.date(2012, 6, 2))
    with pytest.raises(CurveError, match="ordering"):
        bootstrap(deps + [fut], ORIGIN, CONV)


def test_needs_deposit():
    with pytest.raises(CurveError):
        bootstrap([ParSwap("2y", 0.01, dt.date(2014, 1, 2), ORIGIN)], ORIGIN, CONV)


def test_swap_recursion_par_identity():
    # Intermediate 2y..4y rates are interpolated; each pillar satisfies 1 - g_n = K_n * sum delta_j g_j.
    dep = Deposit("1y", 0.02, dt.date(2013, 1, 2))
    swaps = [
        ParSwap("2y", 0.025, dt.date(2014, 1, 2), ORIGIN, 1, DayCount.THIRTY_360),
        ParSwap("5y", 0.034, dt.date(2017, 1, 2), ORIGIN, 1, DayCount.THIRTY_360),
    ]
    conv = Conventions(spot_lag=0, money_market=DayCount.THIRTY_360, swap_fixed=DayCount.THIRTY_360)
    curve = bootstrap([dep] + swaps, ORIGIN, conv)
    got = dict(zip(curve.dates, curve.factors[1:]))
    _, pay = swaps[-1].fixed_dates(ORIGIN)
    t = np.array([conv.time(ORIGIN, d) for d in pay])
    # The 1y deposit-implied swap rate joins the interpolation nodes.
    r1 = (1 - got[pay[0]]) / got[pay[0]]
    rates = np.interp(t, [t[0], t[1], t[4]], [r1, 0.025, 0.034])
    annuity, prev = 0.0, ORIGIN
    for day, rate in zip(pay, rates):
        annuity += DayCount.THIRTY_360.year_fraction(prev, day) * got[day]
        assert 1 - got[day] == pytest.approx(rate * annuity, abs=1e-15)
        prev = day


def test_usd_reprices_every_quote(usd, usd_boot):
    _, s = usd
    assert np.allclose(usd_boot.times, s.dates, atol=1e-14)
    assert np.abs(s.cashflows @ usd_boot(s.dates) - s.prices).max() <= 1e-10


def test_usd_sawtooth(usd, usd_boot, usd_curve):
    _, s = usd
    eps = 1e-3
    inner = s.dates[(s.dates > eps) & (s.dates < s.dates[-1] - eps)]

    def jumps(f):
        return np.abs(f(inner + eps) - f(inner - eps)).max()

    assert jumps(usd_boot.forward) > jumps(usd_curve.forward) + 1e-3


class TestRoughness:
    def test_flat(self):
        assert roughness(lambda x: np.ones_like(x), 0.01, 10.0) == 1.0

    def test_linear(self):
        assert roughness(lambda x: 1 - 0.01 * x, 1 / 365, 30.0) == pytest.approx(1.0001, rel=1e-12)

    def test_pseudoinverse_smoother(self, usd, usd_boot, usd_curve):
        horizon = float(usd[1].dates[-1])
        smooth = roughness(usd_curve, 1 / 365, horizon)
        rough = roughness(usd_boot, 1 / 365, horizon)
        assert smooth <= rough
        assert smooth == pytest.approx(usd_curve.norm_squared(), rel=1e-4)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            roughness(lambda x: x, 0.0, 1.0)


def test_curve_validation():
    with pytest.raises(ValueError):
        BootstrapCurve(np.array([0.5, 1.0]), np.array([1.0, 0.9]))
    with pytest.raises(ValueError):
        BootstrapCurve(np.array([0.0, 1.0]), np.array([1.0, -0.1]))


def test_export(usd_boot, tmp_path):
    path = tmp_path / "b.csv"
    usd_boot.export(path, np.linspace(0, 1, 5))
    assert path.read_text().splitlines()[0] == "x,discount,zero_yield,forward"
