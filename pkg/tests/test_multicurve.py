import dataclasses
import datetime as dt
import json

import numpy as np
import pytest

from conftest import data_path
from pinvcurve.curve_solver import KernelExpansion
from pinvcurve.errors import CurveError
from pinvcurve.instruments import BasisSwap, Conventions, DayCount, Deposit, OvernightIndexSwap, ParSwap, read_quotes
from pinvcurve.multicurve import (
    MonthlyGrid,
    build_all,
    build_ois_curve,
    build_tenor_curve_from_basis,
    build_tenor_curve_from_fixed,
    leg_value,
)

VALUATION = dt.date(2013, 11, 4)
SPOT = dt.date(2013, 11, 6)
FILES = ("eur_2013_eonia.csv", "eur_2013_6m_fix.csv", "eur_2013_3m6m.csv", "eur_2013_1m3m.csv")


@pytest.fixture(scope="module")
def multi():
    return build_all(*(data_path(f) for f in FILES))


@pytest.fixture(scope="module")
def grid(multi):
    return multi.grid


class TestOIS:
    def test_single_swap_identity(self):
        conv = Conventions()
        end = dt.date(2014, 11, 6)
        K = 0.00125
        curve = build_ois_curve([OvernightIndexSwap("1y", K, end, SPOT, 0)], VALUATION, conv)
        delta = DayCount.ACT_360.year_fraction(SPOT, end)
        assert curve(conv.time(SPOT, end)) == pytest.approx(1.0 / (1.0 + delta * K), abs=1e-14)

    def test_eonia_reprices(self, multi):
        assert multi.discount.system.n == 22
        assert np.abs(multi.discount.repricing_residuals()).max() <= 1e-10

    def test_overnight_rate(self, multi):
        assert multi.discount.forward(0.0) == pytest.approx(0.00092, abs=1e-4)

    def test_rejects_other_instruments(self):
        with pytest.raises(CurveError, match="not an OIS quote"):
            build_ois_curve([ParSwap("s", 0.01, dt.date(2014, 11, 6))], VALUATION, Conventions())


class TestSixMonth:
    def test_spot_fixing(self, multi, grid):
        assert multi.forwards[6].at_index(grid, 6) == pytest.approx(0.00342, abs=1e-14)

    def test_one_swap_hand_solve(self, multi, grid):
        g = multi.discount
        cash = 0.00342
        K = 0.00386
        swap = ParSwap("1y", K, grid.dates[12], SPOT, 1, DayCount.THIRTY_360, 2)
        f6 = build_tenor_curve_from_fixed(grid, g, [Deposit("6m", cash, grid.dates[6]), swap], 6)
        annuity = DayCount.THIRTY_360.year_fraction(grid.dates[0], grid.dates[12]) * g(grid.time(12))
        d1, d2 = grid.accrual(0, 6), grid.accrual(6, 12)
        expected = (K * annuity - d1 * g(grid.time(6)) * cash) / (d2 * g(grid.time(12)))
        assert f6.at_index(grid, 12) == pytest.approx(expected, abs=1e-10)

    def test_all_quotes_repriced(self, multi):
        assert multi.forwards[6].system.n == 17
        assert np.abs(multi.forwards[6].residuals()).max() <= 1e-8

    def test_round_trip_to_swap_rates(self, multi, grid):
        f6 = multi.forwards[6]
        g = multi.discount
        for sw in read_quotes(data_path(FILES[1])).of_kind("swap"):
            end = grid.index(sw.end)
            float_leg = leg_value(grid, g, 6, end, rates=lambda i: f6.at_index(grid, i))
            annuity = leg_value(grid, g, 12, end, daycount=grid.fixed_daycount)
            assert float_leg / annuity == pytest.approx(sw.rate, abs=1e-8)

    def test_wrong_fixing(self, multi, grid):
        with pytest.raises(CurveError, match="expected month 6"):
            build_tenor_curve_from_fixed(grid, multi.discount, [Deposit("3m", 0.01, grid.dates[3])], 6)


class TestBasis:
    def test_three_month_repriced(self, multi, grid):
        assert multi.forwards[3].at_index(grid, 3) == pytest.approx(0.00227, abs=1e-14)
        assert np.abs(multi.forwards[3].residuals()).max() <= 1e-8

    def test_one_month_repriced(self, multi, grid):
        assert multi.forwards[1].at_index(grid, 1) == pytest.approx(0.00129, abs=1e-14)
        assert np.abs(multi.forwards[1].residuals()).max() <= 1e-8

    def test_knot_counts(self, multi):
        assert [len(multi.forwards[k].knot_indices) for k in (6, 3, 1)] == [60, 120, 360]

    def test_zero_spread_pv_identity(self, multi, grid):
        g, f6 = multi.discount, multi.forwards[6]
        quotes = read_quotes(data_path(FILES[2])).instruments
        flat = [dataclasses.replace(q, spread=0.0) if isinstance(q, BasisSwap) else q for q in quotes]
        f3 = build_tenor_curve_from_basis(grid, g, f6, flat, 3)
        for bs in flat:
            if isinstance(bs, BasisSwap):
                end = grid.index(bs.end)
                leg3 = leg_value(grid, g, 3, end, rates=lambda i: f3.at_index(grid, i))
                leg6 = leg_value(grid, g, 6, end, rates=lambda i: f6.at_index(grid, i))
                assert leg3 == pytest.approx(leg6, abs=1e-10)

    def test_reference_horizon_shortfall(self, multi, grid):
        short = build_tenor_curve_from_fixed(
            grid,
            multi.discount,
            [Deposit("6m", 0.00342, grid.dates[6]), ParSwap("2y", 0.0048, grid.dates[24], SPOT, 1, None, 2)],
            6,
        )
        late = BasisSwap("5y", 0.001, grid.dates[60], SPOT, 4, 2)
        with pytest.raises(CurveError, match="36 months short"):
            build_tenor_curve_from_basis(grid, multi.discount, short, [Deposit("3m", 0.00227, grid.dates[3]), late], 3)

    def test_leg_mismatch(self, multi, grid):
        wrong = BasisSwap("x", 0.001, grid.dates[24], SPOT, 12, 2)
        with pytest.raises(CurveError, match="legs are"):
            build_tenor_curve_from_basis(
                grid, multi.discount, multi.forwards[6], [Deposit("3m", 0.00227, grid.dates[3]), wrong], 3
            )

    def test_one_month_reference_switch(self):
        with pytest.raises(ValueError):
            build_all(*(data_path(f) for f in FILES), one_month_reference=12)
        # The shipped 1M quotes reference the 3M leg, so wiring them to 6M is rejected.
        with pytest.raises(CurveError, match="expected 1M/6M"):
            build_all(*(data_path(f) for f in FILES), one_month_reference=6)


class TestPipeline:
    def test_deterministic(self, multi):
        again = build_all(*(data_path(f) for f in FILES))
        assert np.array_equal(again.discount.weights, multi.discount.weights)
        for k in (6, 3, 1):
            assert np.array_equal(again.forwards[k].weights, multi.forwards[k].weights)

    def test_export(self, multi, tmp_path):
        manifest = multi.export(tmp_path)
        meta = json.loads(manifest.read_text())
        assert [s["file"] for s in meta["stages"]] == [
            "ois_discount.csv",
            "forward_6m.csv",
            "forward_3m.csv",
            "forward_1m.csv",
        ]
        rows = (tmp_path / "forward_6m.csv").read_text().splitlines()
        assert rows[0] == "x,value" and len(rows) == 61

    def test_grid(self):
        g = MonthlyGrid(dt.date(2013, 11, 6), 3)
        assert g.dates == (dt.date(2013, 11, 6), dt.date(2013, 12, 6), dt.date(2014, 1, 6), dt.date(2014, 2, 6))
        with pytest.raises(CurveError, match="not on the monthly grid"):
            g.index(dt.date(2013, 11, 7))

    def test_leg_value_tenor_check(self, grid):
        with pytest.raises(CurveError):
            leg_value(grid, lambda t: 1.0, 6, 7)

    def test_forward_curve_is_expansion(self, multi):
        assert isinstance(multi.forwards[1], KernelExpansion)
