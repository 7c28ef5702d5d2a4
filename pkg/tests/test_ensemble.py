import datetime as dt
import math

import numpy as np
import pytest

from wikitraffic.baselines import Forecast
from wikitraffic.ensemble import EnsembleInputs, average_lstm_pair, final_forecast
from wikitraffic.transform import log1p_invert

import oracles

PAGES = ["a_b_c_d"]
DATES = [dt.date(2017, 1, 1) + dt.timedelta(days=i) for i in range(3)]


def fc(grid, label="f"):
    return Forecast(PAGES, DATES, np.asarray(grid, dtype=float), label)


class TestAverageLstmPair:
    def test_identical_inputs(self):
        p = np.log1p(np.array([[3.0, 8.0, 0.0]]))
        out = average_lstm_pair(p, p, PAGES, DATES)
        np.testing.assert_allclose(out.values, log1p_invert(p), rtol=1e-12)

    def test_log_space_mean_hand_value(self):
        a = np.full((1, 3), math.log(4.0))   # log1p(3)
        b = np.full((1, 3), math.log(9.0))   # log1p(8)
        out = average_lstm_pair(a, b, PAGES, DATES)
        # exp((ln4 + ln9)/2) - 1 = sqrt(36) - 1 = 5
        np.testing.assert_allclose(out.values, 5.0, rtol=1e-12)

    def test_views_space_mean(self):
        a = np.full((1, 3), math.log(4.0))
        b = np.full((1, 3), math.log(9.0))
        out = average_lstm_pair(a, b, PAGES, DATES, space="views")
        np.testing.assert_allclose(out.values, (3.0 + 8.0) / 2.0, rtol=1e-12)

    def test_zero_matrices(self):
        z = np.zeros((1, 3))
        out = average_lstm_pair(z, z, PAGES, DATES)
        np.testing.assert_array_equal(out.values, np.zeros((1, 3)))

    def test_symmetry(self, rng):
        a = rng.normal(size=(4, 3))
        b = rng.normal(size=(4, 3))
        pages = [f"p{i}_b_c_d" for i in range(4)]
        out1 = average_lstm_pair(a, b, pages, DATES)
        out2 = average_lstm_pair(b, a, pages, DATES)
        np.testing.assert_array_equal(out1.values, out2.values)

    def test_negative_log_means_clamp_to_zero(self):
        a = np.full((1, 3), -2.0)
        b = np.full((1, 3), -1.0)
        out = average_lstm_pair(a, b, PAGES, DATES)
        np.testing.assert_array_equal(out.values, np.zeros((1, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            average_lstm_pair(np.zeros((1, 3)), np.zeros((2, 3)), PAGES, DATES)

    def test_unknown_space(self):
        with pytest.raises(ValueError):
            average_lstm_pair(np.zeros((1, 3)), np.zeros((1, 3)), PAGES, DATES, space="sqrt")


class TestFinalForecast:
    def _inputs(self, cells):
        medians = [fc(np.full((1, 3), v), f"m{i}") for i, v in enumerate(cells[:5])]
        lstm = fc(np.full((1, 3), cells[5]), "lstm")
        return EnsembleInputs(lstm, medians)

    def test_all_identical(self):
        out = final_forecast(self._inputs([4.0] * 6))
        np.testing.assert_array_equal(out.values, np.full((1, 3), 4.0))

    def test_even_median_rule(self):
        out = final_forecast(self._inputs([0.0, 1.0, 2.0, 3.0, 4.0, 100.0]))
        np.testing.assert_array_equal(out.values, np.full((1, 3), 2.5))

    def test_candidate_order_irrelevant(self, rng):
        vals = rng.uniform(0, 50, (6, 4, 3))
        pages = [f"p{i}_b_c_d" for i in range(4)]
        fcs = [Forecast(pages, DATES, v, f"c{i}") for i, v in enumerate(vals)]
        out1 = final_forecast(EnsembleInputs(fcs[0], fcs[1:]))
        out2 = final_forecast(EnsembleInputs(fcs[3], [fcs[5], fcs[4], fcs[2], fcs[1], fcs[0]]))
        np.testing.assert_array_equal(out1.values, out2.values)

    def test_median_bounded_by_candidates(self, rng):
        vals = rng.uniform(0, 50, (6, 5, 3))
        pages = [f"p{i}_b_c_d" for i in range(5)]
        fcs = [Forecast(pages, DATES, v, f"c{i}") for i, v in enumerate(vals)]
        out = final_forecast(EnsembleInputs(fcs[0], fcs[1:]))
        assert np.all(out.values >= vals.min(axis=0) - 1e-12)
        assert np.all(out.values <= vals.max(axis=0) + 1e-12)

    def test_matches_oracle(self, rng):
        vals = rng.integers(0, 100, (6, 3, 3)).astype(float)
        pages = [f"p{i}_b_c_d" for i in range(3)]
        fcs = [Forecast(pages, DATES, v, f"c{i}") for i, v in enumerate(vals)]
        out = final_forecast(EnsembleInputs(fcs[5], fcs[:5]))
        expected = oracles.oracle_combine([v.tolist() for v in vals])
        np.testing.assert_array_equal(out.values, expected)

    def test_wrong_median_count(self):
        medians = [fc(np.ones((1, 3)), f"m{i}") for i in range(4)]
        with pytest.raises(ValueError, match="5"):
            EnsembleInputs(fc(np.ones((1, 3))), medians)

    def test_misaligned_dates(self):
        medians = [fc(np.ones((1, 3)), f"m{i}") for i in range(5)]
        other_dates = [d + dt.timedelta(days=1) for d in DATES]
        bad = Forecast(PAGES, other_dates, np.ones((1, 3)), "lstm")
        with pytest.raises(ValueError):
            EnsembleInputs(bad, medians)
