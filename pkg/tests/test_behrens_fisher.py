import math

import numpy as np
import pytest

from weaktrans.behrens_fisher import (
    BFConfig,
    nuisance_sensitivity,
    power_proxy,
    trade_off_table,
    w0_closed_form,
    w0_unnormalised_form,
)
from weaktrans.quadrature import integrate

S_GRID = (1.0, 2.0, 5.0, 10.0, 50.0, 100.0)
SIGMA_GRID = tuple(np.linspace(0.5, 2.0, 16))


class TestClosedForm:
    def test_reference_value(self):
        assert abs(w0_closed_form(0.0, 1.0, 1.0) - (4 * math.pi) ** -0.5) <= 1e-15

    def test_matches_quadrature(self):
        for mu in (-1.0, 0.0, 0.5, 2.0):
            for sigma in (0.5, 1.0, 1.7):
                for s in (0.5, 1.0, 3.0, 10.0):
                    def f(x, mu=mu, sigma=sigma, s=s):
                        dens = np.exp(-((x - mu) ** 2) / (2 * sigma**2)) / (
                            sigma * math.sqrt(2 * math.pi)
                        )
                        kern = np.exp(-x * x / (2 * s * s)) / math.sqrt(2 * math.pi * s * s)
                        return dens * kern

                    quad, _ = integrate(f, (-np.inf, np.inf))
                    assert abs(w0_closed_form(mu, sigma, s) - quad) <= 1e-10

    def test_vanishes_monotonically_in_mu(self):
        values = [w0_closed_form(mu, 1.0, 1.0) for mu in (0.0, 1.0, 2.0, 5.0, 10.0)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-8

    def test_coupling_through_variance_sum(self):
        # w0 depends on (sigma, s) only through sigma^2 + s^2
        a = w0_closed_form(0.7, 1.0, 2.0)  # v = 5
        b = w0_closed_form(0.7, 2.0, 1.0)  # v = 5
        assert abs(a - b) <= 1e-12
        c = w0_closed_form(0.7, math.sqrt(0.5), math.sqrt(4.5))
        assert abs(a - c) <= 1e-12

    def test_printed_form_ratio(self):
        w = w0_closed_form(0.3, 1.0, 2.0)
        w_u = w0_unnormalised_form(0.3, 1.0, 2.0)
        assert abs(w / w_u - (2 * math.pi) ** -0.5) <= 1e-14

    def test_invalid_scales(self):
        with pytest.raises(ValueError):
            w0_closed_form(0.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            w0_closed_form(0.0, 1.0, 0.0)


class TestNuisanceSensitivity:
    def test_equal_sigmas_contribute_zero(self):
        cfg = BFConfig(mu1=0.0, mu2=0.0, sigma1=1.0, sigma2=1.0, s_grid=S_GRID, sigma_grid=(1.3,))
        rows = nuisance_sensitivity(cfg)
        assert all(r["sup_nuisance_gap"] == 0.0 for r in rows)

    def test_strictly_decreasing_in_s(self):
        cfg = BFConfig(0.0, 0.0, 1.0, 1.5, s_grid=S_GRID, sigma_grid=SIGMA_GRID)
        gaps = [r["sup_nuisance_gap"] for r in nuisance_sensitivity(cfg)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_negligible_at_large_scale(self):
        cfg = BFConfig(0.0, 0.0, 1.0, 1.5, s_grid=(100.0,), sigma_grid=SIGMA_GRID)
        assert nuisance_sensitivity(cfg)[0]["sup_nuisance_gap"] < 1e-6


class TestPowerProxy:
    def test_positive_for_distinct_means(self):
        cfg = BFConfig(0.0, 1.0, 1.0, 1.0, s_grid=S_GRID, sigma_grid=SIGMA_GRID)
        rows = power_proxy(cfg)
        assert all(r["signal_gap"] > 0 for r in rows)

    def test_signal_fades_with_scale(self):
        cfg = BFConfig(0.0, 1.0, 1.0, 1.0, s_grid=S_GRID, sigma_grid=SIGMA_GRID)
        signals = [r["signal_gap"] for r in power_proxy(cfg)]
        assert all(b < a for a, b in zip(signals, signals[1:]))
        assert signals[-1] < 1e-5

    def test_requires_alternative(self):
        cfg = BFConfig(0.0, 0.0, 1.0, 1.5)
        with pytest.raises(ValueError):
            power_proxy(cfg)

    def test_trade_off_ratio_finite_positive(self):
        cfg = BFConfig(0.0, 1.0, 1.0, 1.5, s_grid=S_GRID, sigma_grid=SIGMA_GRID)
        for row in trade_off_table(cfg):
            assert math.isfinite(row["ratio"])
            assert row["ratio"] > 0


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            BFConfig(0.0, 0.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            BFConfig(0.0, 0.0, 1.0, 1.0, s_grid=())
        with pytest.raises(ValueError):
            BFConfig(0.0, 0.0, 1.0, 1.0, sigma_grid=(0.0,))

    def test_variance_ratio_recorded(self):
        cfg = BFConfig(0.0, 0.0, 2.0, 1.0)
        assert cfg.variance_ratio == 4.0
        assert cfg.to_dict()["variance_ratio"] == 4.0
