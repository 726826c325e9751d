"""Beta moment matching and the prior effective-sample-size report."""

from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np
import pytest

from exbridge.betaess import BetaApprox, beta_moment_match, ess_report
from exbridge.errors import ConfigError, InfeasibleBetaError
from oracles import beta_from_moments
from tables import PRIOR_SUMMARY_ROWS


class TestBetaMomentMatch:
    def test_reproduces_tabulated_rows_within_half_unit(self):
        start = time.perf_counter()
        for stage, sub, dose, mean, sd, a, b, ess in PRIOR_SUMMARY_ROWS:
            approx = beta_moment_match(mean, sd)
            where = f"{stage}/{sub}@{dose}"
            assert abs(approx.a - a) <= 0.5, where
            assert abs(approx.b - b) <= 0.5, where
            assert abs(approx.ess - ess) <= 0.5, where
        assert time.perf_counter() - start < 1.0

    def test_agrees_with_independent_inversion(self):
        rng = np.random.default_rng(20260819)
        for _ in range(500):
            mean = float(rng.uniform(0.02, 0.98))
            cap = (mean * (1.0 - mean)) ** 0.5
            sd = float(rng.uniform(0.05, 0.95)) * cap
            approx = beta_moment_match(mean, sd)
            a, b = beta_from_moments(mean, sd)
            assert approx.a == pytest.approx(a, rel=1e-12)
            assert approx.b == pytest.approx(b, rel=1e-12)

    def test_round_trips_through_its_own_moments(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            a = float(rng.uniform(0.1, 40.0))
            b = float(rng.uniform(0.1, 40.0))
            source = BetaApprox(a=a, b=b, source_mean=a / (a + b), source_sd=0.01)
            again = beta_moment_match(source.mean, source.sd)
            assert again.a == pytest.approx(a, rel=1e-9)
            assert again.b == pytest.approx(b, rel=1e-9)

    def test_ess_is_parameter_total(self):
        approx = beta_moment_match(0.25, 0.1)
        assert approx.ess == approx.a + approx.b

    def test_variance_at_or_above_bernoulli_is_infeasible(self):
        with pytest.raises(InfeasibleBetaError):
            beta_moment_match(0.5, 0.5)
        with pytest.raises(InfeasibleBetaError):
            beta_moment_match(0.2, 0.4000001)
        # boundary: sd^2 == mean*(1-mean) has no positive-parameter solution
        with pytest.raises(InfeasibleBetaError):
            beta_moment_match(0.2, (0.2 * 0.8) ** 0.5)

    def test_rejects_degenerate_inputs(self):
        for mean, sd in ((0.0, 0.1), (1.0, 0.1), (-0.2, 0.1), (0.5, 0.0), (0.5, -0.3)):
            with pytest.raises(ConfigError):
                beta_moment_match(mean, sd)


class TestEssReport:
    def test_flags_infeasible_rows_instead_of_failing(self):
        summaries = [
            SimpleNamespace(subgroup="T1", dose=0.1, mean=0.1, sd=0.05),
            SimpleNamespace(subgroup="T1", dose=0.5, mean=0.5, sd=0.9),
            SimpleNamespace(subgroup="T2", dose=0.1, mean=0.25, sd=0.15),
        ]
        rows = ess_report(summaries)
        assert [r.infeasible for r in rows] == [False, True, False]
        assert rows[1].a is None and rows[1].b is None and rows[1].ess is None
        assert rows[0].ess == pytest.approx(beta_moment_match(0.1, 0.05).ess)
        assert rows[2].subgroup == "T2"

    def test_preserves_input_order_and_doses(self):
        summaries = [
            SimpleNamespace(subgroup="T1", dose=d, mean=0.1 + 0.02 * i, sd=0.05)
            for i, d in enumerate((0.1, 0.5, 1.0, 5.0, 10.0, 20.0))
        ]
        rows = ess_report(summaries)
        assert [r.dose for r in rows] == [0.1, 0.5, 1.0, 5.0, 10.0, 20.0]
        assert all(not r.infeasible for r in rows)
