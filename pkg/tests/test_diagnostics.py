"""Convergence and effective-sample-size diagnostics."""

from __future__ import annotations

import math

import numpy as np
import pytest

from exbridge.diagnostics import diagnostics, mc_ess, split_rhat
from exbridge.errors import DataError


class TestSplitRhat:
    def test_identical_well_mixed_chains_sit_at_one(self):
        rng = np.random.default_rng(20260819)
        draws = rng.normal(size=5000)
        value = split_rhat(np.stack([draws, draws]))
        assert 0.99 < value < 1.01

    def test_independent_chains_from_same_law_stay_near_one(self):
        rng = np.random.default_rng(4)
        value = split_rhat(rng.normal(size=(4, 5000)))
        assert 0.99 < value < 1.02

    def test_two_constant_disjoint_chains_diverge(self):
        # closed form: zero within-chain variance with nonzero spread between
        # chains sends the variance ratio to infinity
        chains = np.stack([np.zeros(100), np.full(100, 10.0)])
        value = split_rhat(chains)
        assert value == math.inf
        assert value > 2.0

    def test_nearly_disjoint_chains_flag_clear_trouble(self):
        # rank normalization bounds how extreme separated-but-jittered chains
        # can look, so the check is against a clearly-elevated level rather
        # than the raw-scale ratio
        rng = np.random.default_rng(9)
        chains = np.stack(
            [rng.normal(0.0, 0.01, size=400), rng.normal(10.0, 0.01, size=400)]
        )
        assert split_rhat(chains) > 1.5

    def test_single_chain_has_no_rhat(self):
        assert split_rhat(np.arange(100.0)) is None

    def test_flat_input_reports_none_never_one(self):
        assert split_rhat(np.ones((3, 50))) is None

    def test_rejects_malformed_chains(self):
        with pytest.raises(DataError):
            split_rhat(np.ones((2, 3)))
        with pytest.raises(DataError):
            split_rhat(np.ones((2, 2, 8)))
        bad = np.ones((2, 50))
        bad[0, 3] = np.nan
        with pytest.raises(DataError):
            split_rhat(bad)


class TestMcEss:
    def test_iid_chain_keeps_most_of_its_draws(self):
        rng = np.random.default_rng(20260819)
        n = 10000
        ess = mc_ess(rng.normal(size=n))
        assert 0.5 * n < ess < 1.5 * n

    def test_sticky_chain_loses_most_of_its_draws(self):
        rng = np.random.default_rng(12)
        n = 20000
        x = np.empty(n)
        x[0] = 0.0
        noise = rng.normal(size=n)
        for t in range(1, n):
            x[t] = 0.9 * x[t - 1] + noise[t]
        ess = mc_ess(x)
        assert ess < n / 5.0

    def test_flat_chain_has_no_ess(self):
        assert mc_ess(np.full((2, 100), 3.5)) is None

    def test_multichain_ess_pools_draws(self):
        rng = np.random.default_rng(3)
        chains = rng.normal(size=(4, 2500))
        ess = mc_ess(chains)
        assert 0.5 * 10000 < ess < 1.5 * 10000


class TestDiagnosticsTable:
    def test_degenerate_parameters_are_flagged_not_nan(self):
        rng = np.random.default_rng(8)
        table = diagnostics(
            {
                "moving": rng.normal(size=(2, 500)),
                "stuck": np.full((2, 500), -1.099),
            }
        )
        stuck = table["stuck"]
        assert stuck.degenerate
        assert stuck.split_rhat is None and stuck.ess is None
        moving = table["moving"]
        assert not moving.degenerate
        assert moving.split_rhat is not None and math.isfinite(moving.split_rhat)
        assert moving.ess is not None and moving.ess > 0

    def test_single_chain_gets_ess_without_rhat(self):
        rng = np.random.default_rng(5)
        table = diagnostics({"x": rng.normal(size=(1, 800))})
        assert table["x"].split_rhat is None
        assert table["x"].ess is not None and table["x"].ess > 100
        assert not table["x"].degenerate
