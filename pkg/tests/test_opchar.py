"""Rejection pmf, operating characteristics, trial simulation, and curves."""

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from armdesign.corrections import Mcc, thresholds
from armdesign.errors import DomainError, InputError
from armdesign.models import (
    SampleSizes,
    bernoulli_model,
    bernoulli_scenario,
    named_scenarios,
    normal_model,
    normal_scenario,
    null_correlation,
    truth_vector,
    z_law,
)
from armdesign.mvn import mvn_rectangle
from armdesign.opchar import (
    MIN_REPLICATES,
    PmfMethod,
    RejectionPmf,
    analytic_opchars,
    curve_grid,
    curves,
    opchars_from_pmf,
    outcome_pmf,
    simulate_trials,
)
from armdesign.opchar import _pmf_qmc  # cross-engine check

ALL_MCCS = list(Mcc)


def law_k(k, effects, sigmas=None, n=100.0):
    model = normal_model(sigmas if sigmas is not None else [1.0] * (k + 1))
    sizes = SampleSizes(n, (n,) * k)
    return model, sizes, normal_scenario(effects)


class TestPmfAnalytic:
    def test_matches_direct_enumeration(self, fast):
        """Independent in-test loop over the 2^K boxes, same normalization."""
        model, sizes, sc = law_k(2, [0.3, 0.1])
        law = z_law(model, sizes, sc)
        thr = thresholds(Mcc.BONFERRONI, 0.1, 2)
        pmf = outcome_pmf(law, Mcc.BONFERRONI, 0.1, settings=fast, thr=thr)
        crit = ndtri(1.0 - np.asarray(thr.gammas))
        raw = np.empty(4)
        for m in range(4):
            rej = np.array([(m >> 0) & 1, (m >> 1) & 1], dtype=bool)
            lower = np.where(rej, crit, -np.inf)
            upper = np.where(rej, np.inf, crit)
            raw[m] = mvn_rectangle(lower, upper, law.mean, law.corr, fast).value
        assert np.allclose(pmf.probs, raw / raw.sum(), atol=1e-12)
        assert pmf.method is PmfMethod.ANALYTIC_BOX
        assert pmf.raw_sum == pytest.approx(1.0, abs=1e-3)

    def test_marginal_matches_univariate(self):
        # box-integral marginal against the closed-form normal tail
        model, sizes, sc = law_k(2, [0.35, 0.15])
        law = z_law(model, sizes, sc)
        thr = thresholds(Mcc.SIDAK, 0.1, 2)
        pmf = outcome_pmf(law, Mcc.SIDAK, 0.1, thr=thr)
        oc = opchars_from_pmf(pmf, truth_vector(model, sc))
        crit = ndtri(1.0 - thr.gammas[0])
        for j in range(2):
            expect = float(ndtr(law.mean[j] - crit))
            assert oc.p_marginal[j] == pytest.approx(expect, abs=3e-5)

    def test_sum_guard(self):
        model, sizes, sc = law_k(2, [0.3, 0.1])
        law = z_law(model, sizes, sc)
        with pytest.raises(DomainError):
            # alpha far outside (0,1) never reaches integration
            outcome_pmf(law, Mcc.BONFERRONI, 1.5)

    def test_threshold_dimension_checked(self, fast):
        model, sizes, sc = law_k(2, [0.3, 0.1])
        law = z_law(model, sizes, sc)
        thr = thresholds(Mcc.BONFERRONI, 0.1, 3)
        with pytest.raises(InputError):
            outcome_pmf(law, Mcc.BONFERRONI, 0.1, settings=fast, thr=thr)


class TestPmfCrossEngine:
    @pytest.mark.parametrize("k", [2, 3])
    def test_qmc_agrees_with_boxes_single_step(self, k):
        """The stepwise evaluator, run on a single-step rule, must match
        the analytic boxes; this ties the two engines together."""
        model, sizes, sc = law_k(k, [0.3] * k)
        law = z_law(model, sizes, sc)
        thr = thresholds(Mcc.BONFERRONI, 0.1, k)
        from armdesign.mvn import QmcSettings

        settings = QmcSettings()
        box = outcome_pmf(law, Mcc.BONFERRONI, 0.1, settings=settings, thr=thr)
        stream = _pmf_qmc(law, Mcc.BONFERRONI, thr, settings)
        assert stream.method is PmfMethod.QMC
        assert np.allclose(stream.probs, box.probs, atol=5e-4)
        assert stream.probs.sum() == pytest.approx(1.0, abs=1e-12)


class TestOpChars:
    @pytest.mark.parametrize("mcc", ALL_MCCS, ids=[m.value for m in ALL_MCCS])
    def test_k1_size_is_alpha(self, mcc):
        model, sizes, sc = law_k(1, [0.0])
        oc = analytic_opchars(model, sizes, sc, mcc, 0.1)
        tol = 5e-4 if mcc.is_stepwise else 1e-12
        assert oc.p_dis == pytest.approx(0.1, abs=tol)

    def test_fdr_equals_fwer_under_global_null(self):
        # V = R under H_G, so V/max(R,1) is the indicator of any rejection
        model, sizes, sc = law_k(3, [0.0, 0.0, 0.0])
        oc = analytic_opchars(model, sizes, sc, Mcc.BONFERRONI, 0.1)
        assert oc.fdr == pytest.approx(oc.fwer_i[0], abs=1e-14)
        assert oc.pfdr == pytest.approx(1.0, abs=1e-12)
        assert oc.sensitivity == 1.0
        assert "sensitivity_vacuous" in oc.flags

    def test_pher_under_global_null_single_test_rate(self):
        # per-hypothesis error rate is E[V]/K = alpha under unadjusted tests
        model, sizes, sc = law_k(2, [0.0, 0.0])
        oc = analytic_opchars(model, sizes, sc, Mcc.NONE, 0.1)
        assert oc.pher == pytest.approx(0.1, abs=2e-5)

    def test_global_alternative_zeros(self):
        model, sizes, sc = law_k(2, [0.4, 0.4])
        oc = analytic_opchars(model, sizes, sc, Mcc.SIDAK, 0.1)
        assert oc.fwer_i == (0.0, 0.0)
        assert oc.pher == 0.0
        assert oc.fdr == 0.0
        assert oc.pfdr == 0.0
        assert oc.specificity == 1.0
        assert "specificity_vacuous" in oc.flags
        assert oc.sensitivity == pytest.approx(np.mean(oc.p_marginal), abs=1e-12)

    def test_mixed_truth_bookkeeping(self):
        model, sizes, sc = law_k(3, [0.5, 0.0, 0.5])
        oc = analytic_opchars(model, sizes, sc, Mcc.HOCHBERG, 0.1)
        # one true null: specificity = 1 - P(reject arm 2)
        assert oc.specificity == pytest.approx(1.0 - oc.p_marginal[1], abs=1e-9)
        assert oc.sensitivity == pytest.approx(
            0.5 * (oc.p_marginal[0] + oc.p_marginal[2]), abs=1e-9
        )
        assert not oc.flags

    def test_constructed_pmf_never_rejects(self):
        pmf = RejectionPmf(
            probs=np.array([1.0, 0.0, 0.0, 0.0]),
            method=PmfMethod.SIMULATION,
            error_estimate=0.0,
        )
        oc = opchars_from_pmf(pmf, [True, False])
        assert np.isnan(oc.pfdr)
        assert "pfdr_undefined" in oc.flags
        assert oc.fdr == 0.0
        assert oc.sensitivity == 0.0
        assert oc.specificity == 1.0
        assert oc.as_dict()["pfdr"] is None

    def test_truth_length_checked(self):
        pmf = RejectionPmf(
            probs=np.full(4, 0.25), method=PmfMethod.SIMULATION, error_estimate=0.0
        )
        with pytest.raises(InputError):
            opchars_from_pmf(pmf, [True])


class TestInvariants:
    """Structural identities on a small sweep of laws and corrections."""

    CASES = [
        (Mcc.NONE, [0.3, 0.1, 0.2]),
        (Mcc.BONFERRONI, [0.0, 0.0, 0.0]),
        (Mcc.DUNNETT, [0.4, 0.4, 0.4]),
        (Mcc.HOLM_BONFERRONI, [0.3, 0.0, 0.1]),
        (Mcc.HOCHBERG, [0.5, 0.2, 0.0]),
        (Mcc.BENJAMINI_HOCHBERG, [0.2, 0.2, 0.6]),
    ]

    @pytest.mark.parametrize("mcc,effects", CASES, ids=[m.value for m, _ in CASES])
    def test_pmf_and_ordering(self, fast, mcc, effects):
        model, sizes, sc = law_k(3, effects)
        law = z_law(model, sizes, sc)
        corr0 = null_correlation(model, [1.0, 1.0, 1.0]) if mcc.needs_correlation else None
        thr = thresholds(mcc, 0.1, 3, corr=corr0, settings=fast)
        pmf = outcome_pmf(law, mcc, 0.1, settings=fast, thr=thr)
        assert pmf.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(pmf.probs >= 0.0)
        oc = opchars_from_pmf(pmf, truth_vector(model, sc))
        assert oc.p_con <= min(oc.p_marginal) + 1e-12
        assert max(oc.p_marginal) <= oc.p_dis + 1e-12
        assert all(a >= b - 1e-12 for a, b in zip(oc.fwer_i, oc.fwer_i[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(oc.fwer_ii, oc.fwer_ii[1:]))
        if not np.isnan(oc.pfdr):
            assert oc.fdr <= oc.pfdr + 1e-12
        for v in (oc.p_con, oc.p_dis, oc.pher, oc.fdr, oc.fndr, oc.sensitivity, oc.specificity):
            assert -1e-12 <= v <= 1.0 + 1e-12

    def test_power_monotone_in_effect(self, fast):
        model, sizes, _ = law_k(2, [0.0, 0.0])
        weak = analytic_opchars(model, sizes, normal_scenario([0.2, 0.2]), Mcc.SIDAK, 0.1, settings=fast)
        strong = analytic_opchars(model, sizes, normal_scenario([0.5, 0.5]), Mcc.SIDAK, 0.1, settings=fast)
        assert strong.p_con > weak.p_con
        assert strong.p_dis > weak.p_dis


class TestSimulation:
    def test_deterministic_for_seed(self):
        model, sizes, sc = law_k(2, [0.3, 0.1], n=60.0)
        a = simulate_trials(model, sizes, sc, Mcc.SIDAK, 0.1, 2000, seed=5)
        b = simulate_trials(model, sizes, sc, Mcc.SIDAK, 0.1, 2000, seed=5)
        assert a.opchars == b.opchars
        c = simulate_trials(model, sizes, sc, Mcc.SIDAK, 0.1, 2000, seed=6)
        assert c.opchars != a.opchars

    def test_replicate_floor(self):
        model, sizes, sc = law_k(1, [0.3])
        with pytest.raises(DomainError):
            simulate_trials(model, sizes, sc, Mcc.NONE, 0.1, MIN_REPLICATES - 1, seed=0)

    def test_fractional_sizes_are_ceiled(self):
        model = normal_model([1.0, 1.0])
        sizes = SampleSizes(59.4, (59.4,))
        out = simulate_trials(model, sizes, normal_scenario([0.3]), Mcc.NONE, 0.1, 1000, seed=0)
        assert out.sizes.n0 == 60.0
        assert out.sizes.is_integer

    def test_agrees_with_analytic(self):
        model, sizes, sc = law_k(2, [0.35, 0.35], n=80.0)
        mcc, alpha = Mcc.DUNNETT, 0.1
        sim = simulate_trials(model, sizes, sc, mcc, alpha, 40_000, seed=11)
        oc = analytic_opchars(model, sizes, sc, mcc, alpha)
        assert sim.opchars.p_dis == pytest.approx(
            oc.p_dis, abs=4 * sim.std_errors.p_dis + 1e-3
        )
        assert sim.opchars.p_con == pytest.approx(
            oc.p_con, abs=4 * sim.std_errors.p_con + 1e-3
        )

    def test_bernoulli_degenerate_rates_stay_finite(self):
        # small n with rates near zero hits the variance floor; everything
        # must stay a number
        model = bernoulli_model(1, 0.02)
        sizes = SampleSizes(30.0, (30.0,))
        sc = bernoulli_scenario([0.02, 0.3])
        out = simulate_trials(model, sizes, sc, Mcc.NONE, 0.1, 2000, seed=3)
        assert 0.0 <= out.opchars.p_marginal[0] <= 1.0
        assert np.isfinite(out.opchars.p_dis)

    def test_bernoulli_null_calibration(self):
        # empirical size within MC noise of the nominal level
        model = bernoulli_model(2, 0.3)
        sizes = SampleSizes(120.0, (120.0, 120.0))
        sc = bernoulli_scenario([0.3, 0.3, 0.3])
        out = simulate_trials(model, sizes, sc, Mcc.NONE, 0.1, 60_000, seed=9)
        for j in range(2):
            se = out.std_errors.p_marginal[j]
            # plug-in variance and discreteness perturb the level slightly
            assert out.opchars.p_marginal[j] == pytest.approx(0.1, abs=4 * se + 4e-3)


class TestCurves:
    def test_grid_hits_anchor_points(self):
        model = bernoulli_model(2, 0.3)
        grid = curve_grid(model, 0.15, 0.0, 13)
        assert grid[0] == pytest.approx(-0.0375)
        assert grid[-1] == pytest.approx(0.1875)
        assert 0.0 in np.round(grid, 12)
        assert 0.15 in np.round(grid, 12)

    def test_grid_clipped_for_proportions(self):
        # lower end: theta - (delta1 - delta0) must stay above -pi0
        low = curve_grid(bernoulli_model(1, 0.1), 0.3, 0.25, 20)
        assert low[0] == pytest.approx(0.05 - 0.1 + 1e-4, abs=1e-12)
        # upper end: pi0 + theta must stay below 1
        high = curve_grid(bernoulli_model(1, 0.65), 0.3, 0.25, 20)
        assert high[-1] == pytest.approx(0.35 - 1e-4, abs=1e-12)

    def test_grid_empty_after_clipping_raises(self):
        # an off-arm shift of 0.6 cannot fit above -pi0 = -0.05
        with pytest.raises(InputError):
            curve_grid(bernoulli_model(1, 0.05), 0.4, -0.2, 20)

    def test_quality_bounds(self):
        model = normal_model([1.0, 1.0])
        with pytest.raises(DomainError):
            curve_grid(model, 0.3, 0.0, 9)

    def test_series_shapes_and_consistency(self, fast):
        model = normal_model([1.0, 1.0, 1.0])
        sizes = SampleSizes(50.0, (50.0, 50.0))
        data = curves(model, sizes, Mcc.SIDAK, 0.1, 0.3, 0.0, 13, power_target=0.8, settings=fast)
        assert len(data.theta_grid) == 13
        assert set(data.series_b) == {"marginal_power_1", "marginal_power_2"}
        assert data.reference["alpha"] == 0.1
        assert data.reference["power_target"] == 0.8
        # at theta = delta1 both series-a marginals coincide by symmetry
        i = int(np.argmin(np.abs(data.theta_grid - 0.3)))
        a1 = data.series_a["marginal_power_1"][i]
        a2 = data.series_a["marginal_power_2"][i]
        assert a1 == pytest.approx(a2, abs=1e-9)

    def test_series_b_matches_box_integral(self, fast):
        """Closed-form series (b) against the full pmf route at one point."""
        model = normal_model([1.0, 1.0, 1.0])
        sizes = SampleSizes(50.0, (50.0, 50.0))
        thr = thresholds(Mcc.SIDAK, 0.1, 2)
        data = curves(model, sizes, Mcc.SIDAK, 0.1, 0.3, 0.1, 13, power_target=0.8, settings=fast, thr=thr)
        i = 7
        theta = data.theta_grid[i]
        eff = [theta, theta - 0.2]
        oc = analytic_opchars(model, sizes, normal_scenario(eff), Mcc.SIDAK, 0.1, settings=fast, thr=thr)
        assert data.series_b["marginal_power_1"][i] == pytest.approx(oc.p_marginal[0], abs=5e-5)

    def test_csv_layout(self, fast):
        model = normal_model([1.0, 1.0, 1.0])
        sizes = SampleSizes(50.0, (50.0, 50.0))
        data = curves(model, sizes, Mcc.NONE, 0.1, 0.3, 0.0, 13, power_target=0.8, settings=fast)
        text = data.to_csv()
        lines = text.splitlines()
        assert lines[0] == "theta,quantity,arm,value,series"
        # series a: 8 scalars + 2*K fwer + K marginal; series b: K marginal
        assert len(lines) == 1 + 13 * (8 + 3 * 2) + 13 * 2
        assert text.endswith("\n")
        cells = lines[1].split(",")
        assert len(cells) == 5
        float(cells[0]), float(cells[3])  # parse cleanly

    def test_stepwise_curves_route_through_pmf(self, fast):
        model = normal_model([1.0, 1.0, 1.0])
        sizes = SampleSizes(40.0, (40.0, 40.0))
        data = curves(model, sizes, Mcc.HOLM_BONFERRONI, 0.1, 0.3, 0.0, 10, power_target=0.8, settings=fast)
        vals = data.series_b["marginal_power_1"]
        assert np.all(np.isfinite(vals))
        assert np.all(np.diff(vals) > -5e-3)  # monotone up to stream noise
