import math

import numpy as np
import pytest

from anytime_ab.bayes import BetaPosterior, BfConfig, BhtConfig
from anytime_ab.confseq import (
    ConfSeqParams,
    TwoArmState,
    asympcs_ate,
    asympcs_lift,
    asympcs_mean,
    msprt_cs,
    msprt_cs_mean,
    msprt_lambda,
)
from anytime_ab.moments import StreamingMoments
from anytime_ab.simlab import (
    SimReport,
    SimStudyConfig,
    methods,
    run_lift_power_study,
    run_mde_misspec_study,
    run_power_study,
    run_rho2_sweep,
    run_stop_quality_study,
    run_type1_study,
    streams,
)

PARAMS = ConfSeqParams(0.05, 1e-3)


def binary_state(c0, n0, c1, n1):
    def arm(c, n):
        return StreamingMoments(count=int(n), mean=c / n, m2=c - c * c / n)

    return TwoArmState(arm(c0, n0), arm(c1, n1))


def random_counts(rng, size):
    n0 = rng.integers(2, 400, size=size).astype(float)
    n1 = rng.integers(2, 400, size=size).astype(float)
    s0 = rng.binomial(n0.astype(int), 0.3).astype(float)
    s1 = rng.binomial(n1.astype(int), 0.35).astype(float)
    return n0, n1, s0, s1


class TestStreams:
    def test_replication_streams_are_chunk_invariant(self):
        grid = np.arange(50, 1001, 50)
        full = streams.two_arm_count_matrices(9, 20, grid, 0.1, 0.12)
        # Regenerating any single replication reproduces its row exactly.
        for r in (0, 7, 19):
            single = streams.two_arm_count_matrices(9, r + 1, grid, 0.1, 0.12)
            for a, b in zip(full, single):
                np.testing.assert_array_equal(a[r], b[r])

    def test_streams_method_independent(self):
        grid = np.arange(100, 2001, 100)
        a = streams.two_arm_count_matrices(3, 10, grid, 0.1, 0.1)
        b = streams.two_arm_count_matrices(3, 10, grid, 0.1, 0.1)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_counts_are_consistent(self):
        grid = np.arange(100, 5001, 100)
        n0, n1, s0, s1 = streams.two_arm_count_matrices(5, 50, grid, 0.2, 0.25)
        assert np.all(n0 + n1 == grid[None, :])
        assert np.all(s0 <= n0) and np.all(s1 <= n1)
        assert np.all(np.diff(s0, axis=1) >= 0) and np.all(np.diff(s1, axis=1) >= 0)

    def test_single_arm_counts(self):
        grid = np.unique(np.round(np.geomspace(10, 10_000, 50)).astype(np.int64))
        theta, s = streams.single_arm_count_matrices(5, 30, grid, truth_prior=(100, 100))
        assert theta.shape == (30,) and s.shape == (30, grid.size)
        assert np.all((theta > 0) & (theta < 1))
        assert np.all(s <= grid[None, :])

    def test_single_arm_requires_one_source(self):
        grid = np.array([10, 20])
        with pytest.raises(ValueError):
            streams.single_arm_count_matrices(0, 2, grid)
        with pytest.raises(ValueError):
            streams.single_arm_count_matrices(0, 2, grid, truth_prior=(1, 1), p=0.5)


class TestVectorizedAgainstScalar:
    """The matrix evaluators must agree with the scalar interval functions."""

    def test_ate(self):
        rng = np.random.default_rng(21)
        n0, n1, s0, s1 = random_counts(rng, 300)
        center, hw, valid = methods.ate_interval_arrays(n0, n1, s0, s1, 0.05, 1e-3)
        assert valid.all()
        for i in range(300):
            iv = asympcs_ate(binary_state(s0[i], n0[i], s1[i], n1[i]), PARAMS)
            assert center[i] - hw[i] == pytest.approx(iv.lower, rel=1e-11, abs=1e-12)
            assert center[i] + hw[i] == pytest.approx(iv.upper, rel=1e-11, abs=1e-12)

    def test_lift(self):
        rng = np.random.default_rng(22)
        n0, n1, s0, s1 = random_counts(rng, 300)
        lower, upper, valid = methods.lift_interval_arrays(n0, n1, s0, s1, 0.05, 1e-3)
        for i in range(300):
            if not valid[i]:
                continue
            iv = asympcs_lift(binary_state(s0[i], n0[i], s1[i], n1[i]), PARAMS)
            assert lower[i] == pytest.approx(iv.lower, rel=1e-11, abs=1e-12)
            if math.isinf(iv.upper):
                assert math.isinf(upper[i])
            else:
                assert upper[i] == pytest.approx(iv.upper, rel=1e-11, abs=1e-12)

    def test_msprt(self):
        rng = np.random.default_rng(23)
        n0, n1, s0, s1 = random_counts(rng, 300)
        loglam, valid = methods.msprt_log_lambda_arrays(n0, n1, s0, s1, 1e-3, 0.0)
        for i in range(300):
            if not valid[i]:
                continue
            lam = msprt_lambda(binary_state(s0[i], n0[i], s1[i], n1[i]), PARAMS)
            assert loglam[i] == pytest.approx(math.log(lam), rel=1e-10, abs=1e-12)

    def test_single_arm_losses(self):
        from anytime_ab.bayes import single_arm_expected_loss

        rng = np.random.default_rng(24)
        n = rng.integers(5, 500, size=100).astype(float)
        s = rng.binomial(n.astype(int), 0.45).astype(float)
        lb, la = methods.bht_single_losses(n, s, 1.0, 1.0, 0.5)
        for i in range(100):
            post = BetaPosterior(1.0 + s[i], 1.0 + n[i] - s[i])
            assert lb[i] == pytest.approx(
                single_arm_expected_loss(post, 0.5, "below"), rel=1e-9, abs=1e-12
            )
            assert la[i] == pytest.approx(
                single_arm_expected_loss(post, 0.5, "above"), rel=1e-9, abs=1e-12
            )

    def test_bayes_factor_matrix(self):
        from anytime_ab.bayes import log_bayes_factor

        rng = np.random.default_rng(25)
        n0, n1, s0, s1 = random_counts(rng, 50)
        mat = methods.log_bayes_factor_arrays(n0, n1, s0, s1, 1.0, 1.0)
        for i in range(50):
            expected = log_bayes_factor(int(s0[i]), int(n0[i]), int(s1[i]), int(n1[i]), BfConfig())
            assert mat[i] == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_one_sample_interval_functions(self):
        rng = np.random.default_rng(26)
        n = rng.integers(5, 500, size=80).astype(float)
        s = np.clip(rng.binomial(n.astype(int), 0.4), 1, n - 1).astype(float)
        center, hw, valid = methods.mean_interval_arrays(n, s, 0.05, 1e-3)
        mcenter, mhw, mvalid = methods.msprt1_interval_arrays(n, s, 0.05, 1e-3)
        for i in range(80):
            arm = StreamingMoments(count=int(n[i]), mean=s[i] / n[i], m2=s[i] - s[i] ** 2 / n[i])
            iv = asympcs_mean(arm, PARAMS)
            assert center[i] - hw[i] == pytest.approx(iv.lower, rel=1e-11, abs=1e-12)
            ms = msprt_cs_mean(arm, PARAMS)
            assert mcenter[i] - mhw[i] == pytest.approx(ms.lower, rel=1e-11, abs=1e-12)


class TestFirstCrossing:
    def test_basic(self):
        reject = np.array([[False, True, True], [False, False, False], [True, False, False]])
        grid = np.array([10, 20, 30])
        stopped, stop_n, stop_idx = methods.first_crossing(reject, grid)
        np.testing.assert_array_equal(stopped, [True, False, True])
        np.testing.assert_array_equal(stop_n, [20.0, np.inf, 10.0])
        np.testing.assert_array_equal(stop_idx, [1, -1, 0])

    def test_cumulative_fraction_nondecreasing(self):
        rng = np.random.default_rng(0)
        reject = rng.random((50, 40)) < 0.02
        curve = methods.cumulative_fraction(reject)
        assert np.all(np.diff(curve) >= 0)


class TestStudies:
    def test_type1_deterministic(self):
        cfg = SimStudyConfig(
            method="AsympCS", arm_means=(0.1, 0.1), design_mde=0.01,
            replications=100, master_seed=31,
        )
        a = run_type1_study(cfg)
        b = run_type1_study(cfg)
        assert a.to_json() == b.to_json()

    def test_type1_requires_equal_means(self):
        cfg = SimStudyConfig(method="AsympCS", arm_means=(0.1, 0.12), replications=10)
        with pytest.raises(ValueError):
            run_type1_study(cfg)

    def test_equal_means_power_curve_is_type1_curve(self):
        kwargs = dict(arm_means=(0.1, 0.1), design_mde=0.01, replications=100, master_seed=13)
        t1 = run_type1_study(SimStudyConfig(method="AsympCS", **kwargs))
        pw = run_power_study(SimStudyConfig(method="AsympCS", **kwargs), horizon_multiples=(3.0,))
        assert t1.cumulative_rejection_by_peek == pw.cumulative_rejection_by_peek

    def test_methods_consume_identical_streams(self):
        # Same seed and grid settings: the streams the methods see match.
        kwargs = dict(arm_means=(0.1, 0.1), design_mde=0.01, replications=50, master_seed=77)
        a = run_type1_study(SimStudyConfig(method="AsympCS", **kwargs))
        b = run_type1_study(SimStudyConfig(method="mSPRT", **kwargs))
        assert a.peek_ns == b.peek_ns

    def test_bf_null_rarely_crosses(self):
        cfg = SimStudyConfig(
            method="BF-uninformed", arm_means=(0.1, 0.1), design_mde=0.01,
            replications=500, horizon=20_000, master_seed=41, params=BfConfig(),
        )
        report = run_type1_study(cfg)
        assert report.power <= 0.05

    def test_bht_two_arm_study_runs(self):
        cfg = SimStudyConfig(
            method="BHT-uninformed", arm_means=(0.1, 0.1), design_mde=0.01,
            replications=60, horizon=4_000, peek_every=200, master_seed=51,
            params=BhtConfig(epsilon=1e-4),
        )
        report = run_type1_study(cfg)
        assert 0.0 <= report.power <= 1.0

    def test_bht_two_arm_matches_scalar_rule(self):
        grid = np.arange(200, 2001, 200)
        counts = streams.two_arm_count_matrices(61, 10, grid, 0.3, 0.4)
        from anytime_ab.simlab.studies import _bht_two_arm_reject
        from anytime_ab.bayes import bht_decide

        cfg = BhtConfig(epsilon=5e-3)
        reject = _bht_two_arm_reject(*counts, cfg)
        n0, n1, s0, s1 = counts
        for r in range(10):
            for j in range(grid.size):
                state = binary_state(s0[r, j], n0[r, j], s1[r, j], n1[r, j])
                scalar = bht_decide(state, cfg, backend="exact").stopped
                assert reject[r, j] == scalar
                if scalar:
                    break  # row loop stops at first crossing by construction

    def test_power_ordering_small_scale(self):
        kwargs = dict(arm_means=(0.1, 0.11), replications=400, master_seed=19)
        ldm = run_power_study(SimStudyConfig(method="LDM", **kwargs), (1.0,))
        cs = run_power_study(SimStudyConfig(method="AsympCS", **kwargs), (1.0,))
        bf = run_power_study(
            SimStudyConfig(method="BF-uninformed", params=BfConfig(), **kwargs), (1.0,)
        )
        assert ldm.power >= cs.power - 0.05
        assert cs.power >= bf.power - 0.05

    def test_lift_study_pairs_and_orders(self):
        cfg = SimStudyConfig(method="AsympCS-lift", arm_means=(0.1, 0.11), replications=200, master_seed=23)
        out = run_lift_power_study(cfg, horizon_multiples=(1.0, 2.0))
        lift, ate, aa = out["lift"], out["ate"], out["lift-aa"]
        for (m1, p_lift), (m2, p_ate) in zip(lift.power_by_multiple, ate.power_by_multiple):
            assert m1 == m2
            assert p_lift <= p_ate + 1e-12
        assert aa.power <= 0.08

    def test_lift_power_grows_along_grid(self):
        cfg = SimStudyConfig(method="AsympCS-lift", arm_means=(0.1, 0.11), replications=300, master_seed=67)
        out = run_lift_power_study(cfg, horizon_multiples=(2.0,), lift_grid=[0.1, 0.4, 0.8])
        rows = out["lift"].meta["power_by_lift"]
        lift_powers = [p for _, p, _ in rows]
        assert lift_powers == sorted(lift_powers)
        assert lift_powers[-1] >= 0.9

    def test_rho2_sweep_power_collapse(self):
        cfg = SimStudyConfig(method="AsympCS", arm_means=(0.1, 0.11), replications=300, master_seed=29)
        reports = run_rho2_sweep(cfg, [1e-6, 1e-3])
        assert reports[0].meta["rho2"] == 1e-6
        assert reports[0].power < reports[1].power
        for r in reports:
            assert r.meta["type1"] <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / 300)

    def test_misspec_factor_scaling(self):
        cfg = SimStudyConfig(method="AsympCS", arm_means=(0.1, 0.1), design_mde=0.01, replications=150, master_seed=37)
        exact = run_mde_misspec_study([0.01, 0.02], 1.0, cfg)
        under = run_mde_misspec_study([0.01, 0.02], 0.5, cfg)
        assert 1.0 <= exact.meta["median_ratio"] <= 4.0
        # Same stop times, four-times-larger assumed horizon.
        assert under.meta["median_ratio"] == pytest.approx(exact.meta["median_ratio"] / 4.0, rel=0.05)

    def test_stop_quality_asympcs(self):
        cfg = SimStudyConfig(
            method="AsympCS", truth_prior=(100, 100), theta0=0.5, horizon=200_000,
            replications=1_500, master_seed=43,
        )
        report = run_stop_quality_study(cfg, num_peeks=300)
        assert report.power > 0.8
        mc_se = math.sqrt(0.05 * 0.95 / 1_500)
        assert report.miscoverage_at_stop <= 0.05 + 3 * mc_se
        assert len(report.calibration_pairs) == int(round(report.power * 1_500))

    def test_stop_quality_forward_calibration(self):
        cfg = SimStudyConfig(
            method="AsympCS", truth_prior=(100, 100), theta0=0.5, horizon=500_000,
            replications=3_000, master_seed=47,
        )
        report = run_stop_quality_study(cfg, num_peeks=300)
        pairs = np.asarray(report.calibration_pairs)
        true, inferred = pairs[:, 0], pairs[:, 1]
        bins = np.linspace(0.44, 0.56, 9)
        for lo, hi in zip(bins, bins[1:]):
            mask = (true >= lo) & (true < hi)
            if mask.sum() < 50:
                continue
            assert abs(inferred[mask].mean() - true[mask].mean()) < 0.01

    def test_stop_quality_bht_loss_near_epsilon(self):
        cfg = SimStudyConfig(
            method="BHT-matched", truth_prior=(100, 100), theta0=0.5, horizon=2_000_000,
            replications=1_500, master_seed=53, params=BhtConfig(100.0, 100.0, 1e-4),
        )
        report = run_stop_quality_study(cfg, num_peeks=1_500)
        assert report.mean_loss_at_stop == pytest.approx(1e-4, rel=0.5)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimStudyConfig(method="nope")
        with pytest.raises(ValueError):
            SimStudyConfig(method="AsympCS", replications=0)
        with pytest.raises(ValueError):
            SimStudyConfig(method="AsympCS", horizon=10, peek_every=100)


class TestReport:
    def test_json_round_trip(self):
        report = SimReport(
            study="type1", method="AsympCS", replications=10, horizon=100, master_seed=1,
            peek_ns=[10, 20], cumulative_rejection_by_peek=[0.0, 0.1],
            power=0.1, power_by_multiple=[(1.0, 0.1)], calibration_pairs=[(0.5, 0.49)],
        )
        again = SimReport.from_json(report.to_json())
        assert again == report

    def test_monotonicity_enforced(self):
        with pytest.raises(ValueError):
            SimReport(
                study="x", method="m", replications=1, horizon=10, master_seed=0,
                peek_ns=[1, 2], cumulative_rejection_by_peek=[0.5, 0.4],
            )

    def test_csv_rows(self):
        report = SimReport(
            study="type1", method="AsympCS", replications=10, horizon=100, master_seed=1,
            peek_ns=[10, 20], cumulative_rejection_by_peek=[0.0, 0.5],
        )
        rows = list(report.csv_rows())
        assert rows == [("type1", "AsympCS", 10, 0.0), ("type1", "AsympCS", 20, 0.5)]
