import numpy as np
import pytest

from segloc import (
    AllZeroWeightsError,
    CameraIntrinsics,
    CameraPose,
    EmptyMaskError,
    FilterParams,
    FrameRecord,
    ParticleSet,
    WeakBaselineError,
    discretise,
    initialize,
    predict,
    project_point,
    project_points,
    resample,
    step,
    summarize,
    weigh,
)


def uniform_set(positions):
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    return ParticleSet(positions, np.full(n, 1.0 / n))


def brute_force_weights(ps, mask, camera, pose):
    """Oracle for weigh(): per-particle pairwise squared pixel distances."""
    positive = list(zip(*np.nonzero(mask)))  # (v, u)
    weights = np.zeros(ps.n)
    d2s = np.full(ps.n, -1, dtype=np.int64)
    for i, position in enumerate(ps.positions):
        pix = project_point(position, camera, pose)
        if pix is None:
            continue
        u, v = discretise(pix)
        if not (0 <= u < camera.width and 0 <= v < camera.height):
            continue
        d2s[i] = min((int(v) - pv) ** 2 + (int(u) - pu) ** 2 for pv, pu in positive)
        weights[i] = np.exp(-float(d2s[i]))
    if not (weights > 0).any() and (d2s >= 0).any():
        shift = d2s[d2s >= 0].min()
        for i in range(ps.n):
            if d2s[i] >= 0:
                weights[i] = np.exp(-float(d2s[i] - shift))
    return weights


class TestInitialize:
    def _look_at_obs(self, camera, centre, target):
        pose = CameraPose(np.eye(3), np.asarray(centre, dtype=float))
        pix = project_point(np.asarray(target, dtype=float), camera, pose)
        return (pose, pix)

    def test_sampling_statistics_at_reference_distance(self, hd_camera):
        target = np.array([0.0, 0.0, 2000.0])
        params = FilterParams(n_particles=100_000, sd_init=1000.0, ref_distance_m=2000.0)
        obs_a = self._look_at_obs(hd_camera, [-100.0, 0.0, 0.0], target)
        obs_b = self._look_at_obs(hd_camera, [100.0, 0.0, 0.0], target)
        ps = initialize(obs_a, obs_b, hd_camera, params, np.random.default_rng(0))
        assert ps.n == 100_000
        np.testing.assert_allclose(ps.weights, 1.0 / 100_000)
        # exact rays intersect at the target; distance to camera_b ~ 2002.5 m
        sd_expected = 1000.0 * np.linalg.norm(target - [100.0, 0.0, 0.0]) / 2000.0
        tol = 3.0 * sd_expected / np.sqrt(ps.n)
        np.testing.assert_allclose(ps.positions.mean(axis=0), target, atol=tol)
        sds = ps.positions.std(axis=0)
        np.testing.assert_allclose(sds, sd_expected, rtol=0.02)

    def test_spread_scales_with_distance(self, hd_camera):
        params = FilterParams(n_particles=50_000, sd_init=1000.0, ref_distance_m=2000.0)
        target = np.array([0.0, 0.0, 4000.0])
        obs_a = self._look_at_obs(hd_camera, [-100.0, 0.0, 0.0], target)
        obs_b = self._look_at_obs(hd_camera, [100.0, 0.0, 0.0], target)
        ps = initialize(obs_a, obs_b, hd_camera, params, np.random.default_rng(1))
        sd_expected = 1000.0 * np.linalg.norm(target - [100.0, 0.0, 0.0]) / 2000.0
        np.testing.assert_allclose(ps.positions.std(axis=0), sd_expected, rtol=0.02)

    def test_identical_centres_raise_weak_baseline(self, hd_camera):
        pose = CameraPose(np.eye(3), np.zeros(3))
        obs = (pose, np.array([960.0, 540.0]))
        with pytest.raises(WeakBaselineError):
            initialize(obs, obs, hd_camera, FilterParams(n_particles=10), np.random.default_rng(0))


class TestPredict:
    def test_zero_coefficient_is_bit_exact(self):
        ps = uniform_set(np.random.default_rng(0).uniform(-10, 10, (100, 3)))
        params = FilterParams(n_particles=100, pred_noise_coeff=0.0)
        out = predict(ps, np.zeros(3), params, np.random.default_rng(1))
        np.testing.assert_array_equal(out.positions, ps.positions)

    def test_displacement_sd_matches_rule(self):
        # single particle at distance 2000 with coeff 0.005 -> per-axis SD 10 m
        params = FilterParams(n_particles=1, pred_noise_coeff=0.005)
        rng = np.random.default_rng(2)
        start = np.array([[0.0, 0.0, 2000.0]])
        displacements = np.empty((10_000, 3))
        for i in range(10_000):
            out = predict(uniform_set(start), np.zeros(3), params, rng)
            displacements[i] = out.positions[0] - start[0]
        sds = displacements.std(axis=0)
        np.testing.assert_allclose(sds, 10.0, atol=0.35)
        np.testing.assert_allclose(displacements.mean(axis=0), 0.0, atol=0.35)

    def test_sd_linear_in_distance(self):
        params = FilterParams(n_particles=5000, pred_noise_coeff=0.01)
        rng = np.random.default_rng(3)
        near = uniform_set(np.tile([0.0, 0.0, 1000.0], (5000, 1)))
        far = uniform_set(np.tile([0.0, 0.0, 2000.0], (5000, 1)))
        d_near = predict(near, np.zeros(3), params, rng).positions - near.positions
        d_far = predict(far, np.zeros(3), params, rng).positions - far.positions
        ratio = d_far.std(axis=0) / d_near.std(axis=0)
        np.testing.assert_allclose(ratio, 2.0, rtol=0.1)

    def test_weights_unchanged(self):
        ps = ParticleSet(np.zeros((4, 3)), np.array([0.4, 0.3, 0.2, 0.1]))
        out = predict(ps, np.ones(3), FilterParams(n_particles=4), np.random.default_rng(0))
        np.testing.assert_array_equal(out.weights, ps.weights)


class TestWeigh:
    def _world_for_pixel(self, camera, u, v, depth=100.0):
        """World point that projects exactly onto pixel centre column u row v."""
        return np.array(
            [
                (u - camera.c_x) / camera.f_x * depth,
                (v - camera.c_y) / camera.f_y * depth,
                depth,
            ]
        )

    def test_on_positive_pixel_weight_one(self, small_camera, identity_pose):
        mask = np.zeros((64, 64), dtype=bool)
        mask[30, 40] = True
        ps = uniform_set([self._world_for_pixel(small_camera, 40, 30)])
        out = weigh(ps, mask, small_camera, identity_pose)
        assert out.weights[0] == 1.0

    def test_one_pixel_away_weight_inv_e(self, small_camera, identity_pose):
        mask = np.zeros((64, 64), dtype=bool)
        mask[30, 40] = True
        ps = uniform_set([self._world_for_pixel(small_camera, 41, 30)])
        out = weigh(ps, mask, small_camera, identity_pose)
        assert out.weights[0] == np.exp(-1.0)

    def test_min_over_observations(self, identity_pose):
        camera = CameraIntrinsics(200.0, 200.0, 128.0, 128.0, 256, 256)
        mask = np.zeros((256, 256), dtype=bool)
        mask[100, 100] = True
        mask[104, 103] = True
        ps = uniform_set([self._world_for_pixel(camera, 103, 104)])
        out = weigh(ps, mask, camera, identity_pose)
        assert out.weights[0] == 1.0

    def test_out_of_frame_weight_zero(self, small_camera, identity_pose):
        mask = np.ones((64, 64), dtype=bool)
        ps = uniform_set(
            [
                self._world_for_pixel(small_camera, 200, 30),  # off frame
                np.array([0.0, 0.0, -50.0]),  # behind camera
                self._world_for_pixel(small_camera, 10, 10),  # inside
            ]
        )
        out = weigh(ps, mask, small_camera, identity_pose)
        assert out.weights[0] == 0.0
        assert out.weights[1] == 0.0
        assert out.weights[2] == 1.0

    def test_empty_mask_raises(self, small_camera, identity_pose):
        ps = uniform_set([[0.0, 0.0, 10.0]])
        with pytest.raises(EmptyMaskError):
            weigh(ps, np.zeros((64, 64), dtype=bool), small_camera, identity_pose)

    def test_weights_in_unit_range_and_one_iff_on_segment(self, small_camera, identity_pose):
        rng = np.random.default_rng(7)
        mask = rng.random((64, 64)) > 0.97
        positions = np.array(
            [self._world_for_pixel(small_camera, u, v, depth=50.0)
             for u, v in rng.uniform(-5, 69, size=(300, 2))]
        )
        out = weigh(uniform_set(positions), mask, small_camera, identity_pose)
        assert (out.weights >= 0.0).all() and (out.weights <= 1.0).all()
        pix, in_front = project_points(positions, small_camera, identity_pose)
        for i in range(len(positions)):
            u, v = discretise(pix[i])
            on_segment = (
                in_front[i] and 0 <= u < 64 and 0 <= v < 64 and mask[v, u]
            )
            assert (out.weights[i] == 1.0) == on_segment

    def test_matches_brute_force_exactly(self, small_camera, identity_pose):
        rng = np.random.default_rng(11)
        for _ in range(10):
            mask = rng.random((64, 64)) > 0.98
            if not mask.any():
                continue
            positions = np.array(
                [self._world_for_pixel(small_camera, u, v, depth=80.0)
                 for u, v in rng.uniform(-8, 72, size=(200, 2))]
            )
            ps = uniform_set(positions)
            out = weigh(ps, mask, small_camera, identity_pose)
            expected = brute_force_weights(ps, mask, small_camera, identity_pose)
            np.testing.assert_array_equal(out.weights, expected)

    def test_degenerate_rescale_preserves_ranking(self, small_camera, identity_pose):
        # all particles far from the single positive pixel: raw exp underflows,
        # the rescale puts the closest at weight 1 and keeps the ordering
        mask = np.zeros((64, 64), dtype=bool)
        mask[0, 0] = True
        positions = np.array(
            [self._world_for_pixel(small_camera, 40 + k, 50) for k in range(5)]
        )
        out = weigh(uniform_set(positions), mask, small_camera, identity_pose)
        assert out.weights[0] == 1.0
        assert (np.diff(out.weights) < 0).all()
        expected = brute_force_weights(
            uniform_set(positions), mask, small_camera, identity_pose
        )
        np.testing.assert_array_equal(out.weights, expected)


class TestResample:
    def test_dirac_weight_wins_everything(self):
        ps = ParticleSet(np.arange(12.0).reshape(4, 3), np.array([1.0, 0.0, 0.0, 0.0]))
        out = resample(ps, np.random.default_rng(0))
        np.testing.assert_array_equal(out.positions, np.tile(ps.positions[0], (4, 1)))
        np.testing.assert_allclose(out.weights, 0.25)

    def test_uniform_weights_expected_multiplicity(self):
        n = 100
        ps = ParticleSet(
            np.arange(3 * n, dtype=float).reshape(n, 3), np.full(n, 1.0 / n)
        )
        rng = np.random.default_rng(1)
        counts = np.zeros(n)
        trials = 1000
        for _ in range(trials):
            out = resample(ps, rng)
            idx = (out.positions[:, 0] / 3.0).astype(int)
            counts += np.bincount(idx, minlength=n)
        mean_count = counts / trials
        sigma = np.sqrt(1.0 * (1 - 1 / n) / trials)
        assert np.abs(mean_count - 1.0).max() < 4 * sigma

    def test_output_size_matches_input(self):
        for n in (1, 7, 100):
            ps = ParticleSet(np.zeros((n, 3)), np.full(n, 1.0 / n))
            assert resample(ps, np.random.default_rng(0)).n == n

    def test_all_zero_weights_raise(self):
        ps = ParticleSet(np.zeros((5, 3)), np.zeros(5))
        with pytest.raises(AllZeroWeightsError):
            resample(ps, np.random.default_rng(0))

    def test_unbiasedness_chi_square(self):
        from scipy.stats import chisquare

        weights = np.array([0.4, 0.3, 0.2, 0.05, 0.05])
        n = len(weights)
        ps = ParticleSet(np.arange(3.0 * n).reshape(n, 3), weights)
        rng = np.random.default_rng(2)
        counts = np.zeros(n)
        trials = 2000
        for _ in range(trials):
            out = resample(ps, rng)
            idx = (out.positions[:, 0] / 3.0).astype(int)
            counts += np.bincount(idx, minlength=n)
        expected = weights * n * trials
        assert chisquare(counts, expected).pvalue > 0.01


class TestStep:
    def test_empty_mask_returns_prediction_only(self, small_camera, identity_pose):
        ps = uniform_set(np.random.default_rng(0).uniform(-5, 5, (50, 3)) + [0, 0, 50])
        params = FilterParams(n_particles=50, pred_noise_coeff=0.01)
        frame = FrameRecord(0, 0.0, identity_pose, identity_pose, np.zeros((64, 64), dtype=bool))
        out = step(ps, frame, small_camera, params, np.random.default_rng(9))
        expected = predict(ps, identity_pose.position, params, np.random.default_rng(9))
        np.testing.assert_array_equal(out.positions, expected.positions)

    def test_deterministic_under_fixed_seed(self, small_camera, identity_pose):
        mask = np.zeros((64, 64), dtype=bool)
        mask[28:36, 28:36] = True
        ps = uniform_set(np.random.default_rng(1).normal([0, 0, 60], 5.0, (200, 3)))
        params = FilterParams(n_particles=200, pred_noise_coeff=0.01)
        frame = FrameRecord(0, 0.0, identity_pose, identity_pose, mask)
        a = step(ps, frame, small_camera, params, np.random.default_rng(4))
        b = step(ps, frame, small_camera, params, np.random.default_rng(4))
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_closed_loop_noiseless_convergence(self, hd_camera):
        # light version of the flagship scenario: the posterior mean must get
        # within 10% of the 2 km target distance by the end of the sweep
        from segloc import load_scenario, run_scenario
        from segloc.harness import run_single_seed

        cfg = load_scenario("table1_row1")
        cfg.filter_params.n_particles = 15_000
        record = run_single_seed(cfg, 3)
        best = min(r.rmse_mean_dist_m for r in record.rows)
        assert best < 0.10 * 2000.0


class TestSummarize:
    def test_identical_particles(self):
        ps = uniform_set(np.tile([1.0, 2.0, 3.0], (50, 1)))
        s = summarize(ps)
        np.testing.assert_allclose(s.mean, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(s.covariance, 1e-6 * np.eye(3), atol=1e-12)

    def test_two_particles(self):
        ps = uniform_set([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        np.testing.assert_allclose(summarize(ps).mean, [1.0, 0.0, 0.0])

    def test_recovers_generator_parameters(self):
        rng = np.random.default_rng(5)
        cov = np.diag([4.0, 9.0, 1.0])
        samples = rng.multivariate_normal([10.0, -5.0, 3.0], cov, size=200_000)
        s = summarize(uniform_set(samples))
        np.testing.assert_allclose(s.mean, [10.0, -5.0, 3.0], atol=0.05)
        np.testing.assert_allclose(s.covariance, cov, atol=0.1)

    def test_single_particle(self):
        s = summarize(uniform_set([[5.0, 6.0, 7.0]]))
        np.testing.assert_allclose(s.mean, [5.0, 6.0, 7.0])
        np.testing.assert_allclose(s.covariance, 1e-6 * np.eye(3))


class TestNoObservationNeutrality:
    def test_posterior_mean_drift_is_unbiased(self, small_camera, identity_pose):
        # k empty-mask frames only add zero-mean prediction noise
        rng = np.random.default_rng(8)
        n, k = 20_000, 20
        start = np.array([0.0, 0.0, 100.0])
        ps = uniform_set(np.tile(start, (n, 1)))
        params = FilterParams(n_particles=n, pred_noise_coeff=0.01)
        empty = np.zeros((64, 64), dtype=bool)
        for i in range(k):
            frame = FrameRecord(i, 0.0, identity_pose, identity_pose, empty)
            ps = step(ps, frame, small_camera, params, rng)
        drift = ps.positions.mean(axis=0) - start
        # per-axis SD of the mean after k steps of ~1 m noise each
        sd_mean = 0.01 * 100.0 * np.sqrt(k) / np.sqrt(n)
        assert np.abs(drift).max() < 4 * sd_mean * 1.5
