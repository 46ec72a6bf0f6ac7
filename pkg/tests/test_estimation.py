import math

import numpy as np
import pytest

from forestnav.estimation import (
    DEFAULT_GATE,
    Detection,
    LandmarkEstimate,
    SensorParams,
    associate,
    simulate_detections,
    update_landmarks,
)
from forestnav.geometry import Point2, Pose2

from oracles import gauss_newton_landmark

NOISELESS = SensorParams(sigma_r0=0.0, k_r=0.0, sigma_phi=0.0, sigma_d0=0.0, k_d=0.0)


def make_estimate(lm_id, x, y, cov_scale=0.01, d=0.5, d_var=0.01, n=5):
    return LandmarkEstimate(lm_id, np.array([x, y]), np.eye(2) * cov_scale, d, d_var, n)


class TestSimulateDetections:

    def test_single_obstacle_dead_ahead(self):
        rng = np.random.default_rng(0)
        world = [(Point2(10, 0), 0.4)]
        dets = simulate_detections(world, Pose2(0, 0, 0), NOISELESS, rng)
        assert len(dets) == 1
        det, truth = dets[0]
        assert truth == 0
        assert det.range == pytest.approx(10.0)
        assert det.bearing == pytest.approx(0.0)
        assert det.diameter == pytest.approx(0.4)

    def test_beyond_max_range_not_detected(self):
        rng = np.random.default_rng(0)
        world = [(Point2(25, 0), 0.4)]
        assert simulate_detections(world, Pose2(0, 0, 0), SensorParams(max_range=20.0), rng) == []

    def test_outside_fov_not_detected(self):
        rng = np.random.default_rng(0)
        world = [(Point2(0, 5), 0.4)]  # bearing 90 deg, half-FOV is 55 deg
        assert simulate_detections(world, Pose2(0, 0, 0), NOISELESS, rng) == []

    def test_occluded_obstacle_omitted(self):
        rng = np.random.default_rng(0)
        world = [(Point2(5, 0), 1.0), (Point2(12, 0), 0.5)]
        dets = simulate_detections(world, Pose2(0, 0, 0), NOISELESS, rng)
        assert [t for _, t in dets] == [0]

    def test_offset_ray_not_occluded(self):
        rng = np.random.default_rng(0)
        world = [(Point2(5, 0), 1.0), (Point2(12, 4), 0.5)]
        dets = simulate_detections(world, Pose2(0, 0, 0), NOISELESS, rng)
        assert [t for _, t in dets] == [0, 1]

    def test_noise_magnitude_matches_model(self):
        params = SensorParams()
        rng = np.random.default_rng(42)
        world = [(Point2(15, 0), 0.5)]
        ranges = []
        for _ in range(4000):
            dets = simulate_detections(world, Pose2(0, 0, 0), params, rng)
            ranges.append(dets[0][0].range)
        sd = np.std(ranges)
        expected = params.sigma_r(15.0)
        assert sd == pytest.approx(expected, rel=0.1)


class TestAssociate:

    def test_exact_prediction_matches(self):
        est = make_estimate(7, 10.0, 0.0)
        det = Detection(10.0, 0.0, 0.5)
        out = associate([det], [est], Pose2(0, 0, 0), SensorParams())
        assert out == [7]

    def test_far_detection_is_new(self):
        est = make_estimate(0, 10.0, 0.0, cov_scale=1e-4)
        det = Detection(10.0, 1.0, 0.5)  # ~100 sigma away in bearing
        out = associate([det], [est], Pose2(0, 0, 0), SensorParams())
        assert out == [None]

    def test_one_to_one_closer_wins(self):
        est = make_estimate(3, 10.0, 0.0)
        close = Detection(10.0, 0.0, 0.5)
        farther = Detection(10.3, 0.01, 0.5)
        out = associate([farther, close], [est], Pose2(0, 0, 0), SensorParams())
        assert out == [None, 3]

    def test_two_detections_two_landmarks(self):
        ests = [make_estimate(0, 8.0, 1.0), make_estimate(1, 8.0, -1.0)]
        d0 = Detection(math.hypot(8, 1), math.atan2(1, 8), 0.5)
        d1 = Detection(math.hypot(8, 1), math.atan2(-1, 8), 0.5)
        out = associate([d1, d0], ests, Pose2(0, 0, 0), SensorParams())
        assert out == [1, 0]

    def test_gate_value(self):
        assert DEFAULT_GATE == pytest.approx(9.21034, abs=1e-4)


class TestUpdateLandmarks:

    def test_single_measurement_initializes_at_backprojection(self):
        det = Detection(10.0, 0.0, 0.5)
        out = update_landmarks([], [None], [det], Pose2(0, 0, 0), SensorParams())
        assert len(out) == 1
        assert out[0].position_mean == pytest.approx([10.0, 0.0])
        assert out[0].num_updates == 1

    def test_noiseless_measurements_converge(self):
        # Filter assumes small noise; measurement values are exact.
        params = SensorParams(sigma_r0=0.05, k_r=0.0, sigma_phi=0.01,
                              sigma_d0=0.02, k_d=0.0)
        truth = np.array([6.0, 2.0])
        pose = Pose2(0, 0, 0)
        det = Detection(math.hypot(*truth), math.atan2(truth[1], truth[0]), 0.5)
        estimates = update_landmarks([], [None], [det], pose, params)
        traces = [np.trace(estimates[0].position_cov)]
        for _ in range(10):
            estimates = update_landmarks(estimates, [estimates[0].id], [det], pose, params)
            traces.append(np.trace(estimates[0].position_cov))
        assert np.allclose(estimates[0].position_mean, truth, atol=1e-6)
        assert all(a > b for a, b in zip(traces[:-1], traces[1:]))

    def test_covariance_stays_spd(self):
        params = SensorParams()
        rng = np.random.default_rng(1)
        truth = np.array([12.0, 3.0])
        estimates = []
        for k in range(30):
            pose = Pose2(k * 0.3, 0.0, 0.0)
            r = float(np.hypot(*(truth - [pose.x, pose.y])))
            b = math.atan2(truth[1] - pose.y, truth[0] - pose.x) - pose.theta
            det = Detection(r + params.sigma_r(r) * rng.standard_normal(),
                            b + params.sigma_phi * rng.standard_normal(), 0.5)
            assignment = associate([det], estimates, pose, params)
            estimates = update_landmarks(estimates, assignment, [det], pose, params)
            cov = estimates[0].position_cov
            assert np.allclose(cov, cov.T)
            assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_update_never_increases_trace(self):
        params = SensorParams()
        rng = np.random.default_rng(2)
        truth = np.array([9.0, -2.0])
        estimates = None
        prev_trace = None
        for k in range(20):
            pose = Pose2(k * 0.2, 0.0, 0.0)
            r = float(np.hypot(*(truth - [pose.x, pose.y])))
            b = math.atan2(truth[1] - pose.y, truth[0] - pose.x)
            det = Detection(r + params.sigma_r(r) * rng.standard_normal(),
                            b + params.sigma_phi * rng.standard_normal(), 0.5)
            if estimates is None:
                estimates = update_landmarks([], [None], [det], pose, params)
            else:
                estimates = update_landmarks(estimates, [estimates[0].id], [det],
                                             pose, params)
                assert np.trace(estimates[0].position_cov) <= prev_trace + 1e-12
            prev_trace = np.trace(estimates[0].position_cov)

    def test_matches_batch_gauss_newton(self):
        params = SensorParams()
        rng = np.random.default_rng(3)
        truth = np.array([10.0, 4.0])
        poses = []
        measurements = []
        sigmas = []
        estimates = None
        for k in range(50):
            pose = Pose2(k * 0.25, 0.05 * k, 0.02 * k)
            r_true = float(np.hypot(truth[0] - pose.x, truth[1] - pose.y))
            b_true = math.atan2(truth[1] - pose.y, truth[0] - pose.x) - pose.theta
            z_r = r_true + params.sigma_r(r_true) * rng.standard_normal()
            z_b = b_true + params.sigma_phi * rng.standard_normal()
            det = Detection(z_r, z_b, 0.5)
            poses.append([pose.x, pose.y, pose.theta])
            measurements.append([z_r, z_b])
            sigmas.append([params.sigma_r(z_r), params.sigma_phi])
            if estimates is None:
                estimates = update_landmarks([], [None], [det], pose, params)
            else:
                estimates = update_landmarks(estimates, [estimates[0].id], [det],
                                             pose, params)
        est = estimates[0]
        gn_mean, gn_cov = gauss_newton_landmark(poses, measurements, sigmas,
                                                x0=est.position_mean)
        err = est.position_mean - truth
        sigma_bound = 3.0 * math.sqrt(np.trace(est.position_cov))
        assert np.linalg.norm(err) <= sigma_bound
        assert np.trace(est.position_cov) == pytest.approx(np.trace(gn_cov), rel=0.10)
        assert np.linalg.norm(est.position_mean - gn_mean) <= 0.1

    def test_diameter_kalman_converges_and_clamps(self):
        params = SensorParams()
        pose = Pose2(0, 0, 0)
        det = Detection(5.0, 0.0, 0.8)
        estimates = update_landmarks([], [None], [det], pose, params)
        for _ in range(40):
            estimates = update_landmarks(estimates, [estimates[0].id], [det], pose, params)
        assert estimates[0].diameter_mean == pytest.approx(0.8, abs=1e-6)
        # A tiny measured diameter cannot push the mean below the clamp.
        tiny = Detection(5.0, 0.0, 0.011)
        est = LandmarkEstimate(0, np.array([5.0, 0.0]), np.eye(2) * 1e-4, 0.02, 10.0, 3)
        out = update_landmarks([est], [0], [tiny], pose, params)
        assert out[0].diameter_mean >= 0.01

    def test_nees_consistency(self):
        # Average normalized estimation error squared over 100 trials must
        # lie in the chi-square 95% interval for 200 DOF, scaled by 1/100:
        # [162.728, 241.058] / 100.
        params = SensorParams()
        truth = np.array([7.0, 2.5])
        nees = []
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            estimates = None
            for k in range(12):
                pose = Pose2(k * 0.4, 0.1 * k, 0.0)
                r_true = float(np.hypot(truth[0] - pose.x, truth[1] - pose.y))
                b_true = math.atan2(truth[1] - pose.y, truth[0] - pose.x) - pose.theta
                det = Detection(r_true + params.sigma_r(r_true) * rng.standard_normal(),
                                b_true + params.sigma_phi * rng.standard_normal(), 0.5)
                if estimates is None:
                    estimates = update_landmarks([], [None], [det], pose, params)
                else:
                    estimates = update_landmarks(estimates, [estimates[0].id], [det],
                                                 pose, params)
            err = estimates[0].position_mean - truth
            nees.append(float(err @ np.linalg.solve(estimates[0].position_cov, err)))
        mean_nees = float(np.mean(nees))
        assert 1.62728 <= mean_nees <= 2.41058
