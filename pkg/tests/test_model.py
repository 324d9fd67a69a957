import math

import numpy as np
import pytest

from etlqg import (AgentModel, ConfigError, Graph, NoiseSource, UnicyclePose,
                   laplacian_from_adjacency, measure, psd_factor,
                   sample_gaussian, step_dynamics, unicycle_wheel_speeds,
                   wrap_angle)

I2 = np.eye(2)


def make_model(**kw):
    base = dict(A=I2, B=I2, C=I2, W=np.zeros((2, 2)), V=1e-4 * I2,
                x0_mean=np.zeros(2), X0=np.zeros((2, 2)))
    base.update(kw)
    return AgentModel(**base)


class TestStepDynamics:
    def test_identity_zero_input(self):
        m = make_model()
        np.testing.assert_array_equal(
            step_dynamics(m, [0.2, -0.1], [0.0, 0.0], [0.0, 0.0]), [0.2, -0.1])

    def test_additive_composition(self):
        m = make_model()
        np.testing.assert_allclose(
            step_dynamics(m, [0.0, 0.0], [0.1, -0.2], [0.01, 0.0]), [0.11, -0.2])

    def test_general_state_matrix(self):
        m = make_model(A=[[1.0, 0.1], [0.0, 1.0]])
        np.testing.assert_allclose(
            step_dynamics(m, [1.0, 1.0], [0.0, 0.0], [0.0, 0.0]), [1.1, 1.0])

    def test_pure_function(self):
        m = make_model(A=[[1.0, 0.1], [0.0, 1.0]])
        x, u, w = np.array([1.0, 2.0]), np.array([0.3, 0.1]), np.array([0.0, 0.01])
        first = step_dynamics(m, x, u, w)
        np.testing.assert_array_equal(step_dynamics(m, x, u, w), first)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            step_dynamics(make_model(), [1.0, 2.0, 3.0], [0.0, 0.0], [0.0, 0.0])


class TestMeasure:
    def test_identity_output(self):
        np.testing.assert_array_equal(
            measure(make_model(), [0.5, 0.5], [0.0, 0.0]), [0.5, 0.5])

    def test_additive_noise(self):
        np.testing.assert_allclose(
            measure(make_model(), [0.5, 0.5], [0.01, -0.01]), [0.51, 0.49])

    def test_partial_observation(self):
        m = make_model(C=[[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(measure(m, [2.0, 3.0], [0.0, 0.0]), [2.0, 0.0])


class TestLaplacian:
    def test_two_node_complete(self):
        lap = laplacian_from_adjacency([[0, 1], [1, 0]])
        np.testing.assert_array_equal(lap, [[1, -1], [-1, 1]])

    def test_four_node_complete(self):
        lap = laplacian_from_adjacency(np.ones((4, 4), dtype=int) - np.eye(4, dtype=int))
        np.testing.assert_array_equal(np.diag(lap), [3, 3, 3, 3])
        assert np.all(lap[~np.eye(4, dtype=bool)] == -1)

    def test_path_graph(self):
        lap = laplacian_from_adjacency([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_array_equal(lap, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_row_sums_exactly_zero(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = rng.integers(2, 8)
            a = rng.integers(0, 2, size=(n, n))
            a = np.triu(a, 1)
            a = a + a.T
            lap = laplacian_from_adjacency(a)
            assert lap.dtype.kind == "i"
            np.testing.assert_array_equal(lap.sum(axis=1), np.zeros(n, dtype=int))

    def test_rejects_self_loops_and_nonbinary(self):
        with pytest.raises(ConfigError):
            laplacian_from_adjacency([[1, 1], [1, 0]])
        with pytest.raises(ConfigError):
            laplacian_from_adjacency([[0, 2], [2, 0]])

    def test_connected_graph_single_zero_eigenvalue(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            # random spanning tree plus extra edges keeps it connected
            a = np.zeros((n, n), dtype=int)
            for j in range(1, n):
                i = int(rng.integers(0, j))
                a[i, j] = a[j, i] = 1
            extra = rng.integers(0, 2, size=(n, n))
            a = np.clip(a + np.triu(extra, 1) + np.triu(extra, 1).T, 0, 1)
            np.fill_diagonal(a, 0)
            g = Graph.from_adjacency(a)
            w = np.linalg.eigvalsh(g.laplacian.astype(float))
            tol = 1e-9 * max(w[-1], 1.0)
            assert np.sum(np.abs(w) < tol) == 1

    def test_disconnected_rejected(self):
        a = np.zeros((4, 4), dtype=int)
        a[0, 1] = a[1, 0] = 1
        a[2, 3] = a[3, 2] = 1
        with pytest.raises(ConfigError, match="connected"):
            Graph.from_adjacency(a)


class TestSampleGaussian:
    def test_zero_covariance_returns_mean(self):
        for seed in (0, 1, 99):
            src = NoiseSource(seed=seed, stream_id=3)
            out = sample_gaussian(src, [1.5, -2.0], np.zeros((2, 2)))
            np.testing.assert_array_equal(out, [1.5, -2.0])

    def test_same_seed_same_sequence(self):
        a = NoiseSource(seed=42, stream_id=7)
        b = NoiseSource(seed=42, stream_id=7)
        cov = np.diag([0.01, 0.04])
        for _ in range(50):
            np.testing.assert_array_equal(
                sample_gaussian(a, [0.0, 0.0], cov),
                sample_gaussian(b, [0.0, 0.0], cov))

    def test_distinct_streams_differ(self):
        a = NoiseSource(seed=42, stream_id=0)
        b = NoiseSource(seed=42, stream_id=1)
        cov = np.diag([1.0, 1.0])
        assert not np.array_equal(sample_gaussian(a, [0, 0], cov),
                                  sample_gaussian(b, [0, 0], cov))

    def test_sample_covariance_matches(self):
        src = NoiseSource(seed=5, stream_id=0)
        cov = np.diag([0.01, 0.04])
        n = 100_000
        draws = np.array([sample_gaussian(src, [0.0, 0.0], cov) for _ in range(n)])
        sample_cov = np.cov(draws.T)
        np.testing.assert_allclose(np.diag(sample_cov), [0.01, 0.04], rtol=0.10)
        # empirical mean within 5 sigma / sqrt(N) per component
        tol = 5 * np.sqrt(np.diag(cov)) / math.sqrt(n)
        assert np.all(np.abs(draws.mean(axis=0)) < tol)

    def test_correlated_covariance(self):
        src = NoiseSource(seed=6, stream_id=0)
        cov = np.array([[0.04, 0.018], [0.018, 0.01]])
        draws = np.array([sample_gaussian(src, [0.0, 0.0], cov) for _ in range(50_000)])
        np.testing.assert_allclose(np.cov(draws.T), cov, rtol=0.10)

    def test_non_psd_rejected(self):
        src = NoiseSource(seed=1)
        with pytest.raises(ConfigError):
            sample_gaussian(src, [0.0, 0.0], [[1.0, 0.0], [0.0, -0.5]])
        with pytest.raises(ConfigError):
            sample_gaussian(src, [0.0, 0.0], [[0.0, 0.5], [0.5, 0.0]])

    def test_psd_factor_semidefinite(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank one
        g = psd_factor(cov)
        np.testing.assert_allclose(g @ g.T, cov, atol=1e-12)
        assert psd_factor(np.zeros((3, 3))).tolist() == np.zeros((3, 3)).tolist()


class TestUnicycle:
    def pose(self, theta=0.0):
        return UnicyclePose(x=0.0, y=0.0, theta=theta, wheel_base=0.1, wheel_radius=0.02)

    def test_zero_command(self):
        p = self.pose()
        vr, vl, new = unicycle_wheel_speeds(p, [0.0, 0.0], 0.1)
        assert vr == 0.0 and vl == 0.0
        assert new == p

    def test_aligned_heading(self):
        vr, vl, _ = unicycle_wheel_speeds(self.pose(), [0.1, 0.0], 0.1, omega_max=1e9)
        assert vr == pytest.approx(0.1) and vl == pytest.approx(0.1)

    def test_clamped_turn_rate(self):
        vr, vl, _ = unicycle_wheel_speeds(self.pose(), [0.0, 0.1], dt=0.1,
                                          omega_max=math.pi)
        assert vr == pytest.approx(0.1 + math.pi * 0.05)
        assert vl == pytest.approx(0.1 - math.pi * 0.05)

    def test_decoupled_limit(self):
        # heading already matches the command: displacement is u * dt
        u = [0.07, 0.07]
        theta = math.atan2(u[1], u[0])
        _, _, new = unicycle_wheel_speeds(self.pose(theta), u, dt=0.05, omega_max=1e12)
        assert abs(new.x - u[0] * 0.05) < 1e-9
        assert abs(new.y - u[1] * 0.05) < 1e-9

    def test_theta_wrapping(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        p = UnicyclePose(x=0, y=0, theta=5.0, wheel_base=0.1, wheel_radius=0.02)
        assert -math.pi < p.theta <= math.pi

    def test_invalid_geometry(self):
        with pytest.raises(ConfigError):
            UnicyclePose(x=0, y=0, theta=0, wheel_base=0.0, wheel_radius=0.02)
        with pytest.raises(ConfigError):
            unicycle_wheel_speeds(self.pose(), [0.1, 0.0], dt=0.0)


class TestAgentModel:
    def test_v_must_be_positive_definite(self):
        with pytest.raises(ConfigError):
            make_model(V=np.zeros((2, 2)))

    def test_w_must_be_psd(self):
        with pytest.raises(ConfigError):
            make_model(W=[[1.0, 0.0], [0.0, -1e-3]])

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ConfigError):
            make_model(W=[[1.0, 0.2], [0.0, 1.0]])
