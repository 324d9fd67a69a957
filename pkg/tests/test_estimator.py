import numpy as np
import pytest

from etlqg import (AgentModel, NumericalError, covariance_sequence,
                   initial_state, innovation, predict, update)

I2 = np.eye(2)


def make_model(**kw):
    base = dict(A=I2, B=I2, C=I2, W=np.zeros((2, 2)), V=0.1 * I2,
                x0_mean=np.zeros(2), X0=np.zeros((2, 2)))
    base.update(kw)
    return AgentModel(**base)


def run_filter(model, u_seq, y_seq):
    """Filter a measurement sequence; y_seq[k] observed at step k."""
    state = initial_state(model)
    state = update(state, model, y_seq[0])
    for k in range(1, len(y_seq)):
        state = predict(state, model, u_seq[k - 1])
        state = update(state, model, y_seq[k])
    return state


def batch_mmse_final_state(a, b, c, w_var, v_var, x0_mean, x0_var, u_seq, y_seq):
    """Independent oracle: batch MAP (= MMSE for Gaussians) estimate of the
    final state from all measurements via weighted normal equations.

    Unknowns are (x_0, w_0, ..., w_{K-1}); x_k is their linear combination
    x_k = a^k x_0 + sum_j a^(k-1-j) (b u_j + w_j).
    """
    steps = len(y_seq)  # measurements at k = 0..steps-1
    n_unknown = steps  # x0 plus steps-1 process noises
    rows, rhs = [], []

    def state_coeffs(k):
        coeff = np.zeros(n_unknown)
        coeff[0] = a ** k
        const = 0.0
        for j in range(k):
            coeff[1 + j] = a ** (k - 1 - j)
            const += a ** (k - 1 - j) * b * u_seq[j]
        return coeff, const

    # prior on x0
    row = np.zeros(n_unknown)
    row[0] = 1.0 / np.sqrt(x0_var)
    rows.append(row)
    rhs.append(x0_mean / np.sqrt(x0_var))
    # process noise priors
    for j in range(steps - 1):
        row = np.zeros(n_unknown)
        row[1 + j] = 1.0 / np.sqrt(w_var)
        rows.append(row)
        rhs.append(0.0)
    # measurements
    for k in range(steps):
        coeff, const = state_coeffs(k)
        rows.append(c * coeff / np.sqrt(v_var))
        rhs.append((y_seq[k] - c * const) / np.sqrt(v_var))

    m = np.array(rows)
    z, *_ = np.linalg.lstsq(m, np.array(rhs), rcond=None)
    coeff, const = state_coeffs(steps - 1)
    return coeff @ z + const


class TestPredict:
    def test_identity_propagation(self):
        m = make_model()
        s = initial_state(m)
        s = update(s, m, [1.0, 1.0])
        before = s.x_corr.copy()
        s2 = predict(s, m, [0.0, 0.0])
        np.testing.assert_allclose(s2.x_pred, before)
        np.testing.assert_allclose(s2.P_pred, s.P_corr)

    def test_scalar_arithmetic_per_axis(self):
        from etlqg.estimator import KalmanState
        m = make_model(W=0.01 * I2)
        s = KalmanState(x_pred=np.zeros(2), P_pred=np.zeros((2, 2)),
                        x_corr=np.zeros(2), P_corr=0.04 * I2, gain=np.zeros((2, 2)))
        s2 = predict(s, m, [0.1, 0.0])
        np.testing.assert_allclose(s2.x_pred, [0.1, 0.0])
        np.testing.assert_allclose(s2.P_pred, 0.05 * I2)

    def test_state_matrix_scaling(self):
        from etlqg.estimator import KalmanState
        m = make_model(A=2 * I2)
        s = KalmanState(x_pred=np.zeros(2), P_pred=I2, x_corr=np.zeros(2),
                        P_corr=I2.copy(), gain=np.zeros((2, 2)))
        np.testing.assert_allclose(predict(s, m, [0, 0]).P_pred, 4 * I2)


class TestUpdate:
    def test_perfect_measurement_limit(self):
        m = make_model(V=1e-12 * I2, X0=I2)
        s = initial_state(m)
        y = np.array([0.7, -0.3])
        s = update(s, m, y)
        np.testing.assert_allclose(s.gain, I2, atol=1e-6)
        np.testing.assert_allclose(s.x_corr, y, atol=1e-6)

    def test_scalar_hand_case(self):
        from etlqg.estimator import KalmanState
        m = make_model(V=0.1 * I2)
        s = KalmanState(x_pred=np.zeros(2), P_pred=0.05 * I2,
                        x_corr=np.zeros(2), P_corr=0.05 * I2, gain=np.zeros((2, 2)))
        s = update(s, m, [0.3, 0.3])
        np.testing.assert_allclose(np.diag(s.gain), [1 / 3, 1 / 3], atol=1e-12)
        np.testing.assert_allclose(np.diag(s.P_corr), [0.05 * 2 / 3] * 2, atol=1e-12)

    def test_fully_confident_prior(self):
        m = make_model()
        s = initial_state(m)  # X0 = 0  ->  K = 0
        s = update(s, m, [5.0, -5.0])
        np.testing.assert_array_equal(s.gain, np.zeros((2, 2)))
        np.testing.assert_array_equal(s.x_corr, s.x_pred)

    def test_singular_innovation_rejected(self):
        from etlqg.estimator import _inv2
        with pytest.raises(NumericalError):
            _inv2(np.zeros((2, 2)))

    def test_corrected_never_exceeds_predicted(self):
        m = make_model(W=1e-5 * I2, V=1e-4 * I2, X0=0.01 * I2)
        rng = np.random.default_rng(3)
        s = initial_state(m)
        s = update(s, m, rng.normal(size=2))
        for _ in range(30):
            s = predict(s, m, rng.normal(size=2) * 0.01)
            s = update(s, m, rng.normal(size=2))
            gap = np.linalg.eigvalsh(s.P_pred - s.P_corr)
            assert gap[0] >= -1e-10
            assert np.abs(s.P_corr - s.P_corr.T).max() == 0.0


class TestInnovation:
    def test_zero_residual(self):
        m = make_model(X0=I2)
        s = initial_state(m)
        np.testing.assert_array_equal(innovation(s, m, m.C @ s.x_pred), [0.0, 0.0])

    def test_subtraction(self):
        from etlqg.estimator import KalmanState
        m = make_model()
        s = KalmanState(x_pred=np.array([1.0, 2.0]), P_pred=I2,
                        x_corr=np.zeros(2), P_corr=I2, gain=np.zeros((2, 2)))
        np.testing.assert_allclose(innovation(s, m, [1.1, 1.9]), [0.1, -0.1])

    def test_partial_observation(self):
        from etlqg.estimator import KalmanState
        m = make_model(C=[[1.0, 0.0], [0.0, 0.0]])
        s = KalmanState(x_pred=np.array([1.0, 2.0]), P_pred=I2,
                        x_corr=np.zeros(2), P_corr=I2, gain=np.zeros((2, 2)))
        np.testing.assert_allclose(innovation(s, m, [2.0, 0.0]), [1.0, 0.0])


class TestAgainstBatchOracle:
    def test_five_step_least_squares_equivalence(self):
        a, b, c = 0.95, 0.5, 1.0
        w_var, v_var, x0_var = 0.01, 0.04, 0.25
        x0_mean = 0.3
        m = make_model(A=a * I2, B=b * I2, C=c * I2, W=w_var * I2,
                       V=v_var * I2, x0_mean=[x0_mean, x0_mean], X0=x0_var * I2)
        rng = np.random.default_rng(2024)
        u_seq = rng.normal(size=(5, 2)) * 0.2
        x = np.array([x0_mean, x0_mean]) + rng.normal(size=2) * np.sqrt(x0_var)
        y_seq = []
        for k in range(6):
            y_seq.append(c * x + rng.normal(size=2) * np.sqrt(v_var))
            if k < 5:
                x = a * x + b * u_seq[k] + rng.normal(size=2) * np.sqrt(w_var)
        state = run_filter(m, u_seq, y_seq)
        for axis in range(2):
            oracle = batch_mmse_final_state(
                a, b, c, w_var, v_var, x0_mean, x0_var,
                [u[axis] for u in u_seq], [y[axis] for y in y_seq])
            assert abs(state.x_corr[axis] - oracle) < 1e-9


class TestCovarianceProperties:
    def test_covariance_independent_of_measurements(self):
        m = make_model(W=1e-5 * I2, V=1e-4 * I2, X0=0.04 * I2)
        def p_path(seed):
            rng = np.random.default_rng(seed)
            s = initial_state(m)
            s = update(s, m, rng.normal(size=2))
            out = [s.P_corr.copy()]
            for _ in range(10):
                s = predict(s, m, [0.0, 0.0])
                s = update(s, m, rng.normal(size=2))
                out.append(s.P_corr.copy())
            return out
        for p1, p2 in zip(p_path(1), p_path(2)):
            np.testing.assert_array_equal(p1, p2)

    def test_monte_carlo_consistency(self):
        # realized estimation errors match the reported covariance
        w_var, v_var, x0_var = 1e-4, 4e-4, 1e-2
        m = make_model(A=I2, B=I2, W=w_var * I2, V=v_var * I2,
                       x0_mean=[0.0, 0.0], X0=x0_var * I2)
        steps, trials = 20, 10_000
        _, gains, p_corr = covariance_sequence(m, steps)
        rng = np.random.default_rng(17)
        x = rng.normal(size=(trials, 2)) * np.sqrt(x0_var)
        xc = None
        for k in range(steps + 1):
            y = x + rng.normal(size=(trials, 2)) * np.sqrt(v_var)
            xp = np.zeros((trials, 2)) if k == 0 else xc
            xc = xp + (y - xp) * np.diag(gains[k])
            if k < steps:
                x = x + rng.normal(size=(trials, 2)) * np.sqrt(w_var)
        err = x - xc
        sample = np.cov(err.T)
        np.testing.assert_allclose(np.diag(sample), np.diag(p_corr[steps]), rtol=0.10)
        assert abs(sample[0, 1]) < 0.05 * np.diag(p_corr[steps]).max()

    def test_steady_trace_monotone_in_v(self):
        traces = []
        for v in (1e-3, 1e-4, 1e-5):
            m = make_model(W=1e-5 * I2, V=v * I2, X0=0.01 * I2)
            _, _, p_corr = covariance_sequence(m, 400)
            traces.append(np.trace(p_corr[-1]))
        assert traces[0] >= traces[1] >= traces[2]
