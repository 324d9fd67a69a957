"""Per-agent discrete Kalman filter for the planar plant.

The filter runs at every step regardless of trigger decisions: the
scheduler gates what gets broadcast, never the local estimate. The
covariance recursion depends only on the model, so P and K sequences are
identical across noise realizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import AgentModel, _as_vector

# Condition-number ceiling for the innovation covariance; unreachable
# while V is positive definite.
COND_LIMIT = 1e12
DET_LIMIT = 1e-15


def _sym(p: np.ndarray) -> np.ndarray:
    return (p + p.T) / 2.0


def _inv2(s: np.ndarray) -> np.ndarray:
    """Closed-form 2x2 inverse with determinant and conditioning guards."""
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    if not np.isfinite(det) or abs(det) < DET_LIMIT:
        raise NumericalError(f"innovation covariance is singular (det={det:.3e})")
    if np.linalg.cond(s) > COND_LIMIT:
        raise NumericalError("innovation covariance is ill-conditioned")
    return np.array([[s[1, 1], -s[0, 1]], [-s[1, 0], s[0, 0]]]) / det


@dataclass(frozen=True)
class KalmanState:
    """Predicted and corrected estimate with covariances and the last gain.

    After predict(), x_corr/P_corr still hold the previous correction;
    update() replaces them. Covariances are symmetrized on every write.
    """

    x_pred: np.ndarray
    P_pred: np.ndarray
    x_corr: np.ndarray
    P_corr: np.ndarray
    gain: np.ndarray


def initial_state(model: AgentModel) -> KalmanState:
    """Prior before the first measurement: x_{0|-1} = x0_mean, P_{0|-1} = X0."""
    return KalmanState(
        x_pred=model.x0_mean.copy(),
        P_pred=model.X0.copy(),
        x_corr=model.x0_mean.copy(),
        P_corr=model.X0.copy(),
        gain=np.zeros((2, 2)),
    )


def predict(state: KalmanState, model: AgentModel, u_prev) -> KalmanState:
    """Propagate the corrected estimate one step:

    x_{k|k-1} = A x_{k-1|k-1} + B u_{k-1},  P_{k|k-1} = A P A^T + W.
    """
    u_prev = _as_vector(u_prev, model.dim, "u_prev")
    x_pred = model.A @ state.x_corr + model.B @ u_prev
    p_pred = _sym(model.A @ state.P_corr @ model.A.T + model.W)
    return KalmanState(x_pred=x_pred, P_pred=p_pred,
                       x_corr=state.x_corr, P_corr=state.P_corr, gain=state.gain)


def innovation(state: KalmanState, model: AgentModel, y) -> np.ndarray:
    """Measurement residual y - C x_{k|k-1}."""
    y = _as_vector(y, model.dim, "y")
    return y - model.C @ state.x_pred


def update(state: KalmanState, model: AgentModel, y) -> KalmanState:
    """Fold in the measurement:

    K = P C^T (C P C^T + V)^-1,
    x_{k|k} = x_{k|k-1} + K (y - C x_{k|k-1}),
    P_{k|k} = (I - K C) P_{k|k-1}, symmetrized.
    """
    resid = innovation(state, model, y)
    s = model.C @ state.P_pred @ model.C.T + model.V
    gain = state.P_pred @ model.C.T @ _inv2(s)
    x_corr = state.x_pred + gain @ resid
    p_corr = _sym((np.eye(2) - gain @ model.C) @ state.P_pred)
    return KalmanState(x_pred=state.x_pred, P_pred=state.P_pred,
                       x_corr=x_corr, P_corr=p_corr, gain=gain)


def covariance_sequence(model: AgentModel, horizon: int):
    """Deterministic P/K schedule over k = 0..horizon.

    Returns (P_pred, K, P_corr), each an array of shape (horizon+1, 2, 2).
    Independent of measurements, so it is computed once per scenario and
    shared across Monte Carlo trials.
    """
    p_pred = np.empty((horizon + 1, 2, 2))
    gains = np.empty((horizon + 1, 2, 2))
    p_corr = np.empty((horizon + 1, 2, 2))
    p = model.X0.copy()
    for k in range(horizon + 1):
        if k > 0:
            p = _sym(model.A @ p @ model.A.T + model.W)
        p_pred[k] = p
        s = model.C @ p @ model.C.T + model.V
        kk = p @ model.C.T @ _inv2(s)
        gains[k] = kk
        p = _sym((np.eye(2) - kk @ model.C) @ p)
        p_corr[k] = p
    return p_pred, gains, p_corr
