"""Per-agent linear plant, communication graph, noise streams, unicycle adapter.

Each robot is a planar stochastic linear system

    x[k+1] = A x[k] + B u[k] + w[k],      y[k] = C x[k] + v[k],

with zero-mean Gaussian process/measurement noise (covariances W, V) and a
Gaussian initial state (mean x0_mean, covariance X0). Robots exchange data
over a fixed undirected graph described by its adjacency matrix and graph
Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Relative eigenvalue tolerance for PSD validation.
PSD_TOL = 1e-9
# Zero-pivot tolerance in the covariance factorization; pivots below this
# (relative to the matrix scale) are treated as exact zeros so degenerate
# covariances such as X0 = 0 stay legal.
FACTOR_PIVOT_TOL = 1e-12


def _as_matrix(a, n, name):
    arr = np.asarray(a, dtype=float)
    if arr.shape != (n, n):
        raise ConfigError(f"{name} must be {n}x{n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def _as_vector(a, n, name):
    arr = np.asarray(a, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"{name} must be a {n}-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def _check_spd(a, name, definite=False):
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > 1e-12 * scale:
        raise ConfigError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    if w[0] < -PSD_TOL * scale:
        raise ConfigError(f"{name} must be positive semi-definite (min eigenvalue {w[0]:.3e})")
    if definite and w[0] <= 0.0:
        raise ConfigError(f"{name} must be positive definite (min eigenvalue {w[0]:.3e})")


@dataclass(frozen=True)
class AgentModel:
    """Matrices and initial-state distribution of one robot's plant.

    V must be positive definite: its inverse appears inside the Kalman
    gain through (C P C^T + V)^-1.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray
    x0_mean: np.ndarray
    X0: np.ndarray

    def __post_init__(self):
        n = 2
        object.__setattr__(self, "A", _as_matrix(self.A, n, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, n, "B"))
        object.__setattr__(self, "C", _as_matrix(self.C, n, "C"))
        object.__setattr__(self, "W", _as_matrix(self.W, n, "W"))
        object.__setattr__(self, "V", _as_matrix(self.V, n, "V"))
        object.__setattr__(self, "x0_mean", _as_vector(self.x0_mean, n, "x0_mean"))
        object.__setattr__(self, "X0", _as_matrix(self.X0, n, "X0"))
        _check_spd(self.W, "W")
        _check_spd(self.V, "V", definite=True)
        _check_spd(self.X0, "X0")

    @property
    def dim(self) -> int:
        return 2


def step_dynamics(model: AgentModel, x, u, w) -> np.ndarray:
    """One plant step A x + B u + w. The caller supplies w (noise or zero)."""
    x = _as_vector(x, model.dim, "x")
    u = _as_vector(u, model.dim, "u")
    w = _as_vector(w, model.dim, "w")
    return model.A @ x + model.B @ u + w


def measure(model: AgentModel, x, v) -> np.ndarray:
    """Noisy observation C x + v."""
    x = _as_vector(x, model.dim, "x")
    v = _as_vector(v, model.dim, "v")
    return model.C @ x + v


# ---------------------------------------------------------------------------
# Communication graph


def laplacian_from_adjacency(adjacency) -> np.ndarray:
    """Graph Laplacian diag(row sums) - A_adj, in integer arithmetic.

    Row sums of the result are exactly zero.
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"adjacency must be square, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ConfigError("adjacency entries must be 0 or 1")
    a = a.astype(np.int64)
    if np.any(np.diag(a) != 0):
        raise ConfigError("adjacency diagonal must be zero (no self-loops)")
    return np.diag(a.sum(axis=1)) - a


@dataclass(frozen=True)
class Graph:
    """Fixed undirected communication topology."""

    adjacency: np.ndarray
    laplacian: np.ndarray

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_adjacency(cls, adjacency) -> "Graph":
        lap = laplacian_from_adjacency(adjacency)
        a = np.asarray(adjacency).astype(np.int64)
        if np.any(a != a.T):
            raise ConfigError("adjacency must be symmetric (undirected graph)")
        if not _connected(a):
            raise ConfigError("communication graph must be connected")
        return cls(adjacency=a, laplacian=lap)

    def neighbors(self, agent: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[agent])

    def complete(n: int) -> "Graph":
        return Graph.from_adjacency(np.ones((n, n), dtype=int) - np.eye(n, dtype=int))

    complete = staticmethod(complete)


def _connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adjacency[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


# ---------------------------------------------------------------------------
# Noise streams


@dataclass
class NoiseSource:
    """Reproducible Gaussian stream.

    The pair (seed, stream_id) pins the sample path bit-for-bit: the
    generator is PCG64 keyed by SeedSequence(seed, spawn_key=(stream_id,)).
    Distinct stream ids give statistically independent streams, one per
    agent per noise role.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)


def psd_factor(cov, tol: float = FACTOR_PIVOT_TOL) -> np.ndarray:
    """Lower-triangular G with G G^T = cov, tolerating zero pivots.

    A pivot below tol (relative to the matrix scale) zeroes its column,
    so semidefinite covariances factor cleanly; a negative pivot or an
    inconsistent residual means cov is not PSD.
    """
    a = np.asarray(cov, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ConfigError(f"covariance must be square, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > 1e-12 * scale:
        raise ConfigError("covariance must be symmetric")
    g = np.zeros((n, n))
    for j in range(n):
        d = a[j, j] - g[j, :j] @ g[j, :j]
        if d > tol * scale:
            g[j, j] = math.sqrt(d)
            for i in range(j + 1, n):
                g[i, j] = (a[i, j] - g[i, :j] @ g[j, :j]) / g[j, j]
        elif d >= -tol * scale:
            # Exact zero pivot: the rest of the column must vanish too.
            for i in range(j + 1, n):
                if abs(a[i, j] - g[i, :j] @ g[j, :j]) > math.sqrt(tol) * scale:
                    raise ConfigError("covariance is not positive semi-definite")
        else:
            raise ConfigError("covariance is not positive semi-definite")
    return g


def sample_gaussian(source: NoiseSource, mean, cov) -> np.ndarray:
    """Draw mean + G z with G G^T = cov and z standard normal from the stream."""
    mean = np.asarray(mean, dtype=float)
    g = psd_factor(cov)
    if g.shape[0] != mean.shape[0]:
        raise ConfigError("mean and covariance dimensions disagree")
    z = source.standard_normal(mean.shape[0])
    return mean + g @ z


# ---------------------------------------------------------------------------
# Unicycle adapter (experiment-style wheel-velocity outputs)


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class UnicyclePose:
    """Differential-drive pose plus geometry; theta lives in (-pi, pi]."""

    x: float
    y: float
    theta: float
    wheel_base: float
    wheel_radius: float

    def __post_init__(self):
        if self.wheel_base <= 0 or self.wheel_radius <= 0:
            raise ConfigError("wheel_base and wheel_radius must be positive")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))


def unicycle_wheel_speeds(pose: UnicyclePose, u, dt: float, omega_max: float = math.pi):
    """Convert a planar velocity command into wheel rim speeds and step the pose.

    The linear speed is |u| and the heading command points along u; the
    turn rate is the heading error over dt, clamped to omega_max. Wheel
    speeds are v +/- omega * wheel_base / 2. A zero command leaves the
    pose untouched and commands zero wheel speed.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    ux, uy = float(u[0]), float(u[1])
    v = math.hypot(ux, uy)
    if v == 0.0:
        return 0.0, 0.0, pose
    theta_d = math.atan2(uy, ux)
    omega = wrap_angle(theta_d - pose.theta) / dt
    omega = max(-omega_max, min(omega_max, omega))
    v_right = v + 0.5 * omega * pose.wheel_base
    v_left = v - 0.5 * omega * pose.wheel_base
    new_pose = UnicyclePose(
        x=pose.x + v * math.cos(pose.theta) * dt,
        y=pose.y + v * math.sin(pose.theta) * dt,
        theta=wrap_angle(pose.theta + omega * dt),
        wheel_base=pose.wheel_base,
        wheel_radius=pose.wheel_radius,
    )
    return v_right, v_left, new_pose
