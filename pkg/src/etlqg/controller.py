"""Finite-horizon LQG consensus gain synthesis and cost accounting.

The stacked network estimate evolves under feedback through the graph:
the closed loop is (I_N (x) A) - (L (x) B) L_k, where L is the graph
Laplacian. Gains come from the backward recursion

    L_k     = [R + G^T S_{k+1} G]^-1 G^T S_{k+1} A_bar,     G = L (x) B
    S_k     = (A_bar - G L_k)^T S_{k+1} (A_bar - G L_k) + L_k^T R L_k + Q
    S_M     = Q_M

with the graph fixed over the run, so no expectation over G is needed.
Each robot applies only its own 2x2 diagonal block of L_k, acting on
neighbor register differences; the discarded off-diagonal blocks are the
price of a distributed implementation and their size is exposed via
projection_residual().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

COND_LIMIT = 1e12


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _check_weight(a, d, name, definite=False):
    a = np.asarray(a, dtype=float)
    if a.shape != (d, d):
        raise ConfigError(f"{name} must be {d}x{d}, got {a.shape}")
    if np.abs(a - a.T).max() > 1e-12 * max(1.0, np.abs(a).max()):
        raise ConfigError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(_sym(a))
    if w[0] < -1e-9 * max(1.0, w[-1]):
        raise ConfigError(f"{name} must be positive semi-definite")
    if definite and w[0] <= 0:
        raise ConfigError(f"{name} must be positive definite")
    return a


@dataclass(frozen=True)
class CostWeights:
    """Stacked quadratic weights: Q, Q_M (PSD) on the consensus error,
    R (PD) on the input, over a horizon of M steps."""

    Q: np.ndarray
    QM: np.ndarray
    R: np.ndarray
    M: int

    def __post_init__(self):
        d = np.asarray(self.Q).shape[0]
        object.__setattr__(self, "Q", _check_weight(self.Q, d, "Q"))
        object.__setattr__(self, "QM", _check_weight(self.QM, d, "QM"))
        object.__setattr__(self, "R", _check_weight(self.R, d, "R", definite=True))
        if self.M < 1:
            raise ConfigError("horizon M must be >= 1")

    @classmethod
    def from_blocks(cls, q_block, qm_block, r_block, n_agents: int, horizon: int):
        """Expand shared per-agent 2x2 blocks into stacked 2N x 2N weights."""
        eye = np.eye(n_agents)
        return cls(
            Q=np.kron(eye, np.asarray(q_block, dtype=float)),
            QM=np.kron(eye, np.asarray(qm_block, dtype=float)),
            R=np.kron(eye, np.asarray(r_block, dtype=float)),
            M=horizon,
        )

    @property
    def dim(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class GainSchedule:
    """Backward-recursion output: value matrices Sigma_0..Sigma_M and gains
    L_0..L_{M-1}, plus the weights and system matrices they were
    synthesized against."""

    Sigma: np.ndarray      # (M+1, d, d)
    L: np.ndarray          # (M, d, d)
    input_mat: np.ndarray  # effective input channel, laplacian (x) B
    a_stacked: np.ndarray  # I_N (x) A
    weights: CostWeights

    @property
    def horizon(self) -> int:
        return self.L.shape[0]

    @property
    def dim(self) -> int:
        return self.Sigma.shape[1]

    @property
    def n_agents(self) -> int:
        return self.dim // 2

    def agent_gain(self, k: int, agent: int) -> np.ndarray:
        """Agent's own 2x2 diagonal block of L_k."""
        i = 2 * agent
        return self.L[k, i:i + 2, i:i + 2]

    def block_diag_gain(self, k: int) -> np.ndarray:
        """L_k with every off-diagonal agent block zeroed (the gain each
        robot can actually realize from neighbor differences)."""
        out = np.zeros_like(self.L[k])
        for i in range(0, self.dim, 2):
            out[i:i + 2, i:i + 2] = self.L[k, i:i + 2, i:i + 2]
        return out

    def gain_blocks(self) -> np.ndarray:
        """All per-agent diagonal blocks at once, shape (M, N, 2, 2)."""
        n = self.n_agents
        idx = np.arange(n)
        blocks = self.L.reshape(self.horizon, n, 2, n, 2)[:, idx, :, idx, :]
        return np.transpose(blocks, (1, 0, 2, 3))

    def closed_loop(self, k: int) -> np.ndarray:
        """Realized loop matrix A_bar - G L_tilde_k with the applied
        block-diagonal gain."""
        return self.a_stacked - self.input_mat @ self.block_diag_gain(k)

    def projection_residual(self) -> float:
        """Largest Frobenius fraction of L_k lost to the block-diagonal
        projection, over the horizon."""
        worst = 0.0
        for k in range(self.horizon):
            total = np.linalg.norm(self.L[k])
            if total == 0.0:
                continue
            off = np.linalg.norm(self.L[k] - self.block_diag_gain(k))
            worst = max(worst, off / total)
        return worst


def riccati_backward(weights: CostWeights, input_mat, a_stacked) -> GainSchedule:
    """Run the backward recursion from Sigma_M = Q_M down to Sigma_0."""
    d = weights.dim
    g = np.asarray(input_mat, dtype=float)
    a = np.asarray(a_stacked, dtype=float)
    if g.shape != (d, d) or a.shape != (d, d):
        raise ConfigError(
            f"input and state matrices must be {d}x{d}, got {g.shape} and {a.shape}")
    horizon = weights.M
    sigma = np.empty((horizon + 1, d, d))
    gains = np.empty((horizon, d, d))
    sigma[horizon] = weights.QM
    for k in range(horizon - 1, -1, -1):
        s_next = sigma[k + 1]
        h = weights.R + g.T @ s_next @ g
        if np.linalg.cond(h) > COND_LIMIT:
            raise NumericalError(f"gain synthesis ill-conditioned at step {k}")
        l_k = np.linalg.solve(h, g.T @ s_next @ a)
        if not np.all(np.isfinite(l_k)):
            raise NumericalError(f"non-finite gain at step {k}")
        m_cl = a - g @ l_k
        gains[k] = l_k
        sigma[k] = _sym(m_cl.T @ s_next @ m_cl + l_k.T @ weights.R @ l_k + weights.Q)
    return GainSchedule(Sigma=sigma, L=gains, input_mat=g, a_stacked=a,
                        weights=weights)


def consensus_input(agent: int, gain, registers, own_register, graph=None) -> np.ndarray:
    """Control from broadcast registers:

        u_i = -L_i sum_j a_ij (register_i - register_j)

    `registers` is an iterable of (neighbor index, register value). When a
    graph is given, entries with a_ij = 0 are ignored; otherwise the list
    is trusted to contain exactly the neighbors.
    """
    gain = np.asarray(gain, dtype=float)
    own = np.asarray(own_register, dtype=float)
    total = np.zeros_like(own)
    for j, value in registers:
        if graph is not None and not graph.adjacency[agent, j]:
            continue
        total += own - np.asarray(value, dtype=float)
    return -gain @ total


def performance_index(trace, weights: CostWeights, agent: int) -> float:
    """Single-run quadratic cost for one robot:

    J_i = eps_M^T QM_i eps_M + sum_k (eps_k^T Q_i eps_k + u_k^T R_i u_k),

    with eps the deviation of the robot's estimate from the rendezvous
    point. Expectations over noise are taken by averaging this value over
    Monte Carlo trials.
    """
    horizon = weights.M
    eps = np.asarray(trace.eps)
    u = np.asarray(trace.u)
    if eps.shape[0] < horizon + 1 or u.shape[0] < horizon:
        raise ConfigError(
            f"trace spans {u.shape[0]} steps, shorter than horizon {horizon}")
    i = 2 * agent
    q = weights.Q[i:i + 2, i:i + 2]
    qm = weights.QM[i:i + 2, i:i + 2]
    r = weights.R[i:i + 2, i:i + 2]
    total = float(eps[horizon, agent] @ qm @ eps[horizon, agent])
    for k in range(horizon):
        total += float(eps[k, agent] @ q @ eps[k, agent])
        total += float(u[k, agent] @ r @ u[k, agent])
    return total


@dataclass(frozen=True)
class LqgNoiseTerms:
    """Deterministic and empirical second-moment inputs for the closed-form
    cost and the stability bound: stacked Kalman gains and corrected
    covariances per step, stacked noise and input matrices, and the
    per-step empirical outer moment of the triggering error."""

    kalman_gains: np.ndarray   # (M+1, d, d) block-diagonal
    p_corr: np.ndarray         # (M+1, d, d) block-diagonal
    w_stack: np.ndarray        # (d, d)
    v_stack: np.ndarray        # (d, d)
    c_stack: np.ndarray        # (d, d)
    x0_stack: np.ndarray       # (d, d) stacked initial covariance
    b_stack: np.ndarray        # (d, d) block-diagonal input matrices
    mix_mat: np.ndarray        # (d, d) laplacian (x) I2, the neighbor-difference operator
    e_outer: np.ndarray        # (M, d, d) empirical E{e_bar e_bar^T}


def step_noise_traces(schedule: GainSchedule, terms: LqgNoiseTerms, k: int):
    """Four trace contributions entering step k's Lyapunov decrement:
    estimate noise through the gain (weighted by P_{k|k}), measurement
    noise, process noise, and the triggering error through the applied
    control channel."""
    sig = schedule.Sigma[k + 1]
    kal = terms.kalman_gains[k + 1]
    kc = kal @ terms.c_stack
    kca = kc @ schedule.a_stacked
    est = float(np.trace(kca.T @ sig @ kca @ terms.p_corr[k]))
    meas = float(np.trace(kal.T @ sig @ kal @ terms.v_stack))
    proc = float(np.trace(kc.T @ sig @ kc @ terms.w_stack))
    g_trig = schedule.input_mat @ schedule.block_diag_gain(k)
    trig = float(np.trace(g_trig.T @ sig @ g_trig @ terms.e_outer[k]))
    return est, meas, proc, trig


def policy_value_matrices(schedule: GainSchedule, b_stack, mix_mat) -> np.ndarray:
    """Value matrices of the protocol as implemented.

    The per-agent gains act on neighbor register differences, so the
    physical input is u = -L_blk (laplacian (x) I) x_hat and the plant
    sees it through blockdiag(B). That loop is weaker than the
    synthesis loop (the off-diagonal gain blocks are dropped) and the
    input cost falls on the physical u, so cost prediction must evaluate
    this recursion rather than reuse the synthesis Sigma:

        S_k = M_k^T S_{k+1} M_k + F_k^T R F_k + Q,   S_M = Q_M,
        F_k = L_blk,k (laplacian (x) I),   M_k = A_bar - blockdiag(B) F_k.
    """
    w = schedule.weights
    d = schedule.dim
    sig = np.empty((schedule.horizon + 1, d, d))
    sig[schedule.horizon] = w.QM
    for k in range(schedule.horizon - 1, -1, -1):
        f = schedule.block_diag_gain(k) @ mix_mat
        m_cl = schedule.a_stacked - b_stack @ f
        sig[k] = _sym(m_cl.T @ sig[k + 1] @ m_cl + f.T @ w.R @ f + w.Q)
    return sig


def predicted_cost(schedule: GainSchedule, eps0, noise_terms: LqgNoiseTerms) -> float:
    """Closed-form cost of the implemented protocol: the value quadratic
    eps_0^T S_0 eps_0 (plus the step-0 estimate covariance through S_0)
    and the per-step noise and triggering traces, with S the
    policy-evaluation value matrices. Cross-validates the Monte Carlo
    average of performance_index."""
    if noise_terms is None or noise_terms.e_outer is None:
        raise ConfigError("predicted_cost requires triggering-error second moments")
    eps0 = np.asarray(eps0, dtype=float)
    if noise_terms.e_outer.shape[0] < schedule.horizon:
        raise ConfigError("triggering-error moments shorter than the horizon")
    sig = policy_value_matrices(schedule, noise_terms.b_stack, noise_terms.mix_mat)
    total = float(eps0 @ sig[0] @ eps0)
    k0 = noise_terms.kalman_gains[0]
    cov0 = k0 @ (noise_terms.c_stack @ noise_terms.x0_stack @ noise_terms.c_stack.T
                 + noise_terms.v_stack) @ k0.T
    total += float(np.trace(sig[0] @ cov0))
    r_bar = schedule.weights.R
    for k in range(schedule.horizon):
        s_next = sig[k + 1]
        kal = noise_terms.kalman_gains[k + 1]
        kc = kal @ noise_terms.c_stack
        kca = kc @ schedule.a_stacked
        total += float(np.trace(kca.T @ s_next @ kca @ noise_terms.p_corr[k]))
        total += float(np.trace(kal.T @ s_next @ kal @ noise_terms.v_stack))
        total += float(np.trace(kc.T @ s_next @ kc @ noise_terms.w_stack))
        # Triggering error: enters the plant through B F and is priced in
        # the physical input cost as well.
        f = schedule.block_diag_gain(k) @ noise_terms.mix_mat
        g_trig = noise_terms.b_stack @ f
        total += float(np.trace((g_trig.T @ s_next @ g_trig + f.T @ r_bar @ f)
                                @ noise_terms.e_outer[k]))
    return total


def disagreement_basis(n_agents: int) -> np.ndarray:
    """Orthonormal basis of the disagreement subspace: the orthogonal
    complement of the agreement directions 1_N (x) R^2, built from Helmert
    columns so the result is deterministic."""
    if n_agents < 2:
        raise ConfigError("disagreement subspace requires at least 2 agents")
    h = np.zeros((n_agents, n_agents - 1))
    for j in range(1, n_agents):
        h[:j, j - 1] = 1.0
        h[j, j - 1] = -float(j)
        h[:, j - 1] /= np.sqrt(j * (j + 1.0))
    return np.kron(h, np.eye(2))
