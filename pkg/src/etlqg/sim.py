"""Scenario orchestration.

One simulated step runs four phases in a fixed order so every run is
seed-deterministic: (1) every agent filters its new measurement, (2)
every agent evaluates its trigger and publishes its register, (3) every
agent computes its control from the registers, (4) every plant steps.
Monte Carlo batches rerun the pipeline under per-trial noise streams and
aggregate costs, transmission rates, and the second moments needed by
the mean-square stability bound.

Noise streams are keyed so trial t of agent i uses
stream_id = (t * n_agents + i) * 3 + role with roles 0 = initial state,
1 = process noise, 2 = measurement noise. Identical (seed, trial) pairs
therefore reproduce identical noise regardless of trial count or of the
trigger being simulated (common random numbers across variants).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import (CostWeights, GainSchedule, LqgNoiseTerms,
                         disagreement_basis, riccati_backward,
                         step_noise_traces)
from .errors import ConfigError
from .estimator import covariance_sequence
from .model import NoiseSource, UnicyclePose, psd_factor, unicycle_wheel_speeds
from .network import RegisterBank, publish
from .scenario import Scenario, TriggerConfig

ROLE_INIT, ROLE_PROCESS, ROLE_MEAS = 0, 1, 2

# Largest condition number / smallest rho accepted when certifying the
# mean-square bound; the bisection tolerance follows the bound contract.
RHO_MIN = 1e-6
RHO_BISECT_TOL = 1e-6


def _stream(seed: int, trial: int, agent: int, n_agents: int, role: int) -> NoiseSource:
    return NoiseSource(seed=seed, stream_id=(trial * n_agents + agent) * 3 + role)


def _block_diag(blocks) -> np.ndarray:
    blocks = np.asarray(blocks)
    n, b = blocks.shape[0], blocks.shape[1]
    out = np.zeros((n * b, n * b))
    for i in range(n):
        out[i * b:(i + 1) * b, i * b:(i + 1) * b] = blocks[i]
    return out


@dataclass(frozen=True)
class ModelStack:
    """Stacked network matrices plus the deterministic filter schedules."""

    a_agents: np.ndarray    # (N, 2, 2)
    b_agents: np.ndarray
    c_agents: np.ndarray
    a_stacked: np.ndarray   # (2N, 2N) block diag of A_i
    input_mat: np.ndarray   # laplacian (x) B
    mix_mat: np.ndarray     # laplacian (x) I2
    c_stack: np.ndarray
    w_stack: np.ndarray
    v_stack: np.ndarray
    x0_stack: np.ndarray
    p_pred: np.ndarray      # (M+1, N, 2, 2)
    gains: np.ndarray       # (M+1, N, 2, 2)
    p_corr: np.ndarray      # (M+1, N, 2, 2)

    def noise_terms(self, e_outer: np.ndarray) -> LqgNoiseTerms:
        steps = self.gains.shape[0]
        d = self.a_stacked.shape[0]
        kbar = np.zeros((steps, d, d))
        pbar = np.zeros((steps, d, d))
        for k in range(steps):
            kbar[k] = _block_diag(self.gains[k])
            pbar[k] = _block_diag(self.p_corr[k])
        return LqgNoiseTerms(kalman_gains=kbar, p_corr=pbar,
                             w_stack=self.w_stack, v_stack=self.v_stack,
                             c_stack=self.c_stack, x0_stack=self.x0_stack,
                             b_stack=_block_diag(self.b_agents),
                             mix_mat=self.mix_mat, e_outer=e_outer)

    def p_pred_envelope(self) -> float:
        """Scalar c such that c*I dominates every predicted covariance in
        the PSD order (the eigenvalue envelope of the P_{k|k-1} family)."""
        worst = 0.0
        for k in range(self.p_pred.shape[0]):
            for i in range(self.p_pred.shape[1]):
                worst = max(worst, float(np.linalg.eigvalsh(self.p_pred[k, i])[-1]))
        return worst


def build_stack(scenario: Scenario) -> ModelStack:
    models = scenario.models
    horizon = scenario.horizon
    n = len(models)
    a_agents = np.stack([m.A for m in models])
    b_agents = np.stack([m.B for m in models])
    c_agents = np.stack([m.C for m in models])
    p_pred = np.empty((horizon + 1, n, 2, 2))
    gains = np.empty((horizon + 1, n, 2, 2))
    p_corr = np.empty((horizon + 1, n, 2, 2))
    for i, m in enumerate(models):
        pp, kk, pc = covariance_sequence(m, horizon)
        p_pred[:, i] = pp
        gains[:, i] = kk
        p_corr[:, i] = pc
    return ModelStack(
        a_agents=a_agents,
        b_agents=b_agents,
        c_agents=c_agents,
        a_stacked=_block_diag(a_agents),
        input_mat=np.kron(scenario.graph.laplacian.astype(float), models[0].B),
        mix_mat=np.kron(scenario.graph.laplacian.astype(float), np.eye(2)),
        c_stack=_block_diag(c_agents),
        w_stack=_block_diag(np.stack([m.W for m in models])),
        v_stack=_block_diag(np.stack([m.V for m in models])),
        x0_stack=_block_diag(np.stack([m.X0 for m in models])),
        p_pred=p_pred,
        gains=gains,
        p_corr=p_corr,
    )


def make_schedule(scenario: Scenario, stack: ModelStack | None = None) -> GainSchedule:
    stack = stack or build_stack(scenario)
    weights = CostWeights.from_blocks(scenario.q_block, scenario.qm_block,
                                      scenario.r_block, scenario.n_agents,
                                      scenario.horizon)
    return riccati_backward(weights, stack.input_mat, stack.a_stacked)


def draw_noise(scenario: Scenario, seed: int, trial: int) -> dict:
    """Per-trial noise bundle: initial states, process and measurement
    noise paths, one independent stream per agent per role."""
    n, horizon = scenario.n_agents, scenario.horizon
    x0 = np.empty((n, 2))
    w = np.empty((horizon, n, 2))
    v = np.empty((horizon + 1, n, 2))
    for i, m in enumerate(scenario.models):
        g0 = psd_factor(m.X0)
        gw = psd_factor(m.W)
        gv = psd_factor(m.V)
        x0[i] = m.x0_mean + g0 @ _stream(seed, trial, i, n, ROLE_INIT).standard_normal(2)
        w[:, i] = _stream(seed, trial, i, n, ROLE_PROCESS).standard_normal((horizon, 2)) @ gw.T
        v[:, i] = _stream(seed, trial, i, n, ROLE_MEAS).standard_normal((horizon + 1, 2)) @ gv.T
    return {"x0": x0, "w": w, "v": v}


class _TriggerBank:
    """Vectorized trigger evaluation across agents.

    In per-axis mode each axis runs its own scalar trigger (separate
    register timestamps per axis); otherwise one vector trigger per
    agent. Semantics track TriggerPolicy.decide exactly; the replay test
    re-runs the per-agent policies against recorded estimate streams.
    """

    def __init__(self, cfg: TriggerConfig, n_agents: int):
        self.cfg = cfg
        self.per_axis = cfg.per_axis
        shape = (n_agents, 2) if cfg.per_axis else (n_agents,)
        self.last = None
        self.lhs = np.zeros(shape)
        self.rhs = np.zeros(shape)

    def decide(self, k: int, x_est: np.ndarray) -> np.ndarray:
        """Returns fire mask: (N, 2) per-axis or (N,) vector mode."""
        cfg = self.cfg
        p = cfg.params_at(k) if cfg.schedule else None
        alpha = p["alpha"] if p else cfg.alpha
        beta = p["beta"] if p else cfg.beta
        gamma = p["gamma"] if p else cfg.gamma
        period = p["period"] if p else cfg.period

        if self.per_axis:
            x_sq = x_est ** 2
        else:
            x_sq = np.sum(x_est ** 2, axis=1)

        if self.last is None:
            fire = np.ones(self.lhs.shape, dtype=bool)
            self.last = x_est.copy()
        elif cfg.kind == "time":
            fire = np.full(self.lhs.shape, k % period == 0)
        else:
            err = x_est - self.last
            if self.per_axis:
                e_sq = err ** 2
            else:
                e_sq = np.sum(err ** 2, axis=1)
            if cfg.kind == "send_on_delta":
                fire = e_sq >= beta
            elif cfg.kind == "relative":
                fire = e_sq >= alpha * x_sq
            elif cfg.kind == "mixed":
                fire = e_sq >= alpha * x_sq + beta
            else:  # integral
                self.lhs += np.sqrt(e_sq * x_sq)
                self.rhs += x_sq
                fire = self.lhs >= gamma * self.rhs

        if self.per_axis:
            self.last[fire] = x_est[fire]
        else:
            self.last[fire, :] = x_est[fire, :]
        self.lhs[fire] = 0.0
        self.rhs[fire] = x_sq[fire]
        return fire


@dataclass
class SimTrace:
    """One run: states, measurements, estimates, trigger bits, registers,
    controls, wheel speeds, consensus errors, the noise that produced it,
    and the per-run summary metrics."""

    x_true: np.ndarray      # (K+1, N, 2)
    y: np.ndarray           # (K+1, N, 2)
    x_est: np.ndarray       # (K+1, N, 2)
    sigma: np.ndarray       # (K, N, 2) transmit bits (both columns equal in vector mode)
    registers: np.ndarray   # (K, N, 2) register contents at control time
    u: np.ndarray           # (K, N, 2)
    wheels: np.ndarray      # (K, N, 2) right/left rim speeds
    eps: np.ndarray         # (K+1, N, 2) estimate minus rendezvous point
    w: np.ndarray           # (K, N, 2) process noise actually applied
    v: np.ndarray           # (K+1, N, 2) measurement noise actually applied
    J: np.ndarray           # (N,)
    J_axis: np.ndarray      # (N, 2) diagonal-weight decomposition
    Gamma: np.ndarray       # (N, 2)
    final_max_pairwise: float
    steps: int
    bank: RegisterBank = None

    @property
    def n_agents(self) -> int:
        return self.x_true.shape[1]


def _simulate(scenario: Scenario, schedule: GainSchedule, stack: ModelStack,
              trigger_cfg: TriggerConfig, noise: dict,
              with_wheels: bool = True) -> SimTrace:
    n = scenario.n_agents
    horizon = scenario.horizon
    lap = scenario.graph.laplacian.astype(float)
    x0_ref = scenario.x0
    gain_blocks = schedule.gain_blocks()
    tol_stop = scenario.mode == "tolerance-stop"

    x_true = np.empty((horizon + 1, n, 2))
    y = np.empty((horizon + 1, n, 2))
    x_est = np.empty((horizon + 1, n, 2))
    sigma = np.zeros((horizon, n, 2), dtype=np.int8)
    registers = np.empty((horizon, n, 2))
    u = np.zeros((horizon, n, 2))
    wheels = np.zeros((horizon, n, 2))

    bank = RegisterBank(n_agents=n)
    trig = _TriggerBank(trigger_cfg, n)
    poses = [UnicyclePose(x=float(noise["x0"][i, 0]), y=float(noise["x0"][i, 1]),
                          theta=scenario.theta0, wheel_base=scenario.wheel_base,
                          wheel_radius=scenario.wheel_radius)
             for i in range(n)] if with_wheels else None

    a_ag, b_ag, c_ag = stack.a_agents, stack.b_agents, stack.c_agents
    kal = stack.gains

    x_true[0] = noise["x0"]
    x_corr_prev = None
    u_prev = np.zeros((n, 2))
    steps = horizon

    for k in range(horizon + 1):
        # Phase 1: predict (from the prior at k = 0) and correct.
        if k == 0:
            x_pred = np.stack([m.x0_mean for m in scenario.models])
        else:
            x_pred = (np.einsum("nij,nj->ni", a_ag, x_corr_prev)
                      + np.einsum("nij,nj->ni", b_ag, u_prev))
        y[k] = np.einsum("nij,nj->ni", c_ag, x_true[k]) + noise["v"][k]
        innov = y[k] - np.einsum("nij,nj->ni", c_ag, x_pred)
        x_est[k] = x_pred + np.einsum("nij,nj->ni", kal[k], innov)
        x_corr_prev = x_est[k]

        if tol_stop and _max_pairwise(x_est[k]) < scenario.epsilon:
            steps = k
            break
        if k == horizon:
            break

        # Phase 2: trigger decisions and register publishes.
        bank.begin_step(k)
        fire = trig.decide(k, x_est[k])
        if trig.per_axis:
            sigma[k] = fire
            for i in range(n):
                axes = tuple(int(a) for a in np.flatnonzero(fire[i]))
                if axes:
                    publish(bank, i, x_est[k, i], k, axes=axes)
        else:
            sigma[k] = fire[:, None]
            for i in range(n):
                if fire[i]:
                    publish(bank, i, x_est[k, i], k)
        registers[k] = bank.values

        # Phase 3: controls from neighbor register differences.
        disagree = lap @ bank.values
        u[k] = -np.einsum("nij,nj->ni", gain_blocks[k], disagree)

        # Phase 4: plants step; wheel-speed reporting channel.
        if with_wheels:
            for i in range(n):
                vr, vl, poses[i] = unicycle_wheel_speeds(
                    poses[i], u[k, i], scenario.dt, scenario.omega_max)
                wheels[k, i] = (vr, vl)
        x_true[k + 1] = (np.einsum("nij,nj->ni", a_ag, x_true[k])
                         + np.einsum("nij,nj->ni", b_ag, u[k])
                         + noise["w"][k])
        u_prev = u[k]

    eps = x_est[:steps + 1] - x0_ref
    j_total, j_axis = _costs(scenario, eps, u[:steps])
    sig = sigma[:steps]
    gamma = sig.mean(axis=0) if steps > 0 else np.ones((n, 2))
    return SimTrace(
        x_true=x_true[:steps + 1], y=y[:steps + 1], x_est=x_est[:steps + 1],
        sigma=sig, registers=registers[:steps], u=u[:steps],
        wheels=wheels[:steps], eps=eps,
        w=noise["w"][:steps], v=noise["v"][:steps + 1],
        J=j_total, J_axis=j_axis, Gamma=np.asarray(gamma, dtype=float),
        final_max_pairwise=_max_pairwise(x_true[steps]),
        steps=steps, bank=bank,
    )


def _max_pairwise(points: np.ndarray) -> float:
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


def _costs(scenario: Scenario, eps: np.ndarray, u: np.ndarray):
    """Quadratic cost per agent over the realized window, with the
    terminal weight applied at the last recorded state. The per-axis
    split uses the diagonal weight entries (exact for diagonal weights)."""
    q, qm, r = scenario.q_block, scenario.qm_block, scenario.r_block
    stage = np.einsum("kni,ij,knj->n", eps[:-1], q, eps[:-1])
    stage += np.einsum("kni,ij,knj->n", u, r, u)
    term = np.einsum("ni,ij,nj->n", eps[-1], qm, eps[-1])
    j_axis = (np.einsum("kni,i->ni", eps[:-1] ** 2, np.diag(q))
              + np.einsum("kni,i->ni", u ** 2, np.diag(r))
              + eps[-1] ** 2 * np.diag(qm))
    return stage + term, j_axis


def run_scenario(scenario: Scenario, seed: int | None = None, trial: int = 0,
                 schedule: GainSchedule | None = None,
                 stack: ModelStack | None = None,
                 trigger: TriggerConfig | None = None,
                 with_wheels: bool = True) -> SimTrace:
    """Simulate one seeded run of the scenario (optionally under a trigger
    override, sharing a precomputed gain schedule and model stack)."""
    stack = stack if stack is not None else build_stack(scenario)
    schedule = schedule if schedule is not None else make_schedule(scenario, stack)
    noise = draw_noise(scenario, scenario.seed if seed is None else seed, trial)
    return _simulate(scenario, schedule, stack, trigger or scenario.trigger,
                     noise, with_wheels=with_wheels)


def replay(scenario: Scenario, trace: SimTrace,
           schedule: GainSchedule | None = None,
           stack: ModelStack | None = None,
           trigger: TriggerConfig | None = None) -> SimTrace:
    """Re-simulate from a trace's recorded noise; must reproduce it exactly."""
    stack = stack if stack is not None else build_stack(scenario)
    schedule = schedule if schedule is not None else make_schedule(scenario, stack)
    horizon = scenario.horizon
    noise = {"x0": trace.x_true[0].copy(),
             "w": np.zeros((horizon, trace.n_agents, 2)),
             "v": np.zeros((horizon + 1, trace.n_agents, 2))}
    noise["w"][:trace.steps] = trace.w
    noise["v"][:trace.steps + 1] = trace.v
    return _simulate(scenario, schedule, stack, trigger or scenario.trigger, noise)


def _fsum_axis0(a: np.ndarray) -> np.ndarray:
    flat = a.reshape(a.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(a.shape[1:])


def _mean_se(a: np.ndarray):
    t = a.shape[0]
    mean = _fsum_axis0(a) / t
    if t < 2:
        return mean, np.full(mean.shape, np.nan)
    var = _fsum_axis0((a - mean) ** 2) / (t - 1)
    return mean, np.sqrt(var / t)


@dataclass
class MonteCarloSummary:
    trials: int
    j_samples: np.ndarray        # (T, N)
    j_axis_samples: np.ndarray   # (T, N, 2)
    gamma_samples: np.ndarray    # (T, N, 2)
    j_mean: np.ndarray
    j_se: np.ndarray
    j_axis_mean: np.ndarray
    j_axis_se: np.ndarray
    gamma_mean: np.ndarray
    gamma_se: np.ndarray
    eps_sq_mean: np.ndarray      # (M+1,) disagreement component
    eps0_sq_mean: float
    e_outer_mean: np.ndarray     # (M, 2N, 2N)


def run_monte_carlo(scenario: Scenario, trials: int | None = None,
                    seed: int | None = None,
                    trigger: TriggerConfig | None = None,
                    schedule: GainSchedule | None = None,
                    stack: ModelStack | None = None) -> MonteCarloSummary:
    """Independent seeded trials of the scenario (always fixed-horizon so
    the per-step curves share a length). Trial t draws from streams keyed
    by (seed, t), so comparisons across triggers at the same seed use
    common random numbers."""
    trials = scenario.trials if trials is None else int(trials)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    seed = scenario.seed if seed is None else seed
    stack = stack if stack is not None else build_stack(scenario)
    schedule = schedule if schedule is not None else make_schedule(scenario, stack)
    n, horizon = scenario.n_agents, scenario.horizon

    mc_scenario = scenario if scenario.mode == "fixed-horizon" else _fixed_mode(scenario)
    j = np.empty((trials, n))
    j_axis = np.empty((trials, n, 2))
    gamma = np.empty((trials, n, 2))
    eps_sq = np.empty((trials, horizon + 1))
    e_outer_sum = np.zeros((horizon, 2 * n, 2 * n))

    for t in range(trials):
        noise = draw_noise(mc_scenario, seed, t)
        trace = _simulate(mc_scenario, schedule, stack,
                          trigger or mc_scenario.trigger, noise, with_wheels=False)
        j[t] = trace.J
        j_axis[t] = trace.J_axis
        gamma[t] = trace.Gamma
        centered = trace.eps - trace.eps.mean(axis=1, keepdims=True)
        eps_sq[t] = (centered ** 2).sum(axis=(1, 2))
        ebar = (trace.x_est[:horizon] - trace.registers).reshape(horizon, 2 * n)
        e_outer_sum += np.einsum("kp,kq->kpq", ebar, ebar)

    j_mean, j_se = _mean_se(j)
    j_axis_mean, j_axis_se = _mean_se(j_axis)
    gamma_mean, gamma_se = _mean_se(gamma)
    eps_sq_mean = _fsum_axis0(eps_sq) / trials
    return MonteCarloSummary(
        trials=trials, j_samples=j, j_axis_samples=j_axis, gamma_samples=gamma,
        j_mean=j_mean, j_se=j_se, j_axis_mean=j_axis_mean, j_axis_se=j_axis_se,
        gamma_mean=gamma_mean, gamma_se=gamma_se,
        eps_sq_mean=eps_sq_mean, eps0_sq_mean=float(eps_sq_mean[0]),
        e_outer_mean=e_outer_sum / trials,
    )


def _fixed_mode(scenario: Scenario) -> Scenario:
    import copy
    out = copy.copy(scenario)
    out.mode = "fixed-horizon"
    return out


@dataclass
class StabilityReport:
    """Certified decay-rate bound on the mean-square disagreement,
    compared per step against the Monte Carlo estimate."""

    certified: bool
    reason: str
    rho: float
    mu: np.ndarray            # (M,) per-step noise aggregate
    kappa_hi: float           # max eigenvalue of Sigma_k on the disagreement subspace
    kappa_lo: float
    p_bar: float              # eigenvalue envelope dominating every P_{k|k-1}
    empirical: np.ndarray     # (M+1,)
    bound: np.ndarray         # (M+1,)

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "reason": self.reason,
            "rho": self.rho,
            "mu_max": float(np.max(self.mu)) if self.mu.size else 0.0,
            "kappa_hi": self.kappa_hi,
            "kappa_lo": self.kappa_lo,
            "p_bar": self.p_bar,
            "empirical": self.empirical.tolist(),
            "bound": self.bound.tolist(),
        }


def stability_bound(schedule: GainSchedule, stack: ModelStack,
                    e_outer: np.ndarray, empirical: np.ndarray,
                    rho_choice: float | None = None) -> StabilityReport:
    """Evaluate the exponential mean-square bound.

    mu_k aggregates the four noise/trigger trace terms. rho is the largest
    value in (0, 1] for which the realized closed loop satisfies the
    Lyapunov decrement M^T Sigma_{k+1} M <= (1 - rho) Sigma_k on the
    disagreement subspace at every step (found by bisection); the
    agreement direction is excluded because the graph feedback cannot act
    on it. The bound curve is

        kappa_hi/kappa_lo * E|e_0|^2 (1-rho)^(k+1)
          + mu_max/kappa_lo * sum_{m=1}^{k-1} (1-rho)^m.

    An infeasible rho or a Sigma that is not positive definite on the
    disagreement subspace yields certified = False, never an exception.
    """
    n = schedule.n_agents
    horizon = schedule.horizon
    if n < 2:
        raise ConfigError("stability bound needs at least 2 agents")
    terms = stack.noise_terms(np.asarray(e_outer))
    mu = np.array([sum(step_noise_traces(schedule, terms, k)) for k in range(horizon)])
    basis = disagreement_basis(n)
    s_res = np.array([basis.T @ schedule.Sigma[k] @ basis for k in range(horizon + 1)])
    t_res = np.empty_like(s_res[:-1])
    for k in range(horizon):
        m_cl = schedule.closed_loop(k)
        t_res[k] = basis.T @ m_cl.T @ schedule.Sigma[k + 1] @ m_cl @ basis

    eigs = np.array([np.linalg.eigvalsh((s + s.T) / 2) for s in s_res])
    kappa_lo = float(eigs[:, 0].min())
    kappa_hi = float(eigs[:, -1].max())
    p_bar = stack.p_pred_envelope()
    empirical = np.asarray(empirical, dtype=float)
    bound = np.full(horizon + 1, np.inf)

    def feasible(rho: float) -> bool:
        for k in range(horizon):
            gap = (1.0 - rho) * s_res[k] - t_res[k]
            scale = max(1.0, float(np.abs(s_res[k]).max()))
            if np.linalg.eigvalsh((gap + gap.T) / 2)[0] < -1e-9 * scale:
                return False
        return True

    if kappa_lo <= 1e-12 * max(kappa_hi, 1.0):
        return StabilityReport(False, "Sigma not positive definite on the "
                               "disagreement subspace", 0.0, mu, kappa_hi,
                               kappa_lo, p_bar, empirical, bound)

    if rho_choice is not None:
        if not (0.0 < rho_choice <= 1.0) or not feasible(rho_choice):
            return StabilityReport(False, f"requested rho={rho_choice} violates the "
                                   "decrement condition", 0.0, mu, kappa_hi,
                                   kappa_lo, p_bar, empirical, bound)
        rho = float(rho_choice)
    else:
        if not feasible(RHO_MIN):
            return StabilityReport(False, "no feasible rho > 0 (closed loop does "
                                   "not contract in the Sigma metric)", 0.0, mu,
                                   kappa_hi, kappa_lo, p_bar, empirical, bound)
        lo, hi = RHO_MIN, 1.0
        if feasible(1.0):
            rho = 1.0
        else:
            while hi - lo > RHO_BISECT_TOL:
                mid = 0.5 * (lo + hi)
                if feasible(mid):
                    lo = mid
                else:
                    hi = mid
            rho = lo

    mu_max = float(mu.max()) if mu.size else 0.0
    eps0 = float(empirical[0])
    decay = 1.0 - rho
    geom = 0.0
    for k in range(horizon + 1):
        bound[k] = kappa_hi / kappa_lo * eps0 * decay ** (k + 1) + mu_max / kappa_lo * geom
        # sum_{m=1}^{k-1} decay^m gains the m = k term when k advances.
        if k >= 1:
            geom += decay ** k
    return StabilityReport(True, "", rho, mu, kappa_hi, kappa_lo, p_bar,
                           empirical, bound)


@dataclass
class TriggerComparison:
    label: str
    trigger: TriggerConfig
    gamma_mean: np.ndarray    # (N, 2)
    gamma_se: np.ndarray
    j_mean: np.ndarray        # (N,)
    j_se: np.ndarray
    j_axis_mean: np.ndarray   # (N, 2)
    j_axis_se: np.ndarray


def trigger_from_spec(spec: dict, per_axis: bool) -> tuple[str, TriggerConfig]:
    """Build a trigger override from a {kind, params...} mapping."""
    from .scheduler import _ALIASES
    spec = dict(spec)
    kind = spec.pop("kind", None)
    label = spec.pop("label", None)
    if kind not in _ALIASES:
        raise ConfigError(f"unknown trigger kind {kind!r} in comparison spec")
    cfg = TriggerConfig(kind=_ALIASES[kind],
                        alpha=float(spec.pop("alpha", 0.0)),
                        beta=float(spec.pop("beta", 0.0)),
                        gamma=float(spec.pop("gamma", 0.0)),
                        period=int(spec.pop("period", 1)),
                        per_axis=per_axis)
    if spec:
        raise ConfigError(f"unknown trigger spec keys {sorted(spec)}")
    if label is None:
        params = {"time": f"period={cfg.period}",
                  "send_on_delta": f"beta={cfg.beta:g}",
                  "relative": f"alpha={cfg.alpha:g}",
                  "mixed": f"alpha={cfg.alpha:g},beta={cfg.beta:g}",
                  "integral": f"gamma={cfg.gamma:g}"}[cfg.kind]
        label = f"{cfg.kind}({params})"
    return label, cfg


def compare_triggers(scenario: Scenario, trigger_specs: list,
                     trials: int | None = None,
                     seed: int | None = None) -> list[TriggerComparison]:
    """Run the same seeded trials under each trigger variant (common
    random numbers) and collect per-agent, per-axis rates and costs."""
    if len(trigger_specs) < 2:
        raise ConfigError("trigger comparison needs at least 2 trigger specs")
    stack = build_stack(scenario)
    schedule = make_schedule(scenario, stack)
    out = []
    for spec in trigger_specs:
        label, cfg = trigger_from_spec(spec, scenario.trigger.per_axis)
        mc = run_monte_carlo(scenario, trials=trials, seed=seed, trigger=cfg,
                             schedule=schedule, stack=stack)
        out.append(TriggerComparison(
            label=label, trigger=cfg,
            gamma_mean=mc.gamma_mean, gamma_se=mc.gamma_se,
            j_mean=mc.j_mean, j_se=mc.j_se,
            j_axis_mean=mc.j_axis_mean, j_axis_se=mc.j_axis_se))
    return out


def sweep_parameter(scenario: Scenario, parameter: str, grid: list,
                    trials: int | None = None, seed: int | None = None) -> list[dict]:
    """Communication/performance frontier along one threshold parameter."""
    if parameter not in ("alpha", "beta", "gamma", "period"):
        raise ConfigError("sweep parameter must be one of alpha|beta|gamma|period")
    if len(grid) < 2:
        raise ConfigError("sweep grid needs at least 2 values")
    stack = build_stack(scenario)
    schedule = make_schedule(scenario, stack)
    rows = []
    for value in grid:
        cfg = TriggerConfig(kind=scenario.trigger.kind, alpha=scenario.trigger.alpha,
                            beta=scenario.trigger.beta, gamma=scenario.trigger.gamma,
                            period=scenario.trigger.period,
                            per_axis=scenario.trigger.per_axis)
        setattr(cfg, parameter, int(value) if parameter == "period" else float(value))
        mc = run_monte_carlo(scenario, trials=trials, seed=seed, trigger=cfg,
                             schedule=schedule, stack=stack)
        j_trial = mc.j_samples.mean(axis=1)  # agent-mean J per trial
        _, j_se = _mean_se(j_trial[:, None])
        rows.append({
            "value": float(value),
            "gamma_mean": float(np.mean(mc.gamma_mean)),
            "j_mean": float(np.mean(mc.j_mean)),
            "j_se": float(j_se[0]) if mc.trials > 1 else float("nan"),
        })
    return rows
