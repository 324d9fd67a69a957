"""Event-triggered broadcast scheduling.

Five mechanisms decide, per agent per step, whether the current corrected
estimate is broadcast:

  time          transmit whenever k % period == 0
  send_on_delta |e|^2 >= beta
  relative      |e|^2 >= alpha |x_hat|^2        (Tabuada-style threshold)
  mixed         |e|^2 >= alpha |x_hat|^2 + beta
  integral      sum |e_j||x_j| >= gamma sum |x_j|^2 over the window since
                the last transmission (inclusive)

with e = x_hat - last broadcast value. All comparisons use >= (transmit
on equality) and step 0 always transmits so every register is
initialized. The mixed rule with alpha = 0 is exactly send-on-delta, and
with beta = 0 exactly the relative rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

KINDS = ("time", "send_on_delta", "relative", "mixed", "integral")

# Accepted spellings for scenario files and CLI trigger specs.
_ALIASES = {
    "time": "time", "time_triggered": "time", "periodic": "time",
    "send_on_delta": "send_on_delta", "sod": "send_on_delta", "delta": "send_on_delta",
    "relative": "relative", "tabuada": "relative",
    "mixed": "mixed",
    "integral": "integral",
}


@dataclass
class TriggerPolicy:
    """One agent's scheduler state: threshold parameters, the step index of
    the last transmission (tau), the register value it broadcast, and the
    running sums of the integral rule. Owned by a single sequential loop."""

    kind: str
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    period: int = 1
    tau: int = -1
    last_broadcast: tuple = None
    integral_lhs: float = 0.0
    integral_rhs: float = 0.0

    def __post_init__(self):
        if self.kind not in _ALIASES:
            raise ConfigError(f"unknown trigger kind {self.kind!r} (expected one of {KINDS})")
        self.kind = _ALIASES[self.kind]
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("trigger thresholds alpha, beta, gamma must be >= 0")
        if self.period < 1:
            raise ConfigError("trigger period must be >= 1")

    def decide(self, k: int, x_hat) -> bool:
        """Evaluate the trigger at step k for the corrected estimate x_hat.

        On transmit: tau <- k, the register takes x_hat, and the integral
        accumulators restart with the step-k term of the new window.
        """
        x = tuple(float(c) for c in x_hat)
        if self.last_broadcast is None:
            fire = True
        elif self.kind == "time":
            fire = k % self.period == 0
        else:
            e_sq = 0.0
            for c, b in zip(x, self.last_broadcast):
                d = c - b
                e_sq += d * d
            x_sq = 0.0
            for c in x:
                x_sq += c * c
            if self.kind == "send_on_delta":
                fire = e_sq >= self.beta
            elif self.kind == "relative":
                fire = e_sq >= self.alpha * x_sq
            elif self.kind == "mixed":
                fire = e_sq >= self.alpha * x_sq + self.beta
            else:  # integral
                self.integral_lhs += (e_sq * x_sq) ** 0.5
                self.integral_rhs += x_sq
                fire = self.integral_lhs >= self.gamma * self.integral_rhs
        if fire:
            self.tau = k
            self.last_broadcast = x
            # New window opens at k: its first term has zero error.
            self.integral_lhs = 0.0
            self.integral_rhs = sum(c * c for c in x)
        return fire


def make_policy(kind: str, **params) -> TriggerPolicy:
    """Build a policy from a kind name and its parameters, rejecting extras."""
    allowed = {
        "time": {"period"},
        "send_on_delta": {"beta"},
        "relative": {"alpha"},
        "mixed": {"alpha", "beta"},
        "integral": {"gamma"},
    }
    if kind not in _ALIASES:
        raise ConfigError(f"unknown trigger kind {kind!r} (expected one of {KINDS})")
    canon = _ALIASES[kind]
    extra = set(params) - allowed[canon]
    if extra:
        raise ConfigError(f"trigger kind {canon!r} does not take {sorted(extra)}")
    return TriggerPolicy(kind=canon, **params)


def broadcast_register(policy: TriggerPolicy) -> np.ndarray:
    """Most recent broadcast value; defined once step 0 has run."""
    if policy.last_broadcast is None:
        raise ConfigError("no broadcast has occurred yet")
    return np.asarray(policy.last_broadcast, dtype=float)


@dataclass
class TransmissionLog:
    """Per-agent transmit bits over a finite horizon (rows = steps)."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits)
        if self.bits.ndim == 1:
            self.bits = self.bits[:, None]
        if self.bits.shape[0] < 1:
            raise ConfigError("transmission log must cover at least one step")

    @property
    def horizon(self) -> int:
        return self.bits.shape[0]


def transmission_rate(log: TransmissionLog, agent: int) -> float:
    """Empirical average transmission rate: mean of the agent's bits."""
    return float(np.mean(log.bits[:, agent]))
