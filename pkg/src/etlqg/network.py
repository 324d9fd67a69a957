"""Simulated broadcast medium.

A published register reaches every graph neighbor within the same step:
the medium is lossless and delay-free, which matches the synchronous
step pipeline (estimate, trigger/publish, control, plant step). The bank
also keeps a delivery ledger so transmission accounting can be replayed
and cross-checked against the scheduler's own log.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import Graph


@dataclass
class RegisterBank:
    """Per-agent broadcast registers with per-axis timestamps.

    Axis granularity supports the decoupled per-axis triggering used in
    the experiment-style scenarios; whole-vector publishing is the
    default. Writes happen in the publish phase of a step; a second
    publish of the same (agent, axis) within one step is a logic error
    (the discrete step is the minimum inter-event time).
    """

    n_agents: int
    dim: int = 2
    values: np.ndarray = None
    tau: np.ndarray = None
    ledger: list = field(default_factory=list)
    _published: set = field(default_factory=set)
    _step: int = -1

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((self.n_agents, self.dim))
        if self.tau is None:
            self.tau = np.full((self.n_agents, self.dim), -1, dtype=np.int64)

    def begin_step(self, k: int) -> None:
        if k < self._step:
            raise ConfigError(f"step index went backwards: {k} after {self._step}")
        self._step = k
        self._published.clear()


def publish(bank: RegisterBank, agent: int, value, k: int, axes=(0, 1)) -> RegisterBank:
    """Write an agent's register; visible to all neighbors from step k on.

    `value` is the agent's full estimate vector; only the listed axes are
    stored (per-axis triggering publishes one axis at a time).
    """
    if k != bank._step:
        bank.begin_step(k)
    value = np.asarray(value, dtype=float)
    if value.shape != (bank.dim,):
        raise ConfigError(f"register value must be a {bank.dim}-vector")
    for axis in axes:
        if (agent, axis) in bank._published:
            raise RuntimeError(
                f"agent {agent} axis {axis} published twice in step {k}")
        bank._published.add((agent, axis))
        if bank.tau[agent, axis] > k:
            raise ConfigError("register timestamps must be non-decreasing")
        bank.values[agent, axis] = value[axis]
        bank.tau[agent, axis] = k
        bank.ledger.append((k, agent, axis, float(value[axis])))
    return bank


def read_neighbors(bank: RegisterBank, agent: int, graph: Graph):
    """Registers of exactly the agents adjacent to `agent`, as
    (neighbor index, register copy) pairs."""
    return [(int(j), bank.values[j].copy()) for j in graph.neighbors(agent)]


def rates_from_ledger(bank: RegisterBank, n_steps: int) -> np.ndarray:
    """Per-agent, per-axis transmission rates recomputed from the delivery
    ledger; must agree exactly with the scheduler's transmission log."""
    counts = np.zeros((bank.n_agents, bank.dim))
    for k, agent, axis, _ in bank.ledger:
        if k < n_steps:
            counts[agent, axis] += 1
    return counts / n_steps


def replay_consistent(bank: RegisterBank) -> bool:
    """Check conservation: replaying the ledger reproduces the final
    register contents and timestamps exactly."""
    values = np.zeros((bank.n_agents, bank.dim))
    tau = np.full((bank.n_agents, bank.dim), -1, dtype=np.int64)
    for k, agent, axis, value in bank.ledger:
        if k < tau[agent, axis]:
            return False
        values[agent, axis] = value
        tau[agent, axis] = k
    return bool(np.array_equal(values, bank.values) and np.array_equal(tau, bank.tau))
