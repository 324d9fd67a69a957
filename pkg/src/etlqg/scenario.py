"""Scenario files: TOML schema, validation, defaults.

A scenario fixes everything a run needs: per-agent plant matrices (with a
[model.shared] shorthand), the communication graph, the trigger mechanism
and its thresholds, cost weights and horizon, unicycle geometry, seed,
trial count and run mode. Unknown keys are rejected by full path so typos
fail loudly. The resolved defaults are documented in the README schema
reference and printable via the CLI --dry-run flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .model import AgentModel, Graph

_TOP_KEYS = {"name", "seed", "mode", "epsilon", "trials", "out_dir",
             "model", "graph", "trigger", "weights", "unicycle", "compare"}
_MODEL_KEYS = {"dt", "shared", "agents"}
_SHARED_KEYS = {"A", "B", "C", "W", "V", "X0"}
_AGENT_KEYS = _SHARED_KEYS | {"x0_mean"}
_GRAPH_KEYS = {"adjacency"}
_TRIGGER_KEYS = {"kind", "alpha", "beta", "gamma", "period", "per_axis", "schedule"}
_TRIGGER_SCHED_KEYS = {"step", "alpha", "beta", "gamma", "period"}
_WEIGHT_KEYS = {"Q", "QM", "R", "M", "x0"}
_UNICYCLE_KEYS = {"wheel_base", "wheel_radius", "omega_max", "theta0"}
_COMPARE_KEYS = {"triggers"}
_COMPARE_TRIGGER_KEYS = {"kind", "alpha", "beta", "gamma", "period", "label"}

MODES = ("fixed-horizon", "tolerance-stop")


def expand_matrix(value, name: str) -> np.ndarray:
    """Accept a scalar (scaled identity), a 2-vector (diagonal) or a full
    2x2 nested list."""
    if isinstance(value, (int, float)):
        return float(value) * np.eye(2)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (2,):
        return np.diag(arr)
    if arr.shape == (2, 2):
        return arr
    raise ConfigError(f"{name}: expected scalar, 2-vector or 2x2 matrix, got shape {arr.shape}")


def _reject_unknown(d: dict, allowed: set, path: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key: {path}{key}")


@dataclass
class TriggerConfig:
    kind: str = "time"
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    period: int = 1
    per_axis: bool = True
    # Optional piecewise-constant threshold schedule: list of dicts with a
    # "step" key and the parameters that change from that step on.
    schedule: list = field(default_factory=list)

    def params_at(self, k: int) -> dict:
        out = {"alpha": self.alpha, "beta": self.beta,
               "gamma": self.gamma, "period": self.period}
        for entry in self.schedule:
            if k >= entry["step"]:
                for key in ("alpha", "beta", "gamma", "period"):
                    if key in entry:
                        out[key] = entry[key]
        return out


@dataclass
class Scenario:
    name: str
    models: list
    graph: Graph
    trigger: TriggerConfig
    q_block: np.ndarray
    qm_block: np.ndarray
    r_block: np.ndarray
    horizon: int
    x0: np.ndarray          # rendezvous reference
    dt: float = 0.033
    seed: int = 0
    mode: str = "fixed-horizon"
    epsilon: float = 0.01
    trials: int = 1
    out_dir: str = "out"
    wheel_base: float = 0.105
    wheel_radius: float = 0.016
    omega_max: float = math.pi
    theta0: float = 0.0
    compare_triggers: list = field(default_factory=list)

    @property
    def n_agents(self) -> int:
        return len(self.models)

    def to_dict(self) -> dict:
        """Fully resolved configuration (for --dry-run and summaries)."""
        return {
            "name": self.name,
            "seed": self.seed,
            "mode": self.mode,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "out_dir": self.out_dir,
            "model": {
                "dt": self.dt,
                "agents": [
                    {
                        "A": m.A.tolist(), "B": m.B.tolist(), "C": m.C.tolist(),
                        "W": m.W.tolist(), "V": m.V.tolist(),
                        "x0_mean": m.x0_mean.tolist(), "X0": m.X0.tolist(),
                    }
                    for m in self.models
                ],
            },
            "graph": {"adjacency": self.graph.adjacency.tolist()},
            "trigger": {
                "kind": self.trigger.kind, "alpha": self.trigger.alpha,
                "beta": self.trigger.beta, "gamma": self.trigger.gamma,
                "period": self.trigger.period, "per_axis": self.trigger.per_axis,
                "schedule": self.trigger.schedule,
            },
            "weights": {
                "Q": self.q_block.tolist(), "QM": self.qm_block.tolist(),
                "R": self.r_block.tolist(), "M": self.horizon,
                "x0": self.x0.tolist(),
            },
            "unicycle": {
                "wheel_base": self.wheel_base, "wheel_radius": self.wheel_radius,
                "omega_max": self.omega_max, "theta0": self.theta0,
            },
        }


def scenario_from_dict(data: dict, default_name: str = "scenario") -> Scenario:
    _reject_unknown(data, _TOP_KEYS, "")

    model_cfg = data.get("model", {})
    _reject_unknown(model_cfg, _MODEL_KEYS, "model.")
    dt = float(model_cfg.get("dt", 0.033))
    if dt <= 0:
        raise ConfigError("model.dt must be positive")

    shared = model_cfg.get("shared", {})
    _reject_unknown(shared, _SHARED_KEYS, "model.shared.")
    defaults = {
        "A": np.eye(2),
        "B": dt * np.eye(2),
        "C": np.eye(2),
        "W": 1e-5 * np.eye(2),
        "V": 1e-4 * np.eye(2),
        "X0": np.zeros((2, 2)),
    }
    for key in _SHARED_KEYS:
        if key in shared:
            defaults[key] = expand_matrix(shared[key], f"model.shared.{key}")

    agents_cfg = model_cfg.get("agents")
    if not agents_cfg:
        raise ConfigError("model.agents must list at least one agent (x0_mean required)")
    models = []
    for idx, agent in enumerate(agents_cfg):
        _reject_unknown(agent, _AGENT_KEYS, f"model.agents[{idx}].")
        if "x0_mean" not in agent:
            raise ConfigError(f"model.agents[{idx}].x0_mean is required")
        mats = dict(defaults)
        for key in _SHARED_KEYS:
            if key in agent:
                mats[key] = expand_matrix(agent[key], f"model.agents[{idx}].{key}")
        x0_mean = np.asarray(agent["x0_mean"], dtype=float)
        if x0_mean.shape != (2,):
            raise ConfigError(f"model.agents[{idx}].x0_mean must be a 2-vector")
        models.append(AgentModel(A=mats["A"], B=mats["B"], C=mats["C"],
                                 W=mats["W"], V=mats["V"],
                                 x0_mean=x0_mean, X0=mats["X0"]))
    n = len(models)
    b0 = models[0].B
    for m in models[1:]:
        if not np.array_equal(m.B, b0):
            raise ConfigError("all agents must share the input matrix B "
                              "(the gain synthesis couples it with the graph)")

    graph_cfg = data.get("graph", {})
    _reject_unknown(graph_cfg, _GRAPH_KEYS, "graph.")
    if "adjacency" in graph_cfg:
        adjacency = np.asarray(graph_cfg["adjacency"])
    else:
        adjacency = np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
    if adjacency.shape != (n, n):
        raise ConfigError(
            f"graph.adjacency must be {n}x{n} to match the agent count, got {adjacency.shape}")
    graph = Graph.from_adjacency(adjacency)

    trig_cfg = data.get("trigger", {})
    _reject_unknown(trig_cfg, _TRIGGER_KEYS, "trigger.")
    sched = trig_cfg.get("schedule", [])
    for idx, entry in enumerate(sched):
        _reject_unknown(entry, _TRIGGER_SCHED_KEYS, f"trigger.schedule[{idx}].")
        if "step" not in entry:
            raise ConfigError(f"trigger.schedule[{idx}].step is required")
    trigger = TriggerConfig(
        kind=str(trig_cfg.get("kind", "time")),
        alpha=float(trig_cfg.get("alpha", 0.0)),
        beta=float(trig_cfg.get("beta", 0.0)),
        gamma=float(trig_cfg.get("gamma", 0.0)),
        period=int(trig_cfg.get("period", 1)),
        per_axis=bool(trig_cfg.get("per_axis", True)),
        schedule=sorted(sched, key=lambda e: e["step"]),
    )
    from .scheduler import _ALIASES  # validate the kind name early
    if trigger.kind not in _ALIASES:
        raise ConfigError(f"trigger.kind {trigger.kind!r} is not a known mechanism")
    trigger.kind = _ALIASES[trigger.kind]
    if min(trigger.alpha, trigger.beta, trigger.gamma) < 0 or trigger.period < 1:
        raise ConfigError("trigger thresholds must be >= 0 and period >= 1")

    weights_cfg = data.get("weights", {})
    _reject_unknown(weights_cfg, _WEIGHT_KEYS, "weights.")
    q_block = expand_matrix(weights_cfg.get("Q", 1.0), "weights.Q")
    qm_block = expand_matrix(weights_cfg.get("QM", 1.0), "weights.QM")
    r_block = expand_matrix(weights_cfg.get("R", 0.1), "weights.R")
    horizon = int(weights_cfg.get("M", 300))
    if horizon < 1:
        raise ConfigError("weights.M must be >= 1")
    if "x0" in weights_cfg:
        x0 = np.asarray(weights_cfg["x0"], dtype=float)
        if x0.shape != (2,):
            raise ConfigError("weights.x0 must be a 2-vector")
    else:
        # Centroid of the initial estimate means: the invariant of
        # average-consensus dynamics.
        x0 = np.mean([m.x0_mean for m in models], axis=0)

    uni_cfg = data.get("unicycle", {})
    _reject_unknown(uni_cfg, _UNICYCLE_KEYS, "unicycle.")

    compare_cfg = data.get("compare", {})
    _reject_unknown(compare_cfg, _COMPARE_KEYS, "compare.")
    compare_triggers = []
    for idx, entry in enumerate(compare_cfg.get("triggers", [])):
        _reject_unknown(entry, _COMPARE_TRIGGER_KEYS, f"compare.triggers[{idx}].")
        if "kind" not in entry:
            raise ConfigError(f"compare.triggers[{idx}].kind is required")
        compare_triggers.append(dict(entry))

    mode = str(data.get("mode", "fixed-horizon"))
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    trials = int(data.get("trials", 1))
    if trials < 1:
        raise ConfigError("trials must be >= 1")

    return Scenario(
        name=str(data.get("name", default_name)),
        models=models,
        graph=graph,
        trigger=trigger,
        q_block=q_block,
        qm_block=qm_block,
        r_block=r_block,
        horizon=horizon,
        x0=x0,
        dt=dt,
        seed=int(data.get("seed", 0)),
        mode=mode,
        epsilon=float(data.get("epsilon", 0.01)),
        trials=trials,
        out_dir=str(data.get("out_dir", "out")),
        wheel_base=float(uni_cfg.get("wheel_base", 0.105)),
        wheel_radius=float(uni_cfg.get("wheel_radius", 0.016)),
        omega_max=float(uni_cfg.get("omega_max", math.pi)),
        theta0=float(uni_cfg.get("theta0", 0.0)),
        compare_triggers=compare_triggers,
    )


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file. Bare names resolve against the
    scenarios bundled with the package."""
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).parent / "scenarios" / f"{path}.toml"
        if bundled.exists():
            p = bundled
        else:
            raise ConfigError(f"scenario file not found: {path}")
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scenario file {p} is not valid TOML: {exc}") from exc
    return scenario_from_dict(data, default_name=p.stem)
