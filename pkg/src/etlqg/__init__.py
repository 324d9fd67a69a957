"""Event-triggered distributed LQG rendezvous for planar robot teams.

A seed-reproducible simulator and library: per-agent Kalman filtering
under localization noise, five event-triggered broadcast mechanisms, a
backward-Riccati consensus gain synthesis over the communication graph,
performance/transmission metrics, and a certified mean-square stability
bound on the disagreement.
"""

from .controller import (CostWeights, GainSchedule, LqgNoiseTerms,
                         consensus_input, disagreement_basis,
                         performance_index, predicted_cost, riccati_backward)
from .errors import ConfigError, NumericalError
from .estimator import (KalmanState, covariance_sequence, initial_state,
                        innovation, predict, update)
from .model import (AgentModel, Graph, NoiseSource, UnicyclePose,
                    laplacian_from_adjacency, measure, psd_factor,
                    sample_gaussian, step_dynamics, unicycle_wheel_speeds,
                    wrap_angle)
from .network import RegisterBank, publish, rates_from_ledger, read_neighbors
from .scenario import Scenario, TriggerConfig, load_scenario, scenario_from_dict
from .scheduler import (TransmissionLog, TriggerPolicy, broadcast_register,
                        make_policy, transmission_rate)
from .sim import (MonteCarloSummary, SimTrace, StabilityReport, build_stack,
                  compare_triggers, make_schedule, replay, run_monte_carlo,
                  run_scenario, stability_bound, sweep_parameter)

__version__ = "0.1.0"
