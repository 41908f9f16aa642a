"""The RRH on/off control environment.

One step: apply the chosen flip (or no-op) to the on/off pattern, obtain the
minimal transmit power needed to serve the current demands (from the exact
solver or the boosted-tree surrogate), account the full system power, emit
the reward P_UB - P_total, and resample demands for the next slot. An
unservable demand profile ends the episode with a large negative reward.

Both reward sources share the exact standby/transition accounting; they can
only differ in the transmit term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gbdt
from .beamform import (
    BeamformingProblem,
    SolverParams,
    sinr_targets,
    solve_beamforming,
)
from .netmodel import (
    ChannelRealization,
    NetworkConfig,
    PowerBreakdown,
    SystemState,
    sample_demands,
    state_and_transition_power,
)


def apply_action(pattern, action: int) -> np.ndarray:
    """Flip RRH `action`, or leave the pattern alone when action == m."""
    pattern = np.asarray(pattern, dtype=bool)
    if not 0 <= action <= pattern.size:
        raise ValueError(f"action {action} out of range [0, {pattern.size}]")
    out = pattern.copy()
    if action < pattern.size:
        out[action] = ~out[action]
    return out


def p_upper_bound(config: NetworkConfig) -> float:
    """Loosest single-slot system power: every RRH active, at full transmit
    power, and switching mode."""
    return config.num_rrhs * (
        config.active_power_w
        + config.max_tx_power_w / config.amplifier_efficiency
        + config.transition_power_w
    )


def encode_state(state: SystemState, config: NetworkConfig) -> np.ndarray:
    """Network input features: on/off bits as 0/1, demands scaled to [0, 1]."""
    scale = config.demand_max_mbps if config.demand_max_mbps > 0 else 1.0
    return np.concatenate([state.rrh_active.astype(float),
                           state.demands_mbps / scale])


class ExactSolverReward:
    """Transmit power from the exact beamforming solver."""

    def __init__(self, config: NetworkConfig, channel: ChannelRealization,
                 solver_params: SolverParams = SolverParams()):
        self.config = config
        self.channel = channel
        self.solver_params = solver_params

    def transmit_power(self, pattern, demands_mbps):
        """Returns (minimal transmit power in W, feasible flag)."""
        iota, _ = sinr_targets(demands_mbps, self.config)
        if not np.any(pattern):
            return (0.0, True) if not np.any(iota > 0) else (0.0, False)
        problem = BeamformingProblem.from_state(self.channel, pattern, iota,
                                                self.config)
        solution = solve_beamforming(problem, self.solver_params)
        if not solution.feasible:
            return 0.0, False
        return solution.total_tx_w, True


class SurrogateReward:
    """Transmit power from the boosted-tree model; a companion model trained
    on solver feasibility labels gates the infeasibility penalty."""

    def __init__(self, model: gbdt.GbdtModel, feasibility_model: gbdt.GbdtModel,
                 threshold: float = 0.5):
        self.model = model
        self.feasibility_model = feasibility_model
        self.threshold = threshold

    def transmit_power(self, pattern, demands_mbps):
        features = np.concatenate([np.asarray(pattern, dtype=float),
                                   np.asarray(demands_mbps, dtype=float)])
        score = gbdt.predict(self.feasibility_model, features)
        if score < self.threshold:
            return 0.0, False
        # Leaf averages can dip below zero where targets do not support them.
        return max(0.0, gbdt.predict(self.model, features)), True


@dataclass
class StepResult:
    next_state: SystemState
    reward: float
    power: PowerBreakdown
    feasible: bool
    terminal: bool


class Environment:
    """Single-threaded slot-by-slot simulation of the controlled cell."""

    def __init__(self, config: NetworkConfig, channel: ChannelRealization,
                 reward_source, rng: np.random.Generator,
                 episode_length: int | None = None,
                 infeasibility_penalty: float | None = None):
        if channel.gains.shape != (config.num_rrhs, config.num_users):
            raise ValueError("channel dimensions do not match the config")
        self.config = config
        self.channel = channel
        self.reward_source = reward_source
        self.rng = rng
        self.episode_length = episode_length
        self.p_upper_bound_w = p_upper_bound(config)
        self.infeasibility_penalty = (
            -self.p_upper_bound_w if infeasibility_penalty is None
            else infeasibility_penalty)
        self.slot_counter = 0
        self.current = None

    def reset(self, initial_pattern=None) -> SystemState:
        """Start an episode: set the pattern, draw fresh demands, zero the
        slot counter."""
        if initial_pattern is None:
            pattern = np.ones(self.config.num_rrhs, dtype=bool)
        else:
            pattern = np.asarray(initial_pattern, dtype=bool).copy()
            if pattern.size != self.config.num_rrhs:
                raise ValueError("initial pattern length must equal num_rrhs")
        self.current = SystemState(rrh_active=pattern,
                                   demands_mbps=sample_demands(self.config, self.rng))
        self.slot_counter = 0
        return self.current

    def force_pattern(self, pattern):
        """Override the pattern without consuming demand draws (recovery after
        an infeasible slot in a continuous run)."""
        pattern = np.asarray(pattern, dtype=bool).copy()
        if pattern.size != self.config.num_rrhs:
            raise ValueError("pattern length must equal num_rrhs")
        self.current = SystemState(rrh_active=pattern,
                                   demands_mbps=self.current.demands_mbps)

    def step(self, action: int) -> StepResult:
        if self.current is None:
            raise RuntimeError("environment must be reset before stepping")
        prev_pattern = self.current.rrh_active
        demands = self.current.demands_mbps
        next_pattern = apply_action(prev_pattern, action)

        tx_w, feasible = self.reward_source.transmit_power(next_pattern, demands)
        state_w, transition_w = state_and_transition_power(
            prev_pattern, next_pattern, self.config)
        if feasible:
            transmit_w = tx_w / self.config.amplifier_efficiency
            total_w = transmit_w + state_w + transition_w
            reward = self.p_upper_bound_w - total_w
        else:
            transmit_w = 0.0
            total_w = transmit_w + state_w + transition_w
            reward = self.infeasibility_penalty
        power = PowerBreakdown(transmit_w=transmit_w, state_w=state_w,
                               transition_w=transition_w, total_w=total_w)

        self.slot_counter += 1
        terminal = not feasible
        if self.episode_length is not None and self.slot_counter >= self.episode_length:
            terminal = True
        next_state = SystemState(
            rrh_active=next_pattern,
            demands_mbps=sample_demands(self.config, self.rng))
        self.current = next_state
        return StepResult(next_state=next_state, reward=reward, power=power,
                          feasible=feasible, terminal=terminal)
