"""Orchestration of the whole workbench: dataset generation through the
exact solver, offline training of the boosted-tree surrogate and the DQN,
online greedy evaluation with regular tuning, the all-on / one-closed
baselines, the timing benchmark, and the paired error-tolerance comparison.

Every command is a pure function of (config, seeds): rerunning it with the
same inputs reproduces every non-timing output byte for byte. Randomness is
split into three named seeds (data / train / eval), and derived streams are
spawned per purpose so the evaluation demand stream never depends on what
the policy does.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gbdt
from .beamform import SolverFailure, SolverParams
from .dqn import (
    DqnParams,
    QNetwork,
    ReplayBuffer,
    Transition,
    load_checkpoint,
    save_checkpoint,
    select_action,
    sync_target,
    train_step,
)
from .env import (
    Environment,
    ExactSolverReward,
    SurrogateReward,
    encode_state,
    p_upper_bound,
)
from .netmodel import (
    ChannelRealization,
    ConfigError,
    NetworkConfig,
    sample_channel,
    sample_demands,
)

SCHEME_DQN_GBDT = "DQN-GBDT"
SCHEME_DQN_SOCP = "DQN-SOCP"
SCHEME_AO = "AO"
SCHEME_OC = "OC"
DQN_SCHEMES = (SCHEME_DQN_GBDT, SCHEME_DQN_SOCP)
ALL_SCHEMES = DQN_SCHEMES + (SCHEME_AO, SCHEME_OC)

PATTERN_RANDOM = "random"
PATTERN_ALL_ON = "all-on"
PATTERN_ONE_OFF = "one-off"

# Sub-stream ids hung off the named seeds; never reuse one for a new purpose.
_STREAM_DATASET = 0
_STREAM_SCATTER_ALL_ON = 1
_STREAM_SCATTER_ONE_OFF = 2
_STREAM_SCATTER_RANDOM = 3
_STREAM_TRAIN_NET = 0
_STREAM_TRAIN_ENV = 1
_STREAM_TRAIN_ACTIONS = 2
_STREAM_TRAIN_BUFFER = 3
_STREAM_TRAIN_CHANNELS = 4
_STREAM_EVAL_DEMANDS = 0
_STREAM_EVAL_TUNING = 1
_STREAM_EVAL_OC_PICK = 2
_STREAM_EVAL_BENCH = 3


@dataclass(frozen=True)
class Seeds:
    data: int = 1
    train: int = 2
    eval: int = 3


@dataclass
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    gbdt: gbdt.GbdtParams = field(default_factory=gbdt.GbdtParams)
    dqn: DqnParams = field(default_factory=DqnParams)
    solver: SolverParams = field(default_factory=SolverParams)
    dataset_size: int = 10_000
    eval_slots: int = 5_000
    seeds: Seeds = field(default_factory=Seeds)
    scheme: str = SCHEME_DQN_GBDT
    offline_episodes: int = 400
    holdout_fraction: float = 0.2
    r2_floor: float = 0.0
    initial_pattern_mode: str = PATTERN_ALL_ON
    train_initial_pattern_mode: str = PATTERN_RANDOM
    online_tuning: bool = True
    fit_scatter_rows: int = 500
    redraw_channel: bool = False

    def __post_init__(self):
        if self.dataset_size < 1:
            raise ConfigError("dataset_size", "must be >= 1")
        if self.eval_slots < 0:
            raise ConfigError("eval_slots", "must be >= 0")
        if self.scheme not in ALL_SCHEMES:
            raise ConfigError("scheme", f"must be one of {ALL_SCHEMES}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction", "must be in (0, 1)")
        if self.offline_episodes < 1:
            raise ConfigError("offline_episodes", "must be >= 1")
        if self.initial_pattern_mode not in (PATTERN_ALL_ON, PATTERN_ONE_OFF):
            raise ConfigError("initial_pattern_mode",
                              f"must be '{PATTERN_ALL_ON}' or '{PATTERN_ONE_OFF}'")
        if self.train_initial_pattern_mode not in (PATTERN_ALL_ON, PATTERN_ONE_OFF,
                                                   PATTERN_RANDOM):
            raise ConfigError("train_initial_pattern_mode", "unknown mode")
        if self.fit_scatter_rows < 0:
            raise ConfigError("fit_scatter_rows", "must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        values = {}
        for key, val in raw.items():
            if key not in known:
                raise ConfigError(key, "unknown key")
            if key == "network":
                values[key] = NetworkConfig.from_dict(val)
            elif key == "gbdt":
                values[key] = _params_from_dict(gbdt.GbdtParams, val, "gbdt")
            elif key == "dqn":
                values[key] = _params_from_dict(DqnParams, val, "dqn")
            elif key == "solver":
                values[key] = _params_from_dict(SolverParams, val, "solver")
            elif key == "seeds":
                values[key] = _params_from_dict(Seeds, val, "seeds")
            else:
                values[key] = val
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _params_from_dict(cls, raw, section):
    known = set(cls.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown key")
    try:
        return cls(**raw)
    except ValueError as err:
        raise ConfigError(section, str(err)) from err


def make_channel(config: RunConfig) -> ChannelRealization:
    """The run's fixed channel realization, derived from the data seed so
    every command reconstructs the identical channel."""
    return sample_channel(config.network, np.random.default_rng(config.seeds.data))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

@dataclass
class DatasetRows:
    """Raw solver-labelled rows; infeasible rows keep the flag but carry no
    regression target."""

    features: np.ndarray      # (count, m+n) in state order [y_1..y_m, d_1..d_n]
    tx_power_w: np.ndarray    # nan where infeasible
    feasible: np.ndarray      # bool
    solver_failures: int = 0

    def __len__(self):
        return self.features.shape[0]

    def regression_view(self) -> gbdt.RegressionDataset:
        rows = self.feasible
        return gbdt.RegressionDataset(self.features[rows], self.tx_power_w[rows])

    def feasibility_view(self) -> gbdt.RegressionDataset:
        return gbdt.RegressionDataset(self.features, self.feasible.astype(float))


def _sample_pattern(m: int, mode: str, rng: np.random.Generator) -> np.ndarray:
    if mode == PATTERN_ALL_ON:
        return np.ones(m, dtype=bool)
    if mode == PATTERN_ONE_OFF:
        pattern = np.ones(m, dtype=bool)
        pattern[int(rng.integers(m))] = False
        return pattern
    # Uniform over the 2^m - 1 non-empty active sets.
    bits = int(rng.integers(1, 2 ** m))
    return np.array([(bits >> i) & 1 for i in range(m)], dtype=bool)


def gen_dataset(config: RunConfig, count: int | None = None,
                pattern_mode: str = PATTERN_RANDOM,
                stream: int = _STREAM_DATASET) -> DatasetRows:
    """Label `count` random (pattern, demands) states with the exact solver.

    Rows on which the solver breaks down numerically are skipped (and
    counted); the returned row count is always exactly `count`.
    """
    count = config.dataset_size if count is None else count
    network = config.network
    channel = make_channel(config)
    rng = np.random.default_rng([config.seeds.data, stream])
    source = ExactSolverReward(network, channel, config.solver)

    m, n = network.num_rrhs, network.num_users
    features = np.empty((count, m + n))
    tx_power = np.empty(count)
    feasible = np.empty(count, dtype=bool)
    failures = 0
    row = 0
    while row < count:
        pattern = _sample_pattern(m, pattern_mode, rng)
        demands = sample_demands(network, rng)
        try:
            tx, ok = source.transmit_power(pattern, demands)
        except SolverFailure:
            failures += 1
            continue
        features[row, :m] = pattern
        features[row, m:] = demands
        tx_power[row] = tx if ok else np.nan
        feasible[row] = ok
        row += 1
    return DatasetRows(features=features, tx_power_w=tx_power,
                       feasible=feasible, solver_failures=failures)


def dataset_header(m: int, n: int):
    return ([f"y_{i + 1}" for i in range(m)] + [f"d_{j + 1}" for j in range(n)]
            + ["p_tx_w", "feasible"])


def write_dataset_csv(rows: DatasetRows, path, config: RunConfig):
    m, n = config.network.num_rrhs, config.network.num_users
    header = dataset_header(m, n)
    out = []
    for i in range(len(rows)):
        rec = [int(v) for v in rows.features[i, :m]]
        rec += list(rows.features[i, m:])
        rec.append(rows.tx_power_w[i])
        rec.append(bool(rows.feasible[i]))
        out.append(rec)
    _write_csv(path, header, out)


def read_dataset_csv(path, config: RunConfig) -> DatasetRows:
    m, n = config.network.num_rrhs, config.network.num_users
    expected = dataset_header(m, n)
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header != expected:
            raise ValueError(f"dataset header mismatch in {path}")
        raw = np.loadtxt(f, delimiter=",", ndmin=2)
    if raw.size == 0:
        raw = raw.reshape(0, m + n + 2)
    return DatasetRows(features=raw[:, :m + n], tx_power_w=raw[:, m + n],
                       feasible=raw[:, m + n + 1] > 0.5)


# ---------------------------------------------------------------------------
# Offline training
# ---------------------------------------------------------------------------

GBDT_MODEL_FILE = "gbdt_model.json"
FEASIBILITY_MODEL_FILE = "feasibility_model.json"
QNET_FILE = "qnet.ckpt"
REPLAY_FILE = "replay.ckpt"
TRAIN_LOG_FILE = "train_log.csv"
SUMMARY_FILE = "summary.json"
FIT_SCATTER_FILE = "fit_scatter.csv"


@dataclass
class Artifacts:
    gbdt_model: gbdt.GbdtModel
    feasibility_model: gbdt.GbdtModel
    qnet: QNetwork
    replay: ReplayBuffer

    def save(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        gbdt.save_model(self.gbdt_model, out_dir / GBDT_MODEL_FILE)
        gbdt.save_model(self.feasibility_model, out_dir / FEASIBILITY_MODEL_FILE)
        save_checkpoint(self.qnet, out_dir / QNET_FILE)
        self.replay.save(out_dir / REPLAY_FILE)

    @classmethod
    def load(cls, out_dir) -> "Artifacts":
        out_dir = Path(out_dir)
        return cls(
            gbdt_model=gbdt.load_model(out_dir / GBDT_MODEL_FILE),
            feasibility_model=gbdt.load_model(out_dir / FEASIBILITY_MODEL_FILE),
            qnet=load_checkpoint(out_dir / QNET_FILE),
            replay=ReplayBuffer.load(out_dir / REPLAY_FILE),
        )


def _split_holdout(num_rows: int, fraction: float, rng: np.random.Generator):
    perm = rng.permutation(num_rows)
    cut = max(1, int(round(num_rows * fraction)))
    return perm[cut:], perm[:cut]


def _initial_pattern(config: RunConfig, rng: np.random.Generator) -> np.ndarray:
    m = config.network.num_rrhs
    pattern = np.ones(m, dtype=bool)
    if config.initial_pattern_mode == PATTERN_ONE_OFF:
        pattern[int(rng.integers(m))] = False
    return pattern


def train_offline(config: RunConfig, out_dir=None,
                  dataset: DatasetRows | None = None):
    """Fit the surrogate pair and pre-train the DQN with exact-solver rewards.

    Returns (artifacts, summary). When `out_dir` is given, also persists the
    models, the Q-network checkpoint, the replay memory, the training log,
    and the fit-quality plot data.
    """
    if dataset is None:
        dataset = gen_dataset(config)
    m, n = config.network.num_rrhs, config.network.num_users
    if dataset.features.shape[1] != m + n:
        raise ValueError("dataset width does not match the configured cell")

    # --- surrogate pair -----------------------------------------------------
    t0 = time.perf_counter()
    regression = dataset.regression_view()
    split_rng = np.random.default_rng([config.seeds.train, 100])
    fit_rows, holdout_rows = _split_holdout(len(regression), config.holdout_fraction,
                                            split_rng)
    fit_set = gbdt.RegressionDataset(regression.features[fit_rows],
                                     regression.targets[fit_rows])
    holdout_set = gbdt.RegressionDataset(regression.features[holdout_rows],
                                         regression.targets[holdout_rows])
    model = gbdt.train(fit_set, config.gbdt)
    holdout_scores = gbdt.evaluate(model, holdout_set)
    if holdout_scores["r2"] < config.r2_floor:
        raise RuntimeError(
            f"held-out R^2 {holdout_scores['r2']:.4f} below the configured "
            f"floor {config.r2_floor}")

    flags = dataset.feasibility_view()
    flag_fit_rows, flag_holdout_rows = _split_holdout(
        len(flags), config.holdout_fraction,
        np.random.default_rng([config.seeds.train, 101]))
    flag_model = gbdt.train(
        gbdt.RegressionDataset(flags.features[flag_fit_rows],
                               flags.targets[flag_fit_rows]),
        config.gbdt)
    flag_preds = gbdt.predict_batch(flag_model, flags.features[flag_holdout_rows])
    flag_accuracy = float(np.mean(
        (flag_preds >= 0.5) == (flags.targets[flag_holdout_rows] >= 0.5)))
    gbdt_seconds = time.perf_counter() - t0

    # --- DQN pre-training with exact rewards (the offline branch) -----------
    t0 = time.perf_counter()
    params = config.dqn
    rng_net = np.random.default_rng([config.seeds.train, _STREAM_TRAIN_NET])
    rng_env = np.random.default_rng([config.seeds.train, _STREAM_TRAIN_ENV])
    rng_actions = np.random.default_rng([config.seeds.train, _STREAM_TRAIN_ACTIONS])
    rng_buffer = np.random.default_rng([config.seeds.train, _STREAM_TRAIN_BUFFER])
    rng_channels = np.random.default_rng([config.seeds.train, _STREAM_TRAIN_CHANNELS])

    fixed_channel = make_channel(config)
    net = QNetwork.initialize([m + n] + list(params.hidden_sizes) + [m + 1], rng_net)
    target = sync_target(net)
    buffer = ReplayBuffer(params.buffer_capacity)
    log_rows = []
    global_step = 0
    last_loss = math.nan
    last_return = math.nan

    for _ in range(config.offline_episodes):
        channel = (sample_channel(config.network, rng_channels)
                   if config.redraw_channel else fixed_channel)
        env = Environment(config.network, channel,
                          ExactSolverReward(config.network, channel, config.solver),
                          rng_env, episode_length=params.episode_length)
        state = env.reset(_sample_pattern(m, config.train_initial_pattern_mode,
                                          rng_env))
        episode_return = 0.0
        while True:
            epsilon = params.epsilon_at(global_step)
            features = encode_state(state, config.network)
            action = select_action(net, features, epsilon, rng_actions)
            result = env.step(action)
            buffer.push(Transition(features, action, result.reward,
                                   encode_state(result.next_state, config.network),
                                   result.terminal))
            episode_return += result.reward
            global_step += 1
            if (len(buffer) >= params.batch_size
                    and global_step % params.train_interval == 0):
                batch = buffer.sample(params.batch_size, rng_buffer)
                last_loss = train_step(net, target, batch, params.gamma,
                                       params.learning_rate)
                log_rows.append((global_step, last_loss, epsilon, last_return))
            if global_step % params.target_sync_interval == 0:
                target = sync_target(net)
            if result.terminal:
                break
            state = result.next_state
        last_return = episode_return
    dqn_seconds = time.perf_counter() - t0

    artifacts = Artifacts(gbdt_model=model, feasibility_model=flag_model,
                          qnet=net, replay=buffer)
    summary = {
        "dataset_rows": len(dataset),
        "dataset_feasible_rows": int(np.count_nonzero(dataset.feasible)),
        "solver_failures": dataset.solver_failures,
        "gbdt": {
            "rounds": len(model.trees),
            "train_mse_final": model.train_mse[-1],
            "holdout_mse": holdout_scores["mse"],
            "holdout_r2": holdout_scores["r2"],
        },
        "feasibility_model": {"holdout_accuracy": flag_accuracy},
        "dqn": {
            "episodes": config.offline_episodes,
            "steps": global_step,
            "final_loss": last_loss,
            "final_epsilon": params.epsilon_at(global_step),
            "final_episode_return": last_return,
            "buffer_occupancy": len(buffer),
        },
    }
    timing = {"gbdt_fit_s": gbdt_seconds, "dqn_train_s": dqn_seconds}

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        artifacts.save(out_dir)
        _write_csv(out_dir / TRAIN_LOG_FILE,
                   ["step", "loss", "epsilon", "episode_return"], log_rows)
        with open(out_dir / SUMMARY_FILE, "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
        if config.fit_scatter_rows > 0:
            _write_fit_scatter(config, artifacts, out_dir / FIT_SCATTER_FILE)
        with open(out_dir / "train_timing.json", "w") as f:
            json.dump(timing, f, indent=2, sort_keys=True)
            f.write("\n")
    summary["timing"] = timing
    return artifacts, summary


def _write_fit_scatter(config: RunConfig, artifacts: Artifacts, path):
    """Solver truth vs surrogate prediction under three pattern regimes."""
    regimes = [
        (PATTERN_ALL_ON, _STREAM_SCATTER_ALL_ON),
        (PATTERN_ONE_OFF, _STREAM_SCATTER_ONE_OFF),
        (PATTERN_RANDOM, _STREAM_SCATTER_RANDOM),
    ]
    rows = []
    for mode, stream in regimes:
        data = gen_dataset(config, count=config.fit_scatter_rows, pattern_mode=mode,
                           stream=stream)
        preds = gbdt.predict_batch(artifacts.gbdt_model, data.features)
        for i in range(len(data)):
            rows.append((mode, data.tx_power_w[i], preds[i],
                         bool(data.feasible[i])))
    _write_csv(path, ["regime", "p_true_w", "p_pred_w", "feasible"], rows)


# ---------------------------------------------------------------------------
# Online evaluation and baselines
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    scheme: str
    instant_w: np.ndarray
    running_avg_w: np.ndarray
    actions: np.ndarray
    feasible: np.ndarray
    trajectory: list
    infeasible_count: int
    timing: dict

    @property
    def average_power_w(self) -> float:
        return float(self.running_avg_w[-1]) if len(self.running_avg_w) else math.nan

    def to_csv(self, path):
        rows = [(k, self.instant_w[k], self.running_avg_w[k],
                 int(self.actions[k]), bool(self.feasible[k]))
                for k in range(len(self.instant_w))]
        _write_csv(path, ["slot", "instant_w", "running_avg_w", "action",
                          "feasible"], rows)

    def trajectory_to_csv(self, path, num_users: int):
        header = (["slot", "action", "pattern"]
                  + [f"d_{j + 1}" for j in range(num_users)]
                  + ["transmit_w", "state_w", "transition_w", "total_w",
                     "reward", "feasible"])
        _write_csv(path, header, self.trajectory)


def _finalize_report(scheme, instants, actions, feasibles, trajectory, t_start):
    instants = np.asarray(instants, dtype=float)
    running = (np.cumsum(instants) / np.arange(1, len(instants) + 1)
               if len(instants) else np.zeros(0))
    wall = time.perf_counter() - t_start
    timing = {
        "wall_s": wall,
        "s_per_slot": wall / len(instants) if len(instants) else math.nan,
    }
    return EvalReport(
        scheme=scheme,
        instant_w=instants,
        running_avg_w=running,
        actions=np.asarray(actions, dtype=int),
        feasible=np.asarray(feasibles, dtype=bool),
        trajectory=trajectory,
        infeasible_count=int(np.count_nonzero(~np.asarray(feasibles, dtype=bool)))
        if len(feasibles) else 0,
        timing=timing,
    )


def _reward_source_for(scheme: str, config: RunConfig, channel, artifacts):
    if scheme == SCHEME_DQN_GBDT:
        if artifacts is None:
            raise ValueError("scheme DQN-GBDT needs trained artifacts")
        return SurrogateReward(artifacts.gbdt_model, artifacts.feasibility_model)
    return ExactSolverReward(config.network, channel, config.solver)


def run_online(config: RunConfig, artifacts: Artifacts, slots: int,
               scheme: str | None = None, tuning: bool | None = None) -> EvalReport:
    """Greedy online control for `slots` slots with regular tuning.

    The reward source follows the scheme, but the reported instant power is
    always ground truth: the exact solver is re-run on the realized
    (pattern, demands) of every slot, and unserved slots are charged the
    upper bound.
    """
    scheme = config.scheme if scheme is None else scheme
    if scheme not in DQN_SCHEMES:
        raise ValueError(f"run_online drives DQN schemes, not '{scheme}'")
    tuning = config.online_tuning if tuning is None else tuning
    t_start = time.perf_counter()

    network = config.network
    m, n = network.num_rrhs, network.num_users
    channel = make_channel(config)
    env_rng = np.random.default_rng([config.seeds.eval, _STREAM_EVAL_DEMANDS])
    tune_rng = np.random.default_rng([config.seeds.eval, _STREAM_EVAL_TUNING])
    pick_rng = np.random.default_rng([config.seeds.eval, _STREAM_EVAL_OC_PICK])

    source = _reward_source_for(scheme, config, channel, artifacts)
    truth = (source if isinstance(source, ExactSolverReward)
             else ExactSolverReward(network, channel, config.solver))
    env = Environment(network, channel, source, env_rng, episode_length=None)
    state = env.reset(_initial_pattern(config, pick_rng))

    net = artifacts.qnet.copy()
    target = sync_target(net)
    buffer = ReplayBuffer(config.dqn.buffer_capacity)
    for tr in artifacts.replay.contents():
        buffer.push(tr)
    params = config.dqn
    p_ub = p_upper_bound(network)
    all_on = np.ones(m, dtype=bool)

    instants, actions, feasibles, trajectory = [], [], [], []
    for slot in range(slots):
        features = encode_state(state, network)
        action = select_action(net, features, 0.0, tune_rng)
        demands_served = state.demands_mbps.copy()
        result = env.step(action)
        next_pattern = result.next_state.rrh_active

        if scheme == SCHEME_DQN_GBDT:
            true_tx, true_ok = truth.transmit_power(next_pattern, demands_served)
            served = result.feasible and true_ok
            if served:
                instant = (result.power.state_w + result.power.transition_w
                           + true_tx / network.amplifier_efficiency)
            else:
                instant = p_ub
        else:
            served = result.feasible
            instant = result.power.total_w if served else p_ub

        instants.append(instant)
        actions.append(action)
        feasibles.append(served)
        trajectory.append(
            (slot, action, "".join("1" if b else "0" for b in next_pattern))
            + tuple(demands_served)
            + (result.power.transmit_w, result.power.state_w,
               result.power.transition_w, result.power.total_w,
               result.reward, bool(result.feasible)))

        buffer.push(Transition(features, action, result.reward,
                               encode_state(result.next_state, network),
                               result.terminal))
        if tuning and len(buffer) >= params.batch_size \
                and (slot + 1) % params.train_interval == 0:
            train_step(net, target, buffer.sample(params.batch_size, tune_rng),
                       params.gamma, params.learning_rate)
            if (slot + 1) % params.target_sync_interval == 0:
                target = sync_target(net)
        if result.terminal:
            # The controller believes the demands are unservable: recover by
            # waking everything up, without consuming extra demand draws.
            env.force_pattern(all_on)
        state = env.current
    return _finalize_report(scheme, instants, actions, feasibles, trajectory,
                            t_start)


def run_baseline(config: RunConfig, scheme: str, slots: int) -> EvalReport:
    """All-on (AO) or one-closed (OC) reference runs on the exact solver.

    OC picks its sleeper uniformly from the eval seed and pays one transition
    at slot 0; infeasible slots are charged the upper bound so both baselines
    stay comparable on the same demand stream.
    """
    if scheme not in (SCHEME_AO, SCHEME_OC):
        raise ValueError(f"run_baseline drives AO/OC, not '{scheme}'")
    t_start = time.perf_counter()
    network = config.network
    m = network.num_rrhs
    channel = make_channel(config)
    env_rng = np.random.default_rng([config.seeds.eval, _STREAM_EVAL_DEMANDS])
    pick_rng = np.random.default_rng([config.seeds.eval, _STREAM_EVAL_OC_PICK])
    env = Environment(network, channel,
                      ExactSolverReward(network, channel, config.solver),
                      env_rng, episode_length=None)
    state = env.reset(np.ones(m, dtype=bool))
    sleeper = int(pick_rng.integers(m)) if scheme == SCHEME_OC else None
    p_ub = p_upper_bound(network)

    instants, actions, feasibles, trajectory = [], [], [], []
    for slot in range(slots):
        action = sleeper if (scheme == SCHEME_OC and slot == 0) else m
        demands_served = state.demands_mbps.copy()
        result = env.step(action)
        served = result.feasible
        instant = result.power.total_w if served else p_ub
        instants.append(instant)
        actions.append(action)
        feasibles.append(served)
        trajectory.append(
            (slot, action,
             "".join("1" if b else "0" for b in result.next_state.rrh_active))
            + tuple(demands_served)
            + (result.power.transmit_w, result.power.state_w,
               result.power.transition_w, result.power.total_w,
               result.reward, bool(result.feasible)))
        state = env.current
    return _finalize_report(scheme, instants, actions, feasibles, trajectory,
                            t_start)


# ---------------------------------------------------------------------------
# Timing benchmark and error-tolerance comparison
# ---------------------------------------------------------------------------

def bench_timing(config: RunConfig, artifacts: Artifacts, inputs: int = 1000,
                 repeats: int = 3) -> dict:
    """Average per-input wall-clock of surrogate prediction vs exact solving
    over `inputs` random states, measured `repeats` times."""
    network = config.network
    m, n = network.num_rrhs, network.num_users
    channel = make_channel(config)
    rng = np.random.default_rng([config.seeds.eval, _STREAM_EVAL_BENCH])
    states = np.empty((inputs, m + n))
    for i in range(inputs):
        states[i, :m] = _sample_pattern(m, PATTERN_RANDOM, rng)
        states[i, m:] = sample_demands(network, rng)

    model = artifacts.gbdt_model
    solver = ExactSolverReward(network, channel, config.solver)

    gbdt_times, solver_times = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for i in range(inputs):
            gbdt.predict(model, states[i])
        gbdt_times.append((time.perf_counter() - t0) / inputs)
        t0 = time.perf_counter()
        for i in range(inputs):
            solver.transmit_power(states[i, :m] > 0.5, states[i, m:])
        solver_times.append((time.perf_counter() - t0) / inputs)

    gbdt_mean = float(np.mean(gbdt_times))
    solver_mean = float(np.mean(solver_times))
    return {
        "num_rrhs": m,
        "num_users": n,
        "inputs": inputs,
        "repeats": repeats,
        "gbdt_s_per_input": gbdt_mean,
        "socp_s_per_input": solver_mean,
        "speedup": solver_mean / gbdt_mean,
        "gbdt_s_spread": [float(min(gbdt_times)), float(max(gbdt_times))],
        "socp_s_spread": [float(min(solver_times)), float(max(solver_times))],
    }


def write_timing_csv(rows, path):
    header = ["num_rrhs", "num_users", "gbdt_s_per_input", "socp_s_per_input",
              "speedup"]
    _write_csv(path, header,
               [(r["num_rrhs"], r["num_users"], r["gbdt_s_per_input"],
                 r["socp_s_per_input"], r["speedup"]) for r in rows])


@dataclass
class EteReport:
    report_a: EvalReport
    report_b: EvalReport
    average_gap_rel: float
    action_agreement: float

    def to_csv(self, path):
        a, b = self.report_a, self.report_b
        rows = [(k, a.instant_w[k], b.instant_w[k],
                 a.instant_w[k] - b.instant_w[k],
                 int(a.actions[k]), int(b.actions[k]),
                 bool(a.actions[k] == b.actions[k]))
                for k in range(len(a.instant_w))]
        _write_csv(path, ["slot", f"p_{a.scheme.lower()}_w",
                          f"p_{b.scheme.lower()}_w", "gap_w",
                          f"action_{a.scheme.lower()}",
                          f"action_{b.scheme.lower()}", "agree"], rows)


def ete_compare(config: RunConfig, artifacts: Artifacts, slots: int,
                schemes=(SCHEME_DQN_GBDT, SCHEME_DQN_SOCP)) -> EteReport:
    """Paired evaluation of two reward sources on identical seeds and demand
    streams; reports the relative average-power gap and the per-slot action
    agreement rate."""
    report_a = run_online(config, artifacts, slots, scheme=schemes[0])
    report_b = run_online(config, artifacts, slots, scheme=schemes[1])
    if slots > 0:
        ref = report_b.average_power_w
        gap = abs(report_a.average_power_w - ref) / ref
        agreement = float(np.mean(report_a.actions == report_b.actions))
    else:
        gap = 0.0
        agreement = 1.0
    return EteReport(report_a=report_a, report_b=report_b,
                     average_gap_rel=gap, action_agreement=agreement)


def demand_sweep(config: RunConfig, artifacts, slots: int, demand_maxes,
                 scheme: str) -> list:
    """Average power at several demand ceilings (the demand-sweep figure)."""
    rows = []
    for dmax in demand_maxes:
        swept = RunConfig(**{**_as_shallow_dict(config),
                             "network": _network_with_dmax(config.network, dmax)})
        if scheme in DQN_SCHEMES:
            report = run_online(swept, artifacts, slots, scheme=scheme)
        else:
            report = run_baseline(swept, scheme, slots)
        rows.append((dmax, scheme, report.average_power_w,
                     report.infeasible_count))
    return rows


def _as_shallow_dict(config: RunConfig) -> dict:
    return {name: getattr(config, name) for name in RunConfig.__dataclass_fields__}


def _network_with_dmax(network: NetworkConfig, dmax: float) -> NetworkConfig:
    raw = {name: getattr(network, name) for name in NetworkConfig.__dataclass_fields__}
    raw["demand_max_mbps"] = float(dmax)
    return NetworkConfig(**raw)
