"""Train the Q-network on the RRH on/off control problem and watch the
greedy policy act.

Run:  python3 demos/04_dqn_training.py
"""

import numpy as np

from cranpower import pipeline
from cranpower.dqn import select_action
from cranpower.env import Environment, ExactSolverReward, encode_state

config = pipeline.RunConfig.from_file("configs/tiny.json")
config.offline_episodes = 150

print("=== Offline pre-training (exact-solver rewards) ===")
artifacts, summary = pipeline.train_offline(config)
dqn_stats = summary["dqn"]
print(f"{dqn_stats['episodes']} episodes, {dqn_stats['steps']} environment "
      f"steps, final epsilon {dqn_stats['final_epsilon']:.3f}")
print(f"final training loss {dqn_stats['final_loss']:.1f}, last episode "
      f"return {dqn_stats['final_episode_return']:.1f}")
print(f"replay memory holds {dqn_stats['buffer_occupancy']} transitions")

print("\n=== Greedy rollout ===")
network = config.network
channel = pipeline.make_channel(config)
env = Environment(network, channel,
                  ExactSolverReward(network, channel, config.solver),
                  np.random.default_rng(99))
state = env.reset()
net = artifacts.qnet
print(f"{'slot':>4}  {'pattern':>8}  {'action':>6}  {'power W':>8}  {'reward':>7}")
for slot in range(12):
    action = select_action(net, encode_state(state, network), 0.0,
                           np.random.default_rng(0))
    result = env.step(action)
    label = "no-op" if action == network.num_rrhs else f"flip {action}"
    pattern = "".join("1" if b else "0" for b in result.next_state.rrh_active)
    print(f"{slot:>4}  {pattern:>8}  {label:>6}  {result.power.total_w:8.2f}  "
          f"{result.reward:7.2f}")
    state = result.next_state
    if result.terminal:
        state = env.reset()
        print("      (episode ended, reset)")

q = net.forward(encode_state(state, network))
print("\nQ-values at the final state:", np.round(q, 1))
print("(one entry per action: flip RRH 0..m-1, or do nothing)")
