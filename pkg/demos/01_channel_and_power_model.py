"""Walk through the physical model: path loss, channel draws, SINR, rate,
and the three-part power accounting.

Run:  python3 demos/01_channel_and_power_model.py
"""

import numpy as np

from cranpower.netmodel import (
    ChannelRealization,
    NetworkConfig,
    channel_coefficient,
    compute_rate,
    compute_sinr,
    path_loss_db,
    rrh_power,
    sample_channel,
    total_power,
)

config = NetworkConfig()
print("=== Cell constants (8 RRHs, 4 users) ===")
print(f"bandwidth {config.bandwidth_hz / 1e6:.0f} MHz, noise "
      f"{config.noise_power_w:.3e} W, amplifier efficiency "
      f"{config.amplifier_efficiency:.0%}")
print(f"per-RRH power: active {config.active_power_w} W, sleep "
      f"{config.sleep_power_w} W, mode switch {config.transition_power_w} W, "
      f"transmit cap {config.max_tx_power_w} W")

print("\n=== Path loss, 148.1 + 37.6 log10(d_km) ===")
for d_km in (0.05, 0.1, 0.4, 0.8):
    print(f"  {d_km * 1000:5.0f} m -> {path_loss_db(d_km):7.2f} dB")

print("\n=== One channel draw ===")
rng = np.random.default_rng(7)
channel = sample_channel(config, rng)
mags = np.abs(channel.gains)
print(f"gain matrix {channel.gains.shape}, |h| median {np.median(mags):.3e}, "
      f"max {mags.max():.3e}")
print("Monte-Carlo check at a fixed 250 m distance, shadowing off:")
g = (rng.standard_normal(50_000) + 1j * rng.standard_normal(50_000)) / np.sqrt(2)
h = channel_coefficient(np.full(50_000, 250.0), np.zeros(50_000), g, config)
expected = 10 ** (-path_loss_db(0.25) / 10) * config.antenna_gain_linear
print(f"  mean |h|^2 = {np.mean(np.abs(h) ** 2):.4e}  "
      f"(model: {expected:.4e})")

print("\n=== SINR and rate for hand-built weights ===")
noise = config.noise_power_w
toy = ChannelRealization(gains=np.array([[1.0 + 0j, 1.0 + 0j]]))
weights = np.array([[2 * np.sqrt(noise), np.sqrt(noise)]], dtype=complex)
sinr = compute_sinr(weights, toy, 0, noise)
print(f"user 0: signal 4x noise, interference 1x noise -> SINR {sinr:.2f}, "
      f"rate {compute_rate(sinr, config):.2f} Mbps")

print("\n=== Per-RRH power model ===")
print(f"active @ 0.5 W transmit: {rrh_power(True, 0.5, config):.2f} W")
print(f"active idle:             {rrh_power(True, 0.0, config):.2f} W")
print(f"sleeping:                {rrh_power(False, 0.0, config):.2f} W")

print("\n=== Slot power breakdown (waking one RRH up) ===")
prev = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=bool)
nxt = np.array([1, 1, 1, 1, 1, 0, 0, 0], dtype=bool)
tx = np.where(nxt, 0.1, 0.0)
pb = total_power(prev, nxt, tx, config)
print(f"transmit {pb.transmit_w:.2f} W + standby {pb.state_w:.2f} W + "
      f"transition {pb.transition_w:.2f} W = {pb.total_w:.2f} W")
