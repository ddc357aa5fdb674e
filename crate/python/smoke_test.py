"""Smoke test for the pinch_isac extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml
"""

import math
import tempfile

import pinch_isac as pi

cfg = pi.Config()
assert cfg.observation_dim == 25 and cfg.action_dim == 9

# single antenna straight above the user: |G| = alpha / 3 m
alpha = cfg.wavelength_m / (4 * math.pi)
re, im = pi.effective_gain((40.0, 0.0), [40.0])
assert abs(math.hypot(re, im) - alpha / 3.0) < 1e-15

r1 = pi.user_rate((40.0, 5.0), [30.0, 40.0], 0.1)
r2 = pi.user_rate((40.0, 5.0), [30.0, 40.0], 0.2)
assert 0.0 < r1 < r2
snr = pi.sensing_snr((80.0, -10.0), (40.0, 5.0), [30.0, 40.0], 0.1)
assert snr >= 0.0

env = pi.Env(seed=3)
agent = pi.Agent("merl", seed=3)
obs = env.observation()
total, steps = 0.0, 0
while not env.is_done():
    action = agent.act(obs, explore=True)
    out = env.step(action)
    agent.train_step(obs, action, out.reward, out.observation, out.terminal)
    obs = out.observation
    total += out.reward
    steps += 1
    xs = sorted(out.antenna_xs)
    assert all(b - a >= cfg.min_spacing_m - 1e-9 for a, b in zip(xs, xs[1:]))
    assert all(0.0 <= p <= cfg.max_user_power_w for p in out.applied_powers_w)
assert steps > 0 and math.isfinite(total)

one = pi.Config("[system]\nnum_antennas = 1\n")
xs, power, rate = pi.oracle([(37.2, 4.0)], [], resolution_m=0.5, power_levels=3, config=one)
assert abs(xs[0] - 37.2) <= 0.5 and power == cfg.max_user_power_w

small = pi.Config(
    """
[system]
slots_per_episode = 10
[agent]
hidden_sizes = [8]
batch_size = 4
warmup_transitions = 8
[experiment]
algorithms = ["merl", "random"]
episodes = 3
seeds = [0, 1]
"""
)
with tempfile.TemporaryDirectory() as out:
    runs = pi.run_campaign(small, out)
    assert len(runs) == 4
    text = pi.report(out)
    assert "merl" in text
    loaded = pi.Agent.load(f"{runs[0]}/checkpoint")
    assert len(loaded.act([0.0] * 25)) == 9

print(f"ok: {steps} steps, return {total:.2f}, oracle x {xs[0]:.2f} m")
