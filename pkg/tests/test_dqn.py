import numpy as np
import pytest

from cranpower.dqn import (
    DqnParams,
    QNetwork,
    ReplayBuffer,
    Transition,
    backprop,
    compute_targets,
    load_checkpoint,
    save_checkpoint,
    select_action,
    sync_target,
    train_step,
)


def relative_grad_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum.reduce(
        [np.abs(analytic), np.abs(numeric), np.full_like(analytic, 1e-6)])


def finite_difference_grads(net, states, actions, targets, h=1e-5):
    """Central differences on every parameter."""
    grads_w = [np.zeros_like(w) for w in net.weights]
    grads_b = [np.zeros_like(b) for b in net.biases]

    def loss_value():
        q = net.forward_batch(states)
        taken = q[np.arange(len(actions)), actions]
        return float(np.mean((taken - targets) ** 2))

    for arrs, grads in ((net.weights, grads_w), (net.biases, grads_b)):
        for arr, grad in zip(arrs, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up = loss_value()
                flat[k] = orig - h
                down = loss_value()
                flat[k] = orig
                gflat[k] = (up - down) / (2 * h)
    return grads_w, grads_b


class TestForward:
    def test_zero_network_outputs_zeros(self):
        net = QNetwork.zeros([4, 8, 3])
        q = net.forward(np.ones(4))
        assert np.all(q == 0)
        assert q.shape == (3,)

    def test_single_linear_layer_hand_math(self):
        w = np.array([[1.0, -2.0], [0.5, 3.0]])
        b = np.array([0.1, -0.1])
        net = QNetwork([w], [b])
        x = np.array([2.0, 4.0])
        expected = x @ w + b
        assert np.allclose(net.forward(x), expected)

    def test_two_layer_with_relu(self):
        w1 = np.array([[1.0], [-1.0]])
        b1 = np.array([-0.5])
        w2 = np.array([[2.0, -2.0]])
        b2 = np.array([0.0, 1.0])
        net = QNetwork([w1, w2], [b1, b2])
        x = np.array([2.0, 0.5])  # hidden pre-act = 1.0, post-relu = 1.0
        assert np.allclose(net.forward(x), [2.0, -1.0])

    def test_purity(self):
        rng = np.random.default_rng(0)
        net = QNetwork.initialize([5, 7, 4], rng)
        x = rng.normal(size=5)
        assert np.array_equal(net.forward(x), net.forward(x))

    def test_width_mismatch(self):
        net = QNetwork.zeros([4, 3])
        with pytest.raises(ValueError):
            net.forward(np.ones(5))


class TestSelectAction:
    def _net_with_q(self, q_values):
        # Zero weights, output bias = the desired Q-vector.
        net = QNetwork.zeros([3, len(q_values)])
        net.biases[-1][:] = q_values
        return net

    def test_greedy_argmax(self):
        net = self._net_with_q([1.0, 5.0, 3.0])
        a = select_action(net, np.zeros(3), 0.0, np.random.default_rng(0))
        assert a == 1

    def test_uniform_exploration(self):
        net = self._net_with_q([1.0, 5.0, 3.0, 0.0, 2.0, 1.5, 0.2, 9.0, 4.0])
        rng = np.random.default_rng(11)
        n = 100_000
        counts = np.bincount(
            [select_action(net, np.zeros(3), 1.0, rng) for _ in range(n)],
            minlength=9)
        freqs = counts / n
        assert np.all(np.abs(freqs - 1 / 9) < 0.02 / 9 + 3e-3)

    def test_shift_invariance(self):
        base = self._net_with_q([1.0, 5.0, 3.0])
        shifted = self._net_with_q([8.0, 12.0, 10.0])
        rng = np.random.default_rng(1)
        a = select_action(base, np.zeros(3), 0.0, rng)
        b = select_action(shifted, np.zeros(3), 0.0, rng)
        assert a == b == 1

    def test_epsilon_range_checked(self):
        net = self._net_with_q([0.0, 1.0])
        with pytest.raises(ValueError):
            select_action(net, np.zeros(3), 1.5, np.random.default_rng(0))


class TestComputeTargets:
    def _transition(self, reward, terminal):
        return Transition(np.zeros(2), 0, reward, np.zeros(2), terminal)

    def test_terminal_returns_reward(self):
        net = QNetwork.zeros([2, 2])
        y = compute_targets([self._transition(3.0, True)], net, 0.9)
        assert y[0] == 3.0

    def test_bootstrap_arithmetic(self):
        net = QNetwork.zeros([2, 2])
        net.biases[-1][:] = [2.0, 1.0]  # max target-Q = 2
        y = compute_targets([self._transition(1.0, False)], net, 0.9)
        assert y[0] == pytest.approx(2.8)

    def test_gamma_zero(self):
        rng = np.random.default_rng(2)
        net = QNetwork.initialize([2, 4, 2], rng)
        batch = [self._transition(r, False) for r in (0.5, -1.0, 2.5)]
        y = compute_targets(batch, net, 1e-12)
        assert np.allclose(y, [0.5, -1.0, 2.5], atol=1e-9)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            compute_targets([], QNetwork.zeros([2, 2]), 0.9)


class TestGradients:
    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        net = QNetwork.initialize([6, 9, 4], rng)
        states = rng.normal(size=(10, 6))
        actions = rng.integers(0, 4, size=10)
        targets = rng.normal(size=10)
        _, gw, gb = backprop(net, states, actions, targets)
        fw, fb = finite_difference_grads(net, states, actions, targets)
        worst = 0.0
        for a, n in zip(gw + gb, fw + fb):
            worst = max(worst, float(np.max(relative_grad_error(a, n))))
        assert worst <= 1e-4

    def test_zero_error_means_no_update(self):
        rng = np.random.default_rng(4)
        net = QNetwork.initialize([3, 5, 2], rng)
        state = rng.normal(size=3)
        q = net.forward(state)
        tr = Transition(state, 1, 0.0, state, True)
        tr.reward = float(q[1])  # target equals current Q
        before = [w.copy() for w in net.weights]
        loss = train_step(net, sync_target(net), [tr], 0.9, 0.1)
        assert loss == 0.0
        for w, prev in zip(net.weights, before):
            assert np.array_equal(w, prev)

    def test_single_transition_linear_net_update(self):
        # One linear layer, one transition: the update must follow the
        # hand-derived gradient dL/dW = 2 (q - y) * x on the taken row.
        w = np.array([[0.5, -0.2], [0.3, 0.8]])
        net = QNetwork([w.copy()], [np.zeros(2)])
        x = np.array([1.0, -2.0])
        tr = Transition(x, 0, 4.0, x, True)
        lr = 0.01
        q0 = float(net.forward(x)[0])
        train_step(net, sync_target(net), [tr], 0.9, lr)
        expected = w.copy()
        expected[:, 0] -= lr * 2.0 * (q0 - 4.0) * x
        assert np.allclose(net.weights[0], expected, atol=1e-12)

    def test_nonfinite_loss_aborts(self):
        net = QNetwork.zeros([2, 2])
        net.weights[0][:] = np.inf
        tr = Transition(np.ones(2), 0, 1.0, np.ones(2), True)
        with pytest.raises(FloatingPointError):
            train_step(net, sync_target(net), [tr], 0.9, 0.1)

    def test_momentum_accumulates_velocity(self):
        rng = np.random.default_rng(12)
        plain = QNetwork.initialize([3, 6, 2], rng)
        with_momentum = plain.copy()
        velocity = [(np.zeros_like(w), np.zeros_like(b))
                    for w, b in zip(plain.weights, plain.biases)]
        batch = [Transition(rng.normal(size=3), int(rng.integers(2)),
                            float(rng.normal()), rng.normal(size=3), True)
                 for _ in range(8)]
        target = sync_target(plain)
        for _ in range(3):
            train_step(plain, target, batch, 0.9, 1e-2)
            train_step(with_momentum, target, batch, 0.9, 1e-2,
                       velocity=velocity, momentum=0.9)
        # After several steps the velocity term must have changed the path.
        assert not np.allclose(plain.weights[0], with_momentum.weights[0])
        assert any(np.any(vw != 0) for vw, _ in velocity)

    def test_two_state_mdp_converges_to_value_iteration(self):
        # Deterministic 2-state / 2-action MDP; tabular value iteration is
        # the oracle for the Bellman fixed point.
        gamma = 0.9
        rewards = {(0, 0): 1.0, (0, 1): 0.0, (1, 0): 2.0, (1, 1): 0.5}
        nxt = {(0, 0): 0, (0, 1): 1, (1, 0): 0, (1, 1): 1}
        q_star = np.zeros((2, 2))
        for _ in range(2000):
            q_star = np.array([
                [rewards[s, a] + gamma * q_star[nxt[s, a]].max() for a in (0, 1)]
                for s in (0, 1)])
        states = np.eye(2)
        batch = [Transition(states[s], a, rewards[s, a], states[nxt[s, a]], False)
                 for s in (0, 1) for a in (0, 1)]
        rng = np.random.default_rng(5)
        net = QNetwork.initialize([2, 32, 2], rng)
        target = sync_target(net)
        loss = np.inf
        for step in range(500):
            loss = train_step(net, target, batch, gamma, 0.05)
            if (step + 1) % 10 == 0:
                target = sync_target(net)
        assert loss < 1e-3
        learned = net.forward_batch(states)
        assert np.max(np.abs(learned - q_star)) < 0.2


class TestSyncTarget:
    def test_mutation_does_not_leak(self):
        rng = np.random.default_rng(6)
        net = QNetwork.initialize([3, 4, 2], rng)
        target = sync_target(net)
        x = rng.normal(size=3)
        before = target.forward(x).copy()
        net.weights[0] += 1.0
        assert np.array_equal(target.forward(x), before)

    def test_copies_identical(self):
        rng = np.random.default_rng(7)
        net = QNetwork.initialize([3, 4, 2], rng)
        a = sync_target(net)
        b = sync_target(net)
        x = rng.normal(size=3)
        assert np.array_equal(a.forward(x), net.forward(x))
        assert np.array_equal(a.forward(x), b.forward(x))

    def test_target_staleness_between_syncs(self):
        rng = np.random.default_rng(8)
        net = QNetwork.initialize([2, 8, 2], rng)
        target = sync_target(net)
        batch = [Transition(rng.normal(size=2), int(rng.integers(2)),
                            float(rng.normal()), rng.normal(size=2), False)
                 for _ in range(4)]
        y_before = compute_targets(batch, target, 0.9)
        for _ in range(5):
            train_step(net, target, batch, 0.9, 0.05)
        y_after = compute_targets(batch, target, 0.9)
        assert np.array_equal(y_before, y_after)


class TestReplayBuffer:
    def _tr(self, tag):
        return Transition(np.array([float(tag)]), 0, float(tag),
                          np.array([float(tag)]), False)

    def test_fifo_eviction(self):
        buf = ReplayBuffer(2)
        for tag in (1, 2, 3):
            buf.push(self._tr(tag))
        rewards = [t.reward for t in buf.contents()]
        assert rewards == [2.0, 3.0]

    def test_full_sample_is_permutation(self):
        buf = ReplayBuffer(10)
        for tag in range(10):
            buf.push(self._tr(tag))
        batch = buf.sample(10, np.random.default_rng(0))
        assert sorted(t.reward for t in batch) == [float(i) for i in range(10)]

    def test_sampling_uniform(self):
        buf = ReplayBuffer(8)
        for tag in range(8):
            buf.push(self._tr(tag))
        rng = np.random.default_rng(9)
        counts = np.zeros(8)
        draws = 40_000
        for _ in range(draws):
            for t in buf.sample(2, rng):
                counts[int(t.reward)] += 1
        freqs = counts / (2 * draws)
        assert np.all(np.abs(freqs - 1 / 8) < 0.02 / 8 + 2e-3)

    def test_undersized_sample_rejected(self):
        buf = ReplayBuffer(4)
        buf.push(self._tr(0))
        with pytest.raises(ValueError):
            buf.sample(2, np.random.default_rng(0))

    def test_snapshot_round_trip(self, tmp_path):
        buf = ReplayBuffer(5)
        rng = np.random.default_rng(10)
        for _ in range(7):
            buf.push(Transition(rng.normal(size=3), int(rng.integers(4)),
                                float(rng.normal()), rng.normal(size=3),
                                bool(rng.random() < 0.3)))
        path = tmp_path / "replay.bin"
        buf.save(path)
        loaded = ReplayBuffer.load(path)
        assert len(loaded) == len(buf)
        for a, b in zip(buf.contents(), loaded.contents()):
            assert np.array_equal(a.state, b.state)
            assert a.action == b.action and a.reward == b.reward
            assert a.terminal == b.terminal


class TestReproducibility:
    def _run(self, seed):
        rng_net = np.random.default_rng(seed)
        rng_env = np.random.default_rng(seed + 1)
        rng_buf = np.random.default_rng(seed + 2)
        net = QNetwork.initialize([3, 8, 2], rng_net)
        target = sync_target(net)
        buf = ReplayBuffer(64)
        losses = []
        for step in range(120):
            s = rng_env.normal(size=3)
            a = select_action(net, s, 0.3, rng_env)
            buf.push(Transition(s, a, float(rng_env.normal()),
                                rng_env.normal(size=3), False))
            if len(buf) >= 16 and step % 4 == 0:
                losses.append(train_step(net, target, buf.sample(16, rng_buf),
                                         0.9, 1e-2))
            if step % 20 == 0:
                target = sync_target(net)
        return losses

    def test_same_seed_identical_losses(self):
        assert self._run(100) == self._run(100)


class TestCheckpointing:
    def test_round_trip_identical_outputs(self, tmp_path):
        rng = np.random.default_rng(11)
        net = QNetwork.initialize([5, 16, 9], rng)
        path = tmp_path / "qnet.bin"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        for probe in rng.normal(size=(10, 5)):
            assert np.array_equal(net.forward(probe), loaded.forward(probe))

    def test_version_enforced(self, tmp_path):
        path = tmp_path / "qnet.bin"
        save_checkpoint(QNetwork.zeros([2, 2]), path)
        raw = path.read_bytes()
        # Corrupt the magic string.
        bad = raw.replace(b"cranpower-qnet", b"cranpower-QNET", 1)
        bad_path = tmp_path / "bad.bin"
        bad_path.write_bytes(bad)
        with pytest.raises(ValueError):
            load_checkpoint(bad_path)


class TestParams:
    def test_epsilon_schedule_linear(self):
        p = DqnParams(epsilon_decay_steps=100)
        assert p.epsilon_at(0) == 1.0
        assert p.epsilon_at(50) == pytest.approx(0.525)
        assert p.epsilon_at(100) == 0.05
        assert p.epsilon_at(10_000) == 0.05

    def test_invalid_gamma(self):
        with pytest.raises(ValueError):
            DqnParams(gamma=0.0)
        with pytest.raises(ValueError):
            DqnParams(gamma=1.5)
