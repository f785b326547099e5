import numpy as np
import pytest

from orbitsplit import agent, traffic
from orbitsplit.agent import AgentHyperparams, ReplayBuffer, RMSprop
from orbitsplit.env import NUM_ACTIONS, STATE_DIM, RewardWeights, SplitEnv
from orbitsplit.qnet import QNetwork


def small_net(seed, hidden=8):
    return QNetwork(hidden=hidden, rng=np.random.default_rng(seed))


def small_env(T=20):
    trace = traffic.generate(traffic.TrafficProfile("business", seed=1), 24, 1)
    return SplitEnv(trace, episode_length=T, peak_lambda=200.0)


def test_epsilon_schedule():
    hp = AgentHyperparams()
    assert hp.epsilon(0) == 0.5
    assert hp.epsilon(1) == pytest.approx(0.4975)
    assert hp.epsilon(100) == pytest.approx(0.5 * 0.995**100)
    assert hp.epsilon(10**6) == 0.0005
    eps = [hp.epsilon(t) for t in range(3000)]
    assert all(a >= b for a, b in zip(eps, eps[1:]))
    assert min(eps) > 0


@pytest.mark.parametrize(
    "kwargs",
    [dict(discount=1.5), dict(epsilon_decay=1.0), dict(epsilon_min=0.9), dict(learning_rate=0), dict(batch_size=300)],
)
def test_hyperparameter_validation(kwargs):
    with pytest.raises(ValueError):
        AgentHyperparams(**kwargs)


def test_greedy_selection_and_ties():
    net = small_net(0)
    for w in net.weights:
        w[...] = 0.0
    net.biases[-1][...] = 0.0
    net.biases[-1][[4, 9]] = 1.0
    rng = np.random.default_rng(0)
    assert agent.select_action(net, np.zeros(STATE_DIM), 0.0, rng) == 4
    with pytest.raises(ValueError):
        agent.select_action(net, np.zeros(STATE_DIM), 1.5, rng)


def test_uniform_exploration_chi_square():
    net = small_net(1)
    rng = np.random.default_rng(123)
    n = 10_000
    counts = np.bincount([agent.select_action(net, np.zeros(STATE_DIM), 1.0, rng) for _ in range(n)], minlength=NUM_ACTIONS)
    expected = n / NUM_ACTIONS
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 99.9th percentile of chi-square with 17 degrees of freedom
    assert chi2 < 40.79


def test_td_targets():
    target = small_net(2)
    for w in target.weights:
        w[...] = 0.0
    target.biases[-1][...] = 0.0
    target.biases[-1][7] = 2.0
    s2 = np.zeros((3, STATE_DIM))
    r = np.array([1.0, -1.0, 0.5])
    assert agent.td_targets(r, s2, [False] * 3, target, 0.0) == pytest.approx(r)
    assert agent.td_targets([1.0], s2[:1], [False], target, 0.9) == pytest.approx([2.8])
    assert agent.td_targets([1.0], s2[:1], [True], target, 0.9) == pytest.approx([1.0])
    with pytest.raises(ValueError):
        agent.td_targets([], s2[:0], [], target, 0.9)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = small_net(seed)
    for b in net.biases:
        b[...] = rng.normal(scale=0.1, size=b.shape)
    s = rng.normal(size=(5, STATE_DIM))
    a = rng.integers(NUM_ACTIONS, size=5)
    y = rng.normal(size=5)
    _, grad = agent.td_loss_and_grads(net, s, a, y)
    h = 1e-5
    numeric = np.empty_like(grad)
    for i in range(net.num_params):
        old = net.theta[i]
        net.theta[i] = old + h
        up = agent.td_loss_and_grads(net, s, a, y)[0]
        net.theta[i] = old - h
        down = agent.td_loss_and_grads(net, s, a, y)[0]
        net.theta[i] = old
        numeric[i] = (up - down) / (2 * h)
    scale = np.maximum(np.abs(grad) + np.abs(numeric), 1e-6)
    assert np.max(np.abs(grad - numeric) / scale) < 1e-4


def test_gradient_only_through_taken_action():
    net = small_net(3)
    s = np.random.default_rng(3).normal(size=(1, STATE_DIM))
    _, grad = agent.td_loss_and_grads(net, s, np.array([5]), np.array([1.0]))
    out_w = grad[-(net.hidden + 1) * NUM_ACTIONS:-NUM_ACTIONS].reshape(net.hidden, NUM_ACTIONS)
    untouched = np.delete(out_w, 5, axis=1)
    assert np.all(untouched == 0)


def fixed_buffer(n, state, action, reward, next_state, done):
    buf = ReplayBuffer(200)
    for _ in range(n):
        buf.add(state, action, reward, next_state, done)
    return buf


def test_overfits_one_transition():
    rng = np.random.default_rng(4)
    net = QNetwork(rng=rng)
    target = net.copy()
    s = rng.normal(size=STATE_DIM)
    buf = fixed_buffer(32, s, 3, 5.0, s, True)
    # small enough that RMSprop's sign-like steps do not overshoot
    hp = AgentHyperparams(learning_rate=1e-5)
    opt = RMSprop(net.num_params, hp.learning_rate)
    losses = [agent.train_step(net, target, buf, hp, rng, opt) for _ in range(1000)]
    above = [loss for loss in losses if loss > 1e-12]
    assert all(a > b for a, b in zip(above, above[1:]))
    assert losses[-1] < 1e-12


def test_zero_error_batch_leaves_parameters():
    rng = np.random.default_rng(5)
    net = QNetwork(rng=rng)
    target = net.copy()
    buf = ReplayBuffer(200)
    for _ in range(32):
        s = rng.normal(size=STATE_DIM)
        a = int(rng.integers(NUM_ACTIONS))
        buf.add(s, a, float(net.forward(s)[a]), s, False)
    hp = AgentHyperparams(discount=0.0)
    before = net.theta.copy()
    loss = agent.train_step(net, target, buf, hp, rng, RMSprop(net.num_params, hp.learning_rate))
    assert loss < 1e-20
    assert np.linalg.norm(net.theta - before) <= 1e-6


def test_train_step_needs_full_batch():
    net = small_net(6)
    buf = ReplayBuffer(200)
    buf.add(np.zeros(STATE_DIM), 0, 0.0, np.zeros(STATE_DIM))
    with pytest.raises(ValueError):
        agent.train_step(net, net.copy(), buf, AgentHyperparams(), np.random.default_rng(0), RMSprop(net.num_params))


def test_replay_buffer_capacity_and_sampling():
    buf = ReplayBuffer(10)
    for i in range(25):
        buf.add(np.full(STATE_DIM, i), i % NUM_ACTIONS, float(i), np.zeros(STATE_DIM))
        assert len(buf) <= 10
    s, a, r, s2, d = buf.sample(10, np.random.default_rng(0))
    assert sorted(r) == list(range(15, 25))
    assert s.shape == (10, STATE_DIM) and d.dtype == bool
    with pytest.raises(ValueError):
        buf.sample(11, np.random.default_rng(0))


def test_replay_sampling_is_uniform():
    buf = ReplayBuffer(20)
    for i in range(20):
        buf.add(np.zeros(STATE_DIM), 0, float(i), np.zeros(STATE_DIM))
    rng = np.random.default_rng(7)
    counts = np.zeros(20)
    for _ in range(2000):
        counts[buf.sample(5, rng)[2].astype(int)] += 1
    expected = 2000 * 5 / 20
    assert float(((counts - expected) ** 2 / expected).sum()) < 43.82  # chi-square, 19 dof, 99.9%


def test_rmsprop_step():
    theta = np.array([1.0, -2.0])
    opt = RMSprop(2, lr=0.1, decay=0.9, eps=0.0)
    opt.step(theta, np.array([3.0, -4.0]))
    # first step: sq = 0.1 g^2, update = lr * g / sqrt(0.1 g^2)
    assert theta == pytest.approx([1.0 - 0.1 / np.sqrt(0.1), -2.0 + 0.1 / np.sqrt(0.1)])


def test_clip_by_global_norm():
    g = np.array([3.0, 4.0])
    assert agent.clip_by_global_norm(g, 10.0) is g
    assert np.linalg.norm(agent.clip_by_global_norm(g, 1.0)) == pytest.approx(1.0)
    assert agent.clip_by_global_norm(g, None) is g


def test_sync_target():
    net, target = small_net(8), small_net(9)
    agent.sync_target(net, target)
    x = np.random.default_rng(0).normal(size=(4, STATE_DIM))
    assert np.array_equal(net.forward(x), target.forward(x))
    net.theta += 1.0
    assert not np.array_equal(net.forward(x), target.forward(x))
    with pytest.raises(ValueError):
        agent.sync_target(net, small_net(0, hidden=4))


def test_return_upper_bound():
    assert agent.return_upper_bound(RewardWeights(), 0.9, 100) == pytest.approx(4 * (1 - 0.9**100) / 0.1)
    assert agent.return_upper_bound(RewardWeights(), 1.0, 10) == 40


def test_training_loop_bookkeeping():
    env = small_env(T=20)
    hp = AgentHyperparams(episodes=6, hidden=16, target_sync=25, seed=3)
    art = agent.train(env, hp)
    assert len(art.log) == 120
    assert art.sync_steps == list(range(0, 120, 25))
    assert [row["step"] for row in art.log] == list(range(120))
    assert [row["episode"] for row in art.log] == [k for k in range(6) for _ in range(20)]
    assert all(row["epsilon"] == hp.epsilon(row["step"]) for row in art.log)
    assert all(row["loss"] is None for row in art.log[:hp.batch_size - 1])
    assert all(row["loss"] is not None for row in art.log[hp.batch_size:])
    assert set(agent.LOG_FIELDS) <= set(art.log[0])


def test_training_is_deterministic(tmp_path):
    env = small_env(T=20)
    hp = AgentHyperparams(episodes=2, hidden=16, seed=11)
    a, b = agent.train(env, hp), agent.train(env, hp)
    assert np.array_equal(a.net.theta, b.net.theta)
    agent.write_log(a.log, tmp_path / "a.csv")
    agent.write_log(b.log, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    c = agent.train(env, AgentHyperparams(episodes=2, hidden=16, seed=12))
    assert not np.array_equal(a.net.theta, c.net.theta)


def test_log_round_trip(tmp_path):
    art = agent.train(small_env(T=5), AgentHyperparams(episodes=8, hidden=8, seed=1))
    agent.write_log(art.log, tmp_path / "log.csv")
    back = agent.read_log(tmp_path / "log.csv")
    assert len(back) == len(art.log)
    for x, y in zip(back, art.log):
        assert x["reward"] == y["reward"] and x["loss"] == y["loss"] and x["placement"] == y["placement"]


def test_optimistic_init_sets_output_bias():
    env = small_env(T=5)
    art = agent.train(env, AgentHyperparams(episodes=0, hidden=8))
    assert np.all(art.net.biases[-1] == agent.return_upper_bound(env.weights, 0.9, 5))
    plain = agent.train(env, AgentHyperparams(episodes=0, hidden=8, optimistic_init=False))
    assert np.all(plain.net.biases[-1] == 0)
