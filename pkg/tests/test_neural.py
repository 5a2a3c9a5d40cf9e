import numpy as np
import pytest

from proxyforecast.core import ProblemSpaces, UsageError, is_prob_vector
from proxyforecast.environment import TaskParams, generate_task
from proxyforecast.harness import run_trial
from proxyforecast.neural import NEURAL_PRESETS, Mlp, NeuralConfig, NeuralDF, NeuralFF, NeuralRFF, ReplayBuffer
from proxyforecast.neural.mlp import cross_entropy_grad, fd_grad, numeric_grad, one_hot, relative_error, softmax
from proxyforecast.rng import make_rng

SPACES = ProblemSpaces(10, 4, 5, 0, 20)
SMALL = NeuralConfig(hidden=(8, 6), capacity=50, min_fill=10, batch_size=8, steps_per_trigger=2, trigger_every=3)


def towers_near_kink(net, x, tol=1e-4):
    _, cache = net.forward(x, return_cache=True)
    return any(np.any(np.abs(p) < tol) for p in cache.pre)


class TestMlpForward:
    def test_zero_init_uniform(self):
        net = Mlp([3, 4, 2], init="zeros")
        assert net.forward(np.array([1.0, 2.0, 3.0])).tolist() == [0.0, 0.0]
        np.testing.assert_allclose(softmax(net.forward(np.ones(3))), [0.5, 0.5])

    def test_linear_selects_row(self):
        net = Mlp([3, 2], init="zeros", bias_output=False)
        net.weights[0][:] = [[1, 2], [3, 4], [5, 6]]
        assert net.forward(one_hot(1, 3)).tolist() == [3.0, 4.0]
        assert net.n_layers == 1 and net.biases == [None]

    def test_hand_forward(self):
        net = Mlp([2, 2, 2], init="zeros")
        net.weights[0][:] = [[1.0, -1.0], [0.5, 2.0]]
        net.biases[0][:] = [0.5, 0.25]
        net.weights[1][:] = [[2.0, 0.0], [1.0, 3.0]]
        net.biases[1][:] = [0.0, -1.0]
        # hidden = relu([1, 0] W0 + b0) = relu([1.5, -0.75]) = [1.5, 0]
        # logits = [1.5, 0] W1 + b1 = [3.0, -1.0]
        assert net.forward(np.array([1.0, 0.0])).tolist() == [3.0, -1.0]

    def test_width_mismatch(self):
        with pytest.raises(UsageError):
            Mlp([3, 2], init="zeros").forward(np.ones(4))

    def test_softmax_valid(self):
        net = Mlp([5, 7, 3], make_rng(0))
        for x in make_rng(1).normal(size=(20, 5)) * 10:
            assert is_prob_vector(softmax(net.forward(x)))


class TestSgdStep:
    def test_saturated_targets_do_not_move(self):
        net = Mlp([2, 2], init="zeros", bias_output=False, l2=0.0)
        net.weights[0][:] = [[1000.0, -1000.0], [-1000.0, 1000.0]]
        before = net.get_flat()
        net.sgd_step(np.eye(2), [0, 1])
        assert np.array_equal(before, net.get_flat())

    def test_linear_closed_form(self):
        rng = make_rng(3)
        net = Mlp([4, 3], rng, l2=0.0)
        x = rng.normal(size=4)
        logits = net.forward(x)
        _, grads = net.loss_and_grads(x[None, :], [2])
        expected = np.outer(x, softmax(logits) - one_hot(2, 3))
        np.testing.assert_allclose(grads[0][0], expected, atol=1e-14)
        np.testing.assert_allclose(grads[0][1], softmax(logits) - one_hot(2, 3), atol=1e-14)

    def test_returns_pre_step_loss(self):
        rng = make_rng(4)
        net = Mlp([3, 5, 2], rng)
        x = rng.normal(size=(6, 3))
        y = rng.integers(2, size=6)
        before = -np.log(softmax(net.forward(x))[np.arange(6), y]).mean()
        assert net.sgd_step(x, y) == pytest.approx(before, abs=1e-14)

    def test_empty_batch(self):
        with pytest.raises(UsageError):
            Mlp([2, 2], init="zeros").sgd_step(np.zeros((0, 2)), [])

    def test_l2_skips_biases(self):
        net = Mlp([2, 2], init="zeros", l2=0.5)
        net.weights[0][:] = 1.0
        net.biases[0][:] = 1.0
        _, grads = net.loss_and_grads(np.zeros((1, 2)), [0])
        # zero input: data gradient on W vanishes, leaving l2 * W
        np.testing.assert_allclose(grads[0][0], 0.5, atol=1e-15)
        np.testing.assert_allclose(grads[0][1], softmax(np.ones(2)) - [1, 0], atol=1e-15)

    @pytest.mark.parametrize("sizes, bias, l2", [([3, 4], False, 0.0), ([3, 4, 2], True, 0.01),
                                                 ([5, 6, 4, 3], True, 0.01)])
    def test_finite_differences(self, sizes, bias, l2):
        rng = make_rng(8)
        for _ in range(5):
            net = Mlp(sizes, rng, l2=l2, bias_output=bias)
            x = rng.normal(size=(4, sizes[0]))
            y = rng.integers(sizes[-1], size=4)
            if towers_near_kink(net, x):
                continue
            _, grads = net.loss_and_grads(x, y)
            num = numeric_grad(net, lambda: net.objective(x, y))
            assert relative_error(net.flat_grad(grads), num) < 1e-5

    @pytest.mark.parametrize("sizes, bias, l2", [([4, 5], False, 0.0), ([6, 7, 3], True, 0.1),
                                                 ([5, 6, 4, 3], True, 0.01)])
    def test_batched_differences_match_loop(self, sizes, bias, l2):
        rng = make_rng(21)
        net = Mlp(sizes, rng, l2=l2, bias_output=bias)
        x = rng.normal(size=(3, sizes[0]))
        y = rng.integers(sizes[-1], size=3)
        before = net.get_flat().copy()
        np.testing.assert_allclose(fd_grad(net, x, y), numeric_grad(net, lambda: net.objective(x, y)),
                                   atol=1e-9, rtol=0)
        assert np.array_equal(before, net.get_flat())


class TestReplayBuffer:
    def test_fifo(self):
        buf = ReplayBuffer(5, 2, make_rng(0))
        for i in range(8):
            buf.add((i, -i))
        assert len(buf) == 5
        assert buf.items()[:, 0].tolist() == [3, 4, 5, 6, 7]

    def test_partial(self):
        buf = ReplayBuffer(5, 1, make_rng(0))
        buf.add((1,))
        buf.add((2,))
        assert buf.items()[:, 0].tolist() == [1, 2]

    def test_uniform_sampling(self):
        buf = ReplayBuffer(4, 1, make_rng(1))
        for i in range(6):
            buf.add((i,))
        draws = buf.sample(40000)[:, 0]
        counts = np.bincount(draws, minlength=6)
        assert counts[0] == counts[1] == 0
        assert np.all(np.abs(counts[2:] - 10000) < 3 * np.sqrt(40000 * 0.25 * 0.75))


class TestNeuralDF:
    def test_zero_init_uniform(self):
        f = NeuralDF(SPACES, SMALL, seed=0)
        for w in f.net.weights:
            w[:] = 0
        np.testing.assert_allclose(f.predict(3), [0.2] * 5)

    def test_random_weights_valid(self):
        f = NeuralDF(SPACES, SMALL, seed=5)
        for x in range(10):
            assert is_prob_vector(f.predict(x))

    def test_learns_deterministic_pattern(self):
        f = NeuralDF(SPACES, SMALL.replace(min_fill=1, trigger_every=1, steps_per_trigger=5), seed=1)
        for t in range(1, 400):
            f.observe_outcome(2, 0, 4)
            f.observe_outcome(7, 0, 1)
            f.end_round(t)
        assert int(np.argmax(f.predict(2))) == 4
        assert int(np.argmax(f.predict(7))) == 1


class TestNeuralFF:
    def test_zero_init_uniform(self):
        f = NeuralFF(SPACES, SMALL, seed=0)
        for net in (f.h_net, f.g_net):
            for w in net.weights:
                w[:] = 0
        np.testing.assert_allclose(f.predict(0), [0.2] * 5, atol=1e-15)

    def test_saturated_h_returns_g_row(self):
        f = NeuralFF(SPACES, SMALL, seed=2)
        f.h_net.weights[-1][:] = 0
        f.h_net.biases[-1][:] = [-1e3, 1e3, -1e3, -1e3]
        np.testing.assert_allclose(f.predict(4), softmax(f.g_logits())[1], atol=1e-15)

    def test_hand_mixture(self):
        sp = ProblemSpaces(1, 2, 2)
        f = NeuralFF(sp, SMALL, seed=0)
        f.h_net.weights[-1][:] = 0
        f.h_net.biases[-1][:] = [0.0, np.log(3.0)]      # h = [1/4, 3/4]
        f.g_net.weights[0][:] = [[np.log(4.0), 0.0],   # g(.|0) = [4/5, 1/5]
                                 [0.0, 0.0]]            # g(.|1) = [1/2, 1/2]
        expected = [0.25 * 0.8 + 0.75 * 0.5, 0.25 * 0.2 + 0.75 * 0.5]
        np.testing.assert_allclose(f.predict(0), expected, atol=1e-14)

    def test_double_sum(self):
        f = NeuralFF(SPACES, SMALL, seed=9)
        for x in range(10):
            h = softmax(f.h_net.forward(one_hot(x, 10)))
            g = [softmax(f.g_net.forward(one_hot(z, 4))) for z in range(4)]
            explicit = [sum(g[z][y] * h[z] for z in range(4)) for y in range(5)]
            np.testing.assert_allclose(f.predict(x), explicit, atol=1e-12, rtol=0)

    def test_g_tower_shape(self):
        f = NeuralFF(SPACES, NEURAL_PRESETS["github"], seed=0)
        assert f.g_net.sizes == [4, 5] and f.g_net.biases == [None] and f.g_net.l2 == 0.0
        assert f.g_net.lr == 1.0
        assert f.h_net.sizes == [10, 40, 20, 4] and f.h_net.l2 == 0.01


class TestNeuralRFF:
    def test_zero_residual_equals_ff(self):
        ff = NeuralFF(SPACES, SMALL, seed=4)
        rff = NeuralRFF(SPACES, SMALL, seed=4)
        for x in range(10):
            np.testing.assert_allclose(rff.predict(x), ff.predict(x), atol=1e-12, rtol=0)

    def test_constant_shift_within_component(self):
        f = NeuralRFF(SPACES, SMALL, seed=3)
        f.h_net.weights[-1][:] = 0
        f.h_net.biases[-1][:] = [-1e3, -1e3, 1e3, -1e3]
        c = np.array([0.3, -1.0, 0.0, 2.0, 0.5])
        f.r_net.weights[-1][:] = 0
        f.r_net.biases[-1][:] = c
        np.testing.assert_allclose(f.predict(1), softmax(f.g_logits()[2] + c), atol=1e-14)

    def test_hand_mixture(self):
        sp = ProblemSpaces(1, 2, 2)
        f = NeuralRFF(sp, SMALL, seed=0)
        f.h_net.weights[-1][:] = 0
        f.h_net.biases[-1][:] = [0.0, 0.0]                     # h = [1/2, 1/2]
        f.g_net.weights[0][:] = [[np.log(3.0), 0.0], [0.0, 0.0]]
        f.r_net.weights[-1][:] = 0
        f.r_net.biases[-1][:] = [0.0, np.log(2.0)]              # delta adds ln 2 to outcome 1
        # z=0: softmax([ln3, ln2]) = [3/5, 2/5]; z=1: softmax([0, ln2]) = [1/3, 2/3]
        expected = [0.5 * 3 / 5 + 0.5 * 1 / 3, 0.5 * 2 / 5 + 0.5 * 2 / 3]
        np.testing.assert_allclose(f.predict(0), expected, atol=1e-14)

    def test_residual_step_leaves_feedback_tower(self):
        f = NeuralRFF(SPACES, SMALL, seed=6)
        for _ in range(3):
            f.residual_step(np.array([[1, 2, 3], [4, 0, 1], [9, 3, 0]]))
        g_before = [w.copy() for w in f.g_net.weights]
        r_before = f.r_net.get_flat()
        f.residual_step(np.array([[1, 2, 3], [4, 0, 1], [9, 3, 0]]))
        assert all(np.array_equal(a, b) for a, b in zip(g_before, f.g_net.weights))
        assert not np.array_equal(r_before, f.r_net.get_flat())

    def test_residual_gradient_matches_fd(self):
        f = NeuralRFF(SPACES, SMALL, seed=12)
        rng = make_rng(13)
        f.r_net.weights[-1][:] = rng.normal(size=f.r_net.weights[-1].shape)
        batch = np.column_stack([rng.integers(10, size=5), rng.integers(4, size=5), rng.integers(5, size=5)])
        xs, zs, ys = one_hot(batch[:, 0], 10), one_hot(batch[:, 1], 4), batch[:, 2]
        fb = f.g_net.forward(zs)
        inp = np.concatenate([xs, zs, fb], axis=1)

        def objective():
            logits = fb + f.r_net.forward(inp)
            return cross_entropy_grad(logits, ys)[0] + f.r_net.l2_penalty()

        delta, cache = f.r_net.forward(inp, return_cache=True)
        _, d = cross_entropy_grad(fb + delta, ys)
        analytic = f.r_net.flat_grad(f.r_net.backward(cache, d))
        assert relative_error(analytic, numeric_grad(f.r_net, objective)) < 1e-5


class TestCadence:
    def test_below_min_fill_no_change(self):
        f = NeuralDF(SPACES, SMALL, seed=0)
        before = f.net.get_flat()
        for t in range(1, 10):
            f.observe_outcome(0, 0, 1)
            f.end_round(t)
        assert len(f.outcome_buffer) == 9
        assert np.array_equal(before, f.net.get_flat())
        assert f.steps == {}

    def test_step_count(self):
        f = NeuralRFF(SPACES, SMALL, seed=0)
        for t in range(1, 13):
            f.observe_proxy(t % 10, t % 4)
            f.observe_outcome(t % 10, t % 4, t % 5)
            f.end_round(t)
        # fill reaches 10 at t=10; triggers at t=12 only -> 2 steps per tower group
        assert f.steps == {"proxy": 2, "outcome": 2, "residual": 2}

    def test_proxy_buffer_feeds_h_only(self):
        f = NeuralFF(SPACES, SMALL.replace(min_fill=1, trigger_every=1), seed=0)
        g_before = f.g_net.get_flat()
        h_before = f.h_net.get_flat()
        f.observe_proxy(1, 2)
        f.end_round(1)
        assert np.array_equal(g_before, f.g_net.get_flat())
        assert not np.array_equal(h_before, f.h_net.get_flat())


@pytest.mark.parametrize("cls", [NeuralDF, NeuralFF, NeuralRFF])
def test_deterministic(cls):
    params = TaskParams(n_rounds=120, outcome_delay=10, proxy_delay=2, mu=0.5)
    task, stream = generate_task(params, 5)
    runs = []
    for _ in range(2):
        f = cls(params.spaces, SMALL, seed=77)
        runs.append(run_trial(f, stream, params.spaces, "true_model", task).predictions)
    assert np.array_equal(runs[0], runs[1])


def test_reset_restores_initial_state():
    f = NeuralRFF(SPACES, SMALL.replace(min_fill=1, trigger_every=1), seed=3)
    first = [f.predict(x) for x in range(10)]
    f.observe_outcome(1, 1, 1)
    f.observe_proxy(1, 1)
    f.end_round(1)
    f.reset()
    assert all(np.array_equal(a, f.predict(x)) for x, a in enumerate(first))
    assert len(f.outcome_buffer) == 0


def test_dump_csv(tmp_path):
    net = Mlp([2, 3, 2], make_rng(0))
    p = tmp_path / "w.csv"
    net.dump_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "layer,kind,row,col,value"
    assert len(lines) == 1 + 6 + 3 + 6 + 2
