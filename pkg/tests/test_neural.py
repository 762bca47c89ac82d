import numpy as np
import pytest

from seirgame import neural as nn


def _net(head="identity", sizes=(4, 6, 5, 1), seed=0):
    return nn.init_mlp(list(sizes), head, np.random.default_rng(seed))


def _points(seed=1, batch=7, dim=3):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, batch), rng.uniform(0, 1, (batch, dim))


def test_shapes_and_flat_round_trip():
    net = _net()
    assert net.layer_sizes == [4, 6, 5, 1]
    assert net.n_params == 4 * 6 + 6 + 6 * 5 + 5 + 5 + 1
    again = net.with_flat(net.flat())
    assert all(np.array_equal(a, b) for a, b in zip(net.arrays(), again.arrays()))


def test_zero_output_init_is_constant_zero():
    net = nn.init_mlp([4, 8, 1], "identity", np.random.default_rng(0), zero_output=True)
    t, x = _points()
    assert np.all(nn.forward(net, t, x) == 0)
    assert np.all(nn.input_gradient(net, t, x) == 0)


def test_logistic_head_in_open_interval():
    net = _net("logistic")
    t, x = _points()
    y = nn.forward(net, t, x * 50)
    assert np.all((y > 0) & (y < 1))


def test_hand_computed_forward():
    net = nn.MlpParams([np.array([[1.0, 2.0]]), np.array([[3.0]])],
                       [np.array([0.5]), np.array([-1.0])], "identity")
    y = nn.forward(net, np.array([0.2]), np.array([[0.1]]))
    assert y[0] == pytest.approx(3.0 * np.tanh(0.2 + 0.2 + 0.5) - 1.0)


@pytest.mark.parametrize("head", ["identity", "logistic"])
def test_input_gradient_finite_differences(head):
    net = _net(head)
    t, x = _points()
    g = nn.input_gradient(net, t, x)
    h = 1e-6
    for j in range(x.shape[1]):
        e = np.zeros_like(x)
        e[:, j] = h
        fd = (nn.forward(net, t, x + e) - nn.forward(net, t, x - e)) / (2 * h)
        assert np.allclose(g[:, j], fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("head", ["identity", "logistic"])
def test_double_backprop_finite_differences(head):
    net = _net(head)
    t, x = _points()
    rng = np.random.default_rng(4)
    cy, cu = rng.normal(size=len(t)), rng.normal(size=x.shape)

    def loss_of(p):
        y, u = nn.forward(p, t, x), nn.input_gradient(p, t, x)
        return np.sum(cy * y) + np.sum(cu * u) + 0.5 * np.sum(u ** 2)

    def evaluator(out):
        y, u = out["f"]
        return float(np.sum(cy * y) + np.sum(cu * u) + 0.5 * np.sum(u ** 2)), \
            {"f": (cy, cu + u)}

    loss, grads = nn.loss_and_param_gradients({"f": (net, t, x, True)}, evaluator)
    assert loss == pytest.approx(loss_of(net))
    flat, g = net.flat(), grads["f"].flat()
    h = 1e-6
    for i in range(0, len(flat), 3):
        e = np.zeros_like(flat)
        e[i] = h
        fd = (loss_of(net.with_flat(flat + e)) - loss_of(net.with_flat(flat - e))) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_adam_first_step_is_lr_times_sign():
    net = _net()
    grads = net.with_flat(np.linspace(-1, 1, net.n_params) + 0.01)
    state = nn.AdamState.for_params(net, lr=0.01)
    new = nn.optimizer_step(net, grads, state)
    step = net.flat() - new.flat()
    assert np.allclose(step, 0.01 * np.sign(grads.flat()), rtol=1e-5)
    assert state.step == 1


def test_adam_matches_textbook_recursion():
    net = nn.MlpParams([np.array([[0.5]])], [np.array([0.0])], "identity")
    st = nn.AdamState.for_params(net, lr=0.1)
    m = v = 0.0
    w = 0.5
    for k, g in enumerate([0.3, -0.2, 0.7], start=1):
        net = nn.optimizer_step(net, nn.MlpParams([np.array([[g]])], [np.array([0.0])],
                                                  "identity"), st)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.1 * (m / (1 - 0.9 ** k)) / (np.sqrt(v / (1 - 0.999 ** k)) + 1e-8)
    assert net.weights[0][0, 0] == pytest.approx(w, rel=1e-12)


def test_checkpoint_round_trip(tmp_path):
    net, pol = _net(), _net("logistic", seed=3)
    opt = nn.AdamState.for_params(net)
    nn.optimizer_step(net, net, opt)
    nn.save_checkpoint(tmp_path / "c.json", stage=7, config_digest="abc",
                       networks={"v": net, "p": pol}, optimizers={"v": opt},
                       extra={"seed": 1})
    ck = nn.load_checkpoint(tmp_path / "c.json")
    assert ck["stage"] == 7 and ck["config_digest"] == "abc" and ck["extra"] == {"seed": 1}
    assert np.array_equal(ck["networks"]["p"].flat(), pol.flat())
    assert ck["networks"]["p"].head == "logistic"
    back = ck["optimizers"]["v"]
    assert back.step == 1 and all(np.array_equal(a, b) for a, b in zip(back.m, opt.m))


def test_checkpoint_rejects_foreign_files(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        nn.load_checkpoint(tmp_path / "x.json")


def test_non_finite_input_rejected():
    with pytest.raises(ValueError):
        nn.forward(_net(), np.array([0.0]), np.array([[np.nan, 0, 0]]))
