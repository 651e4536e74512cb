import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from gradcheck_util import gradient_agreement, numeric_gradients
from trajcast.errors import (
    LengthMismatchError,
    NonPositiveSigmaError,
    ShapeMismatchError,
)
from trajcast.nnet.layers import (
    conv2d_backward,
    conv2d_forward,
    conv_output_size,
    dense_forward,
    lstm_cell_forward,
)
from trajcast.nnet.losses import loss_nll, loss_nll_grad, loss_point, loss_point_grad
from trajcast.nnet.model import (
    ModelConfig,
    backward,
    forward,
    init_params,
    normalize_rasters,
)
from trajcast.nnet.optim import AdamConfig, AdamState, adam_step, staircase_lr
from trajcast.nnet.train import (
    TrainOptions,
    init_from_point_weights,
    mean_displacement,
    predict_batched,
    train_model,
)
from trajcast.nnet.weights_io import load_weights, save_weights
from trajcast.rng import substream

TINY = dict(conv_blocks=((4, 3, 2), (6, 3, 2)), fc_size=16, horizon=3, raster_n=8)


def tiny_cfg(**overrides):
    base = dict(TINY)
    base.update(overrides)
    return ModelConfig(**base)


def random_inputs(cfg, rng, batch=2, dtype=np.float64):
    rasters = rng.random((batch, 3, cfg.raster_n, cfg.raster_n)).astype(dtype)
    states = rng.normal(0.0, 3.0, (batch, cfg.state_dim)).astype(dtype)
    targets = rng.normal(0.0, 2.0, (batch, cfg.horizon, 2)).astype(dtype)
    return rasters, states, targets


class TestConv:
    def test_matches_naive_convolution(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 7, 7))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        stride = 2
        y, _ = conv2d_forward(x, w, b, stride)
        pad = 1
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        out = conv_output_size(7, 3, stride)
        expected = np.zeros((2, 4, out, out))
        for n in range(2):
            for f in range(4):
                for i in range(out):
                    for j in range(out):
                        patch = xp[n, :, i * stride : i * stride + 3, j * stride : j * stride + 3]
                        expected[n, f, i, j] = np.sum(patch * w[f]) + b[f]
        assert np.allclose(y, expected, atol=1e-12)

    def test_conv_gradcheck(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 2, 6, 6))
        w = rng.normal(size=(3, 2, 3, 3)) * 0.5
        b = rng.normal(size=3)
        target = rng.normal(size=(1, 3, 3, 3))

        def loss_of(params):
            y, _ = conv2d_forward(x, params["w"], params["b"], 2)
            return float(np.sum((y - target) ** 2))

        y, cache = conv2d_forward(x, w, b, 2)
        _, dw, db = conv2d_backward(2.0 * (y - target), cache)
        numeric = numeric_gradients(loss_of, {"w": w, "b": b})
        frac, worst = gradient_agreement({"w": dw, "b": db}, numeric)
        assert frac == 1.0, f"worst relative error {worst}"


class TestLstmCell:
    def test_gradcheck(self):
        rng = np.random.default_rng(2)
        r = 5
        x = rng.normal(size=(2, r))
        h0 = rng.normal(size=(2, r))
        c0 = rng.normal(size=(2, r))
        params = {
            "wx": rng.normal(size=(r, 4 * r)) * 0.4,
            "wh": rng.normal(size=(r, 4 * r)) * 0.4,
            "b": rng.normal(size=4 * r) * 0.1,
        }
        target = rng.normal(size=(2, r))

        def loss_of(p):
            h, c, _ = lstm_cell_forward(x, h0, c0, p["wx"], p["wh"], p["b"])
            return float(np.sum((h - target) ** 2) + np.sum(c**2))

        from trajcast.nnet.layers import lstm_cell_backward

        h, c, cache = lstm_cell_forward(x, h0, c0, params["wx"], params["wh"], params["b"])
        _, _, _, dwx, dwh, db = lstm_cell_backward(2.0 * (h - target), 2.0 * c, cache)
        numeric = numeric_gradients(loss_of, params)
        frac, worst = gradient_agreement({"wx": dwx, "wh": dwh, "b": db}, numeric)
        assert frac == 1.0, f"worst relative error {worst}"


class TestForward:
    def test_zero_params_zero_positions(self):
        cfg = tiny_cfg()
        params = {k: np.zeros_like(v) for k, v in init_params(cfg, np.random.default_rng(0)).items()}
        rasters, states, _ = random_inputs(cfg, np.random.default_rng(1))
        out, _ = forward(params, cfg, rasters, states)
        assert np.all(out.positions == 0.0)
        assert out.sigmas is None

    def test_zero_params_unit_sigma(self):
        cfg = tiny_cfg(output_mode="uncertain")
        params = {k: np.zeros_like(v) for k, v in init_params(cfg, np.random.default_rng(0)).items()}
        rasters, states, _ = random_inputs(cfg, np.random.default_rng(1))
        out, _ = forward(params, cfg, rasters, states)
        assert np.all(out.sigmas == 1.0)

    def test_deterministic(self):
        cfg = tiny_cfg(dropout_rate=0.5)
        params = init_params(cfg, np.random.default_rng(3))
        rasters, states, _ = random_inputs(cfg, np.random.default_rng(4), dtype=np.float32)
        a, _ = forward(params, cfg, rasters, states, substream(7, "dropout"))
        b, _ = forward(params, cfg, rasters, states, substream(7, "dropout"))
        assert np.array_equal(a.positions, b.positions)

    def test_shape_mismatch(self):
        cfg = tiny_cfg()
        params = init_params(cfg, np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            forward(params, cfg, np.zeros((1, 3, 9, 9)), np.zeros((1, 3)))
        with pytest.raises(ShapeMismatchError):
            forward(params, cfg, np.zeros((1, 3, 8, 8)), np.zeros((2, 3)))

    def test_recurrent_shapes(self):
        cfg = tiny_cfg(decoder="recurrent", recurrent_size=8, output_mode="uncertain")
        params = init_params(cfg, np.random.default_rng(0))
        rasters, states, _ = random_inputs(cfg, np.random.default_rng(1))
        out, _ = forward(params, cfg, rasters, states)
        assert out.positions.shape == (2, 3, 2)
        assert out.sigmas.shape == (2, 3)
        assert np.all(out.sigmas > 0)

    def test_normalize_rasters(self):
        img = np.full((2, 8, 8, 3), 255, dtype=np.uint8)
        batch = normalize_rasters(img)
        assert batch.shape == (2, 3, 8, 8)
        assert batch.max() == 1.0


class TestLosses:
    def test_point_examples(self):
        assert loss_point(np.zeros((1, 5, 2)), np.zeros((1, 5, 2))) == 0.0
        pred = np.array([[[0.0, 0.0]]])
        gt = np.array([[[3.0, 4.0]]])
        assert loss_point(pred, gt) == pytest.approx(25.0)
        pred2 = np.array([[[0.0, 0.0], [1.0, 1.0]]])
        gt2 = np.array([[[3.0, 4.0], [1.0, 1.0]]])
        assert loss_point(pred2, gt2) == pytest.approx(12.5)

    def test_point_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            loss_point(np.zeros((1, 5, 2)), np.zeros((1, 4, 2)))

    def test_nll_examples(self):
        gt = np.array([[[0.0, 0.0]]])
        assert loss_nll(np.zeros((1, 1, 2)), np.ones((1, 1)), gt) == 0.0
        pred = np.array([[[1.0, 0.0]]])
        assert loss_nll(pred, np.ones((1, 1)), gt) == pytest.approx(0.5)

    def test_nll_rejects_nonpositive_sigma(self):
        with pytest.raises(NonPositiveSigmaError):
            loss_nll(np.zeros((1, 1, 2)), np.zeros((1, 1)), np.zeros((1, 1, 2)))

    def test_nll_sigma_argmin_is_displacement(self):
        # The per-point optimum of d^2/(2 s^2) + log(s) sits at s = d.
        for d in (0.3, 1.0, 2.7):
            res = minimize_scalar(
                lambda s: d**2 / (2 * s**2) + math.log(s),
                bounds=(1e-3, 50.0),
                method="bounded",
                options={"xatol": 1e-9},
            )
            assert res.x == pytest.approx(d, abs=1e-6)
            grad = loss_nll_grad(
                np.array([[[d, 0.0]]]), np.array([[d]]), np.zeros((1, 1, 2))
            )[2]
            assert grad[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_nll_unit_sigma_relates_to_point_loss(self):
        rng = np.random.default_rng(0)
        pred = rng.normal(size=(4, 7, 2))
        gt = rng.normal(size=(4, 7, 2))
        h = 7
        nll = loss_nll(pred, np.ones((4, 7)), gt)
        point = loss_point(pred, gt)
        assert nll == pytest.approx((h / 2.0) * point, rel=1e-12)

    def test_loss_grads_match_finite_differences(self):
        rng = np.random.default_rng(5)
        pred = rng.normal(size=(2, 3, 2))
        sig = np.exp(rng.normal(size=(2, 3)) * 0.3)
        gt = rng.normal(size=(2, 3, 2))

        def point_of(p):
            return loss_point(p["pred"], gt)

        value, d_pred = loss_point_grad(pred, gt)
        numeric = numeric_gradients(point_of, {"pred": pred})
        frac, worst = gradient_agreement({"pred": d_pred}, numeric)
        assert frac == 1.0, worst

        def nll_of(p):
            return loss_nll(p["pred"], p["sig"], gt)

        _, d_pred, d_sig = loss_nll_grad(pred, sig, gt)
        numeric = numeric_gradients(nll_of, {"pred": pred, "sig": sig})
        frac, worst = gradient_agreement({"pred": d_pred, "sig": d_sig}, numeric)
        assert frac == 1.0, worst


def model_loss_fn(cfg, rasters, states, targets, dropout_seed=None):
    def loss_of(params):
        rng = substream(dropout_seed, "dropout") if dropout_seed is not None else None
        out, _ = forward(params, cfg, rasters, states, rng)
        if cfg.output_mode == "point":
            return loss_point(out.positions, targets)
        return loss_nll(out.positions, out.sigmas, targets)

    return loss_of


def analytic_model_grads(cfg, params, rasters, states, targets, dropout_seed=None):
    rng = substream(dropout_seed, "dropout") if dropout_seed is not None else None
    out, cache = forward(params, cfg, rasters, states, rng)
    if cfg.output_mode == "point":
        _, d_pos = loss_point_grad(out.positions, targets)
        return backward(cache, d_pos)
    _, d_pos, d_sig = loss_nll_grad(out.positions, out.sigmas, targets)
    return backward(cache, d_pos, d_sig)


@pytest.mark.parametrize("decoder", ["feedforward", "recurrent"])
@pytest.mark.parametrize("mode", ["point", "uncertain"])
def test_full_model_gradcheck(decoder, mode):
    cfg = tiny_cfg(decoder=decoder, output_mode=mode, recurrent_size=6)
    rng = np.random.default_rng(11)
    params = init_params(cfg, rng, np.float64)
    rasters, states, targets = random_inputs(cfg, rng)
    analytic = analytic_model_grads(cfg, params, rasters, states, targets)
    numeric = numeric_gradients(model_loss_fn(cfg, rasters, states, targets), params)
    frac, worst = gradient_agreement(analytic, numeric)
    assert frac == 1.0, f"{decoder}/{mode}: worst relative error {worst}"


def test_gradcheck_with_dropout_active():
    cfg = tiny_cfg(dropout_rate=0.4)
    rng = np.random.default_rng(13)
    params = init_params(cfg, rng, np.float64)
    rasters, states, targets = random_inputs(cfg, rng)
    analytic = analytic_model_grads(cfg, params, rasters, states, targets, dropout_seed=99)
    numeric = numeric_gradients(
        model_loss_fn(cfg, rasters, states, targets, dropout_seed=99), params
    )
    frac, worst = gradient_agreement(analytic, numeric)
    assert frac == 1.0, f"worst relative error {worst}"


def test_zero_loss_means_zero_position_gradients():
    cfg = tiny_cfg()
    rng = np.random.default_rng(17)
    params = init_params(cfg, rng, np.float64)
    rasters, states, _ = random_inputs(cfg, rng)
    out, cache = forward(params, cfg, rasters, states)
    _, d_pos = loss_point_grad(out.positions, out.positions.copy())
    grads = backward(cache, d_pos)
    assert all(np.allclose(g, 0.0) for g in grads.values())


def test_doubled_loss_doubles_gradients():
    cfg = tiny_cfg()
    rng = np.random.default_rng(19)
    params = init_params(cfg, rng, np.float64)
    rasters, states, targets = random_inputs(cfg, rng)
    out, cache = forward(params, cfg, rasters, states)
    _, d_pos = loss_point_grad(out.positions, targets)
    g1 = backward(cache, d_pos)
    out2, cache2 = forward(params, cfg, rasters, states)
    g2 = backward(cache2, 2.0 * d_pos)
    for name in g1:
        assert np.allclose(2.0 * g1[name], g2[name], rtol=1e-12)


class TestAdam:
    def test_zero_gradients_keep_params(self):
        params = {"w": np.ones((3, 3), dtype=np.float64)}
        state = AdamState(params)
        adam_step(params, {"w": np.zeros((3, 3))}, state)
        assert np.array_equal(params["w"], np.ones((3, 3)))

    def test_constant_gradient_unit_step(self):
        # With a constant gradient the bias-corrected update tends to lr.
        cfg = AdamConfig(lr0=1e-3, decay_every=10**9)
        params = {"w": np.zeros(1, dtype=np.float64)}
        state = AdamState(params)
        g = {"w": np.full(1, 0.37)}
        prev = params["w"].copy()
        for _ in range(400):
            prev = params["w"].copy()
            adam_step(params, g, state, cfg)
        # Closed-form recursion: m_hat/sqrt(v_hat) -> 1, so step -> lr.
        assert abs(prev[0] - params["w"][0]) == pytest.approx(cfg.lr0, rel=1e-6)

    def test_paper_schedule(self):
        cfg = AdamConfig(lr0=1e-4, decay_factor=0.9, decay_every=20000)
        assert staircase_lr(cfg, 0) == pytest.approx(1e-4)
        assert staircase_lr(cfg, 19999) == pytest.approx(1e-4)
        assert staircase_lr(cfg, 20000) == pytest.approx(1e-4 * 0.9)
        assert staircase_lr(cfg, 60000) == pytest.approx(1e-4 * 0.9**3)


class TestTraining:
    def test_memorizes_single_example(self):
        cfg = tiny_cfg(horizon=5)
        rng = np.random.default_rng(23)
        rasters = (rng.random((1, 8, 8, 3)) * 255).astype(np.uint8)
        states = np.array([[3.0, 0.1, 0.0]])
        targets = rng.normal(0.0, 1.5, (1, 5, 2))
        opts = TrainOptions(batch_size=1, epochs=500, seed=0, lr0=1e-2, decay_every=10**9)
        params, history = train_model(cfg, rasters, states, targets, opts)
        assert history[-1]["train_loss"] < 1e-3

    def test_reproducible_loss_curve(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(29)
        rasters = (rng.random((12, 8, 8, 3)) * 255).astype(np.uint8)
        states = rng.normal(size=(12, 3))
        targets = rng.normal(size=(12, 3, 2))
        opts = TrainOptions(batch_size=4, epochs=3, seed=5, dtype="float64")
        _, h1 = train_model(cfg, rasters, states, targets, opts)
        _, h2 = train_model(cfg, rasters, states, targets, opts)
        for r1, r2 in zip(h1, h2):
            assert r1["train_loss"] == pytest.approx(r2["train_loss"], abs=1e-12)

    def test_finetune_keeps_point_head(self):
        point_cfg = tiny_cfg()
        rng = np.random.default_rng(31)
        rasters = (rng.random((6, 8, 8, 3)) * 255).astype(np.uint8)
        states = rng.normal(size=(6, 3)).astype(np.float64)
        targets = rng.normal(size=(6, 3, 2))
        opts = TrainOptions(batch_size=3, epochs=2, seed=1)
        point_params, _ = train_model(point_cfg, rasters, states, targets, opts)
        unc_cfg = tiny_cfg(output_mode="uncertain")
        unc_params = init_from_point_weights(unc_cfg, point_cfg, point_params, substream(1, "ft"))
        out_point = predict_batched(point_params, point_cfg, rasters, states)
        out_unc = predict_batched(unc_params, unc_cfg, rasters, states)
        assert np.allclose(out_point.positions, out_unc.positions, atol=1e-6)
        d_point = mean_displacement(out_point.positions, targets)
        d_unc = mean_displacement(out_unc.positions, targets)
        assert d_unc == pytest.approx(d_point, rel=1e-5)

    def test_finetune_rejects_mismatched_trunk(self):
        point_cfg = tiny_cfg()
        unc_cfg = tiny_cfg(output_mode="uncertain", fc_size=32)
        params = init_params(point_cfg, np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            init_from_point_weights(unc_cfg, point_cfg, params, np.random.default_rng(1))

    def test_zero_epochs_returns_init(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(37)
        rasters = (rng.random((4, 8, 8, 3)) * 255).astype(np.uint8)
        states = rng.normal(size=(4, 3))
        targets = rng.normal(size=(4, 3, 2))
        init = init_params(cfg, substream(0, "init"), np.float32)
        params, history = train_model(
            cfg, rasters, states, targets, TrainOptions(epochs=0, seed=0)
        )
        assert history == []
        for name in init:
            assert np.array_equal(params[name], init[name])


class TestWeightsIO:
    def test_round_trip(self, tmp_path):
        cfg = tiny_cfg(output_mode="uncertain")
        params = init_params(cfg, np.random.default_rng(41))
        path = tmp_path / "model.tcw"
        save_weights(path, cfg, params)
        cfg2, params2 = load_weights(path)
        assert cfg2 == cfg
        for name in params:
            assert np.allclose(params[name], params2[name], atol=1e-7)

    def test_shape_validation(self, tmp_path):
        cfg = tiny_cfg()
        params = init_params(cfg, np.random.default_rng(43))
        params["fc.w"] = params["fc.w"][:, :-1]
        path = tmp_path / "bad.tcw"
        save_weights(path, cfg, params)
        with pytest.raises(ShapeMismatchError):
            load_weights(path)

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.tcw"
        path.write_bytes(b"not a weights file")
        with pytest.raises(ValueError):
            load_weights(path)
