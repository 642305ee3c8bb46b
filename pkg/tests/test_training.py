import numpy as np
import pytest

from softalign import (
    ConfigError,
    FeatureSequence,
    LabelVariant,
    LinearModel,
    LossKind,
    LossNormalizer,
    PianoRoll,
    TrainConfig,
    apply_overtones,
    collapse_durations,
    generate_synthetic_dataset,
    model_forward,
    per_frame_baseline_loss,
    sequence_from_rows,
    softdtw_loss_and_grads,
    toy_config,
    toy_dataset,
    train,
)


def norm_rel_err(candidate, reference):
    denom = np.abs(reference).max()
    return np.abs(candidate - reference).max() / (denom if denom > 0 else 1.0)


def small_model(d_in, seed=0):
    rng = np.random.default_rng(seed)
    model = LinearModel.initialize(d_in, rng, scale=0.3)
    model.bias = 0.2 * rng.standard_normal(72)
    return model


class TestModelForward:
    def test_zero_parameters_give_half(self):
        model = LinearModel(weight=np.zeros((72, 5)), bias=np.zeros(72))
        out = model_forward(model, sequence_from_rows(np.random.default_rng(0).random((3, 5))))
        assert np.all(out.frames == 0.5)

    def test_large_bias_saturates_one_bin(self):
        model = LinearModel(weight=np.zeros((72, 4)), bias=np.zeros(72))
        model.bias[10] = 30.0
        out = model_forward(model, sequence_from_rows(np.random.default_rng(1).random((5, 4))))
        assert np.all(out.frames[:, 10] > 1.0 - 1e-12)

    def test_shape_and_range(self):
        rng = np.random.default_rng(2)
        model = small_model(6)
        out = model_forward(model, sequence_from_rows(rng.standard_normal((7, 6))))
        assert out.frames.shape == (7, 72)
        assert np.all((out.frames > 0.0) & (out.frames < 1.0))


class TestLossNormalizer:
    def test_first_use_yields_exactly_one(self):
        norm = LossNormalizer()
        assert norm.normalize(123.456) == 1.0
        assert norm.normalize(61.728) == pytest.approx(0.5, rel=1e-12)

    def test_reference_frozen_after_first_use(self):
        norm = LossNormalizer()
        norm.normalize(10.0)
        norm.normalize(400.0)
        assert norm.reference == 10.0

    def test_zero_first_loss_leaves_values_unscaled(self):
        norm = LossNormalizer()
        assert norm.normalize(0.0) == 0.0
        assert norm.normalize(3.0) == 3.0


class TestSoftdtwLossAndGrads:
    def test_first_batch_loss_exactly_one(self):
        rng = np.random.default_rng(3)
        model = small_model(5)
        x = sequence_from_rows(rng.standard_normal((6, 5)))
        roll = PianoRoll((rng.random((4, 72)) < 0.1).astype(float))
        loss, _, _ = softdtw_loss_and_grads(model, x, roll, 10.0, LossNormalizer())
        assert loss == 1.0

    def test_zero_cost_diagonal_in_hard_limit(self):
        # with target == output the zero-cost diagonal dominates as gamma -> 0;
        # at moderate gamma the soft aggregate dips below zero by construction
        rng = np.random.default_rng(4)
        model = small_model(5)
        x = sequence_from_rows(rng.standard_normal((6, 5)))
        target = model_forward(model, x)
        loss, gw, gb = softdtw_loss_and_grads(model, x, target, 1e-9, LossNormalizer())
        assert loss == pytest.approx(0.0, abs=1e-6)
        assert np.abs(gw).max() == pytest.approx(0.0, abs=1e-9)
        assert np.abs(gb).max() == pytest.approx(0.0, abs=1e-9)
        mid_gamma_loss, _, _ = softdtw_loss_and_grads(
            model, x, target, 1.0, LossNormalizer(reference=1.0)
        )
        assert mid_gamma_loss <= 0.0

    @pytest.mark.parametrize("gamma", [0.5, 10.0, 20.0])
    def test_parameter_gradients_match_finite_differences(self, gamma):
        rng = np.random.default_rng(5)
        d_in = 5
        model = small_model(d_in, seed=6)
        x = sequence_from_rows(rng.standard_normal((6, d_in)))
        roll = PianoRoll((rng.random((4, 72)) < 0.12).astype(float))
        frozen = LossNormalizer(reference=1.0)  # compare raw loss to raw grads
        _, gw, gb = softdtw_loss_and_grads(model, x, roll, gamma, frozen)

        h = 1e-5

        def raw_loss():
            return softdtw_loss_and_grads(model, x, roll, gamma, LossNormalizer(reference=1.0))[0]

        fd_w = np.empty_like(gw)
        for idx in np.ndindex(model.weight.shape):
            keep = model.weight[idx]
            model.weight[idx] = keep + h
            hi = raw_loss()
            model.weight[idx] = keep - h
            lo = raw_loss()
            model.weight[idx] = keep
            fd_w[idx] = (hi - lo) / (2 * h)
        assert norm_rel_err(gw, fd_w) < 1e-4

        fd_b = np.empty_like(gb)
        for i in range(gb.size):
            keep = model.bias[i]
            model.bias[i] = keep + h
            hi = raw_loss()
            model.bias[i] = keep - h
            lo = raw_loss()
            model.bias[i] = keep
            fd_b[i] = (hi - lo) / (2 * h)
        assert norm_rel_err(gb, fd_b) < 1e-4


class TestPerFrameBaseline:
    def test_perfect_prediction_l2(self):
        rng = np.random.default_rng(7)
        model = small_model(5)
        x = sequence_from_rows(rng.standard_normal((4, 5)))
        target = model_forward(model, x)
        loss, gw, gb = per_frame_baseline_loss(model, x, target, LossKind.PER_FRAME_L2)
        assert loss == 0.0
        assert np.abs(gw).max() == 0.0

    def test_half_prediction_cross_entropy_is_ln2(self):
        model = LinearModel(weight=np.zeros((72, 3)), bias=np.zeros(72))
        x = sequence_from_rows(np.zeros((5, 3)))
        roll = PianoRoll((np.random.default_rng(8).random((5, 72)) < 0.3).astype(float))
        loss, _, _ = per_frame_baseline_loss(model, x, roll, LossKind.PER_FRAME_CE)
        assert loss == pytest.approx(np.log(2.0), rel=1e-12)

    @pytest.mark.parametrize("kind", [LossKind.PER_FRAME_L2, LossKind.PER_FRAME_CE])
    def test_gradients_match_finite_differences(self, kind):
        rng = np.random.default_rng(9)
        model = small_model(4, seed=10)
        x = sequence_from_rows(rng.standard_normal((5, 4)))
        roll = PianoRoll((rng.random((5, 72)) < 0.15).astype(float))
        _, gw, gb = per_frame_baseline_loss(model, x, roll, kind)
        h = 1e-5
        fd_w = np.empty_like(gw)
        for idx in np.ndindex(model.weight.shape):
            keep = model.weight[idx]
            model.weight[idx] = keep + h
            hi = per_frame_baseline_loss(model, x, roll, kind)[0]
            model.weight[idx] = keep - h
            lo = per_frame_baseline_loss(model, x, roll, kind)[0]
            model.weight[idx] = keep
            fd_w[idx] = (hi - lo) / (2 * h)
        assert norm_rel_err(gw, fd_w) < 1e-5

    def test_length_mismatch_rejected(self):
        model = small_model(4)
        x = sequence_from_rows(np.zeros((5, 4)))
        roll = PianoRoll(np.zeros((3, 72)))
        with pytest.raises(Exception):
            per_frame_baseline_loss(model, x, roll, LossKind.PER_FRAME_L2)


class TestGenerateSyntheticDataset:
    def test_noiseless_input_equals_overtone_expansion(self):
        data = generate_synthetic_dataset(seed=3, excerpt_count=2, frames=30, polyphony=2, noise_level=0.0)
        for e in data:
            assert np.array_equal(e.input.frames, apply_overtones(e.strong_target).frames)

    def test_strong_and_score_share_run_sequence(self):
        data = generate_synthetic_dataset(seed=4, excerpt_count=3, frames=40, polyphony=3, noise_level=0.1)
        for e in data:
            strong_runs = collapse_durations(e.strong_target).frames
            score_runs = collapse_durations(e.score_target).frames
            assert np.array_equal(strong_runs, score_runs)
            assert len(e.strong_target) == len(e.input)
            assert len(e.score_target) <= len(e.input)

    def test_different_seeds_differ(self):
        a = generate_synthetic_dataset(seed=1, excerpt_count=1, frames=30, polyphony=2, noise_level=0.05)
        b = generate_synthetic_dataset(seed=2, excerpt_count=1, frames=30, polyphony=2, noise_level=0.05)
        assert not np.array_equal(a[0].input.frames, b[0].input.frames)

    def test_same_seed_is_reproducible(self):
        a = generate_synthetic_dataset(seed=5, excerpt_count=2, frames=25, polyphony=2, noise_level=0.05)
        b = generate_synthetic_dataset(seed=5, excerpt_count=2, frames=25, polyphony=2, noise_level=0.05)
        for ea, eb in zip(a, b):
            assert np.array_equal(ea.input.frames, eb.input.frames)
            assert np.array_equal(ea.score_target.frames, eb.score_target.frames)


@pytest.fixture(scope="module")
def mini_data():
    return generate_synthetic_dataset(seed=11, excerpt_count=2, frames=30, polyphony=2, noise_level=0.05)


class TestTrain:

    def test_loss_decreases_over_first_epochs(self):
        single_toy_excerpt = toy_dataset()[:1]
        cfg = toy_config(LabelVariant.COLLAPSE_STRETCH, LossKind.SOFT_ALIGNMENT, epochs=6)
        _, history = train(single_toy_excerpt, cfg)
        losses = [rec.mean_loss for rec in history]
        assert all(b < a for a, b in zip(losses, losses[1:5]))

    def test_strong_softdtw_and_l2_baseline_both_learn_toy_set(self):
        data = toy_dataset()
        _, hist_soft = train(data, toy_config(LabelVariant.STRONG, LossKind.SOFT_ALIGNMENT))
        _, hist_l2 = train(data, toy_config(LabelVariant.STRONG, LossKind.PER_FRAME_L2))
        assert hist_soft[-1].report.f_measure >= 0.9
        assert hist_l2[-1].report.f_measure >= 0.9

    def test_first_recorded_loss_is_exactly_one(self, mini_data):
        for loss_kind in LossKind:
            cfg = TrainConfig(learning_rate=1.0, epochs=1, seed=1,
                              variant=LabelVariant.STRONG, loss_kind=loss_kind)
            _, history = train(mini_data, cfg)
            assert history[0].batch_losses[0] == 1.0

    def test_bit_identical_given_seed(self, mini_data):
        cfg = TrainConfig(learning_rate=1.5, epochs=3, momentum=0.5, seed=9,
                          variant=LabelVariant.COLLAPSE_STRETCH, loss_kind=LossKind.SOFT_ALIGNMENT)
        model_a, hist_a = train(mini_data, cfg)
        model_b, hist_b = train(mini_data, cfg)
        assert np.array_equal(model_a.weight, model_b.weight)
        assert np.array_equal(model_a.bias, model_b.bias)
        for ra, rb in zip(hist_a, hist_b):
            assert ra.batch_losses == rb.batch_losses
            assert ra.report == rb.report

    def test_batch_accumulation_matches_batch_size(self, mini_data):
        cfg = TrainConfig(learning_rate=1.0, epochs=2, seed=3, batch_excerpts=2,
                          variant=LabelVariant.STRONG, loss_kind=LossKind.SOFT_ALIGNMENT)
        _, history = train(mini_data, cfg)
        assert len(history[0].batch_losses) == 1
        assert history[0].batch_losses[0] == 1.0

    def test_invalid_configs_rejected_before_training(self, mini_data):
        with pytest.raises(ConfigError):
            train([], TrainConfig(learning_rate=1.0, epochs=1))
        with pytest.raises(ConfigError):
            train(mini_data, TrainConfig(learning_rate=-1.0, epochs=1))
        with pytest.raises(ConfigError):
            train(mini_data, TrainConfig(learning_rate=1.0, epochs=0))
        with pytest.raises(ConfigError):
            # per-frame loss cannot consume a length-changing variant
            train(mini_data, TrainConfig(learning_rate=1.0, epochs=1,
                                         variant=LabelVariant.COLLAPSE,
                                         loss_kind=LossKind.PER_FRAME_CE))
        with pytest.raises(ConfigError):
            train(mini_data, TrainConfig(learning_rate=1.0, epochs=1,
                                         variant=LabelVariant.OVERTONE,
                                         loss_kind=LossKind.PER_FRAME_CE))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # AP undefined on silence
    def test_all_silence_targets_do_not_diverge(self):
        silent = PianoRoll(np.zeros((20, 72)))
        data = [
            type(generate_synthetic_dataset(1, 1, 20, 2, 0.0)[0])(
                input=FeatureSequence(np.random.default_rng(0).random((20, 72))),
                strong_target=silent,
                score_target=PianoRoll(np.zeros((1, 72))),
            )
        ]
        cfg = TrainConfig(learning_rate=1.0, epochs=3, seed=0,
                          variant=LabelVariant.STRONG, loss_kind=LossKind.SOFT_ALIGNMENT)
        _, history = train(data, cfg)
        assert np.isfinite(history[-1].mean_loss)
