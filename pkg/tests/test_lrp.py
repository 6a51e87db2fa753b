import numpy as np
import pytest

from rccdbg.lrp.propagate import (
    Heatmap,
    LrpConfig,
    TraceMismatchError,
    heatmaps_for_image,
    output_relevance,
    propagate_layer,
    reset_zero_denominator_hits,
    zero_denominator_hits,
)
from rccdbg.lrp.store import load_heatmap_bundle, save_heatmap_bundle
from rccdbg.netcore.layers import Dense, Flatten, MaxPool2d, ReLU
from rccdbg.netcore.network import NetworkModel, Task, forward

from conftest import positive_bias_free_model, random_conv_model


# ------------------------------------------------------------ output seeds

def test_seed_selects_predicted_class_logit():
    task = Task.classification(2)
    seed = output_relevance(np.array([0.2, 3.0]), task)
    assert np.array_equal(seed, [0.0, 3.0])


def test_seed_tie_breaks_to_lowest_index():
    task = Task.classification(2)
    seed = output_relevance(np.array([5.0, 5.0]), task)
    assert np.array_equal(seed, [5.0, 0.0])


def test_regression_seed_passes_output_through():
    task = Task.regression(2, loss_threshold=1.0)
    seed = output_relevance(np.array([1.5, -0.2]), task)
    assert np.array_equal(seed, [1.5, -0.2])


def test_empty_output_rejected():
    with pytest.raises(ValueError, match="empty"):
        output_relevance(np.array([]), Task.classification(2))


def test_true_class_seed_uses_given_label():
    task = Task.classification(3)
    seed = output_relevance(np.array([3.0, 1.0, 2.0]), task, seed_mode="true", true_label=2)
    assert np.array_equal(seed, [0.0, 0.0, 2.0])


# ------------------------------------------------------------ layer rules

def test_dense_identity_routes_relevance_through():
    layer = Dense(2, 2, weight=np.eye(2))
    r_in = propagate_layer(layer, np.array([1.0, 2.0]), np.array([0.0, 2.0]), epsilon=0.0)
    assert np.array_equal(r_in, [0.0, 2.0])


def test_dense_epsilon_rule_hand_example():
    # two inputs, one output: w_i1 = (1, 3), a = (1, 1), z = 4, R_out = 4
    layer = Dense(2, 1, weight=np.array([[1.0, 3.0]]))
    r_in = propagate_layer(layer, np.array([1.0, 1.0]), np.array([4.0]), epsilon=0.0)
    assert np.allclose(r_in, [1.0, 3.0], rtol=0, atol=1e-15)


def test_maxpool_routes_winner_take_all():
    layer = MaxPool2d(2, 1)
    a = np.array([[[1.0, 5.0], [2.0, 3.0]]])
    r_in = propagate_layer(layer, a, np.array([[[7.0]]]), epsilon=0.0)
    assert np.array_equal(r_in, [[[0.0, 7.0], [0.0, 0.0]]])


def test_maxpool_tie_goes_to_first_in_scan_order():
    layer = MaxPool2d(2, 2)
    a = np.array([[[4.0, 4.0], [4.0, 4.0]]])
    r_in = propagate_layer(layer, a, np.array([[[6.0]]]), epsilon=0.0)
    assert np.array_equal(r_in, [[[6.0, 0.0], [0.0, 0.0]]])


def test_flatten_reshapes_relevance():
    layer = Flatten()
    a = np.arange(4.0).reshape(1, 2, 2)
    r_in = propagate_layer(layer, a, np.array([1.0, 2.0, 3.0, 4.0]), epsilon=0.0)
    assert r_in.shape == (1, 2, 2)
    assert np.array_equal(r_in.reshape(-1), [1.0, 2.0, 3.0, 4.0])


def test_zero_denominator_with_zero_epsilon_drops_term_and_warns():
    reset_zero_denominator_hits()
    layer = Dense(2, 2, weight=np.array([[1.0, -1.0], [1.0, 0.0]]))
    # first output: z = a1 - a2 = 0; second: z = a1 = 1
    r_in = propagate_layer(layer, np.array([1.0, 1.0]), np.array([5.0, 1.0]), epsilon=0.0)
    assert zero_denominator_hits() == 1
    assert np.array_equal(r_in, [1.0, 0.0])  # only the z!=0 unit contributes


def test_positive_epsilon_stabilizes_zero_z():
    reset_zero_denominator_hits()
    layer = Dense(2, 1, weight=np.array([[1.0, -1.0]]))
    r_in = propagate_layer(layer, np.array([1.0, 1.0]), np.array([2.0]), epsilon=0.5)
    assert zero_denominator_hits() == 0
    assert np.allclose(r_in, [4.0, -4.0])  # a*w/(0 + 0.5) * 2


# ------------------------------------------------------------ full sweeps

def _traced(model, x):
    out, trace = forward(model, x)
    return out, trace


def test_output_layer_heatmap_equals_seed():
    model = positive_bias_free_model(0)
    x = np.random.default_rng(0).uniform(0.1, 1.0, 4)
    out, trace = _traced(model, x)
    maps = heatmaps_for_image(model, trace, LrpConfig(epsilon=0.0), "img")
    seed = output_relevance(out, model.task)
    assert np.array_equal(maps[-1].relevance, seed)
    assert [m.layer_index for m in maps] == list(range(len(model.layers)))


def test_conservation_exact_for_bias_free_positive_net():
    for seed in range(10):
        model = positive_bias_free_model(seed)
        x = np.random.default_rng(seed).uniform(0.1, 1.0, 4)
        out, trace = _traced(model, x)
        maps = heatmaps_for_image(model, trace, LrpConfig(epsilon=0.0), "img")
        total = out.max()  # seeded logit
        for hm in maps:
            assert abs(hm.relevance.sum() - total) <= 1e-9 * abs(total)


def test_two_layer_hand_computed_table():
    # dense [[1,2],[0,1]] -> relu -> dense [[1,1]]; input (1,1)
    model = NetworkModel(
        [Dense(2, 2, weight=np.array([[1.0, 2.0], [0.0, 1.0]])), ReLU(),
         Dense(2, 1, weight=np.array([[1.0, 1.0]]))],
        Task.regression(1, loss_threshold=1.0), (2,))
    _, trace = _traced(model, np.array([1.0, 1.0]))
    maps = heatmaps_for_image(model, trace, LrpConfig(epsilon=0.0), "img")
    assert np.allclose(maps[2].relevance, [4.0], atol=1e-15)
    assert np.allclose(maps[1].relevance, [3.0, 1.0], atol=1e-15)
    assert np.allclose(maps[0].relevance, [3.0, 1.0], atol=1e-15)


def test_zero_seed_gives_all_zero_heatmaps():
    model = random_conv_model(1)
    x = np.random.default_rng(1).uniform(size=(1, 6, 6))
    _, trace = _traced(model, x)
    # craft a zero trace output so the seed is zero
    trace.entries[-1].output[:] = 0.0
    maps = heatmaps_for_image(model, trace, LrpConfig(epsilon=1e-9), "img")
    for hm in maps:
        assert np.array_equal(hm.relevance, np.zeros_like(hm.relevance))


def test_seed_scaling_scales_every_heatmap_exactly():
    model = random_conv_model(2)
    x = np.random.default_rng(2).uniform(size=(1, 6, 6))
    _, trace = _traced(model, x)
    cfg = LrpConfig(epsilon=1e-9)
    base = heatmaps_for_image(model, trace, cfg, "img")
    scaled_trace_output = trace.entries[-1].output * 4.0
    trace.entries[-1].output[:] = scaled_trace_output
    scaled = heatmaps_for_image(model, trace, cfg, "img")
    for b, s in zip(base, scaled):
        assert np.array_equal(s.relevance, b.relevance * 4.0)


def test_heatmaps_are_deterministic():
    model = random_conv_model(3)
    x = np.random.default_rng(3).uniform(size=(1, 6, 6))
    _, trace = _traced(model, x)
    cfg = LrpConfig()
    a = heatmaps_for_image(model, trace, cfg, "img")
    b = heatmaps_for_image(model, trace, cfg, "img")
    for ha, hb in zip(a, b):
        assert np.array_equal(ha.relevance, hb.relevance)


def test_trace_model_mismatch_rejected():
    model_a = random_conv_model(4)
    model_b = positive_bias_free_model(4)
    x = np.random.default_rng(4).uniform(size=(1, 6, 6))
    _, trace = _traced(model_a, x)
    with pytest.raises(TraceMismatchError):
        heatmaps_for_image(model_b, trace, LrpConfig(), "img")


# ------------------------------------------------------------ bundle store

def test_heatmap_bundle_round_trip(tmp_path):
    ids = ["a", "b", "c"]
    rows = np.random.default_rng(0).uniform(size=(3, 7)).astype(np.float32).astype(np.float64)
    save_heatmap_bundle(tmp_path / "Layer0", ids, rows)
    got_ids, got = load_heatmap_bundle(tmp_path / "Layer0")
    assert got_ids == ids
    assert np.array_equal(got, rows)
    assert (tmp_path / "Layer0" / "heatmaps.bin").stat().st_size == 3 * 7 * 4
