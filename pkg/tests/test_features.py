"""Feature extraction, classifier, and selection tests.

The gradient check uses central differences as the oracle; selection tests
use constructed datasets whose correct answers are known analytically (a
jointly-separable pair whose members are individually near chance, exact
duplicate columns for the tie rule).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsplice.features import (
    FEATURE_NAMES,
    N_FEATURES,
    NON_AD_LABEL,
    DegenerateTrainingSet,
    FeatureDecision,
    LogisticModel,
    SelectionResult,
    TrainConfig,
    classify_segment_features,
    evaluate_accuracy,
    fit_detector,
    logistic_grad,
    logistic_loss,
    select_features,
    shot_features,
    stratified_folds,
    train_classifier,
    weighted_vote,
)
from adsplice.media import AudioBlock, Frame, expected_samples
from adsplice.shots import Shot

from helpers import FPS30, flat_frame, flat_segment, make_segment, tone


# ---------------------------------------------------------------------------
# feature vector layout and extraction


def test_feature_names():
    assert N_FEATURES == 30
    assert len(set(FEATURE_NAMES)) == 30
    assert FEATURE_NAMES[0] == "mfcc_mean_0"
    assert FEATURE_NAMES[12] == "mfcc_mean_12"
    assert FEATURE_NAMES[13] == "mfcc_std_0"
    assert FEATURE_NAMES[26] == "luma_mean"
    assert FEATURE_NAMES[27] == "luma_var"
    assert FEATURE_NAMES[28] == "motion_mean"
    assert FEATURE_NAMES[29] == "cut_rate"


def test_constant_silent_shot_features():
    seg = flat_segment(16, 90)
    v = shot_features(seg, Shot(0, 15))
    assert v.shape == (30,)
    assert v[0] == pytest.approx(-117.40926320884495, abs=1e-9)  # silence
    assert v[13] == pytest.approx(0.0, abs=1e-9)                 # no variation
    assert v[26] == 90.0
    assert v[27] == 0.0
    assert v[28] == 0.0
    assert v[29] == 0.0


def test_pooled_luma_and_motion():
    frames = [flat_frame(32, 24, 10), flat_frame(32, 24, 20)]
    seg = make_segment(frames)
    v = shot_features(seg, Shot(0, 1))
    assert v[26] == 15.0   # pooled mean
    assert v[27] == 25.0   # pooled variance
    assert v[28] == 10.0   # one frame pair, diff 10


def test_audio_slice_follows_shot_bounds():
    # 30 frames at 30 fps: silence in the first half, a loud tone after
    n = expected_samples(30, FPS30, 16000)
    half = n // 2
    samples = np.concatenate(
        [np.zeros(half, dtype=np.int16), tone(1000, n - half).samples]
    )
    seg = make_segment(
        [flat_frame(32, 24, 50)] * 30, audio=AudioBlock(16000, samples)
    )
    quiet = shot_features(seg, Shot(0, 14))
    loud = shot_features(seg, Shot(15, 29))
    assert quiet[0] == pytest.approx(-117.40926320884495, abs=1e-6)
    assert loud[0] > -60.0


# ---------------------------------------------------------------------------
# loss and gradient


def _random_instance(rng, n=12, d=4, c=3):
    X = np.hstack([np.ones((n, 1)), rng.normal(size=(n, d - 1))])
    Y = np.zeros((n, c))
    Y[np.arange(n), rng.integers(0, c, size=n)] = 1.0
    W = rng.normal(scale=0.5, size=(c, d))
    return W, X, Y


def central_difference_grad(W, X, Y, h=1e-5):
    g = np.zeros_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            up, down = W.copy(), W.copy()
            up[i, j] += h
            down[i, j] -= h
            g[i, j] = (logistic_loss(up, X, Y) - logistic_loss(down, X, Y)) / (2 * h)
    return g


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=15)
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    W, X, Y = _random_instance(rng)
    ana = logistic_grad(W, X, Y)
    num = central_difference_grad(W, X, Y)
    assert np.all(np.abs(ana - num) <= 1e-6 * np.maximum(1.0, np.abs(ana)))


def test_loss_at_zero_weights():
    # sigmoid(0) = 0.5 for every output: loss = C * ln 2 per sample
    rng = np.random.default_rng(0)
    _, X, Y = _random_instance(rng, n=20, d=5, c=3)
    W = np.zeros((3, 5))
    assert logistic_loss(W, X, Y) == pytest.approx(3 * math.log(2), rel=1e-12)


def test_loss_is_finite_for_extreme_weights():
    rng = np.random.default_rng(1)
    W, X, Y = _random_instance(rng)
    assert np.isfinite(logistic_loss(W * 1e4, X, Y))


# ---------------------------------------------------------------------------
# training


def _blobs(rng, centers, n_per, spread=0.5):
    X, y = [], []
    for label, c in centers.items():
        X.append(rng.normal(loc=c, scale=spread, size=(n_per, len(c))))
        y.extend([label] * n_per)
    return np.vstack(X), y


def test_training_reduces_loss_and_separates():
    rng = np.random.default_rng(2)
    X, y = _blobs(rng, {"a": (0, 0), "b": (4, 4)}, 20)
    model = train_classifier(X, y, (0, 1))
    assert evaluate_accuracy(model, X, y) == 1.0


def test_three_class_one_vs_rest():
    rng = np.random.default_rng(3)
    X, y = _blobs(rng, {"a": (0, 0), "b": (6, 0), "c": (0, 6)}, 25)
    Xt, yt = _blobs(rng, {"a": (0, 0), "b": (6, 0), "c": (0, 6)}, 10)
    model = train_classifier(X, y, (0, 1))
    assert model.weights.shape == (3, 3)
    assert evaluate_accuracy(model, Xt, yt) >= 0.95


def test_training_is_deterministic():
    rng = np.random.default_rng(4)
    X, y = _blobs(rng, {"a": (0, 0), "b": (3, 3)}, 15)
    m1 = train_classifier(X, y, (0, 1))
    m2 = train_classifier(X, y, (0, 1))
    assert np.array_equal(m1.weights, m2.weights)


def test_normalization_makes_predictions_scale_invariant():
    rng = np.random.default_rng(5)
    X, y = _blobs(rng, {"a": (0, 0), "b": (2, 2)}, 20)
    Xt = rng.normal(loc=1, scale=2, size=(30, 2))
    base = train_classifier(X, y, (0, 1)).predict(Xt)
    scaled = train_classifier(X * 5 + 3, y, (0, 1)).predict(Xt * 5 + 3)
    assert base == scaled


def test_constant_feature_is_harmless():
    rng = np.random.default_rng(6)
    X, y = _blobs(rng, {"a": (0, 0), "b": (4, 4)}, 15)
    X = np.hstack([X, np.full((len(X), 1), 7.0)])
    model = train_classifier(X, y, (0, 1, 2))
    assert np.all(np.isfinite(model.weights))
    assert evaluate_accuracy(model, X, y) == 1.0


def test_model_json_round_trip():
    rng = np.random.default_rng(7)
    X, y = _blobs(rng, {"a": (0, 0), "b": (4, 4)}, 15)
    model = train_classifier(X, y, (0, 1))
    back = LogisticModel.from_json(model.to_json())
    assert back.classes == model.classes
    assert np.array_equal(back.weights, model.weights)
    assert back.predict(X) == model.predict(X)


# ---------------------------------------------------------------------------
# stratified folds


def test_folds_partition_and_balance():
    y = ["a"] * 10 + ["b"] * 10
    folds = stratified_folds(y, 5)
    all_idx = sorted(i for f in folds for i in f)
    assert all_idx == list(range(20))
    for f in folds:
        labels = [y[i] for i in f]
        assert labels.count("a") == 2 and labels.count("b") == 2


def test_folds_handle_uneven_classes():
    y = ["a"] * 7 + ["b"] * 11
    folds = stratified_folds(y, 5)
    assert sorted(i for f in folds for i in f) == list(range(18))
    for f in folds:
        counts = [sum(1 for i in f if y[i] == c) for c in ("a", "b")]
        assert abs(counts[0] - 7 / 5) <= 1 and abs(counts[1] - 11 / 5) <= 1


def test_folds_deterministic():
    y = ["a"] * 9 + ["b"] * 9
    f1 = stratified_folds(y, 5)
    f2 = stratified_folds(y, 5)
    assert all(np.array_equal(a, b) for a, b in zip(f1, f2))


# ---------------------------------------------------------------------------
# greedy forward selection


def test_degenerate_training_sets_rejected():
    X = np.zeros((12, 3))
    with pytest.raises(DegenerateTrainingSet):
        select_features(X, ["a"] * 12)
    with pytest.raises(DegenerateTrainingSet):
        select_features(X[:9], ["a"] * 5 + ["b"] * 4)


def _stripe_data(n_per=30):
    # class boundary is x0 + x1 = 0; each coordinate alone is ambiguous
    x0 = np.linspace(-2, 2, n_per)
    a = np.column_stack([x0, -x0 + 1.0])
    b = np.column_stack([x0, -x0 - 1.0])
    X = np.vstack([a, b])
    y = ["pos"] * n_per + ["neg"] * n_per
    return X, y


def test_jointly_separable_pair_is_found():
    X, y = _stripe_data()
    result = select_features(X, y)
    assert sorted(result.indices) == [0, 1]
    assert result.accuracies[-1] >= 0.95


def test_duplicate_columns_tie_to_lowest_index():
    rng = np.random.default_rng(8)
    X1, y = _blobs(rng, {"a": (0.0,), "b": (3.0,)}, 20)
    X = np.hstack([X1, X1.copy()])  # columns 0 and 1 identical
    result = select_features(X, y)
    assert result.indices == (0,)  # tie on round 1; no gain on round 2


def test_first_feature_kept_even_when_uninformative():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(24, 1))
    y = ["a", "b"] * 12
    result = select_features(X, y)
    assert result.indices == (0,)


def test_k_max_caps_selection():
    X, y = _stripe_data()
    result = select_features(X, y, k_max=1)
    assert len(result.indices) == 1


def test_selection_deterministic():
    X, y = _stripe_data()
    assert select_features(X, y) == select_features(X, y)


def test_noise_feature_does_not_pass_gain_threshold():
    rng = np.random.default_rng(10)
    X1, y = _blobs(rng, {"a": (0.0,), "b": (4.0,)}, 25, spread=0.4)
    X = np.hstack([X1, rng.normal(size=(len(X1), 1))])
    result = select_features(X, y)
    assert result.indices == (0,)


# ---------------------------------------------------------------------------
# voting


def test_weighted_vote_majority_by_frames():
    shots = [Shot(0, 39), Shot(40, 59)]  # 40 + 20 frames
    assert weighted_vote(shots, ["auto", NON_AD_LABEL], 60) == (True, "auto")
    assert weighted_vote(shots, [NON_AD_LABEL, "auto"], 60) == (False, None)


def test_weighted_vote_exact_half_is_not_ad():
    shots = [Shot(0, 29), Shot(30, 59)]
    assert weighted_vote(shots, ["auto", NON_AD_LABEL], 60) == (False, None)


def test_weighted_vote_category_ties_lexicographic():
    shots = [Shot(0, 19), Shot(20, 39), Shot(40, 49)]
    is_ad, cat = weighted_vote(shots, ["tech", "auto", "auto"], 50)
    assert is_ad
    # tech covers 20 frames, auto covers 30: auto wins outright
    assert cat == "auto"
    is_ad, cat = weighted_vote(
        [Shot(0, 19), Shot(20, 39), Shot(40, 49)], ["tech", "food", NON_AD_LABEL], 50
    )
    assert (is_ad, cat) == (True, "food")  # 20 vs 20 frames: lexicographic


# ---------------------------------------------------------------------------
# end-to-end over synthetic segments


def _scene_segment(luma, freq, n_frames=30, seed=0):
    rng = np.random.default_rng(seed)
    base = np.clip(
        rng.integers(luma - 10, luma + 10, size=(24, 32)), 0, 255
    ).astype(np.uint8)
    frames = [Frame(np.roll(base, k, axis=1)) for k in range(n_frames)]
    n = expected_samples(n_frames, FPS30, 16000)
    return make_segment(frames, audio=tone(freq, n, amplitude=6000))


def test_classify_segment_features_end_to_end():
    train_segments = [
        (_scene_segment(170, 500, seed=s), NON_AD_LABEL) for s in range(6)
    ] + [(_scene_segment(60, 1300, seed=100 + s), "food") for s in range(6)]
    X, y = [], []
    for seg, label in train_segments:
        for shot in [Shot(0, seg.frame_count - 1)]:
            X.append(shot_features(seg, shot))
            y.append(label)
    model = fit_detector(np.stack(X), y, TrainConfig(epochs=200))

    program = _scene_segment(170, 500, seed=50)
    ad = _scene_segment(60, 1300, seed=51)
    d_prog = classify_segment_features(program, model)
    d_ad = classify_segment_features(ad, model)
    assert not d_prog.is_ad and d_prog.category is None
    assert d_ad.is_ad and d_ad.category == "food"
