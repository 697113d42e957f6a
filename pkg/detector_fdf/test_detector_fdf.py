import numpy as np
import pytest

from forgery_synth.sources import textured_image
from jpeg_model.exceptions import DegenerateInput, InvalidArgument, NotFound
from jpeg_model.services import encode, parse_jpeg
from jpeg_model.structures import Component, QuantizedJpeg
from jpeg_model.tables import ZIGZAG, quality_to_tables
from tampering_maps.services import window_coverage
from tampering_maps.structures import WindowRect
from .classifiers import LOGISTIC, ClassifierModel, dumps_model, loads_model, predict_score, train_classifier
from .features import extract_features, first_digit, first_digits, sliding_windows, window_features
from .registry import OBLIVIOUS, ClassifierRegistry, nearest_quality, select_classifier
from .services import MULTI_SCALE, SINGLE_SCALE, fdf_map, sliding_window_map
from .training import compression_pair, train_registry, training_set


def jpeg_from(coefficients, quality=90):
    rows, cols = coefficients.shape[:2]
    return QuantizedJpeg(cols * 8, rows * 8, (Component(1, 1, 1, 0, coefficients),),
                         {0: quality_to_tables(quality)[0]})


def blobs(seed=0, n=200, separation=3.0, d=4):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(separation, 1.0, (n, d)), rng.normal(-separation, 1.0, (n, d))])
    y = np.array([1] * n + [0] * n)
    return X, y


class ConstantModel:
    def __init__(self, score):
        self.score = score

    def predict_scores(self, features):
        return np.full(len(features), self.score)


class OrderModel:
    """Scores windows by their position in the visiting order."""

    def predict_scores(self, features):
        return np.linspace(0.0, 1.0, len(features))


@pytest.fixture(scope='module')
def registry(tmp_path_factory):
    registry = ClassifierRegistry(tmp_path_factory.mktemp('models'))
    images = [textured_image(100 + i, 256, 256) for i in range(16)]
    failures = train_registry(registry, images, MULTI_SCALE, window_sizes=[64], qualities=[95],
                              oblivious=True, seed=1, cap=400)
    assert failures == []
    return registry


# --- First digits ---
@pytest.mark.parametrize('value, digit', [(-37, 3), (0, None), (9, 9), (10, 1), (1234, 1), (-500, 5)])
def test_first_digit(value, digit):
    assert first_digit(value) == digit


def test_first_digits_vectorized():
    assert first_digits(np.array([[0, -7], [19, 2048]])).tolist() == [[0, 7], [1, 2]]


# --- Features ---
def test_unit_coefficients_are_all_ones():
    coefficients = np.zeros((4, 4, 64), dtype=np.int32)
    coefficients[..., ZIGZAG[1]] = np.where(np.arange(16).reshape(4, 4) % 2, 1, -1)
    features = extract_features(jpeg_from(coefficients), WindowRect(0, 0, 32, 32), n_modes=2, n_digits=9)
    assert features[:9].tolist() == [1.0] + [0.0] * 8
    assert not features[9:].any()


def test_features_match_a_per_coefficient_tally(single_jpeg):
    rect = WindowRect(16, 24, 16, 16)
    features = extract_features(single_jpeg, rect, n_modes=20, n_digits=9).reshape(20, 9)
    for mode in range(20):
        digits, nonzero = np.zeros(9), 0
        for row in range(2, 4):
            for col in range(3, 5):
                value = abs(int(single_jpeg.luminance[row, col, ZIGZAG[mode + 1]]))
                if value:
                    nonzero += 1
                    digits[int(str(value)[0]) - 1] += 1
        expected = digits / nonzero if nonzero else digits
        np.testing.assert_allclose(features[mode], expected)
        assert features[mode].sum() <= 1 + 1e-12


def test_single_compression_follows_benford_decay():
    monotone = 0
    for seed in range(10):
        j = parse_jpeg(encode(textured_image(seed, 256, 256), 75))
        mode_one = extract_features(j, WindowRect(0, 0, 256, 256), n_modes=1, n_digits=9)
        monotone += bool(np.all(np.diff(mode_one[:4]) <= 0))
    assert monotone >= 9


def test_features_ignore_block_order(single_jpeg):
    rect = WindowRect(32, 32, 64, 64)
    coefficients = np.array(single_jpeg.luminance)
    inside = coefficients[4:12, 4:12].reshape(64, 64)
    coefficients[4:12, 4:12] = inside[np.random.default_rng(0).permutation(64)].reshape(8, 8, 64)
    shuffled = jpeg_from(coefficients)
    assert np.array_equal(extract_features(shuffled, rect), extract_features(single_jpeg, rect))


def test_single_scale_layout(single_jpeg):
    features = extract_features(single_jpeg, WindowRect(0, 0, 64, 64), SINGLE_SCALE.n_modes, SINGLE_SCALE.n_digits)
    assert features.shape == (27,)
    assert np.all((features >= 0) & (features <= 1))


def test_windows_out_of_bounds(single_jpeg):
    with pytest.raises(InvalidArgument):
        extract_features(single_jpeg, WindowRect(224, 0, 64, 64))
    with pytest.raises(InvalidArgument):
        extract_features(single_jpeg, WindowRect(4, 0, 64, 64))


# --- Classifiers ---
def test_separable_blobs_are_learned():
    X, y = blobs()
    model = train_classifier(X, y, seed=3)
    accuracy = np.mean((model.predict_scores(X) > 0.5) == y)
    assert accuracy >= 0.99
    assert model.metadata['calibrated'] is True
    assert model.metadata['n_single'] == model.metadata['n_double'] == 200


def test_flipped_labels_flip_scores():
    X, y = blobs(1, separation=1.0)
    probe = np.random.default_rng(9).uniform(-3, 3, (50, 4))
    scores = train_classifier(X, y, seed=5).predict_scores(probe)
    flipped = train_classifier(X, 1 - y, seed=5).predict_scores(probe)
    np.testing.assert_allclose(flipped, 1 - scores, atol=0.02)


def test_duplicated_samples_do_not_change_the_model():
    X, y = blobs(2, separation=1.0)
    probe = np.random.default_rng(4).uniform(-3, 3, (50, 4))
    once = train_classifier(X, y, seed=0)
    twice = train_classifier(np.vstack([X, X]), np.concatenate([y, y]), seed=0)
    np.testing.assert_allclose(twice.decision_function(probe), once.decision_function(probe), atol=1e-6)


def test_training_rejects_bad_sets():
    X, y = blobs()
    with pytest.raises(InvalidArgument):
        train_classifier(X, np.ones_like(y))
    X[3, 1] = np.nan
    with pytest.raises(InvalidArgument):
        train_classifier(X, y)


def test_logistic_family_trains():
    X, y = blobs(6)
    model = train_classifier(X, y, family=LOGISTIC)
    assert np.mean((model.decision_function(X) > 0) == y) >= 0.99


def test_margin_to_score():
    model = ClassifierModel(LOGISTIC, 1, {'coef': np.array([1.0]), 'intercept': np.float64(0.0)})
    assert predict_score(model, [0.0]) == pytest.approx(0.5)
    assert predict_score(model, [4.0]) == pytest.approx(0.982, abs=1e-3)
    scores = model.predict_scores(np.linspace(-10, 10, 101).reshape(-1, 1))
    assert np.all(np.diff(scores) >= 0)
    with pytest.raises(InvalidArgument):
        predict_score(model, [1.0, 2.0])


def test_model_file_round_trip():
    X, y = blobs(7)
    model = train_classifier(X, y, metadata={'window': 64, 'q2': 95})
    data = dumps_model(model)
    assert data[:4] == b'FDFM'
    assert data[6:22].rstrip(b'\0') == b'svm-rbf'
    loaded = loads_model(data)
    assert (loaded.family, loaded.dims, loaded.calibration) == (model.family, 4, model.calibration)
    assert loaded.metadata['q2'] == 95
    np.testing.assert_array_equal(loaded.decision_function(X), model.decision_function(X))
    with pytest.raises(InvalidArgument):
        loads_model(b'NOPE' + data[4:])
    with pytest.raises(InvalidArgument):
        loads_model(data[:-10])


# --- Registry ---
@pytest.mark.parametrize('available, q2, expected', [
    ([90, 95], 92, 90),
    ([90, 94], 92, 94),
    ([90, 95], 95, 95),
    ([50, 75, 100], 1, 50),
])
def test_nearest_quality(available, q2, expected):
    assert nearest_quality(available, q2) == expected


def test_registry_lookup(tmp_path):
    registry = ClassifierRegistry(tmp_path)
    X, y = blobs(8)
    for key in (90, 94, OBLIVIOUS):
        registry.save(train_classifier(X, y, metadata={'q2': key}), 32, key)
    assert registry.qualities(32) == [90, 94]
    assert registry.window_sizes() == [32]
    assert select_classifier(registry, 32, 92).metadata['q2'] == 94
    assert select_classifier(ClassifierRegistry(tmp_path), 32, 91).metadata['q2'] == 90
    assert select_classifier(registry, 32, 92, OBLIVIOUS).metadata['q2'] == OBLIVIOUS
    with pytest.raises(NotFound):
        select_classifier(registry, 64, 92)
    with pytest.raises(InvalidArgument):
        select_classifier(registry, 32, 92, 'sometimes')
    storage = registry.storage_mb()
    assert set(storage) == {'90', '94', OBLIVIOUS}
    assert all(size > 0 for size in storage.values())


# --- Window maps ---
def test_constant_model_gives_a_uniform_map(single_jpeg):
    m = sliding_window_map(single_jpeg, 32, 8, ConstantModel(0.7))
    assert np.allclose(m.scores, 0.7)


def test_tiling_gives_each_block_its_window_score(single_jpeg):
    m = sliding_window_map(single_jpeg, 64, 64, OrderModel())
    expected = np.kron(np.linspace(0, 1, 16).reshape(4, 4), np.ones((8, 8)))
    np.testing.assert_allclose(m.scores, expected)


def test_window_coverage_counts():
    coverage = window_coverage(sliding_windows((16, 16), 64, 8), (16, 16))
    per_axis = np.array([min(b, 8) - max(0, b - 7) + 1 for b in range(16)])
    assert np.array_equal(coverage, np.outer(per_axis, per_axis))


def test_window_larger_than_image():
    j = parse_jpeg(encode(textured_image(2, 48, 48), 90))
    with pytest.raises(DegenerateInput):
        sliding_window_map(j, 64, 8, ConstantModel(0.5))


def test_last_window_is_flush_with_the_edge():
    windows = sliding_windows((11, 11), 32, 24)
    assert sorted({w.top for w in windows}) == [0, 24, 48, 56]


# --- Training and detection ---
def test_training_set_labels_and_cap():
    images = [textured_image(40 + i, 128, 128) for i in range(3)]
    X, y = training_set(images, 32, MULTI_SCALE, q2=90, rng=np.random.default_rng(0), cap=20)
    assert X.shape == (40, 180)
    assert y.tolist() == [1] * 20 + [0] * 20


def test_compression_pair_shares_the_target_table(texture):
    single, double = compression_pair(texture, 70, 90)
    assert single.luminance_table == double.luminance_table == quality_to_tables(90)[0]
    assert not np.array_equal(single.luminance, double.luminance)


def test_detector_scores_the_forgery_higher(registry, forgery_case, forgery_jpeg):
    m = fdf_map(forgery_jpeg, 64, registry)
    assert m.detector == 'fdf-64'
    assert m.shape == forgery_case.mask.shape
    cells = forgery_case.mask.cells
    assert m.scores[cells].mean() > m.scores[~cells].mean()


def test_oblivious_detector(registry, forgery_jpeg):
    m = fdf_map(forgery_jpeg, 64, registry, mode=OBLIVIOUS, stride=32)
    assert m.shape == (32, 32)
    assert 0 <= m.reliability <= 1


def test_missing_window_model(registry, forgery_jpeg):
    with pytest.raises(NotFound):
        fdf_map(forgery_jpeg, 32, registry)
    with pytest.raises(InvalidArgument):
        fdf_map(forgery_jpeg, 40, registry)


def test_window_features_batch_matches_single(single_jpeg):
    windows = sliding_windows(single_jpeg.block_grid, 16, 48)
    batch = window_features(single_jpeg, windows)
    for k in (0, len(windows) // 2, len(windows) - 1):
        np.testing.assert_array_equal(batch[k], extract_features(single_jpeg, windows[k]))
