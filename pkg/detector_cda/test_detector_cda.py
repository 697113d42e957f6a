from io import StringIO

import numpy as np
import pytest
from django.core.management import call_command

from benchmark.pipeline import read_csv
from forgery_synth.services import synthesize_case
from forgery_synth.sources import synthetic_source
from jpeg_model.exceptions import DegenerateInput, InvalidArgument
from jpeg_model.services import encode, parse_jpeg
from jpeg_model.structures import PixelImage
from tampering_maps.services import logistic_normalize
from .histograms import analysed_frequencies, estimate_single_histogram, observed_histograms
from .mixture import (
    DoubleQuantModel,
    double_probabilities,
    estimate_step,
    fit_block_mixture,
    fit_mixture,
    n_factor,
    single_probabilities,
)
from .services import (
    BGCDA_PHI,
    bgcda_map,
    block_log_likelihoods,
    block_values,
    cda_map,
    dump_histograms,
    frequency_models,
    icda_block_scores,
    icda_map,
    posterior_scores,
)

FIRST_SIX = list(range(1, 7))


def brute_force_counts(q1_step, q2_step, bound=10_000):
    """Histogram of round-half-away(u * q1 / q2) for u in [-bound, bound]."""
    u = np.arange(-bound, bound + 1, dtype=np.int64)
    x = np.sign(u) * ((2 * np.abs(u) * q1_step + q2_step) // (2 * q2_step))
    top = int(x.max())
    return np.bincount(x + top, minlength=2 * top + 1), top


def negative_control(seed, q1=80, q2=95, size=320):
    original, tampered, mask = synthetic_source(seed, size, size)
    return parse_jpeg(synthesize_case(original, tampered, np.zeros_like(mask), q1, q2).jpeg)


def laplacian_counts(bound, scale, total):
    x = np.arange(-bound, bound + 1)
    weights = np.exp(-np.abs(x) / scale)
    return np.round(total * weights / weights.sum())


def masked_means(m, mask):
    return m.scores[mask.cells].mean(), m.scores[~mask.cells].mean()


def total_variation(j):
    observed = observed_histograms(j, FIRST_SIX)
    estimated = estimate_single_histogram(j, FIRST_SIX)
    distance = 0.0
    for f in FIRST_SIX:
        bound = max(observed[f].bound, estimated[f].bound)
        o, e = observed[f].over(bound), estimated[f].over(bound)
        distance += 0.5 * np.abs(o / o.sum() - e / e.sum()).sum()
    return distance


# --- Requantization factor ---
def test_equal_steps_map_one_to_one():
    assert np.all(n_factor(7, 7, np.arange(-50, 51)) == 1)
    assert DoubleQuantModel(7, 7).is_trivial


def test_halving_step_leaves_odd_bins_empty():
    x = np.arange(-20, 21)
    assert np.array_equal(n_factor(2, 1, x), np.where(x % 2 == 0, 1, 0))


def test_small_steps_match_enumeration():
    counts, top = brute_force_counts(3, 2)
    for x in range(6):
        assert n_factor(3, 2, x) == counts[x + top]
    assert [n_factor(3, 2, x) for x in range(6)] == [1, 0, 1, 1, 0, 1]


def test_requantization_grid_matches_enumeration():
    for q1_step in range(1, 17):
        for q2_step in range(1, 17):
            counts, top = brute_force_counts(q1_step, q2_step)
            x = np.arange(-top + 1, top)
            assert np.array_equal(n_factor(q1_step, q2_step, x), counts[1:-1]), (q1_step, q2_step)


def test_model_is_symmetric_and_conserves_bins():
    x = np.arange(1, 200)
    assert np.array_equal(n_factor(5, 3, x), n_factor(5, 3, -x))
    # 60 consecutive first-pass bins starting at 1 land in x = 1..100
    assert n_factor(5, 3, np.arange(1, 101)).sum() == 60


def test_invalid_steps():
    with pytest.raises(InvalidArgument):
        n_factor(0, 3, 1)
    with pytest.raises(InvalidArgument):
        DoubleQuantModel(3, 0)


# --- Histograms ---
def test_flat_image_histograms_are_point_masses():
    j = parse_jpeg(encode(PixelImage(np.full((64, 64), 140, dtype=np.uint8)), 85))
    for histograms in (observed_histograms(j, FIRST_SIX), estimate_single_histogram(j, FIRST_SIX)):
        for h in histograms.values():
            assert h.bound == 0
            assert h.count(0) == h.total > 0


def test_double_compression_leaves_holes():
    for seed in range(10):
        j = negative_control(seed)
        observed = observed_histograms(j, FIRST_SIX)
        estimated = estimate_single_histogram(j, FIRST_SIX)
        holes = 0
        for f in FIRST_SIX:
            x = np.arange(-estimated[f].bound, estimated[f].bound + 1)
            holes += int(np.sum((observed[f].count(x) == 0) & (estimated[f].count(x) > 30)))
        assert holes >= 5, seed


def test_single_compression_estimate_is_closer():
    for seed in range(3):
        original, _, _ = synthetic_source(seed, 320, 320)
        single = parse_jpeg(encode(original, 95))
        assert total_variation(single) < total_variation(negative_control(seed))


def test_estimate_needs_room_for_the_shift():
    j = parse_jpeg(encode(PixelImage(np.full((10, 10), 90, dtype=np.uint8)), 90))
    with pytest.raises(DegenerateInput):
        estimate_single_histogram(j, FIRST_SIX)


# --- EM ---
def test_samples_from_the_single_model_give_a_small_double_weight():
    reference = laplacian_counts(40, 6.0, 20_000)
    p_single = single_probabilities(reference)
    p_double = double_probabilities(reference, DoubleQuantModel(4, 1))
    counts = np.random.default_rng(3).multinomial(20_000, p_single)
    fit = fit_mixture(counts, p_double, p_single)
    assert fit.alpha < 0.05


@pytest.mark.parametrize('seed', range(5))
def test_em_likelihood_never_decreases(seed):
    rng = np.random.default_rng(seed)
    p_double, p_single = rng.dirichlet(np.ones(25)), rng.dirichlet(np.ones(25))
    fit = fit_mixture(rng.integers(0, 50, 25), p_double, p_single, alpha=rng.uniform(0.05, 0.95))
    assert np.all(np.diff(fit.trace) >= -1e-9 * abs(fit.trace[0]))
    blocks = fit_block_mixture(rng.normal(0, 3, 400), rng.normal(0, 3, 400))
    assert np.all(np.diff(blocks.trace) >= -1e-9 * abs(blocks.trace[0]))


def test_step_estimate_recovers_the_first_step():
    reference = laplacian_counts(60, 10.0, 50_000)
    p_mixed = (0.8 * double_probabilities(reference, DoubleQuantModel(4, 1))
               + 0.2 * single_probabilities(reference))
    observed = np.random.default_rng(1).multinomial(50_000, p_mixed)
    estimate = estimate_step(observed, reference, q2_step=1)
    assert estimate.q1_step == 4
    assert estimate.gain >= 10
    assert estimate.alpha == pytest.approx(0.8, abs=0.05)


def test_no_double_component_is_uninformative():
    reference = laplacian_counts(30, 5.0, 10_000)
    observed = np.random.default_rng(2).multinomial(10_000, single_probabilities(reference))
    assert estimate_step(observed, reference, q2_step=1).gain < 10


# --- Posterior and requantization detectors ---
def test_posterior_arithmetic():
    assert posterior_scores(np.log(0.3), np.log(0.1)) == pytest.approx(0.75)
    assert posterior_scores(np.log(0.2), np.log(0.2)) == pytest.approx(0.5)


def test_llr_midpoint():
    assert logistic_normalize(-60.0, BGCDA_PHI) == pytest.approx(0.5)


def test_icda_block_scores_by_hand():
    values = np.array([[2, 3, 0, 5], [1, 2, 0, 0], [0, 0, 0, 0]])
    scores = icda_block_scores(values, [3, 3, 3, 3], [2, 2, 2, 2])
    assert scores[0] == pytest.approx(0.5)
    assert scores[1] == pytest.approx(1 / (1 + 1e-3))
    assert scores[2] == 0.5
    assert icda_block_scores(np.array([[1, 3]]), [2, 2], [3, 3])[0] == pytest.approx(0.2)


def test_icda_equal_steps_is_constant():
    values = np.random.default_rng(0).integers(-20, 20, size=(50, 15))
    assert np.all(icda_block_scores(values, [5] * 15, [5] * 15) == 0.5)


def test_detectors_separate_a_forgery(forgery_case, forgery_jpeg):
    for detector in (cda_map, icda_map, bgcda_map):
        m = detector(forgery_jpeg)
        assert m.shape == forgery_case.mask.shape
        assert np.all((m.scores >= 0) & (m.scores <= 1))
        tampered, authentic = masked_means(m, forgery_case.mask)
        assert tampered > authentic, m.detector


def test_maps_are_deterministic(forgery_jpeg):
    assert cda_map(forgery_jpeg) == cda_map(forgery_jpeg)
    assert icda_map(forgery_jpeg) == icda_map(forgery_jpeg)


def test_bgcda_scores_rise_with_the_single_compression_likelihood(forgery_jpeg):
    frequencies = analysed_frequencies(6)
    models = frequency_models(forgery_jpeg, frequencies, estimate_single_histogram(forgery_jpeg, frequencies))
    log_single, log_double = block_log_likelihoods(block_values(forgery_jpeg, frequencies), models)
    scores = bgcda_map(forgery_jpeg).scores.ravel()
    order = np.argsort(log_single - log_double, kind='stable')
    assert np.all(np.diff(scores[order]) >= 0)


def test_bgcda_nonconvergence_flags_low_reliability(forgery_jpeg):
    assert bgcda_map(forgery_jpeg, max_iter=1).reliability == 0.0
    assert bgcda_map(forgery_jpeg).reliability > 0.0


def test_histogram_dump(tmp_path, forgery_jpeg):
    path = tmp_path / 'histograms.csv'
    written = dump_histograms(forgery_jpeg, path, n_freqs=2, config_hash='00c0ffee')
    rows = read_csv(path)
    assert len(rows) == written
    assert set(rows[0]) == {'frequency', 'bin', 'observed', 'estimated'}
    assert path.read_text().startswith('# config_hash=00c0ffee\n')


def test_histogram_dump_command(tmp_path, forgery_case):
    jpeg = tmp_path / 'case.jpg'
    jpeg.write_bytes(forgery_case.jpeg)
    out = StringIO()
    call_command('dump_histograms', str(jpeg), str(tmp_path / 'h.csv'), '--n-freqs', '2', stdout=out)
    assert 'histogram rows' in out.getvalue()
    assert {row['frequency'] for row in read_csv(tmp_path / 'h.csv')} == {'1', '2'}
