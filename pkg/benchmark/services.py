"""Pipeline stages behind the management commands.

Every stage reads and writes the run directory only, skips outputs that
already exist unless the run is forced, and reports how many work items
failed so the command can exit with a partial-failure status.
"""
import logging
import time
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from detector_fdf.registry import ClassifierRegistry
from detector_fdf.services import LAYOUTS
from detector_fdf.training import train_registry
from evaluation import reports
from evaluation.services import evaluate_map, read_records, write_records
from forgery_synth.services import build_corpus, coverage, read_manifest
from forgery_synth.sources import IMAGE_SUFFIXES, discover_sources, textured_image, write_synthetic_sources
from fusion.gridsearch import DEFAULT_GRID, grid_search, write_grid_search, write_profiles
from fusion.services import fused_map
from jpeg_model.exceptions import ForensicsError, InvalidArgument, NotFound
from jpeg_model.services import parse_jpeg
from jpeg_model.structures import PixelImage
from tampering_maps.io import dumps_tmap, read_pbm, read_tmap

from .detectors import FUSED, detector, is_fused
from .pipeline import RunLayout, atomic_write, read_csv, run_parallel, write_csv

logger = logging.getLogger(__name__)

TIMING_HEADER = ('case_id', 'detector', 'seconds')
ERROR_HEADER = ('stage', 'case_id', 'detector', 'error')


@dataclass(frozen=True)
class StageResult:
    path: Path
    done: int = 0
    skipped: int = 0
    failed: int = 0


def _describe(error):
    return f'{type(error).__name__}: {error}'


def _check_error(error):
    """Per-item failures the run carries on from; anything else is a bug and propagates."""
    if not isinstance(error, (ForensicsError, OSError, KeyError)):
        raise error


def _cases(layout):
    if not layout.manifest.exists():
        raise NotFound(f'no manifest at {layout.manifest}; run synth first')
    return [row for row in read_manifest(layout.manifest) if not row['error']]


def _record_errors(layout, stage, errors, config_hash):
    """Replace the stage's rows in the error log with ``errors``."""
    rows = []
    if layout.errors.exists():
        rows = [[r['stage'], r['case_id'], r['detector'], r['error']] for r in read_csv(layout.errors)
                if r['stage'] != stage]
    rows.extend([stage, *error] for error in errors)
    if rows or layout.errors.exists():
        write_csv(layout.errors, ERROR_HEADER, rows, config_hash)


def _record_timing(layout, timings, config_hash):
    """Merge (case_id, detector, seconds) rows into the timing log, newest wins."""
    merged = {}
    if layout.timing.exists():
        merged = {(r['case_id'], r['detector']): r['seconds'] for r in read_csv(layout.timing)}
    merged.update({(case_id, name): f'{seconds:.6f}' for case_id, name, seconds in timings})
    write_csv(layout.timing, TIMING_HEADER, [[*key, value] for key, value in sorted(merged.items())], config_hash)


# --- synth ---
def cmd_synth(config):
    """Synthesize the forgery corpus; sources default to generated textures."""
    layout = RunLayout(config.output_dir)
    seed = config.require_seed('synth')
    corpus = config['corpus']
    if corpus['sources']:
        sources = discover_sources(corpus['sources'])
    else:
        size = corpus['synthetic_size']
        sources = write_synthetic_sources(layout.sources_dir, corpus['synthetic_count'], seed, size, size)
    if not sources:
        raise InvalidArgument('no source triples found')
    manifest = build_corpus({**corpus, 'seed': seed}, sources, layout.root, config.config_hash, config.workers,
                            config.force)
    rows = read_manifest(manifest)
    failed = sum(1 for row in rows if row['error'])
    return StageResult(manifest, done=len(rows) - failed, failed=failed)


# --- train ---
def training_images(config, seed):
    train = config['train']
    if train['sources']:
        directory = Path(train['sources'])
        paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not paths:
            raise InvalidArgument(f'no training images in {directory}')
        return [PixelImage.open(p) for p in paths]
    size = train['synthetic_size']
    return [textured_image([seed, 7919, index], size, size) for index in range(train['synthetic_count'])]


def cmd_train(config):
    """Train quality-aware and oblivious window classifiers for each configured family."""
    layout = RunLayout(config.output_dir)
    seed = config.require_seed('train')
    train = config['train']
    images = training_images(config, seed)
    failed = []
    for family in train['families']:
        feature_layout = LAYOUTS[family]
        window_sizes = [w for w in (train['window_sizes'] or feature_layout.window_sizes) if w in feature_layout.window_sizes]
        if not window_sizes:
            logger.warning('No configured window size applies to %s', family)
            continue
        registry = ClassifierRegistry(layout.models_dir, family)
        failed += [
            (family, job, error) for job, error in train_registry(
                registry, images, feature_layout, window_sizes, train['qualities'], train['oblivious'], seed,
                train['cap'], workers=config.workers, force=config.force,
            )
        ]
    for family, job, error in failed:
        _check_error(error)
    _record_errors(layout, 'train', [(f'{job[1]}', f'{family}-{job[0]}', _describe(error))
                                     for family, job, error in failed], config.config_hash)
    return StageResult(layout.models_dir, failed=len(failed))


# --- detect ---
def _detect_one(item, root, models_dir, mode, stride, config_hash, force):
    case_id, jpeg_path, name = item
    layout = RunLayout(root)
    path = layout.map_path(name, case_id)
    if path.exists() and not force:
        return None
    j = parse_jpeg((layout.root / jpeg_path).read_bytes())
    run = detector(name, models_dir, mode, stride)
    start = time.perf_counter()
    m = run(j)
    seconds = time.perf_counter() - start
    atomic_write(path, dumps_tmap(m, config_hash))
    return seconds


def cmd_detect(config):
    """One map file per (case, detector) plus the per-case timing log."""
    layout = RunLayout(config.output_dir)
    detect = config['detect']
    names = [name for name in detect['detectors'] if not is_fused(name)]
    items = [(row['case_id'], row['jpeg_path'], name) for row in _cases(layout) for name in names]
    worker = partial(
        _detect_one, root=layout.root, models_dir=layout.models_dir, mode=detect['mode'], stride=detect['stride'],
        config_hash=config.config_hash, force=config.force,
    )
    timings, errors, skipped = [], [], 0
    for (case_id, _, name), seconds, error in run_parallel(worker, items, config.workers):
        if error is not None:
            _check_error(error)
            errors.append((case_id, name, _describe(error)))
        elif seconds is None:
            skipped += 1
        else:
            timings.append((case_id, name, seconds))
    if timings:
        _record_timing(layout, timings, config.config_hash)
    _record_errors(layout, 'detect', errors, config.config_hash)
    logger.info('Detection: %d maps written, %d skipped, %d failed', len(timings), skipped, len(errors))
    return StageResult(layout.root / 'maps', len(timings), skipped, len(errors))


# --- fuse ---
def load_candidates(layout, case_id, names):
    return [read_tmap(layout.map_path(name, case_id), name)[0] for name in names]


def _fuse_one(case_id, root, names, params, max_iters, config_hash, force):
    layout = RunLayout(root)
    path = layout.map_path(FUSED, case_id)
    if path.exists() and not force:
        return None
    candidates = load_candidates(layout, case_id, names)
    start = time.perf_counter()
    m = fused_map(candidates, params, max_iters=max_iters)
    seconds = time.perf_counter() - start
    atomic_write(path, dumps_tmap(m, config_hash))
    return seconds


def cmd_fuse(config):
    """Fuse each case's candidate maps with the configured preset or parameters."""
    layout = RunLayout(config.output_dir)
    fusion = config['fusion']
    worker = partial(
        _fuse_one, root=layout.root, names=fusion['candidates'], params=config.fusion_params(),
        max_iters=fusion['max_iters'], config_hash=config.config_hash, force=config.force,
    )
    timings, errors, skipped = [], [], 0
    case_ids = [row['case_id'] for row in _cases(layout)]
    for case_id, seconds, error in run_parallel(worker, case_ids, config.workers):
        if error is not None:
            _check_error(error)
            errors.append((case_id, FUSED, _describe(error)))
        elif seconds is None:
            skipped += 1
        else:
            timings.append((case_id, FUSED, seconds))
    if timings:
        _record_timing(layout, timings, config.config_hash)
    _record_errors(layout, 'fuse', errors, config.config_hash)
    return StageResult(layout.maps_dir(FUSED), len(timings), skipped, len(errors))


# --- eval ---
def available_detectors(layout):
    maps = layout.root / 'maps'
    if not maps.is_dir():
        return []
    return sorted(p.name for p in maps.iterdir() if p.is_dir())


def _evaluate_one(item, root, config_hash):
    row, name = item
    layout = RunLayout(root)
    m, _ = read_tmap(layout.map_path(name, row['case_id']), name)
    gt, _ = read_pbm(layout.root / row['mask_path'])
    return evaluate_map(m, gt, row['case_id'], row['q1'], row['q2'], clean=not is_fused(name),
                        config_hash=config_hash)


def _previous_records(layout, config):
    """Records of an earlier eval under the same configuration, keyed by (case, detector)."""
    if config.force or not layout.records.exists():
        return {}
    return {
        (record.case_id, record.detector): record
        for record in read_records(layout.records)
        if record.config_hash == config.config_hash
    }


def cmd_eval(config):
    """Evaluate every available map against its ground truth, then write the reports.

    Pairs already recorded under the same config hash are kept unless forced.
    """
    layout = RunLayout(config.output_dir)
    names = config['eval']['detectors'] or available_detectors(layout)
    if not names:
        raise NotFound(f'no maps under {layout.root / "maps"}; run detect first')
    previous = _previous_records(layout, config)
    records, items = [], []
    for row in _cases(layout):
        for name in names:
            if (row['case_id'], name) in previous:
                records.append(previous[row['case_id'], name])
            else:
                items.append((row, name))
    skipped = len(records)
    worker = partial(_evaluate_one, root=layout.root, config_hash=config.config_hash)
    errors = []
    for (row, name), record, error in run_parallel(worker, items, config.workers):
        if error is not None:
            _check_error(error)
            errors.append((row['case_id'], name, _describe(error)))
        else:
            records.append(record)
    records.sort(key=lambda r: (r.detector, r.case_id))
    write_records(layout.records, records)
    _record_errors(layout, 'eval', errors, config.config_hash)
    logger.info('Evaluation: %d records computed, %d kept, %d failed', len(records) - skipped, skipped, len(errors))
    cmd_report(config)
    return StageResult(layout.records, len(records) - skipped, skipped, len(errors))


# --- gridsearch ---
def gridsearch_corpus(config, layout):
    """Sampled positive cases with their first candidate maps; cases missing a map are left out."""
    section = config['gridsearch']
    names = config['fusion']['candidates'][:section['candidates']]
    cases = [row for row in _cases(layout) if not row['negative_control']]
    seed = section['seed'] if section['seed'] is not None else config.seed
    if len(cases) > section['cases']:
        rng = np.random.default_rng(seed)
        chosen = sorted(rng.choice(len(cases), size=section['cases'], replace=False))
        cases = [cases[i] for i in chosen]
    corpus = []
    for row in cases:
        try:
            candidates = load_candidates(layout, row['case_id'], names)
        except (ForensicsError, OSError) as exc:
            logger.warning('Case %s left out of the grid search: %s', row['case_id'], exc)
            continue
        corpus.append((candidates, read_pbm(layout.root / row['mask_path'])[0]))
    return corpus


def cmd_gridsearch(config):
    """Rank fusion parameters on a sampled sub-corpus and write the table and its profiles."""
    layout = RunLayout(config.output_dir)
    section = config['gridsearch']
    grid = {name: tuple(section[name]) if section[name] else DEFAULT_GRID[name] for name in DEFAULT_GRID}
    corpus = gridsearch_corpus(config, layout)
    result = grid_search(corpus, grid, section['metric'], config.workers, config['fusion']['max_iters'])
    write_grid_search(layout.gridsearch, result, config.config_hash)
    write_profiles(layout.gridsearch_profiles, result, config.config_hash)
    best = result.rows[0]
    logger.info('Best %s %.4f at %s', result.metric, best['value'], result.best)
    return StageResult(layout.gridsearch, len(result.rows))


# --- report ---
def model_storage(models_dir):
    """Mean model size in MB keyed by ``<family>/<quality or oblivious>``."""
    return {
        f'{family}/{key}': megabytes
        for family in LAYOUTS
        for key, megabytes in ClassifierRegistry(models_dir, family).storage_mb().items()
    }


def cmd_report(config):
    """All report tables and images from the records, timing log, manifest and model registry."""
    layout = RunLayout(config.output_dir)
    if not layout.records.exists():
        raise NotFound(f'no evaluation records at {layout.records}; run eval first')
    out = layout.reports_dir
    config_hash = config.config_hash
    records = read_records(layout.records)
    if records:
        reports.write_summary(out / 'summary.csv', records, config_hash)
        reports.write_quality_table(out / 'quality.csv', records, config_hash)
        reports.write_roc_points(out / 'roc.csv', records, config_hash)
        reports.write_reliability_bands(out / 'bands.csv', records, config_hash)
        qualities = range(config['report']['q_low'], config['report']['q_high'] + 1)
        for name in sorted({r.detector for r in records}):
            reports.write_heatmap(out / f'heatmap-{name}.png', records, name, qualities)
    timing = read_csv(layout.timing) if layout.timing.exists() else []
    reports.write_timing_storage(out / 'timing_storage.csv', timing, model_storage(layout.models_dir), config_hash)
    if layout.manifest.exists():
        reports.write_coverage(out / 'coverage.csv', coverage(read_manifest(layout.manifest)), config_hash)
    _write_distributions(layout, records, config)
    return StageResult(out, len(records))


def _write_distributions(layout, records, config):
    rows = {row['case_id']: row for row in _cases(layout)} if layout.manifest.exists() else {}
    for name in sorted({r.detector for r in records}):
        pairs = []
        for r in records:
            path = layout.map_path(name, r.case_id)
            if r.detector != name or r.case_id not in rows or not path.exists():
                continue
            pairs.append((read_tmap(path, name)[0], read_pbm(layout.root / rows[r.case_id]['mask_path'])[0]))
        try:
            distribution = reports.response_distribution(pairs, config['report']['response_bins'])
        except InvalidArgument as exc:
            logger.info('No response distribution for %s: %s', name, exc)
            continue
        reports.write_response_distribution(layout.reports_dir / f'responses-{name}.csv', name, distribution,
                                            config.config_hash)
