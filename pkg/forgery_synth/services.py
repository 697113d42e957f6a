"""Aligned double-JPEG forgery synthesis and corpus building."""
import logging
from collections import Counter
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from benchmark.pipeline import atomic_write, run_parallel
from jpeg_model.exceptions import ForensicsError, InvalidArgument
from jpeg_model.services import decode_to_pixels, encode, parse_jpeg, with_comment
from jpeg_model.structures import PixelImage
from jpeg_model.tables import quality_to_tables
from tampering_maps.io import dumps_pbm
from tampering_maps.services import block_majority
from tampering_maps.structures import GroundTruthMask

from .schemas import dumps_manifest, loads_manifest

logger = logging.getLogger(__name__)

QUALITY_LOW, QUALITY_HIGH = 80, 100


@dataclass(frozen=True, eq=False)
class ForgeryCase:
    jpeg: bytes
    mask: GroundTruthMask
    q1: int
    q2: int
    source_ids: tuple = ()

    @property
    def is_negative_control(self):
        return self.mask.is_negative_control


def synthesize_case(original, tampered, pixel_mask, q1, q2, subsampling='4:4:4', mask_threshold=0.5,
                    source_ids=()):
    """Compress ``original`` at q1, paste the masked pixels of ``tampered`` into the
    decoded result and compress again at q2 on the same block grid.

    An empty mask yields a negative control (uniformly double compressed).
    """
    quality_to_tables(q1)
    quality_to_tables(q2)
    if q2 < q1:
        raise InvalidArgument(f'second quality {q2} is lower than the first {q1}')
    if original.samples.shape != tampered.samples.shape:
        raise InvalidArgument(
            f'original {original.samples.shape} and tampered {tampered.samples.shape} bitmaps differ in shape'
        )
    mask = np.asarray(pixel_mask).astype(bool)
    if mask.shape != (original.height, original.width):
        raise InvalidArgument(f'pixel mask {mask.shape} does not match the bitmaps')

    first = decode_to_pixels(parse_jpeg(encode(original, q1, subsampling)))
    composite = np.array(first.samples)
    composite[mask] = tampered.samples[mask]
    jpeg = encode(PixelImage(composite), q2, subsampling)
    return ForgeryCase(jpeg, block_majority(mask, mask_threshold), int(q1), int(q2), tuple(source_ids))


def sample_quality_pair(rng, low=QUALITY_LOW, high=QUALITY_HIGH):
    """q1 uniform on [low, high], then q2 uniform on [q1, high]."""
    if not 1 <= low <= high <= 100:
        raise InvalidArgument(f'invalid quality range [{low}, {high}]')
    q1 = int(rng.integers(low, high + 1))
    q2 = int(rng.integers(q1, high + 1))
    return q1, q2


@dataclass(frozen=True)
class CasePlan:
    case_id: str
    source: object
    q1: int
    q2: int
    seed: int
    negative_control: bool


def case_seed(seed, source_index, case_index):
    return int(np.random.SeedSequence([seed, source_index, case_index]).generate_state(1)[0])


def plan_corpus(sources, seed, pairs_per_source, negative_controls=0, low=QUALITY_LOW, high=QUALITY_HIGH,
                pairs=None):
    """Quality pairs for every case; each case draws from its own child seed.

    With explicit ``pairs`` every source gets one case per (q1, q2) pair
    instead of ``pairs_per_source`` sampled ones.
    """
    if pairs:
        pairs = [(int(q1), int(q2)) for q1, q2 in pairs]
        if any(not 1 <= q1 <= q2 <= 100 for q1, q2 in pairs):
            raise InvalidArgument(f'quality pairs must satisfy 1 <= q1 <= q2 <= 100: {pairs}')
        pairs_per_source = len(pairs)
    plans = []
    for source_index, source in enumerate(sources):
        for case_index in range(pairs_per_source + negative_controls):
            child = case_seed(seed, source_index, case_index)
            q1, q2 = sample_quality_pair(np.random.default_rng(child), low, high)
            negative = case_index >= pairs_per_source
            if pairs and not negative:
                q1, q2 = pairs[case_index]
            suffix = 'neg' if negative else 'case'
            plans.append(CasePlan(f'{source.source_id}-{suffix}{case_index:03d}', source, q1, q2, child, negative))
    return plans


def _materialize(plan, cases_dir, subsampling, mask_threshold, config_hash, force):
    jpeg_path = cases_dir / f'{plan.case_id}.jpg'
    mask_path = cases_dir / f'{plan.case_id}.pbm'
    if force or not (jpeg_path.exists() and mask_path.exists()):
        original, tampered, mask = plan.source.load()
        if plan.negative_control:
            mask = np.zeros_like(mask)
        case = synthesize_case(original, tampered, mask, plan.q1, plan.q2, subsampling, mask_threshold,
                               (plan.source.source_id,))
        jpeg = case.jpeg if config_hash is None else with_comment(case.jpeg, f'config={config_hash}')
        atomic_write(jpeg_path, jpeg)
        atomic_write(mask_path, dumps_pbm(case.mask, config_hash))
    return jpeg_path, mask_path


def build_corpus(config, sources, output_dir, config_hash=None, workers=1, force=False):
    """Synthesize every planned case under ``output_dir/cases`` and write the manifest.

    ``config`` carries seed, pairs_per_source, negative_controls, q_low, q_high,
    pairs, subsampling and mask_threshold. A source that cannot be read produces
    manifest rows with an error and the run carries on.
    """
    if config.get('seed') is None:
        raise InvalidArgument('corpus synthesis needs a seed')
    output_dir = Path(output_dir)
    cases_dir = output_dir / 'cases'
    cases_dir.mkdir(parents=True, exist_ok=True)
    plans = plan_corpus(
        sources, config['seed'], config.get('pairs_per_source', 3), config.get('negative_controls', 0),
        config.get('q_low', QUALITY_LOW), config.get('q_high', QUALITY_HIGH), config.get('pairs'),
    )
    worker = partial(
        _materialize, cases_dir=cases_dir, subsampling=config.get('subsampling', '4:4:4'),
        mask_threshold=config.get('mask_threshold', 0.5), config_hash=config_hash, force=force,
    )
    rows = []
    for plan, paths, error in run_parallel(worker, plans, workers):
        row = {
            'case_id': plan.case_id,
            'source_id': plan.source.source_id,
            'q1': plan.q1,
            'q2': plan.q2,
            'seed': plan.seed,
            'negative_control': plan.negative_control,
            'config_hash': config_hash,
            'jpeg_path': None,
            'mask_path': None,
            'error': None,
        }
        if error is None:
            row['jpeg_path'] = paths[0].relative_to(output_dir).as_posix()
            row['mask_path'] = paths[1].relative_to(output_dir).as_posix()
        elif isinstance(error, (ForensicsError, OSError)):
            row['error'] = f'{type(error).__name__}: {error}'
        else:
            raise error
        rows.append(row)

    manifest = output_dir / 'manifest.jsonl'
    atomic_write(manifest, dumps_manifest(rows))
    failed = sum(row['error'] is not None for row in rows)
    logger.info('Corpus of %d cases written to %s (%d failed)', len(rows), manifest, failed)
    return manifest


def read_manifest(path):
    return loads_manifest(Path(path).read_text())


@dataclass(frozen=True)
class Coverage:
    counts: dict
    minimum: int
    mean: float
    maximum: int

    @property
    def occupied(self):
        return len(self.counts)


def coverage(rows):
    """Case counts per (q1, q2) cell and min/mean/max over occupied cells."""
    counts = Counter((row['q1'], row['q2']) for row in rows if not row.get('error'))
    if not counts:
        return Coverage({}, 0, 0.0, 0)
    values = list(counts.values())
    return Coverage(dict(sorted(counts.items())), min(values), float(np.mean(values)), max(values))
