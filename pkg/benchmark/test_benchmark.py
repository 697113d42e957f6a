from io import StringIO

import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from detector_bag.services import bag_map
from detector_cda.services import icda_map
from detector_fdf.registry import AWARE, OBLIVIOUS, ClassifierRegistry
from detector_fdf.services import MULTI_SCALE, fdf_map
from detector_fdf.training import train_registry
from evaluation.services import aggregate, evaluate_map, read_records
from forgery_synth.services import read_manifest
from forgery_synth.sources import textured_image
from fusion.services import fused_map, preset
from fusion.structures import FusionParams
from jpeg_model.exceptions import InvalidArgument
from jpeg_model.services import parse_jpeg
from tampering_maps.io import read_tmap
from tampering_maps.structures import TamperingMap
from conftest import make_case
from .base import EXIT_PARTIAL, EXIT_USAGE
from .config import RunConfig, apply_override, parse_value
from .detectors import FUSED, detector, is_fused, needs_registry
from .pipeline import RunLayout, atomic_write, read_csv, run_parallel, write_csv

PIPELINE_CONFIG = '''
[corpus]
synthetic_count = 2
synthetic_size = 128
pairs = [[70, 90], [80, 95]]
negative_controls = 1

[detect]
detectors = ["bag", "cda"]

[fusion]
candidates = ["bag", "cda"]

[gridsearch]
candidates = 2
alpha = [0.0, 0.5]
beta = [0.0, 1.0]
delta = [0.0]
rho = [0.0]

[report]
q_low = 70
q_high = 95
'''


# --- Configuration ---
def test_defaults(settings):
    settings.FORENSICS_SEED = 11
    settings.FORENSICS_WORKERS = 3
    config = RunConfig.from_dict({})
    assert (config.seed, config.workers, config.force) == (11, 3, False)
    assert config['detect']['detectors'] == ['bag', 'cda', 'icda', 'bgcda']
    assert config['fusion']['candidates'] == ['fdf-16', 'fdf-32', 'fdf-48', 'fdf-64']
    assert config['corpus']['q_low'] == 80 and config['corpus']['q_high'] == 100


@pytest.mark.parametrize('text, expected', [
    ('3', 3), ('0.25', 0.25), ('true', True), ('[1, 2]', [1, 2]), ('"x y"', 'x y'), ('fdf-64', 'fdf-64'),
])
def test_parse_value(text, expected):
    assert parse_value(text) == expected


def test_overrides_apply_after_the_file(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('[run]\nseed = 1\n\n[fusion]\npreset = "auc"\n')
    config = RunConfig.load(path, ['run.seed=9', 'fusion.beta=0.5'])
    assert config.seed == 9
    assert config.fusion_params() == FusionParams(alpha=1.5, beta=0.5, delta=0.15, rho=0.2)


@pytest.mark.parametrize('assignment', ['seed=1', 'run.seed', '.seed=1', 'run.=1'])
def test_malformed_override(assignment):
    with pytest.raises(InvalidArgument):
        apply_override({}, assignment)


@pytest.mark.parametrize('raw', [
    {'detect': {'detectors': ['bag', 'sift']}},
    {'fusion': {'preset': 'precision'}},
    {'fusion': {'preset': None, 'alpha': 0.1}},
    {'corpus': {'q_low': 95, 'q_high': 90}},
    {'run': {'workers': 0}},
    {'gridsearch': {'metric': 'precision'}},
])
def test_invalid_config(raw):
    with pytest.raises(InvalidArgument):
        RunConfig.from_dict(raw)


def test_unreadable_config(tmp_path):
    with pytest.raises(InvalidArgument):
        RunConfig.load(tmp_path / 'missing.toml')
    bad = tmp_path / 'bad.toml'
    bad.write_text('[run\nseed = 1')
    with pytest.raises(InvalidArgument):
        RunConfig.load(bad)


def test_config_hash_ignores_execution_options():
    base = RunConfig.from_dict({'run': {'seed': 1, 'workers': 1}})
    other = RunConfig.from_dict({'run': {'seed': 1, 'workers': 8, 'force': True, 'output_dir': '/elsewhere'}})
    assert base.config_hash == other.config_hash
    assert len(base.config_hash) == 8 and int(base.config_hash, 16) >= 0
    assert RunConfig.from_dict({'run': {'seed': 2}}).config_hash != base.config_hash
    assert RunConfig.from_dict({'run': {'seed': 1}}, ['fusion.beta=0.5']).config_hash != base.config_hash


def test_explicit_fusion_parameters_without_a_preset():
    config = RunConfig.from_dict({'fusion': {'preset': None, 'alpha': 0.1, 'beta': 0.2, 'delta': 0.0, 'rho': 0.3}})
    assert config.fusion_params() == FusionParams(0.1, 0.2, 0.0, 0.3)


def test_seed_is_required(settings):
    settings.FORENSICS_SEED = None
    with pytest.raises(InvalidArgument):
        RunConfig.from_dict({}).require_seed('synth')


# --- Detectors ---
def test_detector_lookup():
    assert detector('bag') is bag_map
    assert detector('icda') is icda_map
    assert needs_registry('fdf-64') and needs_registry('fdf-a') and not needs_registry('cda')
    assert is_fused(FUSED) and not is_fused('fdf-64')
    assert fused_map([TamperingMap(np.full((2, 2), 0.5))], FusionParams()).detector == FUSED
    with pytest.raises(KeyError):
        detector('sift')


# --- Plumbing ---
def test_atomic_write_leaves_no_temporaries(tmp_path):
    path = tmp_path / 'nested' / 'out.bin'
    atomic_write(path, b'abc')
    atomic_write(path, 'def')
    assert path.read_bytes() == b'def'
    assert [p.name for p in path.parent.iterdir()] == ['out.bin']


def test_csv_skips_the_hash_comment(tmp_path):
    path = tmp_path / 'table.csv'
    write_csv(path, ['a', 'b'], [[1, 2], [3, 4]], 'deadbeef')
    assert path.read_text().splitlines()[0] == '# config_hash=deadbeef'
    assert read_csv(path) == [{'a': '1', 'b': '2'}, {'a': '3', 'b': '4'}]


def _halve(x):
    if x == 3:
        raise InvalidArgument('three')
    return x / 2


@pytest.mark.parametrize('workers', [1, 2])
def test_run_parallel_captures_errors_in_order(workers):
    outcomes = run_parallel(_halve, range(5), workers)
    assert [item for item, _, _ in outcomes] == [0, 1, 2, 3, 4]
    assert [result for _, result, _ in outcomes] == [0, 0.5, 1, None, 2]
    assert isinstance(outcomes[3][2], InvalidArgument)


def test_run_layout(tmp_path):
    layout = RunLayout(tmp_path)
    assert layout.map_path('bag', 'c1') == tmp_path / 'maps' / 'bag' / 'c1.tmap'
    assert layout.map_path('bag', 'c1').parent == layout.maps_dir('bag')
    assert layout.manifest.name == 'manifest.jsonl'


# --- Commands ---
def run(command, run_dir, *args):
    out = StringIO()
    call_command(command, '--config', str(run_dir / 'run.toml'), '--output-dir', str(run_dir), '--seed', '5',
                 *args, stdout=out)
    return out.getvalue()


@pytest.fixture(scope='module')
def run_dir(tmp_path_factory):
    """A complete synth / detect / fuse / eval run over six small cases."""
    root = tmp_path_factory.mktemp('run')
    (root / 'run.toml').write_text(PIPELINE_CONFIG)
    for command in ('synth', 'detect', 'fuse', 'eval'):
        run(command, root)
    return root


def test_synth_writes_the_corpus(run_dir):
    rows = read_manifest(RunLayout(run_dir).manifest)
    assert len(rows) == 2 * (2 + 1)
    assert sum(row['negative_control'] for row in rows) == 2
    assert {(row['q1'], row['q2']) for row in rows if not row['negative_control']} == {(70, 90), (80, 95)}
    assert all((run_dir / row['jpeg_path']).exists() and (run_dir / row['mask_path']).exists() for row in rows)


def test_detect_writes_one_map_per_case(run_dir):
    layout = RunLayout(run_dir)
    rows = read_manifest(layout.manifest)
    for row in rows:
        j = parse_jpeg((run_dir / row['jpeg_path']).read_bytes())
        for name in ('bag', 'cda', FUSED):
            m, config_hash = read_tmap(layout.map_path(name, row['case_id']), name)
            assert m.shape == j.block_grid
            assert len(config_hash) == 8
    timing = read_csv(layout.timing)
    assert {(r['case_id'], r['detector']) for r in timing} >= {(row['case_id'], 'bag') for row in rows}


def test_existing_maps_are_skipped(run_dir):
    assert '0 done, 12 skipped' in run('detect', run_dir)


def test_eval_writes_records_and_reports(run_dir):
    layout = RunLayout(run_dir)
    records = read_records(layout.records)
    assert len(records) == 6 * 3
    assert {r.detector for r in records} == {'bag', 'cda', FUSED}
    assert all(0 <= r.max_f1 <= 1 for r in records)
    names = {p.name for p in layout.reports_dir.iterdir()}
    assert {'summary.csv', 'quality.csv', 'roc.csv', 'bands.csv', 'timing_storage.csv', 'coverage.csv'} <= names
    assert {'heatmap-bag.png', 'heatmap-cda.png', 'heatmap-fdf-fuse.png'} <= names
    summary = read_csv(layout.reports_dir / 'summary.csv')
    assert [row['detector'] for row in summary] == ['bag', 'cda', FUSED]
    assert all(row['cases'] == '4' for row in summary)


def test_eval_keeps_records_of_the_same_config(run_dir):
    layout = RunLayout(run_dir)
    before = read_records(layout.records)
    assert '0 done, 18 skipped' in run('eval', run_dir)
    assert read_records(layout.records) == before
    assert '18 done, 0 skipped' in run('eval', run_dir, '--force')
    assert len(read_records(layout.records)) == 18


def test_eval_recomputes_records_of_another_config(run_dir):
    layout = RunLayout(run_dir)
    original = {r.config_hash for r in read_records(layout.records)}
    # a changed setting changes the config hash the records are written under
    assert '18 done, 0 skipped' in run('eval', run_dir, '--set', 'report.q_low=75')
    changed = {r.config_hash for r in read_records(layout.records)}
    assert len(changed) == 1 and changed != original
    assert '18 done, 0 skipped' in run('eval', run_dir)
    assert {r.config_hash for r in read_records(layout.records)} == original


def test_report_rebuilds_from_records(run_dir):
    summary = RunLayout(run_dir).reports_dir / 'summary.csv'
    summary.unlink()
    run('report', run_dir)
    assert summary.exists()


def test_gridsearch_ranks_the_configured_grid(run_dir):
    run('gridsearch', run_dir)
    layout = RunLayout(run_dir)
    rows = read_csv(layout.gridsearch)
    assert len(rows) == 4
    values = [float(row['value']) for row in rows]
    assert values == sorted(values, reverse=True)
    assert len(read_csv(layout.gridsearch_profiles)) == 2 + 2 + 1 + 1


def test_missing_manifest_is_a_usage_error(tmp_path):
    (tmp_path / 'run.toml').write_text(PIPELINE_CONFIG)
    with pytest.raises(CommandError) as excinfo:
        run('detect', tmp_path)
    assert excinfo.value.returncode == EXIT_USAGE


def test_bad_override_is_a_usage_error(tmp_path):
    (tmp_path / 'run.toml').write_text(PIPELINE_CONFIG)
    with pytest.raises(CommandError) as excinfo:
        run('synth', tmp_path, '--set', 'corpus.q_low=150')
    assert excinfo.value.returncode == EXIT_USAGE


def test_broken_case_is_a_partial_failure(tmp_path):
    (tmp_path / 'run.toml').write_text(PIPELINE_CONFIG)
    run('synth', tmp_path, '--set', 'corpus.synthetic_count=1')
    layout = RunLayout(tmp_path)
    rows = read_manifest(layout.manifest)
    (tmp_path / rows[0]['jpeg_path']).write_bytes(b'not a jpeg')
    with pytest.raises(CommandError) as excinfo:
        run('detect', tmp_path)
    assert excinfo.value.returncode == EXIT_PARTIAL
    errors = read_csv(layout.errors)
    assert {(e['stage'], e['case_id']) for e in errors} == {('detect', rows[0]['case_id'])}
    assert layout.map_path('bag', rows[1]['case_id']).exists()


# --- Desk-scale acceptance ---
def _mean_max_f1(records):
    return float(np.mean([r.max_f1 for r in records]))


@pytest.fixture(scope='module')
def desk_registry(tmp_path_factory):
    """FDF models for windows 16..64, trained aware at Q2 in {85, 95, 100} and obliviously."""
    registry = ClassifierRegistry(tmp_path_factory.mktemp('desk-models'))
    images = [textured_image(300 + i, 256, 256) for i in range(24)]
    failures = train_registry(registry, images, MULTI_SCALE, window_sizes=[16, 32, 48, 64],
                              qualities=[85, 95, 100], oblivious=True, seed=3, cap=400)
    assert failures == []
    return registry


@pytest.mark.slow
def test_icda_outranks_bag_on_the_easy_region():
    records = {'bag': [], 'icda': []}
    for index in range(40):
        q1, q2 = (80, 85)[index % 2], (95, 98)[index // 2 % 2]
        case = make_case(1000 + index, q1, q2)
        j = parse_jpeg(case.jpeg)
        for name, run_detector in (('bag', bag_map), ('icda', icda_map)):
            records[name].append(evaluate_map(run_detector(j), case.mask, str(index), q1, q2))
    table = aggregate(records['bag'] + records['icda'])
    assert table['icda']['max_f1'] >= 0.5
    assert table['icda']['max_f1'] >= table['bag']['max_f1']
    assert np.isfinite(table['icda']['auc_0.1'])


@pytest.mark.slow
def test_fdf_degrades_near_the_diagonal(desk_registry):
    diagonal, far = [], []
    for index in range(60):
        q2 = (85, 86, 87)[index % 3] if index < 30 else (95, 97, 100)[index % 3]
        case = make_case(2000 + index, 85, q2)
        m = fdf_map(parse_jpeg(case.jpeg), 64, desk_registry)
        (diagonal if index < 30 else far).append(evaluate_map(m, case.mask, str(index), 85, q2))
    assert _mean_max_f1(far) >= _mean_max_f1(diagonal) + 0.15


@pytest.mark.slow
def test_quality_aware_models_beat_oblivious_ones(desk_registry):
    records = {AWARE: [], OBLIVIOUS: []}
    for index in range(24):
        q1, q2 = (70, 75, 80)[index % 3], (95, 100)[index // 3 % 2]
        case = make_case(3000 + index, q1, q2)
        j = parse_jpeg(case.jpeg)
        for mode in records:
            records[mode].append(evaluate_map(fdf_map(j, 64, desk_registry, mode), case.mask, str(index), q1, q2))
    assert _mean_max_f1(records[AWARE]) >= _mean_max_f1(records[OBLIVIOUS])


@pytest.mark.slow
def test_f1_preset_fusion_keeps_up_with_the_best_candidate(desk_registry):
    records = []
    for index in range(24):
        q1, q2 = (70, 75, 80)[index % 3], (95, 100)[index // 3 % 2]
        case = make_case(4000 + index, q1, q2)
        j = parse_jpeg(case.jpeg)
        candidates = [fdf_map(j, size, desk_registry) for size in (16, 32, 48, 64)]
        records += [evaluate_map(m, case.mask, str(index), q1, q2) for m in candidates]
        fused = fused_map(candidates, preset('f1'))
        records.append(evaluate_map(fused, case.mask, str(index), q1, q2, clean=False))
    table = aggregate(records)
    best_single = max(table[name]['max_f1'] for name in ('fdf-16', 'fdf-32', 'fdf-48', 'fdf-64'))
    assert table[FUSED]['max_f1'] >= best_single - 0.02
