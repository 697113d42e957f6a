"""Run configuration: a TOML file validated with marshmallow, plus command-line overrides."""
import copy
import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from django.conf import settings
from marshmallow import Schema, ValidationError, fields, validate, validates, validates_schema

from detector_fdf.registry import MODES
from fusion.gridsearch import METRICS
from fusion.services import load_presets, preset
from fusion.structures import FusionParams
from jpeg_model.exceptions import InvalidArgument

from .detectors import FUSED, KNOWN_DETECTORS

QUALITY = validate.Range(min=1, max=100)
HASH_EXCLUDED = {'run': ('workers', 'force', 'output_dir')}


class RunSection(Schema):
    seed = fields.Int(allow_none=True, load_default=None)
    workers = fields.Int(allow_none=True, load_default=None, validate=validate.Range(min=1))
    output_dir = fields.Str(allow_none=True, load_default=None)
    force = fields.Bool(load_default=False)


class CorpusSection(Schema):
    sources = fields.Str(allow_none=True, load_default=None)
    synthetic_count = fields.Int(load_default=8, validate=validate.Range(min=1))
    synthetic_size = fields.Int(load_default=256, validate=validate.Range(min=16))
    pairs_per_source = fields.Int(load_default=3, validate=validate.Range(min=0))
    pairs = fields.List(fields.List(fields.Int(validate=QUALITY), validate=validate.Length(equal=2)),
                        allow_none=True, load_default=None)
    negative_controls = fields.Int(load_default=0, validate=validate.Range(min=0))
    q_low = fields.Int(load_default=80, validate=QUALITY)
    q_high = fields.Int(load_default=100, validate=QUALITY)
    subsampling = fields.Str(load_default='4:4:4', validate=validate.OneOf(['4:4:4', '4:2:0']))
    mask_threshold = fields.Float(load_default=0.5, validate=validate.Range(min=0, max=1, min_inclusive=False))

    @validates_schema
    def validate_range(self, data, **kwargs):
        if data['q_low'] > data['q_high']:
            raise ValidationError('q_low must not exceed q_high', 'q_low')


class DetectSection(Schema):
    detectors = fields.List(fields.Str(), load_default=lambda: ['bag', 'cda', 'icda', 'bgcda'])
    mode = fields.Str(load_default='aware', validate=validate.OneOf(MODES))
    stride = fields.Int(load_default=8, validate=validate.Range(min=8))

    @validates('detectors')
    def validate_detectors(self, value, **kwargs):
        unknown = [name for name in value if name not in KNOWN_DETECTORS and name != FUSED]
        if unknown:
            raise ValidationError(f'unknown detectors: {", ".join(unknown)}')


class TrainSection(Schema):
    families = fields.List(fields.Str(validate=validate.OneOf(['fdf', 'fdf-a'])), load_default=lambda: ['fdf'])
    window_sizes = fields.List(fields.Int(), allow_none=True, load_default=None)
    qualities = fields.List(fields.Int(validate=QUALITY), allow_none=True, load_default=None)
    oblivious = fields.Bool(load_default=True)
    cap = fields.Int(load_default=2000, validate=validate.Range(min=10))
    sources = fields.Str(allow_none=True, load_default=None)
    synthetic_count = fields.Int(load_default=16, validate=validate.Range(min=1))
    synthetic_size = fields.Int(load_default=256, validate=validate.Range(min=64))


class FusionSection(Schema):
    preset = fields.Str(allow_none=True, load_default='f1')
    alpha = fields.Float(allow_none=True, load_default=None)
    beta = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0))
    delta = fields.Float(allow_none=True, load_default=None)
    rho = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, max=1))
    candidates = fields.List(fields.Str(), load_default=lambda: ['fdf-16', 'fdf-32', 'fdf-48', 'fdf-64'])
    max_iters = fields.Int(load_default=10, validate=validate.Range(min=1))

    @validates('preset')
    def validate_preset(self, value, **kwargs):
        if value is not None and value not in load_presets():
            raise ValidationError(f'unknown fusion preset {value!r}')

    @validates_schema
    def validate_params(self, data, **kwargs):
        explicit = [data[name] for name in ('alpha', 'beta', 'delta', 'rho')]
        if data['preset'] is None and None in explicit:
            raise ValidationError('without a preset, alpha, beta, delta and rho are all required')


class GridSearchSection(Schema):
    cases = fields.Int(load_default=66, validate=validate.Range(min=1))
    metric = fields.Str(load_default='f1', validate=validate.OneOf(METRICS))
    candidates = fields.Int(load_default=4, validate=validate.Range(min=1))
    seed = fields.Int(allow_none=True, load_default=None)
    alpha = fields.List(fields.Float(), allow_none=True, load_default=None)
    beta = fields.List(fields.Float(validate=validate.Range(min=0)), allow_none=True, load_default=None)
    delta = fields.List(fields.Float(), allow_none=True, load_default=None)
    rho = fields.List(fields.Float(validate=validate.Range(min=0, max=1)), allow_none=True, load_default=None)


class EvalSection(Schema):
    detectors = fields.List(fields.Str(), allow_none=True, load_default=None)


class ReportSection(Schema):
    q_low = fields.Int(load_default=80, validate=QUALITY)
    q_high = fields.Int(load_default=100, validate=QUALITY)
    response_bins = fields.Int(load_default=20, validate=validate.Range(min=2))


class RunConfigSchema(Schema):
    run = fields.Nested(RunSection)
    corpus = fields.Nested(CorpusSection)
    detect = fields.Nested(DetectSection)
    train = fields.Nested(TrainSection)
    fusion = fields.Nested(FusionSection)
    gridsearch = fields.Nested(GridSearchSection)
    eval = fields.Nested(EvalSection)
    report = fields.Nested(ReportSection)


SECTIONS = ('run', 'corpus', 'detect', 'train', 'fusion', 'gridsearch', 'eval', 'report')


def parse_value(text):
    """A TOML literal (number, bool, array, quoted string); anything else is a bare string."""
    try:
        return tomllib.loads(f'value = {text}')['value']
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw, assignment):
    """Set ``section.key=value`` in a raw config dict."""
    key, sep, text = assignment.partition('=')
    section, dot, name = key.strip().partition('.')
    if not sep or not dot or not section or not name:
        raise InvalidArgument(f'override {assignment!r} is not of the form section.key=value')
    raw.setdefault(section, {})[name] = parse_value(text.strip())
    return raw


class RunConfig:
    """Validated run configuration; sections are plain dicts."""

    def __init__(self, data):
        self.data = data

    def __getitem__(self, section):
        return self.data[section]

    @classmethod
    def from_dict(cls, raw, overrides=()):
        raw = copy.deepcopy(raw)
        for assignment in overrides:
            apply_override(raw, assignment)
        for section in SECTIONS:
            raw.setdefault(section, {})
        try:
            data = RunConfigSchema().load(raw)
        except ValidationError as exc:
            raise InvalidArgument(f'invalid run configuration: {exc.messages}') from None
        run = data['run']
        if run['seed'] is None:
            run['seed'] = settings.FORENSICS_SEED
        if run['workers'] is None:
            run['workers'] = settings.FORENSICS_WORKERS
        if run['output_dir'] is None:
            run['output_dir'] = str(settings.FORENSICS_OUTPUT_DIR)
        return cls(data)

    @classmethod
    def load(cls, path=None, overrides=()):
        raw = {}
        if path is not None:
            try:
                with open(path, 'rb') as handle:
                    raw = tomllib.load(handle)
            except OSError as exc:
                raise InvalidArgument(f'cannot read config {path}: {exc}') from None
            except tomllib.TOMLDecodeError as exc:
                raise InvalidArgument(f'config {path} is not valid TOML: {exc}') from None
        return cls.from_dict(raw, overrides)

    @property
    def seed(self):
        return self['run']['seed']

    @property
    def workers(self):
        return self['run']['workers']

    @property
    def force(self):
        return self['run']['force']

    @property
    def output_dir(self):
        return Path(self['run']['output_dir'])

    def require_seed(self, command):
        if self.seed is None:
            raise InvalidArgument(f'{command} needs a seed (--seed, run.seed or FORENSICS_SEED)')
        return self.seed

    def canonical(self):
        data = copy.deepcopy(self.data)
        for section, keys in HASH_EXCLUDED.items():
            for key in keys:
                data[section].pop(key, None)
        return json.dumps(data, sort_keys=True, separators=(',', ':'))

    @property
    def config_hash(self):
        """First 8 hex digits of the SHA-256 of the canonical config."""
        return hashlib.sha256(self.canonical().encode('utf-8')).hexdigest()[:8]

    def fusion_params(self):
        """The preset's parameters with any explicitly configured ones on top."""
        section = self['fusion']
        values = preset(section['preset']).as_dict() if section['preset'] else {}
        values.update({k: section[k] for k in ('alpha', 'beta', 'delta', 'rho') if section[k] is not None})
        return FusionParams(**values)
