import json

from marshmallow import Schema, ValidationError, fields, validate, validates_schema

from jpeg_model.exceptions import InvalidArgument

QUALITY = validate.Range(min=1, max=100)


class ManifestRowSchema(Schema):
    """One corpus case; paths are relative to the manifest's directory."""

    case_id = fields.Str(required=True)
    source_id = fields.Str(required=True)
    jpeg_path = fields.Str(allow_none=True, load_default=None)
    mask_path = fields.Str(allow_none=True, load_default=None)
    q1 = fields.Int(required=True, validate=QUALITY)
    q2 = fields.Int(required=True, validate=QUALITY)
    seed = fields.Int(required=True)
    negative_control = fields.Bool(load_default=False)
    config_hash = fields.Str(allow_none=True, load_default=None)
    error = fields.Str(allow_none=True, load_default=None)

    @validates_schema
    def validate_qualities(self, data, **kwargs):
        if data['q2'] < data['q1']:
            raise ValidationError('q2 must not be lower than q1', 'q2')


def dumps_manifest(rows):
    schema = ManifestRowSchema()
    return ''.join(json.dumps(schema.dump(row), sort_keys=True) + '\n' for row in rows)


def loads_manifest(text):
    schema = ManifestRowSchema()
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(schema.load(json.loads(line)))
        except (ValueError, ValidationError) as exc:
            raise InvalidArgument(f'manifest line {number}: {exc}') from None
    return rows
