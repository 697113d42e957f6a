import json

from marshmallow import Schema, ValidationError, fields, post_load, validate

from jpeg_model.exceptions import InvalidArgument

from .structures import EvalRecord, RocSample

QUALITY = validate.Range(min=1, max=100)
UNIT = validate.Range(min=0, max=1)


class RocSampleSchema(Schema):
    threshold = fields.Float(required=True, validate=UNIT)
    fp_rate = fields.Float(required=True, validate=UNIT)
    tp_rate = fields.Float(required=True, validate=UNIT)
    f1 = fields.Float(required=True, validate=UNIT)

    @post_load
    def make_sample(self, data, **kwargs):
        return RocSample(**data)


class EvalRecordSchema(Schema):
    case_id = fields.Str(required=True)
    detector = fields.Str(required=True)
    q1 = fields.Int(required=True, validate=QUALITY)
    q2 = fields.Int(required=True, validate=QUALITY)
    samples = fields.List(fields.Nested(RocSampleSchema), required=True)
    max_f1 = fields.Float(required=True, validate=UNIT)
    auc = fields.Dict(keys=fields.Str(), values=fields.Float(validate=UNIT), required=True)
    negative_control = fields.Bool(load_default=False)
    config_hash = fields.Str(allow_none=True, load_default=None)

    @post_load
    def make_record(self, data, **kwargs):
        data['auc'] = {float(cap): value for cap, value in data['auc'].items()}
        return EvalRecord(**data)


def dumps_records(records):
    schema = EvalRecordSchema()
    lines = []
    for record in records:
        data = schema.dump({**vars(record), 'auc': {str(cap): value for cap, value in record.auc.items()}})
        lines.append(json.dumps(data, sort_keys=True) + '\n')
    return ''.join(lines)


def loads_records(text):
    schema = EvalRecordSchema()
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(schema.load(json.loads(line)))
        except (ValueError, ValidationError) as exc:
            raise InvalidArgument(f'record line {number}: {exc}') from None
    return records
