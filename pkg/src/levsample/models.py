"""
models.py
========================
Marshmallow schemas for everything that crosses a process boundary: experiment configurations, experiment reports,
single subsample estimates, regularity diagnostics and the request bodies of the web API.
"""
from marshmallow import Schema, ValidationError, fields, post_load, pre_load, validate, validates, validates_schema

from levsample.asymptotics import RegularityDiagnostics
from levsample.datagen import DataSpec, Distribution
from levsample.harness import CsvSource, ExperimentConfig, ExperimentReport, ReportCell
from levsample.probs import DEFAULT_SLEV_LAMBDA, Mode, Scheme, SchemeSpec, Target
from levsample.sampler import reweighting_diagonal

_open_unit = validate.Range(min=0.0, max=1.0, min_inclusive=False, max_inclusive=False)


class SchemeSpecSchema(Schema):
    class Meta:
        ordered = True

    kind = fields.Enum(Scheme, by_value=True, required=True)
    slev_lambda = fields.Float(load_default=DEFAULT_SLEV_LAMBDA, validate=_open_unit)
    floor = fields.Float(load_default=0.0, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))

    # a bare scheme name is shorthand for its default parameters
    @pre_load
    def expand_name(self, data, **kwargs):
        if isinstance(data, str):
            return {"kind": data}
        return data

    @post_load
    def make_spec(self, data, **kwargs):
        return SchemeSpec(**data)


class DataSpecSchema(Schema):
    class Meta:
        ordered = True

    dist = fields.Enum(Distribution, by_value=True, required=True)
    n = fields.Integer(required=True, validate=validate.Range(min=2))
    p = fields.Integer(required=True, validate=validate.Range(min=1))
    seed = fields.Integer(load_default=0, validate=validate.Range(min=0))
    rho = fields.Float(load_default=0.7, validate=validate.Range(min=-1.0, max=1.0, min_inclusive=False,
                                                                  max_inclusive=False))
    sigma = fields.Float(load_default=1.0, validate=validate.Range(min=0.0))
    noncentral = fields.Boolean(load_default=False)

    @validates_schema
    def more_rows_than_columns(self, data, **kwargs):
        if "n" in data and "p" in data and data["n"] <= data["p"]:
            raise ValidationError("n must exceed p", field_name="n")

    @post_load
    def make_spec(self, data, **kwargs):
        return DataSpec(**data)


class CsvSourceSchema(Schema):
    class Meta:
        ordered = True

    path = fields.String(required=True)
    response_column = fields.Integer(load_default=0, validate=validate.Range(min=0))
    header = fields.Boolean(load_default=False)
    intercept = fields.Boolean(load_default=False)
    expand = fields.Boolean(load_default=False)

    @post_load
    def make_source(self, data, **kwargs):
        return CsvSource(**data)


class ExperimentConfigSchema(Schema):
    class Meta:
        ordered = True

    mode = fields.Enum(Mode, by_value=True, required=True)
    data = fields.Nested(DataSpecSchema, allow_none=True, load_default=None)
    csv = fields.Nested(CsvSourceSchema, allow_none=True, load_default=None)
    schemes = fields.List(fields.Nested(SchemeSpecSchema), required=True)
    target = fields.Enum(Target, by_value=True, load_default=Target.COEF)
    sample_sizes = fields.List(fields.Integer(validate=validate.Range(min=1)), required=True)
    replicates = fields.Integer(load_default=100, validate=validate.Range(min=2))
    master_seed = fields.Integer(load_default=0, validate=validate.Range(min=0))
    floor = fields.Float(load_default=0.0, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))
    beta0 = fields.List(fields.Float(), allow_none=True, load_default=None)
    max_retries = fields.Integer(load_default=100, validate=validate.Range(min=0))
    normalize = fields.Boolean(load_default=False)
    # thread count does not change results and is kept out of report metadata
    threads = fields.Integer(load_default=0, validate=validate.Range(min=0), load_only=True)

    @validates_schema
    def exactly_one_source(self, data, **kwargs):
        if (data.get("data") is None) == (data.get("csv") is None):
            raise ValidationError("Exactly one of 'data' and 'csv' must be given")

    @post_load
    def make_config(self, data, **kwargs):
        return ExperimentConfig(**data)


class ReportCellSchema(Schema):
    class Meta:
        ordered = True

    scheme = fields.String(required=True)
    r = fields.Integer(required=True)
    squared_bias = fields.Float(required=True)
    variance = fields.Float(required=True)
    mse = fields.Float(required=True)
    failed_replicates = fields.Integer(required=True)
    redraws = fields.Integer(load_default=0)

    @post_load
    def make_cell(self, data, **kwargs):
        return ReportCell(**data)


class ExperimentReportSchema(Schema):
    class Meta:
        ordered = True

    cells = fields.List(fields.Nested(ReportCellSchema), required=True)
    metadata = fields.Dict(keys=fields.String(), load_default=dict)
    wall_time = fields.Float(allow_none=True, load_default=None)

    @post_load
    def make_report(self, data, **kwargs):
        return ExperimentReport(**data)


class RegularityDiagnosticsSchema(Schema):
    class Meta:
        ordered = True

    lambda_min = fields.Float()
    lambda_max = fields.Float()
    pi_min = fields.Float()
    pi_max = fields.Float()
    r_over_n = fields.Float()
    flags = fields.List(fields.String())

    @post_load
    def make_diagnostics(self, data, **kwargs):
        return RegularityDiagnostics(**data)


class EstimateResultSchema(Schema):
    """Dump-only view of :class:`levsample.harness.EstimateResult`."""
    class Meta:
        ordered = True

    scheme = fields.Function(lambda result: SchemeSpecSchema().dump(result.estimate.scheme))
    r = fields.Function(lambda result: result.estimate.draw.r)
    seed = fields.Function(lambda result: result.estimate.draw.seed)
    beta_tilde = fields.Function(lambda result: result.estimate.beta_tilde.tolist())
    beta_ols = fields.Function(lambda result: result.fit.beta_hat.tolist())
    sigma2_hat = fields.Function(lambda result: result.fit.sigma2_hat)
    distinct_rows = fields.Function(lambda result: int(result.estimate.draw.indices.shape[0]))
    # drawn rows (0-based), how often each was drawn and its weight K_i / (r pi_i)
    indices = fields.Function(lambda result: result.estimate.draw.indices.tolist())
    counts = fields.Function(lambda result: result.estimate.draw.counts[result.estimate.draw.indices].tolist())
    weights = fields.Method("drawn_weights")
    covariance = fields.Function(lambda result: result.covariance.matrix.tolist())
    level = fields.Float(allow_none=True)
    intervals = fields.Function(lambda result: None if result.intervals is None else result.intervals.tolist())

    def drawn_weights(self, result):
        draw = result.estimate.draw
        return reweighting_diagonal(draw, result.probabilities)[draw.indices].tolist()


class DatasetSchema(Schema):
    X = fields.List(fields.List(fields.Float()), required=True, validate=validate.Length(min=1))
    Y = fields.List(fields.Float(), required=True, validate=validate.Length(min=1))

    @validates("X")
    def rows_have_equal_length(self, X):
        if len({len(row) for row in X}) > 1:
            raise ValidationError("All rows of X must have the same length")


class ProbsRequestSchema(DatasetSchema):
    scheme = fields.Nested(SchemeSpecSchema, required=True)


class EstimateRequestSchema(ProbsRequestSchema):
    r = fields.Integer(required=True, validate=validate.Range(min=1))
    seed = fields.Integer(load_default=0, validate=validate.Range(min=0))
    level = fields.Float(allow_none=True, load_default=None, validate=_open_unit)


class DiagnoseRequestSchema(ProbsRequestSchema):
    r = fields.Integer(required=True, validate=validate.Range(min=1))
