"""
api.py
========================
JSON endpoints exposing sampling probabilities, single subsample estimates, regularity diagnostics and whole
experiments over HTTP.
"""
from hashlib import sha256

import numpy as np
from flask import Blueprint, current_app, request
from flask.views import MethodView
from flask_caching import Cache
from marshmallow import Schema, ValidationError

from levsample.asymptotics import check_regularity
from levsample.errors import InvalidSpec
from levsample.harness import estimate, run_experiment
from levsample.linalg import ols_fit
from levsample.models import (DiagnoseRequestSchema, EstimateRequestSchema, EstimateResultSchema,
                              ExperimentConfigSchema, ExperimentReportSchema, ProbsRequestSchema,
                              RegularityDiagnosticsSchema)
from levsample.probs import OPTIMAL_SCHEME, Scheme, build_probs

bp = Blueprint('levsample', __name__, url_prefix="/v1")

cache = Cache()


@bp.route("/schemes", methods=["GET"], strict_slashes=False)
@cache.cached()
def list_schemes():
    criteria = {scheme: f"{mode.value} {target.value}" for (mode, target), scheme in OPTIMAL_SCHEME.items()}
    return {scheme.value: criteria.get(scheme) for scheme in Scheme}


class Computation(MethodView):
    """A POST endpoint that validates its body with ``schema`` and answers with ``compute``."""
    schema: Schema

    def post(self):
        try:
            payload = self.schema.load(request.get_json())
        except ValidationError as err:
            return {"message": str(err.messages)}, 400
        return self.compute(payload), 200

    def compute(self, payload):
        raise NotImplementedError


class ProbsComputation(Computation):
    schema = ProbsRequestSchema()

    def compute(self, payload):
        X = np.array(payload["X"])
        fit = ols_fit(X, payload["Y"])
        return {"pi": build_probs(X, fit, payload["scheme"]).pi.tolist()}


class EstimateComputation(Computation):
    schema = EstimateRequestSchema()

    def compute(self, payload):
        result = estimate(np.array(payload["X"]), payload["Y"], payload["scheme"], payload["r"], payload["seed"],
                          level=payload["level"])
        return EstimateResultSchema().dump(result)


class DiagnoseComputation(Computation):
    schema = DiagnoseRequestSchema()

    def compute(self, payload):
        X = np.array(payload["X"])
        fit = ols_fit(X, payload["Y"])
        pi = build_probs(X, fit, payload["scheme"])
        diagnostics = check_regularity(X, pi, payload["r"], current_app.config["MIN_SAMPLING_MASS"])
        return RegularityDiagnosticsSchema().dump(diagnostics)


class ExperimentComputation(Computation):
    schema = ExperimentConfigSchema()

    # reports are deterministic in the configuration, so identical bodies share one cache entry
    def post(self):
        key = "experiment/" + sha256(request.get_data()).hexdigest()
        report = cache.get(key)
        if report is None:
            report, status = super().post()
            if status != 200:
                return report, status
            cache.set(key, report)
        return report, 200

    def compute(self, cfg):
        if cfg.csv is not None:
            raise InvalidSpec("CSV sources are not available over the web API")
        current_app.logger.info("Running experiment for %s", request.remote_addr)
        return ExperimentReportSchema(exclude=("wall_time",)).dump(run_experiment(cfg))


bp.add_url_rule("/probs", view_func=ProbsComputation.as_view("probs_api"), methods=["POST"], strict_slashes=False)
bp.add_url_rule("/estimate", view_func=EstimateComputation.as_view("estimate_api"), methods=["POST"],
                strict_slashes=False)
bp.add_url_rule("/diagnose", view_func=DiagnoseComputation.as_view("diagnose_api"), methods=["POST"],
                strict_slashes=False)
bp.add_url_rule("/experiments", view_func=ExperimentComputation.as_view("experiment_api"), methods=["POST"],
                strict_slashes=False)
