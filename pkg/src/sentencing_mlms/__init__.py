"""Saturated sentencing model with an online momentum LMS learner.

The structural sentencing formula is rewritten exactly as a linear model
``phi @ theta`` clamped to the statutory range, and ``theta`` is tracked
online from a stream of decided cases.
"""

from .errors import (
    CapacityError,
    ConfigError,
    QuadratureError,
    SentencingError,
    StreamError,
    ValidationError,
)
from .metrics import (
    AccuracyTrace,
    not_one_check,
    oracle_predict,
    relative_accuracy,
    theorem2_bound,
    theorem2_bound_stream,
)
from .mlms import (
    ConstantMomentum,
    DecayingMomentum,
    Hyperparams,
    LearnerState,
    RunReport,
    TheoryRegimeWarning,
    predict,
    project_box,
    run_stream,
    update,
)
from .noise import (
    GaussianNoiseModel,
    fit_sigma,
    quadrature_oracle,
    sat_abs_deviation,
    sat_mean,
    sat_mean_deriv,
)
from .simulator import (
    CountLaw,
    DriftSpec,
    ExperimentSummary,
    StartingPoint,
    StreamSpec,
    gen_case_stream,
    gen_parameter_path,
    reference_spec,
    run_experiment,
    run_replication,
)
from .sms_core import (
    CaseRecord,
    StructuralParams,
    ThetaVector,
    build_regressor,
    build_theta,
    expand_conviction_basis,
    regressor_dim,
    saturate,
    sms_generate,
    sms_inner,
)

__all__ = [name for name in dir() if not name.startswith("_")]
