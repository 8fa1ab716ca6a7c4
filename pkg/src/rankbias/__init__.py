"""rankbias: quantify user bias, content bias, and combined user-content
bias of an online information provider from its ranked result lists, with a
synthetic provider for controlled validation."""

from .aggregation import (
    ListCollection,
    aggregate,
    aggregate_borda,
    aggregate_median_rank,
    kemeny_exact,
    kemeny_score,
)
from .audit import AuditReport, compare_audit, run_audit
from .distances import (
    attribute_distribution,
    distribution_distance,
    kendall_distance,
    rbo_distance,
    topk_overlap_distance,
    user_distance,
)
from .errors import (
    AuditError,
    ComplexityError,
    ConfigError,
    FormatError,
    InputError,
    MeasureUndefinedError,
    ModeError,
    ParameterError,
    ProfileError,
    SchemaError,
)
from .measures import (
    AuditInput,
    BiasVerdict,
    MeasureConfig,
    combined_bias,
    comparative_bias,
    content_bias,
    echo_chamber_test,
    group_user_bias,
    individual_user_bias,
    probabilistic_group_bias,
)
from .significance import SignificanceResult, bootstrap_ci, permutation_test
from .simulator import (
    OtherAttribute,
    QuerySpec,
    ScenarioConfig,
    audit_input_from_scenario,
    generate_profiles,
    generate_queries,
    serve,
    serve_all,
)
from .types import UNANNOTATED, AttributeSchema, GroundTruth, RankedList, ResultItem, UserProfile

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema",
    "AuditError",
    "AuditInput",
    "AuditReport",
    "BiasVerdict",
    "ComplexityError",
    "ConfigError",
    "FormatError",
    "GroundTruth",
    "InputError",
    "ListCollection",
    "MeasureConfig",
    "MeasureUndefinedError",
    "ModeError",
    "OtherAttribute",
    "ParameterError",
    "ProfileError",
    "QuerySpec",
    "RankedList",
    "ResultItem",
    "ScenarioConfig",
    "SchemaError",
    "SignificanceResult",
    "UNANNOTATED",
    "UserProfile",
    "aggregate",
    "aggregate_borda",
    "aggregate_median_rank",
    "attribute_distribution",
    "audit_input_from_scenario",
    "bootstrap_ci",
    "combined_bias",
    "comparative_bias",
    "compare_audit",
    "content_bias",
    "distribution_distance",
    "echo_chamber_test",
    "generate_profiles",
    "generate_queries",
    "group_user_bias",
    "individual_user_bias",
    "kemeny_exact",
    "kemeny_score",
    "kendall_distance",
    "permutation_test",
    "probabilistic_group_bias",
    "rbo_distance",
    "run_audit",
    "serve",
    "serve_all",
    "topk_overlap_distance",
    "user_distance",
]
