"""causalkit: sampled verification of causal-cone inclusion for maps
between Lorentzian spacetimes.

The package decides, on sampled regions, whether a smooth map between
two oriented Lorentzian spacetimes sends every future-directed causal
vector to a future-directed causal vector, and reports margins,
witnesses and conformal factors.
"""

__version__ = "0.1.0"

from .exprcore import (
    Dual,
    EvalDomainError,
    ParseError,
    SingularJacobianError,
    UnknownIdentifierError,
    eval_dual,
    eval_expr,
    jacobian,
    parse_expr,
    substitute,
    to_text,
)
from .lorentz import (
    AsymmetricError,
    CausalClass,
    DegenerateMetricError,
    MetricValue,
    OrientedPoint,
    SignatureError,
    causal_character,
    orthonormal_frame,
    raise_index,
    validate_metric,
)
from .dp import (
    DPStatus,
    DPVerdict,
    NullEigenResult,
    TOL_DP,
    conformal_factor,
    dp1_check,
    dp2_check,
    dp_zero_test,
    null_eigenvectors,
    sphere_directions,
)
from .relate import (
    ConformalReport,
    DEFAULT_MARGIN,
    DEFAULT_SAMPLES,
    IsoReport,
    MapDef,
    RegionSampler,
    RelationReport,
    SpacetimeDef,
    TOL_CONF,
    UnionSampler,
    Verdict,
    Witness,
    canonical_null_directions,
    check_conformal,
    check_isomorphism,
    check_proper_causal,
    compose_maps,
    curve_pushforward_check,
    pullback_metric,
)
from .defio import (
    DefFileError,
    load_flow,
    load_map,
    load_spacetime,
    parse_flow,
    parse_map,
    parse_spacetime,
    serialize_flow,
    serialize_map,
    serialize_spacetime,
)
from .flows import (
    FlowDef,
    GeneratorField,
    NullConeReport,
    SubmonoidReport,
    check_submonoid,
    flow_map,
    generator,
    lie_derivative_metric,
    null_cone_nonneg,
    verify_identity,
)
from .catalog import (
    ScenarioOutcome,
    builtin,
    builtin_names,
    builtin_registry,
    canonical_json,
    default_window,
    run_scenario,
    scenario_names,
)
from .cli import main

__all__ = [
    "AsymmetricError",
    "CausalClass",
    "ConformalReport",
    "DEFAULT_MARGIN",
    "DEFAULT_SAMPLES",
    "DPStatus",
    "DPVerdict",
    "DefFileError",
    "DegenerateMetricError",
    "Dual",
    "EvalDomainError",
    "FlowDef",
    "GeneratorField",
    "IsoReport",
    "MapDef",
    "MetricValue",
    "NullConeReport",
    "NullEigenResult",
    "OrientedPoint",
    "ParseError",
    "RegionSampler",
    "RelationReport",
    "ScenarioOutcome",
    "SignatureError",
    "SingularJacobianError",
    "SpacetimeDef",
    "SubmonoidReport",
    "TOL_CONF",
    "TOL_DP",
    "UnionSampler",
    "UnknownIdentifierError",
    "Verdict",
    "Witness",
    "builtin",
    "builtin_names",
    "builtin_registry",
    "canonical_json",
    "canonical_null_directions",
    "causal_character",
    "check_conformal",
    "check_isomorphism",
    "check_proper_causal",
    "check_submonoid",
    "compose_maps",
    "conformal_factor",
    "curve_pushforward_check",
    "default_window",
    "dp1_check",
    "dp2_check",
    "dp_zero_test",
    "eval_dual",
    "eval_expr",
    "flow_map",
    "generator",
    "jacobian",
    "lie_derivative_metric",
    "load_flow",
    "load_map",
    "load_spacetime",
    "main",
    "null_cone_nonneg",
    "null_eigenvectors",
    "orthonormal_frame",
    "parse_expr",
    "parse_flow",
    "parse_map",
    "parse_spacetime",
    "pullback_metric",
    "raise_index",
    "run_scenario",
    "scenario_names",
    "serialize_flow",
    "serialize_map",
    "serialize_spacetime",
    "sphere_directions",
    "substitute",
    "to_text",
    "validate_metric",
    "verify_identity",
]
