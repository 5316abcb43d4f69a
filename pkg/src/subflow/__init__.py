"""Flows of derivations on embedded differential spaces.

Construct a space from equality/inequality constraints, specify a
derivation by its ambient component expressions, and integrate: the
ambient vector field is solved with dense output and the trajectory is
restricted to the connected membership component containing t = 0.
Algebraic identity checkers (Leibniz, chain rule, inverse rule,
Hadamard decomposition, evaluation-point verification) accompany the
flow machinery.
"""

from .expr import (
    Expr,
    Const,
    Coord,
    parse,
    evaluate,
    diff,
    substitute,
    to_string,
    ParseError,
    DomainError,
    DimensionError,
)
from .dspace import (
    EmbeddedSpace,
    RestrictedFunction,
    restricted_eq,
    bump,
    load_space_file,
    space_from_dict,
    SpaceError,
    SamplingExhaustedError,
)
from .derivation import (
    Derivation,
    CheckReport,
    HadamardDecomposition,
    apply,
    leibniz_check,
    chain_rule_check,
    inverse_rule_check,
    hadamard_decompose,
    tangency_check,
    point_determined_check,
)
from .flow import (
    Tolerances,
    AmbientVectorField,
    IntegralCurve,
    FlowResult,
    integrate_ambient,
    maximal_curve,
    flow,
    curve_residual_check,
    translation_check,
    FlowError,
    NonMemberSeedError,
)

__version__ = "0.1.0"

__all__ = [
    "Expr", "Const", "Coord", "parse", "evaluate", "diff", "substitute",
    "to_string", "ParseError", "DomainError", "DimensionError",
    "EmbeddedSpace", "RestrictedFunction", "restricted_eq", "bump",
    "load_space_file", "space_from_dict", "SpaceError",
    "SamplingExhaustedError",
    "Derivation", "CheckReport", "HadamardDecomposition", "apply",
    "leibniz_check", "chain_rule_check", "inverse_rule_check",
    "hadamard_decompose", "tangency_check", "point_determined_check",
    "Tolerances", "AmbientVectorField", "IntegralCurve", "FlowResult",
    "integrate_ambient", "maximal_curve", "flow", "curve_residual_check",
    "translation_check", "FlowError", "NonMemberSeedError",
]
