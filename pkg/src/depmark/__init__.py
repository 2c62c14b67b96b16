"""depmark: transient dependability analysis of small Markov reliability
models.

The package parses a plain-text modelling language into a continuous-time
Markov chain, solves the transient state probabilities by several methods
(uniformization by default), collapses distributions into reliability and
safety metrics, sweeps parameters such as detection coverage, cross-checks
everything against a seeded Monte Carlo simulator, and audits externally
published metric tables for internal consistency.  The `depmark` command
wraps the same operations for batch use.
"""

__version__ = "0.1.0"

from .analysis import (
    AuditReport,
    AuditRow,
    DependabilityMetrics,
    LengthMismatchError,
    RELIABILITY_TARGET,
    RequirementVerdict,
    SweepRow,
    TimeMismatchError,
    UNSAFE_CEILING,
    audit_table,
    check_requirements,
    compose_independent,
    export_timeseries,
    metrics,
    metrics_rows,
    sweep,
)
from .lang import (
    ModelParseError,
    ParseError,
    ParseErrorKind,
    SourceSpan,
    bundled_model_path,
    bundled_table_path,
    load_model,
    parse,
    serialize,
)
from .model import (
    Constant,
    DepmarkError,
    Difference,
    Finding,
    GeneratorMatrix,
    MarkovModel,
    NegativeRateError,
    ParamRef,
    ParameterDomainError,
    ParameterSet,
    Product,
    RateExpr,
    SIX_MONTHS_HOURS,
    Severity,
    State,
    StateClass,
    Sum,
    Transition,
    TransitionKind,
    UnknownParameterError,
    ValidationReport,
    absorbing_states,
    build_generator,
    evaluate_rate,
    referenced_parameters,
    validate,
)
from .simulate import BATCH_SIZE, SimulationResult, Z99, simulate
from .solve import (
    MassDefectReport,
    Method,
    NumericFailureError,
    ShapeMismatchError,
    SolverConfig,
    StepTooLargeError,
    Trajectory,
    solve_at,
    solve_euler,
    solve_grid,
    solve_paper_literal,
)

__all__ = [
    "__version__",
    # model core
    "DepmarkError",
    "UnknownParameterError",
    "NegativeRateError",
    "ParameterDomainError",
    "StateClass",
    "TransitionKind",
    "RateExpr",
    "Constant",
    "ParamRef",
    "Sum",
    "Difference",
    "Product",
    "ParameterSet",
    "State",
    "Transition",
    "MarkovModel",
    "GeneratorMatrix",
    "Severity",
    "Finding",
    "ValidationReport",
    "SIX_MONTHS_HOURS",
    "build_generator",
    "evaluate_rate",
    "referenced_parameters",
    "validate",
    "absorbing_states",
    # language
    "parse",
    "serialize",
    "load_model",
    "ParseError",
    "ParseErrorKind",
    "SourceSpan",
    "ModelParseError",
    "bundled_model_path",
    "bundled_table_path",
    # solvers
    "Method",
    "SolverConfig",
    "Trajectory",
    "MassDefectReport",
    "NumericFailureError",
    "StepTooLargeError",
    "ShapeMismatchError",
    "solve_at",
    "solve_grid",
    "solve_euler",
    "solve_paper_literal",
    # analysis
    "DependabilityMetrics",
    "LengthMismatchError",
    "TimeMismatchError",
    "SweepRow",
    "RequirementVerdict",
    "AuditRow",
    "AuditReport",
    "RELIABILITY_TARGET",
    "UNSAFE_CEILING",
    "metrics",
    "metrics_rows",
    "sweep",
    "check_requirements",
    "compose_independent",
    "audit_table",
    "export_timeseries",
    # simulation
    "SimulationResult",
    "BATCH_SIZE",
    "Z99",
    "simulate",
]
