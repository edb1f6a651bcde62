"""Bias measurement for grounded (vision and language) embeddings.

Implements the classic association test over cosine similarities plus
three grounded generalizations that exploit image-category structure, with
effect sizes and permutation-test significance, over a bit-exact embedding
store format.
"""

from .errors import (
    BadMagic,
    CategoryMismatch,
    CorruptRecord,
    DanglingReference,
    DataError,
    DegenerateVariance,
    DimensionMismatch,
    EmptyAttributeSet,
    EmptyTargetSet,
    GroundedBiasError,
    InternalConsistencyError,
    InvalidIdentifier,
    InvalidPlan,
    InvalidTest,
    InvariantViolation,
    MissingEmbedding,
    Overflow,
    SchemaError,
    UnsupportedVersion,
    ZeroVector,
)
from .experiments import (
    FormulaAudit,
    FormulaTerm,
    ResolvedSets,
    element_values,
    exp1_statistic,
    exp2_statistic,
    exp3_statistic,
    experiment_statistic,
    formula_terms,
    grounded_effect_size,
    resolve,
    ungrounded_statistic,
)
from .model import (
    DEFAULT_SIGNIFICANCE_THRESHOLD,
    Experiment,
    Granularity,
    GroundedBiasTest,
    ImageCategory,
    ImageLabel,
    PValueMethod,
    StimulusKey,
    TargetElement,
    TestResult,
    make_key,
    parse_key,
    ungrounded_key,
    validate_image_labels,
)
from .runner import (
    PlanMode,
    PlanRequest,
    RecordStatus,
    ReportFormat,
    RunConfig,
    SuiteRecord,
    SuiteResult,
    render_report,
    run_suite,
)
from .significance import (
    PermutationPlan,
    auto_plan,
    count_partitions,
    exact_distribution,
    grounded_permutation,
    permutation_pvalue,
    pvalue_from_values,
)
from .stats import (
    association_values,
    cosine,
    cosine_matrix,
    differential_association,
    effect_size,
    effect_size_from_values,
    word_association,
)
from .storeio import (
    BalanceReport,
    BalanceViolation,
    EmbeddingStore,
    SpecFile,
    parse_spec,
    parse_spec_text,
    read_store,
    serialize_spec,
    spec_to_document,
    validate_balance,
    write_spec,
    write_store,
)
from .synthetic import PlantedBiasParams, generate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
