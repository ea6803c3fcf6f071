"""veribench: benchmark-audit and verified-evaluation toolkit.

Evaluates agent-produced tabular outputs against ground truth under
configurable semantic-equivalence rules, root-causes every unmatched
column with an execution-verified transform search, classifies mismatches
into a 14-leaf taxonomy with human review, validates the classifications
statistically, and emits a corrected benchmark bundle with a full
correction manifest.
"""

from .equivalence import (
    ColumnVerdict,
    EvalConfig,
    Mode,
    NullZeroRule,
    PRESETS,
    ScaleEvidence,
    cells_equivalent,
    columns_equivalent,
    detect_uniform_scale,
)
from .evaluator import (
    FailureClass,
    MetricsSummary,
    ModelVerdict,
    TaskVerdict,
    check_extraction,
    compute_metrics,
    evaluate_task,
    parse_eval_log,
    write_eval_log,
)
from .tabular import (
    CellKind,
    CellValue,
    ColumnSeries,
    DataModelSpec,
    TableArtifact,
    TaskSpec,
    TokenConfig,
    load_table,
    parse_cell,
    project_column,
)
from .taxonomy import (
    Attribution,
    ClassificationLedger,
    ColumnId,
    ErrorLeaf,
    LedgerEntry,
    Mitigability,
    record_classification,
    suggest_category,
    tally_distribution,
)
from .stats import (
    AnnotationMatrix,
    fleiss_kappa,
    majority_vote,
    mcnemar_yates,
    pairwise_agreement,
    sample_stratified,
    stratify,
)
from .workspace import AuditEnvironment, WorkItem, build_work_queue, materialize_environment
from .analyst import (
    AnalysisReport,
    DeterministicBackend,
    ExternalBackend,
    analyze_column,
    dispatch_analysis,
    verify_derivation,
)
from .corrector import (
    CorrectionManifest,
    EvalPatch,
    derive_eval_patch,
    emit_verified_bundle,
    remove_gt_columns,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
