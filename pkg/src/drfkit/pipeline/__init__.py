"""Cohort orchestration: manifests, extraction, statistics and reports."""

from .analysis import (
    ClassificationResult,
    GroupComparison,
    UnivariateResult,
    align,
    compare_groups,
    run_classification,
    run_univariate,
    survival_labels,
)
from .config import (
    MANIFEST_COLUMNS,
    ManifestRow,
    RunConfig,
    build_config,
    read_config_file,
    read_manifest,
    write_manifest,
)
from .extract import (
    KINDS,
    FeatureTable,
    extract_cohort_features,
    patient_features,
    read_error_ledger,
    read_feature_table,
    write_error_ledger,
    write_feature_table,
)
from .reports import km_svg, write_classification, write_run_manifest, write_screening
from .synth import SynthSpec, generate_synthetic_cohort, simulate_patient
