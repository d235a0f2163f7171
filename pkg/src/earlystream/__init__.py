"""Cost-driven early classification of events in open time series."""

from .core import (
    CostModel,
    DataError,
    HorizonRange,
    InternalError,
    OpenTimeSeries,
    TriggerDecision,
    ValidationError,
    combined_cost,
    delay_cost,
    misclassification_cost,
)
from .data import (
    DatasetSplit,
    GeneratorConfig,
    HorizonDataset,
    RawWindow,
    build_horizon_datasets,
    extract_features,
    extract_window,
    feature_matrix,
    generate_synthetic,
    load_pdm_csv,
    load_series_csv,
    save_series_csv,
    select_targets,
    split_series,
)
from .classifiers import (
    ClassifierCollection,
    ConstantClassifier,
    ReferenceClassifier,
    auc,
    auc_profile,
    load_collection,
    save_collection,
    train_reference,
    tune_and_train_collection,
)
from .triggers import (
    CCParams,
    CCTrigger,
    EarlyTrigger,
    LateTrigger,
    SRParams,
    SRTrigger,
    TriggerContext,
    cc_trigger,
    early_trigger,
    late_trigger,
    sr_trigger,
    tune_cc,
    tune_sr,
)
from .economy import (
    EconomyModel,
    EconomyTrigger,
    current_membership,
    economy_trigger,
    expected_cost_at,
    fit_economy,
    project_membership,
    tune_economy,
)
from .streaming import (
    DecisionRecord,
    PendingTarget,
    PosteriorGrid,
    avg_cost_dataset,
    avg_cost_series,
    dataset_avg_cost,
    horizon_histogram,
    read_decision_log,
    run_stream,
    run_stream_reference,
    write_decision_log,
)

__version__ = "0.1.0"
