"""scorestack: semi-supervised outlier detection by score stacking.

Pipeline: unsupervised detectors turn the raw features into outlier-score
columns (fitted on train only), a selection pass keeps the useful columns,
and a regularized boosted-tree classifier predicts on the combined feature
space. Ships the linear-model baselines, ranking metrics, nonparametric
tests and a seeded multi-trial experiment harness.
"""

from .baselines import (
    EnsembleModel,
    LinearModel,
    easy_ensemble,
    load_linear_model,
    predict_proba_linear,
    save_linear_model,
    train_logreg,
)
from .boost import (
    BoostedModel,
    BoostParams,
    feature_importance,
    load_model,
    post_prune_top_q,
    predict_proba,
    save_model,
    train_gbt,
)
from .data import (
    Dataset,
    IngestionError,
    PRESETS,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    preset,
    save_csv,
    split_train_test,
)
from .detectors import (
    DetectorSpec,
    GridConfig,
    NeighborIndex,
    SkippedDetector,
    build_grid,
    fit_detector,
    score_points,
    score_training,
    spec_from_string,
    spec_to_string,
)
from .evaluation import (
    friedman_test,
    nemenyi_cd,
    precision_at_n,
    roc_auc,
    wilcoxon_rank_sum,
)
from .experiment import ExperimentConfig, ExperimentReport, TrialResult, run_experiment
from .selection import (
    CombinedFeatureSpace,
    SelectionResult,
    accurate_select,
    balance_select,
    combine_features,
    pearson,
    random_select,
    selection_report_row,
)
from .tos import TosMatrix, best_tos, build_tos, full_tos, normalize_column

__version__ = "0.1.0"
