"""Long-tail novelty preference learning and top-N re-ranking."""

from .dataset import (
    ItemStats,
    Rating,
    SplitDataset,
    activity_popularity_profile,
    compute_item_stats,
    load_ratings,
    min_max_normalize,
    relevant_test_items,
    split_per_user,
)
from .preference import (
    PerUserItemPreference,
    PreferenceVector,
    compute_theta_ui,
    theta_activity,
    theta_baseline,
    theta_generalized,
    theta_normalized_longtail,
    theta_tfidf,
)
from .recommenders import (
    MFModel,
    dyn_coverage,
    load_external_scores,
    mf_accuracy_scorer,
    pop_scorer,
    rand_coverage,
    rmse,
    rsvd_train,
    stat_coverage,
)
from .core import (
    OslgRun,
    RecFrequency,
    SnapshotStore,
    TopNCollection,
    brute_force_optimal,
    collection_value,
    greedy_topn_user,
    independent_greedy,
    kde_sample,
    locally_greedy_full,
    oslg,
    submodularity_check,
    user_value,
)
from .metrics import (
    EvalReport,
    coverage_at_n,
    evaluate,
    gini,
    lt_accuracy_at_n,
    precision_recall_at_n,
    strat_recall_at_n,
)

__version__ = "0.1.0"
