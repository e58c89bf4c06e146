"""Few-shot regression of exact Wasserstein distances on sliced lower and upper bounds."""

__version__ = "0.1.0"

from .errors import ConfigMismatchError, DataError, ModelFormatError, ModelVersionError, NumericalError, WassregError
from .exact import ExactOTResult, brute_force_wasserstein, cost_matrix, exact_wasserstein
from .experiments import (
    GaussianMixtureSpec,
    MetricReport,
    dimension_sweep,
    knn_accuracy,
    knn_classify,
    metrics,
    pairwise_matrix,
    sample_gaussian_mixture,
)
from .measures import DiscreteMeasure, MeasureDataset, PairIndex, load_dataset, load_measure, read_pairs, sample_pairs
from .ot1d import ProjectedMeasure, SparsePlan, lifted_cost, project, w1d_cost, w1d_plan
from .regression import (
    DesignMatrix,
    RegressionModel,
    build_design,
    fit,
    fit_constrained_general,
    fit_constrained_k1,
    fit_unconstrained,
    load_model,
    predict,
    predict_array,
    predict_pair,
    save_model,
)
from .sampling import SeedSpec, sample_directions
from .sliced import (
    KINDS,
    FeatureVector,
    PredictorConfig,
    Preset,
    ebsw_hat,
    est_hat,
    evaluate_features,
    maxsw_hat,
    minswgg_hat,
    preset,
    pw_hat,
    sw_hat,
)
