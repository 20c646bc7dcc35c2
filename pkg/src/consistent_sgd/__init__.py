"""SGD with unbiased and consistent (layer-sampled) gradient estimators on
synthetic graph-convolution problems, with convergence-bound evaluators and a
rate-verification harness."""

from consistent_sgd.bounds import (
    BoundConstants,
    BoundCurve,
    TheoremId,
    bound_curve,
    bound_value,
    d_f,
    required_sample_size,
)
from consistent_sgd.datagen import (
    GroundTruth,
    MixtureParams,
    gen_adjacency,
    gen_features,
    gen_ground_truth,
)
from consistent_sgd.estimators import (
    EstimatorSpec,
    GradientSample,
    TailEstimate,
    empirical_tail,
    estimate_gradient,
    estimator_mse,
)
from consistent_sgd.optimizer import (
    FeasibleRegion,
    RunTrace,
    StepSchedule,
    project,
    run_sgd,
    step_size,
)
from consistent_sgd.problems import (
    CurvatureConstants,
    GraphProblem,
    build_problem,
    curvature_constants,
    gradient,
    objective,
)

__version__ = "0.1.0"
