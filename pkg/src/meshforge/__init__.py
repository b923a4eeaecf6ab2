"""Learning and programming layered linear-optical interferometer models."""

from .learn import (
    ConvergenceTrace,
    CrossValidationReport,
    Dataset,
    LearnConfig,
    TrainingPair,
    cross_validate,
    default_epochs,
    generate_dataset,
    init_a_priori,
    init_black_box,
    learn_model,
)
from .matcore import (
    Rng,
    ShapeError,
    SingularMatrixError,
    fidelity,
    frobenius_distance,
    haar_random_unitary,
    perturb_unitary,
    polar_unitary_factor,
)
from .mesh import MeshModel, chain_ab, chain_cd, forward, grad_basis, grad_phases
from .optim import NonFiniteObjectiveError, OptimizerConfig, minimize
from .tune import TuneConfig, TuneResult, program_phases

__version__ = "0.1.0"
