"""Support measure machines: SVM classification of probability distributions
through kernel mean embeddings."""

from .exceptions import (ConvergenceWarning, DegenerateLabels, DimensionMismatch, GramNotPSD,
                         NegativeSquaredDistance, NoClosedForm, NotPSD, SingularSolve, SMMError,
                         UnsupportedKernel)
from .expected import (ExpectedKernelConfig, GramMatrix, cross_gram, empirical_expected_kernel,
                       expected_kernel, gram, mean_embedding, mean_embedding_eval, self_kernels)
from .flex import (FlexSVM, SmoothingFamily, composed_rbf, fit_flex_svm, flex_gram, flex_kernel,
                   verify_equivalence)
from .kernels import LinearKernel, PolynomialKernel, RBFKernel, eval_base, parse_kernel
from .level2 import (Level2Linear, Level2Polynomial, Level2RBF, level2_eval, level2_gram,
                     parse_level2, rkhs_sq_distance)
from .measures import (Dirac, Empirical, Gaussian, LabeledMeasureSet, MomentOnly, make_dirac,
                       make_empirical, make_gaussian, make_moment, moments, sample)
from .model import (TrainedSMM, accuracy, decision, decision_function, load_model, predict,
                    save_model, train)
from .solver import SolverParams, smo_solve
from .verification import (LipschitzBudget, empirical_risks, lipschitz_bound_rkhs,
                           risk_deviation_check)

__version__ = "0.1.0"
