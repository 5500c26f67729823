"""Preference-aware multi-attribute Bayesian optimization.

Optimizes expensive vector-valued black boxes on behalf of a
decision-maker whose utility over the attributes is uncertain and learned
from pairwise comparisons. Ships GP surrogates, utility-uncertain
acquisition policies, a replicated benchmark harness, and an HTTP session
service for live human-in-the-loop runs.
"""

from .acquisition import (
    AcquisitionContext,
    SgaConfig,
    ei_uu_grad_estimate,
    ei_uu_linear,
    ei_uu_linear_grad,
    ei_uu_mc,
    ei_uu_threshold,
    make_context,
    maximize_acquisition,
    ts_uu_select,
)
from .errors import BoundaryError, ContractError, NotReadyError, RunAbortedError
from .gp import (
    GPState,
    HyperPrior,
    KernelHyperparams,
    SamplePath,
    condition,
    fit_gp,
    fit_hyperparameters,
    matern52,
    posterior,
    posterior_gradients,
)
from .loop import (
    ExperimentConfig,
    GpSettings,
    RunRecord,
    Seeds,
    pareto_front,
    performance,
    run,
)
from .preference import (
    LikelihoodSpec,
    PreferenceRecord,
    ThetaPosterior,
    posterior_sample,
    respond,
    select_query_pair,
)
from .problems import PROBLEM_IDS, get_problem
from .utility import (
    ExponentialUtility,
    FiniteUniformPrior,
    LinearUtility,
    OrderedSimplexPrior,
    QuadraticUtility,
    SoftmaxLinearUtility,
    ThresholdUtility,
    UniformBoxPrior,
    family_from_config,
    prior_from_config,
    prior_sample,
)

__version__ = "0.1.0"
