"""Squared total effects in linear SEMs when the treatment or response is latent.

The graphical side (:mod:`.graph`, :mod:`.criteria`) decides from a path
diagram whether surrogate variables identify the effect; the numerical side
(:mod:`.gaussian`) recovers it from a covariance matrix of the observed
variables.
"""

from .criteria import (
    CriterionCertificate,
    DoubleRoleAssignment,
    RoleAssignment,
    back_door,
    conditional_iv,
    find_strategies,
    single_door,
    theorem1_check,
    theorem2_check,
)
from .dsl import format_graph, load_covariance, load_graph, parse_graph
from .estimator import SurrogateEffectEstimator
from .gaussian import (
    LabeledCovariance,
    conditional_cov,
    concentration,
    deflate,
    identify_tau_sq,
    recover_lambda,
    regression_coef,
)
from .graph import PathDiagram, d_separates, moralize, u_separates
from .sem import LinearSEM, implied_covariance, sample_covariance, total_effect_oracle

__version__ = "0.1.0"
