"""scikit-learn style wrapper around :func:`identify_tau_sq`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .criteria import DoubleRoleAssignment, RoleAssignment
from .dsl import parse_graph
from .gaussian import (
    EXACT_TOL,
    SAMPLE_TOL,
    LabeledCovariance,
    identify_tau_sq,
    sample_misfit_tol,
)
from .graph import PathDiagram


class SurrogateEffectEstimator(BaseEstimator):
    """Estimate a squared total effect from data on surrogate variables.

    Parameters
    ----------
    graph : PathDiagram or str
        The path diagram, or its text form.
    strategy : str
        One of the four identification strategies.
    roles : dict or RoleAssignment or DoubleRoleAssignment
        Vertex roles. A dict is passed as keyword arguments to the matching
        role class.
    feature_names : sequence of str, optional
        Column labels when ``X`` is a plain array. DataFrame columns are used
        otherwise.
    sample_tol : float
        Tolerance for near-zero and sign decisions on estimated covariances.
    lambda_sign : {1, -1}
        Sign convention for the recovered loading vector; the result does not
        depend on it.

    Attributes
    ----------
    tau_squared_ : float
    result_ : IdentificationResult
    covariance_ : LabeledCovariance
        Sample correlation matrix of the observed columns.
    n_samples_ : int
    feature_names_in_ : ndarray of str
    """

    def __init__(
        self,
        graph=None,
        strategy="backdoor-latent-response",
        roles=None,
        feature_names=None,
        sample_tol=SAMPLE_TOL,
        lambda_sign=1,
    ):
        self.graph = graph
        self.strategy = strategy
        self.roles = roles
        self.feature_names = feature_names
        self.sample_tol = sample_tol
        self.lambda_sign = lambda_sign

    def _diagram(self) -> PathDiagram:
        if isinstance(self.graph, PathDiagram):
            return self.graph
        if isinstance(self.graph, str):
            return parse_graph(self.graph).diagram
        raise TypeError("graph must be a PathDiagram or graph text")

    def _roles(self):
        roles = self.roles
        if isinstance(roles, (RoleAssignment, DoubleRoleAssignment)):
            return roles
        if not isinstance(roles, dict):
            raise TypeError("roles must be a dict or a role assignment")
        if self.strategy == "double-latent":
            return DoubleRoleAssignment(**roles)
        kind = "treatment" if self.strategy == "backdoor-latent-treatment" else "response"
        roles = dict(roles)
        roles.setdefault("y_kind", kind)
        return RoleAssignment(**roles)

    def fit(self, X, y=None):
        """Fit from an ``(n_samples, n_features)`` array of observed variables."""
        names = getattr(X, "columns", None)
        names = list(names) if names is not None else self.feature_names
        X = check_array(X, ensure_min_samples=3, ensure_min_features=3)
        if names is None:
            raise ValueError("column labels are required: pass a DataFrame or feature_names")
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")
        cov = LabeledCovariance([str(n) for n in names], np.cov(X, rowvar=False))
        self.feature_names_in_ = np.asarray(names, dtype=object)
        self.n_samples_ = X.shape[0]
        self._fit_cov(cov.to_correlation(), self.sample_tol, sample_misfit_tol(X.shape[0], self.sample_tol))
        return self

    def fit_covariance(self, cov: LabeledCovariance, n_samples=None):
        """Fit from a covariance matrix.

        Without ``n_samples`` the matrix is treated as exact and the strict
        tolerance applies; with it, the sample-regime tolerances are used.
        """
        self.feature_names_in_ = np.asarray(cov.labels, dtype=object)
        self.n_samples_ = n_samples
        if n_samples is None:
            self._fit_cov(cov, EXACT_TOL, None)
        else:
            self._fit_cov(cov.to_correlation(), self.sample_tol, sample_misfit_tol(n_samples, self.sample_tol))
        return self

    def _fit_cov(self, cov, tol, misfit_tol):
        self.covariance_ = cov
        self.result_ = identify_tau_sq(
            cov, self._diagram(), self._roles(), self.strategy,
            tol=tol, lambda_sign=self.lambda_sign, misfit_tol=misfit_tol,
        )
        self.tau_squared_ = self.result_.tau_squared

    def total_effect_magnitude(self) -> float:
        """``sqrt(tau_squared_)``; the sign is not identified."""
        check_is_fitted(self, "tau_squared_")
        return float(np.sqrt(self.tau_squared_))
