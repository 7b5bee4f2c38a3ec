"""Covariance algebra and the squared-total-effect identification strategies.

All matrices are addressed by variable label. Inversions go through a
Cholesky factorization and raise instead of falling back to a
pseudo-inverse, because a singular conditioning block is diagnostic.

The latent variable is always taken to have unit variance; the recovered
squared effects are therefore in standardized units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from scipy import linalg

from .criteria import (
    STRATEGIES,
    CriterionCertificate,
    DoubleRoleAssignment,
    RoleAssignment,
    back_door,
    conditional_iv,
    theorem1_check,
    theorem2_check,
)
from .exceptions import (
    CriterionNotSatisfied,
    DegenerateDenominator,
    EmptyPivot,
    ModelMisfit,
    NearZeroConcentration,
    NonFactorizable,
    NotStandardized,
    RoleError,
    SingularMatrixError,
)
from .graph import PathDiagram

EXACT_TOL = 1e-8
SAMPLE_TOL = 1e-2
MAX_CONDITION = 1e12
STANDARDIZED_TOL = 1e-6


def _labels(x) -> Tuple[str, ...]:
    if x is None:
        return ()
    if isinstance(x, str):
        return (x,)
    return tuple(x)


@dataclass(frozen=True, eq=False)
class LabeledMatrix:
    labels: Tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        matrix = np.array(self.matrix, dtype=float)
        matrix.setflags(write=False)
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be distinct")
        if matrix.shape != (len(labels), len(labels)):
            raise ValueError(f"matrix shape {matrix.shape} does not match {len(labels)} labels")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", matrix)

    def index(self, labels) -> list:
        pos = {l: i for i, l in enumerate(self.labels)}
        try:
            return [pos[l] for l in _labels(labels)]
        except KeyError as exc:
            raise KeyError(f"unknown label {exc.args[0]!r}") from None

    def block(self, rows, cols) -> np.ndarray:
        return self.matrix[np.ix_(self.index(rows), self.index(cols))]

    def entry(self, a: str, b: str) -> float:
        i, j = self.index((a, b))
        return float(self.matrix[i, j])

    def to_dict(self):
        return {"labels": list(self.labels), "matrix": self.matrix.tolist()}


class LabeledCovariance(LabeledMatrix):
    """Symmetric positive-definite covariance matrix with variable labels."""

    def __post_init__(self):
        super().__post_init__()
        m = self.matrix
        if m.size == 0:
            return
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-9):
            raise ValueError("covariance matrix is not symmetric")
        eig = np.linalg.eigvalsh(m)
        if eig[0] <= 1e-10 * eig[-1]:
            raise ValueError("covariance matrix is not positive definite")

    def marginal(self, labels) -> "LabeledCovariance":
        labels = _labels(labels)
        return LabeledCovariance(labels, self.block(labels, labels))

    def to_correlation(self) -> "LabeledCovariance":
        s = np.sqrt(np.diag(self.matrix))
        corr = self.matrix / np.outer(s, s)
        corr = (corr + corr.T) / 2
        np.fill_diagonal(corr, 1.0)
        return LabeledCovariance(self.labels, corr)


class CrossProducts(LabeledMatrix):
    """Entry ``(a, b)`` estimates ``cov(a, y) * cov(y, b)`` for the latent ``y``."""


@dataclass(frozen=True, eq=False)
class LambdaDecomposition:
    labels: Tuple[str, ...]
    lam: np.ndarray
    lambda_outer: np.ndarray
    pivots: Mapping[str, Tuple[str, ...]]
    consistency_residual: float
    zero_pattern_residual: float
    concentration: np.ndarray


@dataclass(frozen=True, eq=False)
class IdentificationResult:
    strategy: str
    tau_squared: float
    certificate: CriterionCertificate
    numeric_diagnostics: Dict[str, object] = field(default_factory=dict)
    decompositions: Tuple[LambdaDecomposition, ...] = ()

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "tau_squared": self.tau_squared,
            "certificate": self.certificate.to_dict(),
            "diagnostics": self.numeric_diagnostics,
        }


def _cholesky(m: np.ndarray, what: str):
    if m.size == 0:
        return None
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond >= MAX_CONDITION:
        raise SingularMatrixError(f"{what} is singular (condition number {cond:.3g})", what)
    try:
        return linalg.cho_factor(m, lower=True)
    except linalg.LinAlgError:
        raise SingularMatrixError(f"{what} is not positive definite", what) from None


def _spd_solve(m: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    factor = _cholesky(m, what)
    if factor is None:
        return np.zeros((0,) + rhs.shape[1:])
    return linalg.cho_solve(factor, rhs)


def conditional_cov(cov: LabeledMatrix, a, b, c=()) -> np.ndarray:
    """Schur complement ``S_ab - S_ac S_cc^-1 S_cb``."""
    a, b, c = _labels(a), _labels(b), _labels(c)
    if set(c) & (set(a) | set(b)):
        raise ValueError("conditioning labels must be disjoint from a and b")
    out = cov.block(a, b)
    if not c:
        return out
    return out - cov.block(a, c) @ _spd_solve(cov.block(c, c), cov.block(c, b), "conditioning block")


def regression_matrix(cov: LabeledMatrix, response, predictors, given=()) -> np.ndarray:
    """Coefficients of ``predictors`` when ``response`` is regressed on ``predictors | given``.

    Returns an array of shape ``(len(response), len(predictors))``.
    """
    response, predictors, given = _labels(response), _labels(predictors), _labels(given)
    s_pp = conditional_cov(cov, predictors, predictors, given)
    s_pr = conditional_cov(cov, predictors, response, given)
    return _spd_solve(s_pp, s_pr, "predictor block").T


def regression_coef(cov: LabeledMatrix, y: str, x: str, z=()) -> float:
    z = _labels(z)
    sxx = float(conditional_cov(cov, x, x, z)[0, 0])
    if sxx <= 1e-12:
        raise DegenerateDenominator(f"conditional variance of {x} vanishes", f"var({x}|{list(z)})")
    return float(conditional_cov(cov, x, y, z)[0, 0]) / sxx


def concentration(cov: LabeledMatrix, s) -> LabeledMatrix:
    s = _labels(s)
    block = cov.block(s, s)
    inv = _spd_solve(block, np.eye(len(s)), "covariance of S")
    return LabeledMatrix(s, (inv + inv.T) / 2)


def _check_standardized(cov: LabeledMatrix, labels):
    diag = np.diag(cov.block(labels, labels))
    off = np.abs(diag - 1.0)
    if off.size and off.max() > STANDARDIZED_TOL:
        worst = labels[int(off.argmax())]
        raise NotStandardized(
            f"variance of {worst} is {diag[off.argmax()]:.9g}; input must be standardized",
            "unit variances",
        )


def recover_lambda(
    cov: LabeledMatrix,
    roles: RoleAssignment,
    cert: CriterionCertificate,
    tol: float = EXACT_TOL,
    sign: int = 1,
    misfit_tol: Optional[float] = None,
) -> LambdaDecomposition:
    """Recover the rank-one term ``lam lam'`` that the latent variable adds to the
    concentration matrix of S.

    The entries of ``lam`` for x, u, w come from the three pivot
    concentrations; the t block from the first pivot in R1; the z block from
    the first pivot in R2, where the t block itself can serve as a pivot.
    Remaining pivots are cross-checks: once ``lam`` is fixed, every position
    the certificate forces to zero in ``K + lam lam'`` should vanish. The
    largest partial correlation left at those positions is the consistency
    residual, and exceeding ``misfit_tol`` (default ``tol``) raises
    :class:`ModelMisfit`.
    """
    if not cert.satisfied:
        raise CriterionNotSatisfied(
            f"graphical criterion not satisfied: {cert.failed_condition}", cert.failed_condition
        )
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    s = roles.observed
    x, u, w = roles.x, roles.u, roles.w
    z, t = roles.z, roles.t
    k = concentration(cov, s).matrix
    pos = {l: i for i, l in enumerate(s)}

    def idx(labels):
        return [pos[l] for l in labels]

    def rel(i, j):
        return abs(k[i, j]) / np.sqrt(k[i, i] * k[j, j])

    for a, b in ((x, u), (x, w), (u, w)):
        if rel(pos[a], pos[b]) <= tol:
            raise NearZeroConcentration(
                f"concentration entry ({a}, {b}) is indistinguishable from zero",
                f"nonzero concentration ({a}, {b})",
            )
    kxu, kxw, kuw = k[0, 1], k[0, 2], k[1, 2]
    l1_sq = -kxu * kxw / kuw
    if l1_sq <= tol * k[0, 0]:
        raise NonFactorizable(
            f"pivot concentrations do not factor through one latent variable "
            f"(lambda_x^2 = {l1_sq:.6g})",
            "positive lambda_x^2",
        )
    l1 = sign * np.sqrt(l1_sq)
    core = {x: l1, u: -kxu / l1, w: -kxw / l1}
    scale = max(abs(v) for v in core.values())
    pivots = {}

    lam_t = np.zeros(len(t))
    if t:
        r1 = cert.witnesses["R1"]
        if not r1:
            raise EmptyPivot("no pivot available for the t block", "R1")
        lam_t = -k[np.ix_(idx(t), [pos[r1[0]]])][:, 0] / core[r1[0]]
        pivots["t"] = tuple(r1)

    lam_z = np.zeros(len(z))
    if z:
        r2 = cert.witnesses["R2"]
        used = [p for p in r2 if p in core]
        t_rows = [p for p in r2 if p in t]
        if t_rows:
            lt = lam_t[[t.index(p) for p in t_rows]]
            if float(lt @ lt) > (tol * scale) ** 2:
                used.append("t")
        if not used:
            raise EmptyPivot("no usable pivot for the z block", "R2")
        if used[0] == "t":
            kzt = k[np.ix_(idx(z), idx(t_rows))]
            lam_z = -(kzt @ lt) / float(lt @ lt)
        else:
            lam_z = -k[np.ix_(idx(z), [pos[used[0]]])][:, 0] / core[used[0]]
        pivots["z"] = tuple(used)

    lam = np.concatenate([[core[x], core[u], core[w]], lam_z, lam_t])
    outer = np.outer(lam, lam)
    residual, zero_res = _zero_pattern_residuals(k + outer, s, roles, cert)
    misfit_tol = tol if misfit_tol is None else misfit_tol
    if residual > misfit_tol:
        raise ModelMisfit(
            f"redundant pivots disagree: partial correlation {residual:.3g} left at a "
            f"forced zero (tolerance {misfit_tol:.3g})",
            "pivot consistency",
        )
    return LambdaDecomposition(s, lam, outer, pivots, residual, zero_res, k)


def zero_positions(roles: RoleAssignment, cert: CriterionCertificate):
    """Label pairs at which the concentration of S given the latent must vanish."""
    x, u, w = roles.x, roles.u, roles.w
    pairs = [(x, u), (x, w), (u, w)]
    if cert.witnesses:
        pairs += [(r, t) for r in cert.witnesses["R1"] for t in roles.t]
        pairs += [(r, z) for r in cert.witnesses["R2"] for z in roles.z]
    return pairs


def _zero_pattern_residuals(p, labels, roles, cert):
    """Largest partial correlation and largest raw entry of ``p`` at forced zeros."""
    pos = {l: i for i, l in enumerate(labels)}
    rel, raw = 0.0, 0.0
    for a, b in zero_positions(roles, cert):
        i, j = pos[a], pos[b]
        raw = max(raw, abs(float(p[i, j])))
        rel = max(rel, abs(float(p[i, j])) / np.sqrt(p[i, i] * p[j, j]))
    return rel, raw


def sample_misfit_tol(n: Optional[int], sample_tol: float = SAMPLE_TOL, z: float = 6.0) -> float:
    """Misfit threshold for sample covariances from ``n`` rows.

    Partial correlations at forced zeros fluctuate on the order of
    ``1/sqrt(n)``; the threshold is ``z`` such units, never below ``sample_tol``.
    """
    if n is None:
        return sample_tol
    return max(sample_tol, z / np.sqrt(n))


def deflate(cov: LabeledMatrix, lam: LambdaDecomposition, s=None):
    """Return ``(cov of S given y, cross-products)`` with ``var(y) = 1``."""
    s = lam.labels if s is None else _labels(s)
    if tuple(s) != tuple(lam.labels):
        order = [lam.labels.index(l) for l in s]
        outer = lam.lambda_outer[np.ix_(order, order)]
    else:
        outer = lam.lambda_outer
    sigma = cov.block(s, s)
    k = concentration(cov, s).matrix
    try:
        cond_cov = _spd_solve(k + outer, np.eye(len(s)), "deflated concentration")
    except SingularMatrixError as exc:
        raise ModelMisfit(str(exc), "deflated concentration positive definite") from None
    cond_cov = (cond_cov + cond_cov.T) / 2
    cp = sigma - cond_cov
    return LabeledMatrix(s, cond_cov), CrossProducts(s, (cp + cp.T) / 2)


def sq_cond_cov_latent(cp: CrossProducts, cov: LabeledMatrix, x: str, z=(), tol: float = EXACT_TOL) -> float:
    """Squared covariance of ``x`` with the latent variable, partialling out ``z``."""
    z = _labels(z)
    val = cp.entry(x, x)
    if z:
        b = _spd_solve(cov.block(z, z), cov.block(z, [x]), "conditioning block")[:, 0]
        val += -2.0 * float(cp.block([x], z)[0] @ b) + float(b @ cp.block(z, z) @ b)
    if val < -tol:
        raise ModelMisfit(f"squared conditional covariance is negative ({val:.3g})", "nonnegative square")
    return max(val, 0.0)


def cond_var_latent(cp: CrossProducts, cov: LabeledMatrix, z=(), tol: float = EXACT_TOL) -> float:
    """Conditional variance of the unit-variance latent variable given ``z``."""
    z = _labels(z)
    val = 1.0
    if z:
        val -= float(np.trace(_spd_solve(cov.block(z, z), cp.block(z, z), "conditioning block")))
    if val <= tol:
        raise ModelMisfit(
            f"conditional variance of the latent variable is not positive ({val:.3g})",
            "positive latent conditional variance",
        )
    return val


def _require_satisfied(cert: CriterionCertificate):
    if not cert.satisfied:
        raise CriterionNotSatisfied(
            f"graphical criterion not satisfied: {cert.failed_condition}", cert.failed_condition
        )


def _denominator(value: float, what: str, tol: float) -> float:
    if value < tol:
        raise DegenerateDenominator(f"{what} is {value:.3g}, below tolerance {tol:.3g}", what)
    return value


def _condition_numbers(cov, blocks) -> Dict[str, float]:
    return {
        name: float(np.linalg.cond(cov.block(b, b))) for name, b in blocks.items() if len(b)
    }


def identify_tau_sq(
    cov: LabeledMatrix,
    g: PathDiagram,
    roles,
    strategy: str,
    tol: float = EXACT_TOL,
    lambda_sign: int = 1,
    misfit_tol: Optional[float] = None,
) -> IdentificationResult:
    """Squared total effect under one of the four surrogate strategies.

    ``backdoor-latent-response``
        latent response ``roles.y``, back-door set ``roles.z``.
    ``backdoor-latent-treatment``
        latent treatment ``roles.y`` acting on observed ``roles.x``.
    ``civ-latent-response``
        latent response, single instrument ``roles.z`` given ``roles.t``.
    ``double-latent``
        latent treatment ``x1`` and response ``x2`` (:class:`DoubleRoleAssignment`);
        returns the squared coefficient of ``x1`` in the regression of ``x2``
        on ``x1`` and ``z``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy == "double-latent":
        if not isinstance(roles, DoubleRoleAssignment):
            raise RoleError("double-latent needs a DoubleRoleAssignment")
        return _identify_double(cov, g, roles, tol, lambda_sign, misfit_tol)
    if not isinstance(roles, RoleAssignment):
        raise RoleError(f"{strategy} needs a RoleAssignment")
    expected_kind = "treatment" if strategy == "backdoor-latent-treatment" else "response"
    if roles.y_kind != expected_kind:
        raise RoleError(f"{strategy} needs the latent variable tagged as {expected_kind}")

    s = roles.observed
    _check_standardized(cov, s)
    cert = theorem1_check(g, roles)
    _require_satisfied(cert)
    x, y, z, t = roles.x, roles.y, roles.z, roles.t

    if strategy == "backdoor-latent-response" and not back_door(g, x, y, z):
        raise CriterionNotSatisfied("z fails the back-door criterion for (x, y)", "back-door")
    if strategy == "backdoor-latent-treatment" and not back_door(g, y, x, z):
        raise CriterionNotSatisfied("z fails the back-door criterion for (y, x)", "back-door")
    if strategy == "civ-latent-response":
        if len(z) != 1:
            raise RoleError("civ-latent-response needs exactly one instrument in z")
        if not conditional_iv(g, x, y, z[0], t):
            raise CriterionNotSatisfied(
                "z is not a conditional instrument given t", "conditional instrument"
            )

    lam = recover_lambda(cov, roles, cert, tol, lambda_sign, misfit_tol)
    _, cp = deflate(cov, lam)

    if strategy == "backdoor-latent-response":
        num = sq_cond_cov_latent(cp, cov, x, z, tol)
        sxx = float(conditional_cov(cov, x, x, z)[0, 0])
        den = _denominator(sxx**2, "squared conditional variance of x given z", tol)
    elif strategy == "backdoor-latent-treatment":
        num = sq_cond_cov_latent(cp, cov, x, z, tol)
        den = cond_var_latent(cp, cov, z, tol) ** 2
    else:
        num = sq_cond_cov_latent(cp, cov, z[0], t, tol)
        sxz = float(conditional_cov(cov, x, z[0], t)[0, 0])
        den = _denominator(sxz**2, "squared conditional covariance of x and z given t", tol)

    diagnostics = {
        "consistency_residual": lam.consistency_residual,
        "zero_pattern_residual": lam.zero_pattern_residual,
        "condition_numbers": _condition_numbers(cov, {"S": s, "z": z, "t": t}),
    }
    return IdentificationResult(strategy, num / den, cert, diagnostics, (lam,))


def _identify_double(cov, g, roles: DoubleRoleAssignment, tol, lambda_sign, misfit_tol):
    _check_standardized(cov, roles.observed)
    cert = theorem2_check(g, roles)
    _require_satisfied(cert)
    first, second = cert.sub_certificates
    lam1 = recover_lambda(cov, first.roles, first, tol, lambda_sign, misfit_tol)
    lam2 = recover_lambda(cov, second.roles, second, tol, lambda_sign, misfit_tol)
    _, cp1 = deflate(cov, lam1)
    _, cp2 = deflate(cov, lam2)
    num = sq_cond_cov_latent(cp2, cov, roles.u1, roles.z, tol)
    den = _denominator(
        sq_cond_cov_latent(cp1, cov, roles.u1, roles.z, tol),
        "squared conditional covariance of u1 and x1 given z",
        tol,
    )
    diagnostics = {
        "consistency_residual": max(lam1.consistency_residual, lam2.consistency_residual),
        "zero_pattern_residual": max(lam1.zero_pattern_residual, lam2.zero_pattern_residual),
        "condition_numbers": _condition_numbers(
            cov, {"S1": first.roles.observed, "S2": second.roles.observed, "z": roles.z}
        ),
    }
    return IdentificationResult("double-latent", num / den, cert, diagnostics, (lam1, lam2))
