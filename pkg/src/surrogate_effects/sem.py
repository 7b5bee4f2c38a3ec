"""Linear structural equation models over path diagrams.

Ground truth for everything else: implied covariances, standardization,
sampling, the path-product total effect, and a conditional-independence
oracle based on partial covariances.

Bidirected edges are modelled as correlated errors (an off-diagonal entry of
the error covariance) rather than through explicit latent parents, which
gives the same observed distribution without inventing loadings.

Sampling uses NumPy's ``PCG64`` bit generator. Replicate ``k`` of a run
seeded with ``seed`` draws from ``SeedSequence([seed, k])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .exceptions import InfeasibleModelError
from .gaussian import LabeledCovariance, conditional_cov
from .graph import PathDiagram

GENERATOR = "PCG64"


def _key(a, b):
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, eq=False)
class LinearSEM:
    """Path coefficients plus error covariance over a :class:`PathDiagram`.

    ``coefficients[(j, i)]`` is the weight of ``j`` in the equation for ``i``
    (edge ``j -> i``). ``error_cov`` is keyed by sorted vertex pairs and holds
    the error variances on the diagonal and one covariance per bidirected edge.
    """

    graph: PathDiagram
    coefficients: Mapping[Tuple[str, str], float]
    error_cov: Mapping[Tuple[str, str], float]

    def __post_init__(self):
        coefs = {tuple(e): float(v) for e, v in self.coefficients.items()}
        if set(coefs) != set(self.graph.directed):
            missing = sorted(set(self.graph.directed) - set(coefs))
            extra = sorted(set(coefs) - set(self.graph.directed))
            raise ValueError(f"coefficients must cover exactly the directed edges; missing {missing}, extra {extra}")
        zero = [e for e, v in coefs.items() if v == 0.0]
        if zero:
            raise ValueError(f"path coefficients must be nonzero: {zero}")
        omega = {_key(*k): float(v) for k, v in self.error_cov.items()}
        allowed = {(v, v) for v in self.graph.vertices} | set(self.graph.bidirected)
        bad = sorted(set(omega) - allowed)
        if bad:
            raise ValueError(f"error covariance entries off the diagram: {bad}")
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "error_cov", omega)
        eig = np.linalg.eigvalsh(self.error_matrix())
        if eig[0] <= 0:
            raise InfeasibleModelError("error covariance is not positive definite")

    @property
    def order(self) -> Tuple[str, ...]:
        return self.graph.topological_order

    def coefficient_matrix(self) -> np.ndarray:
        """``A[i, j]`` is the coefficient of vertex j in the equation for vertex i."""
        pos = {v: n for n, v in enumerate(self.order)}
        a = np.zeros((len(pos), len(pos)))
        for (tail, head), value in self.coefficients.items():
            a[pos[head], pos[tail]] = value
        return a

    def error_matrix(self) -> np.ndarray:
        pos = {v: n for n, v in enumerate(self.order)}
        om = np.zeros((len(pos), len(pos)))
        for (a, b), value in self.error_cov.items():
            om[pos[a], pos[b]] = om[pos[b], pos[a]] = value
        return om

    @classmethod
    def with_unit_variances(cls, graph: PathDiagram, coefficients, bidirected_cov=None) -> "LinearSEM":
        """Solve the error variances so that every variable has variance one.

        Walks the topological order: once earlier variances are fixed, the
        error variance of the next vertex enters its own variance with weight
        one. Raises :class:`InfeasibleModelError` if any required error
        variance is not positive or the error covariance is not positive
        definite.
        """
        bidirected_cov = {_key(*k): float(v) for k, v in (bidirected_cov or {}).items()}
        missing = set(graph.bidirected) - set(bidirected_cov)
        if missing:
            raise ValueError(f"bidirected edges without a covariance: {sorted(missing)}")
        order = graph.topological_order
        pos = {v: n for n, v in enumerate(order)}
        n = len(order)
        a = np.zeros((n, n))
        for (tail, head), value in coefficients.items():
            a[pos[head], pos[tail]] = value
        inv = np.linalg.inv(np.eye(n) - a)
        om = np.zeros((n, n))
        for (p, q), value in bidirected_cov.items():
            om[pos[p], pos[q]] = om[pos[q], pos[p]] = value
        for i, v in enumerate(order):
            row = inv[i]
            var = row @ om @ row
            need = 1.0 - var
            if need <= 0:
                raise InfeasibleModelError(f"variance of {v} exceeds one before its error term ({var:.4g})")
            om[i, i] = need
        error_cov = {(v, v): om[i, i] for i, v in enumerate(order)}
        error_cov.update(bidirected_cov)
        return cls(graph, dict(coefficients), error_cov)

    def to_dict(self):
        return {
            "coefficients": {f"{a}->{b}": v for (a, b), v in sorted(self.coefficients.items())},
            "error_cov": {f"{a},{b}": v for (a, b), v in sorted(self.error_cov.items())},
        }


def implied_covariance(m: LinearSEM) -> LabeledCovariance:
    """``(I - A)^-1 Omega (I - A)^-T`` over all vertices, in topological order."""
    n = len(m.order)
    inv = np.linalg.inv(np.eye(n) - m.coefficient_matrix())
    sigma = inv @ m.error_matrix() @ inv.T
    return LabeledCovariance(m.order, (sigma + sigma.T) / 2)


def standardize(m: LinearSEM) -> LinearSEM:
    sigma = implied_covariance(m)
    sd = dict(zip(sigma.labels, np.sqrt(np.diag(sigma.matrix))))
    coefs = {(j, i): v * sd[j] / sd[i] for (j, i), v in m.coefficients.items()}
    omega = {(a, b): v / (sd[a] * sd[b]) for (a, b), v in m.error_cov.items()}
    return LinearSEM(m.graph, coefs, omega)


def total_effect_oracle(m: LinearSEM, x: str, y: str) -> float:
    """Sum over directed paths from ``x`` to ``y`` of the product of coefficients.

    Checked against the ``(y, x)`` entry of ``(I - A)^-1``.
    """
    if x == y:
        raise ValueError("x and y must differ")
    m.graph._require((x, y))
    children = {v: sorted(m.graph.children(v)) for v in m.graph.vertices}

    def walk(v):
        if v == y:
            return 1.0
        return sum(m.coefficients[(v, c)] * walk(c) for c in children[v])

    by_paths = walk(x)
    pos = {v: n for n, v in enumerate(m.order)}
    inv = np.linalg.inv(np.eye(len(pos)) - m.coefficient_matrix())
    by_matrix = inv[pos[y], pos[x]]
    if abs(by_paths - by_matrix) > 1e-12 * max(1.0, abs(by_paths)):
        raise ArithmeticError(
            f"path-product sum {by_paths!r} disagrees with matrix inverse {by_matrix!r}"
        )
    return by_paths


def replicate_rng(seed: int, replicate: Optional[int] = None) -> np.random.Generator:
    entropy = [seed] if replicate is None else [seed, replicate]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def sample_data(m: LinearSEM, n: int, rng: np.random.Generator) -> Tuple[Tuple[str, ...], np.ndarray]:
    """Draw ``n`` rows of all variables by running the structural equations in order."""
    order = m.order
    om = m.error_matrix()
    chol = np.linalg.cholesky(om)
    errors = rng.standard_normal((n, len(order))) @ chol.T
    data = np.empty_like(errors)
    pos = {v: i for i, v in enumerate(order)}
    for i, v in enumerate(order):
        col = errors[:, i].copy()
        for p in sorted(m.graph.parents(v)):
            col += m.coefficients[(p, v)] * data[:, pos[p]]
        data[:, i] = col
    return order, data


def sample_covariance(
    m: LinearSEM, n: int, seed: int, replicate: Optional[int] = None
) -> LabeledCovariance:
    """Sample covariance of the observed variables; latent columns are dropped."""
    observed = [v for v in m.order if v in m.graph.observed]
    if n < len(observed) + 1:
        raise ValueError(f"need at least {len(observed) + 1} samples, got {n}")
    order, data = sample_data(m, n, replicate_rng(seed, replicate))
    keep = [order.index(v) for v in observed]
    return LabeledCovariance(observed, np.cov(data[:, keep], rowvar=False))


def ci_oracle(cov: LabeledCovariance, a: str, b: str, c=(), tol: float = 1e-7) -> bool:
    """Gaussian conditional independence: is the partial covariance of a and b below ``tol``?"""
    return abs(float(conditional_cov(cov, a, b, c)[0, 0])) < tol


def random_dag(
    rng: np.random.Generator, n_vertices: int, edge_prob: float = 0.35, latent_frac: float = 0.0,
    bidirected_prob: float = 0.0,
) -> PathDiagram:
    """Random DAG over ``V0, V1, ...`` with edges only from lower to higher index."""
    names = [f"V{i}" for i in range(n_vertices)]
    directed = [
        (names[i], names[j])
        for i in range(n_vertices)
        for j in range(i + 1, n_vertices)
        if rng.random() < edge_prob
    ]
    bidirected = [
        (names[i], names[j])
        for i in range(n_vertices)
        for j in range(i + 1, n_vertices)
        if (names[i], names[j]) not in directed and rng.random() < bidirected_prob
    ]
    latent = [v for v in names if rng.random() < latent_frac]
    return PathDiagram(
        observed=set(names) - set(latent), latent=latent, directed=directed, bidirected=bidirected
    )


def random_coefficients(graph: PathDiagram, rng, low: float = 0.2, high: float = 0.9) -> Dict:
    def draw():
        return float(rng.choice([-1.0, 1.0]) * rng.uniform(low, high))

    return {e: draw() for e in sorted(graph.directed)}


def random_sem(
    graph: PathDiagram, rng: np.random.Generator, low: float = 0.2, high: float = 0.9,
    max_tries: int = 1000,
) -> LinearSEM:
    """Unit-variance SEM with coefficients from ``+-[low, high]``, redrawn until feasible.

    Bidirected covariances are drawn from the same range.
    """
    for _ in range(max_tries):
        coefs = random_coefficients(graph, rng, low, high)
        bicov = {
            e: float(rng.choice([-1.0, 1.0]) * rng.uniform(low, high))
            for e in sorted(graph.bidirected)
        }
        try:
            return LinearSEM.with_unit_variances(graph, coefs, bicov)
        except InfeasibleModelError:
            continue
    raise InfeasibleModelError(f"no feasible coefficient draw in {max_tries} tries")
