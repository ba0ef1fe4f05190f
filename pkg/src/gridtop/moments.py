"""Injection statistics and second moments of voltage deviations.

Everything here works with NON-central second moments E[y y^T]; means are
part of the signal, and the positivity assumption that the learner depends
on is stated on these non-central matrices (it holds in particular whenever
every load node consumes strictly more than it produces, in both active and
reactive power).  Covariances are derived, informational quantities.

The analytic formulas express the voltage-deviation moments through the
inverse reduced Laplacians of the forest, whose entries are root-path sums;
they are evaluated from those path sums directly, never by dense inversion.
For a load node a with parent b the expected squared difference of their
deviations collapses to a double sum of injection moments over the
descendant set of a, which is the identity the reconstruction algorithm
tests edge by edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import AssumptionViolation, DomainError, ModelError
from .grid import ForestConfig, path_sum_matrix
from .powerflow import InjectionVector, VoltageSamples, VoltageState

__all__ = [
    "InjectionModel",
    "InjectionBatch",
    "MomentSet",
    "default_model",
    "sample_injections",
    "empirical_moments",
    "analytic_sigma_eps",
    "analytic_sigma_theta",
    "analytic_sigma_theta_eps",
    "analytic_moment_set",
    "expected_sq_diff",
    "assumption1_violations",
    "verify_moment_ordering",
    "model_to_dict",
    "model_from_dict",
]

_PSD_SLACK = 1e-10


@dataclass(frozen=True)
class InjectionModel:
    """Means and non-central second moments of nodal power injections.

    ``nodes`` fixes the row/column meaning of all matrices; sigma_p, sigma_q
    are symmetric, sigma_pq is E[p q^T] (generally not symmetric), and the
    joint covariance of (p, q) must be positive semidefinite.
    """

    nodes: tuple[int, ...]
    mu_p: np.ndarray
    mu_q: np.ndarray
    sigma_p: np.ndarray
    sigma_q: np.ndarray
    sigma_pq: np.ndarray
    kind: str = "gaussian"

    def __post_init__(self):
        n = len(self.nodes)
        for name in ("mu_p", "mu_q", "sigma_p", "sigma_q", "sigma_pq"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.mu_p.shape != (n,) or self.mu_q.shape != (n,):
            raise ModelError(f"mean vectors must have shape ({n},)")
        for name in ("sigma_p", "sigma_q", "sigma_pq"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ModelError(f"{name} must have shape ({n}, {n}), got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ModelError(f"{name} contains non-finite entries")
        for name in ("sigma_p", "sigma_q"):
            m = getattr(self, name)
            if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
                raise ModelError(f"{name} must be symmetric")
        cov = self.joint_covariance
        scale = max(1.0, float(np.abs(cov).max()))
        if np.linalg.eigvalsh(cov).min() < -_PSD_SLACK * scale:
            raise ModelError("joint covariance of (p, q) is not positive semidefinite")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def omega_p(self) -> np.ndarray:
        return self.sigma_p - np.outer(self.mu_p, self.mu_p)

    @property
    def omega_q(self) -> np.ndarray:
        return self.sigma_q - np.outer(self.mu_q, self.mu_q)

    @property
    def omega_pq(self) -> np.ndarray:
        return self.sigma_pq - np.outer(self.mu_p, self.mu_q)

    @property
    def joint_covariance(self) -> np.ndarray:
        top = np.hstack([self.omega_p, self.omega_pq])
        bot = np.hstack([self.omega_pq.T, self.omega_q])
        return np.vstack([top, bot])

    @classmethod
    def from_covariances(cls, nodes, mu_p, mu_q, omega_p, omega_q, omega_pq, kind="gaussian") -> "InjectionModel":
        mu_p = np.asarray(mu_p, dtype=float)
        mu_q = np.asarray(mu_q, dtype=float)
        return cls(
            nodes=tuple(nodes), mu_p=mu_p, mu_q=mu_q,
            sigma_p=np.asarray(omega_p, dtype=float) + np.outer(mu_p, mu_p),
            sigma_q=np.asarray(omega_q, dtype=float) + np.outer(mu_q, mu_q),
            sigma_pq=np.asarray(omega_pq, dtype=float) + np.outer(mu_p, mu_q),
            kind=kind,
        )

    def aligned_to(self, nodes: Iterable[int]) -> "InjectionModel":
        """Reindex the model to another node ordering (same node set)."""
        nodes = tuple(nodes)
        if nodes == self.nodes:
            return self
        if set(nodes) != set(self.nodes):
            raise DomainError("model nodes do not match the requested node set")
        pos = {nid: i for i, nid in enumerate(self.nodes)}
        perm = np.array([pos[nid] for nid in nodes], dtype=np.intp)
        return InjectionModel(
            nodes=nodes, mu_p=self.mu_p[perm], mu_q=self.mu_q[perm],
            sigma_p=self.sigma_p[np.ix_(perm, perm)], sigma_q=self.sigma_q[np.ix_(perm, perm)],
            sigma_pq=self.sigma_pq[np.ix_(perm, perm)], kind=self.kind,
        )


@dataclass(frozen=True)
class InjectionBatch:
    """m injection vectors stacked row-wise."""

    nodes: tuple[int, ...]
    p: np.ndarray
    q: np.ndarray

    def __len__(self) -> int:
        return self.p.shape[0]

    def __getitem__(self, j: int) -> InjectionVector:
        return InjectionVector(p=self.p[j], q=self.q[j])


@dataclass(frozen=True)
class MomentSet:
    """Second moments of voltage deviations (and phases when available).

    ``source`` is "analytic" or "empirical"; ``m`` carries the sample count
    for empirical sets.  Substations carry identically zero deviations and
    are therefore not part of the matrices.
    """

    nodes: tuple[int, ...]
    sigma_eps: np.ndarray
    sigma_theta: np.ndarray | None
    sigma_theta_eps: np.ndarray | None
    source: str
    m: int | None = None


def default_model(forest: ForestConfig, mu_p: float = -0.005, sigma_ratio: float = 0.2,
                  rho: float = 0.1, q_alpha: float = 0.3, q_noise_ratio: float = 0.2) -> InjectionModel:
    """Gaussian consumption model satisfying the positivity assumption.

    Every load consumes mu_p on average, with active-power covariance
    sigma^2 (I + rho * ones) within each tree (sigma = sigma_ratio * |mu_p|)
    and zero correlation across trees; reactive injections are q_alpha * p
    plus independent noise.  All constants are overridable defaults.
    """
    nodes = forest.grid.load_ids
    n = len(nodes)
    sig = sigma_ratio * abs(mu_p)
    omega_p = np.zeros((n, n))
    same_tree = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            same_tree[i, j] = forest.tree_of[a] == forest.tree_of[b]
    omega_p[same_tree] = rho * sig * sig
    np.fill_diagonal(omega_p, sig * sig * (1.0 + rho))

    mu_q = q_alpha * mu_p
    sig_eta = q_noise_ratio * abs(mu_q)
    omega_q = q_alpha * q_alpha * omega_p + np.eye(n) * sig_eta * sig_eta
    omega_pq = q_alpha * omega_p
    return InjectionModel.from_covariances(
        nodes=nodes, mu_p=np.full(n, mu_p), mu_q=np.full(n, mu_q),
        omega_p=omega_p, omega_q=omega_q, omega_pq=omega_pq,
    )


def sample_injections(model: InjectionModel, m: int, seed) -> InjectionBatch:
    """Draw m joint Gaussian samples of (p, q); deterministic per seed."""
    if m < 1:
        raise DomainError(f"sample count must be at least 1, got {m}")
    if model.kind != "gaussian":
        raise ModelError(f"no sampler registered for distribution kind {model.kind!r}")
    rng = np.random.default_rng(seed)
    mean = np.concatenate([model.mu_p, model.mu_q])
    draws = rng.multivariate_normal(mean, model.joint_covariance, size=m, method="eigh")
    n = model.n
    return InjectionBatch(nodes=model.nodes, p=draws[:, :n], q=draws[:, n:])


def empirical_moments(samples: VoltageSamples | Iterable[VoltageState],
                      nodes: tuple[int, ...] | None = None) -> MomentSet:
    """Non-central sample moments (1/m) sum_j y_a^j y_b^j.

    Accepts a stacked batch (one matmul) or any iterable of states
    (accumulated in a single streaming pass, memory O(N^2) regardless of m).
    """
    if isinstance(samples, VoltageSamples):
        m = len(samples)
        if m < 1:
            raise DomainError("empty sample set")
        eps, theta = samples.eps, samples.theta
        sigma_eps = eps.T @ eps / m
        sigma_theta = None if theta is None else theta.T @ theta / m
        sigma_theta_eps = None if theta is None else theta.T @ eps / m
        return MomentSet(nodes=samples.nodes, sigma_eps=sigma_eps, sigma_theta=sigma_theta,
                         sigma_theta_eps=sigma_theta_eps, source="empirical", m=m)

    s_ee = s_tt = s_te = None
    m = 0
    has_theta = True
    for state in samples:
        if s_ee is None:
            s_ee = np.zeros((state.eps.shape[0], state.eps.shape[0]))
            s_tt = np.zeros_like(s_ee)
            s_te = np.zeros_like(s_ee)
        s_ee += np.outer(state.eps, state.eps)
        if state.theta is None:
            has_theta = False
        elif has_theta:
            s_tt += np.outer(state.theta, state.theta)
            s_te += np.outer(state.theta, state.eps)
        m += 1
    if m == 0:
        raise DomainError("empty sample set")
    return MomentSet(
        nodes=tuple(nodes) if nodes is not None else tuple(range(s_ee.shape[0])),
        sigma_eps=s_ee / m,
        sigma_theta=s_tt / m if has_theta else None,
        sigma_theta_eps=s_te / m if has_theta else None,
        source="empirical", m=m,
    )


def _path_matrices(forest: ForestConfig) -> tuple[np.ndarray, np.ndarray]:
    """A = H_{1/r}^-1 (path resistance sums), B = H_{1/x}^-1 (reactance sums)."""
    a = path_sum_matrix(forest, {ei: 1.0 / forest.grid.edges[ei].r for ei in forest.closed_edges})
    b = path_sum_matrix(forest, {ei: 1.0 / forest.grid.edges[ei].x for ei in forest.closed_edges})
    return a, b


def _conductance_matrix(forest: ForestConfig) -> np.ndarray:
    return path_sum_matrix(forest, {ei: forest.grid.edges[ei].conductance for ei in forest.closed_edges})


def _aligned(forest: ForestConfig, model: InjectionModel) -> InjectionModel:
    return model.aligned_to(forest.grid.load_ids)


def analytic_sigma_eps(forest: ForestConfig, model: InjectionModel, variant: str = "lc") -> np.ndarray:
    """Exact second moments of voltage deviations under the linear model.

    "lc": A Sp A + B Sq B + A Spq B + (A Spq B)^T with A, B the path-sum
    inverse Laplacians; "dc": G Sp G with conductance path sums.
    """
    mod = _aligned(forest, model)
    if variant == "lc":
        a, b = _path_matrices(forest)
        cross = a @ mod.sigma_pq @ b
        return a @ mod.sigma_p @ a + b @ mod.sigma_q @ b + cross + cross.T
    if variant == "dc":
        g = _conductance_matrix(forest)
        return g @ mod.sigma_p @ g
    raise DomainError(f"unknown variant {variant!r}")


def analytic_sigma_theta(forest: ForestConfig, model: InjectionModel, variant: str = "lc") -> np.ndarray:
    """Exact second moments of phase deviations."""
    mod = _aligned(forest, model)
    if variant == "lc":
        a, b = _path_matrices(forest)
        cross = b @ mod.sigma_pq @ a
        return b @ mod.sigma_p @ b + a @ mod.sigma_q @ a - cross - cross.T
    if variant == "dc":
        g = _conductance_matrix(forest)
        return g @ mod.sigma_q @ g
    raise DomainError(f"unknown variant {variant!r}")


def analytic_sigma_theta_eps(forest: ForestConfig, model: InjectionModel, variant: str = "lc") -> np.ndarray:
    """Exact phase/voltage cross moments E[theta eps^T]; not symmetric."""
    mod = _aligned(forest, model)
    if variant == "lc":
        a, b = _path_matrices(forest)
        return b @ mod.sigma_p @ a - a @ mod.sigma_q @ b + b @ mod.sigma_pq @ b - a @ mod.sigma_pq.T @ a
    if variant == "dc":
        g = _conductance_matrix(forest)
        return -g @ mod.sigma_pq.T @ g
    raise DomainError(f"unknown variant {variant!r}")


def analytic_moment_set(forest: ForestConfig, model: InjectionModel, variant: str = "lc") -> MomentSet:
    return MomentSet(
        nodes=forest.grid.load_ids,
        sigma_eps=analytic_sigma_eps(forest, model, variant),
        sigma_theta=analytic_sigma_theta(forest, model, variant),
        sigma_theta_eps=analytic_sigma_theta_eps(forest, model, variant),
        source="analytic",
    )


def expected_sq_diff(forest: ForestConfig, model: InjectionModel, child: int, parent: int,
                     variant: str = "lc") -> float:
    """E[(eps_child - eps_parent)^2] by the direct double sum over the
    child's descendant set (the reference route, independent of the
    path-matrix evaluation of the full moment matrix)."""
    if forest.parent.get(child) != parent:
        raise DomainError(f"node {parent} is not the parent of node {child}")
    mod = _aligned(forest, model)
    e = forest.grid.edges[forest.parent_edge[child]]
    members = forest.descendant_load_indices[child]
    sp = float(mod.sigma_p[np.ix_(members, members)].sum())
    if variant == "dc":
        g = e.conductance
        return sp / (g * g)
    if variant != "lc":
        raise DomainError(f"unknown variant {variant!r}")
    sq = float(mod.sigma_q[np.ix_(members, members)].sum())
    spq = float(mod.sigma_pq[np.ix_(members, members)].sum())
    return e.r * e.r * sp + e.x * e.x * sq + 2.0 * e.r * e.x * spq


def assumption1_violations(forest: ForestConfig, model: InjectionModel) -> list[tuple[int, int, str]]:
    """Same-tree node pairs whose non-central moments are not strictly
    positive, as (node_a, node_b, matrix-name) triples; empty when the
    positivity assumption holds."""
    mod = _aligned(forest, model)
    nodes = mod.nodes
    bad = []
    for i, a in enumerate(nodes):
        for j in range(i, len(nodes)):
            b = nodes[j]
            if forest.tree_of[a] != forest.tree_of[b]:
                continue
            for name, mat in (("sigma_p", mod.sigma_p), ("sigma_q", mod.sigma_q), ("sigma_pq", mod.sigma_pq)):
                if mat[i, j] <= 0 or (name == "sigma_pq" and mat[j, i] <= 0):
                    bad.append((a, b, name))
    return bad


def verify_moment_ordering(forest: ForestConfig, model: InjectionModel,
                           variant: str = "lc") -> list[tuple[int, int, float, float]]:
    """Check the descendant ordering of diagonal voltage moments.

    Under the positivity assumption every strict descendant must have a
    strictly larger diagonal moment than its ancestor (substations sit at
    zero).  Returns the violating (descendant, ancestor, value_desc,
    value_anc) tuples; raises AssumptionViolation when the model fails the
    precondition, which is a different failure from an ordering violation.
    """
    bad = assumption1_violations(forest, model)
    if bad:
        a, b, name = bad[0]
        raise AssumptionViolation(
            f"model violates the positivity assumption: {name}({a},{b}) <= 0 "
            f"for same-tree pair ({a},{b})", pairs=bad)
    sigma = analytic_sigma_eps(forest, model, variant)
    idx = forest.grid.load_index
    violations = []
    for nid in forest.grid.load_ids:
        own = sigma[idx[nid], idx[nid]]
        anc = forest.parent[nid]
        while True:
            anc_val = 0.0 if forest.grid.is_substation(anc) else sigma[idx[anc], idx[anc]]
            if not own > anc_val:
                violations.append((nid, anc, float(own), float(anc_val)))
            if forest.grid.is_substation(anc):
                break
            anc = forest.parent[anc]
    return violations


# -- serialization -----------------------------------------------------------


def model_to_dict(model: InjectionModel) -> dict:
    return {
        "kind": "explicit",
        "distribution": model.kind,
        "nodes": list(model.nodes),
        "mu_p": model.mu_p.tolist(),
        "mu_q": model.mu_q.tolist(),
        "sigma_p": model.sigma_p.tolist(),
        "sigma_q": model.sigma_q.tolist(),
        "sigma_pq": model.sigma_pq.tolist(),
    }


def model_from_dict(doc: dict, forest: ForestConfig | None = None) -> InjectionModel:
    """Build a model from its JSON form: either {"kind": "default", ...}
    with the parametric constants (requires a forest) or an explicit
    {"kind": "explicit", nodes, means, moment matrices} document."""
    kind = doc.get("kind", "default")
    if kind == "default":
        if forest is None:
            raise DomainError("a forest is required to derive the default model")
        params = {k: doc[k] for k in ("mu_p", "sigma_ratio", "rho", "q_alpha", "q_noise_ratio") if k in doc}
        return default_model(forest, **params)
    if kind == "explicit":
        return InjectionModel(
            nodes=tuple(doc["nodes"]),
            mu_p=np.asarray(doc["mu_p"], dtype=float),
            mu_q=np.asarray(doc["mu_q"], dtype=float),
            sigma_p=np.asarray(doc["sigma_p"], dtype=float),
            sigma_q=np.asarray(doc["sigma_q"], dtype=float),
            sigma_pq=np.asarray(doc["sigma_pq"], dtype=float),
            kind=doc.get("distribution", "gaussian"),
        )
    raise DomainError(f"unknown model kind {kind!r}")
