"""Prior-deficient power-level cognition: clustering plus margin classifiers.

Pipeline: energy feature vectors are normalized by the global mean energy,
clustered by k-means (restarted Lloyd, k chosen by BIC under a spherical
Gaussian likelihood), cluster centroids yield the discovered power states,
and the cluster-labeled vectors train a soft-margin SVM whose decision
boundaries replace hypothesis testing when priors are unavailable.

The SVM dual is solved by sequential-minimal-optimization-style coordinate
ascent (pairwise alpha updates with an error cache); multi-class uses
one-vs-one voting with ties resolved to the lowest state index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import EnergyFeatureVector

__all__ = [
    "ClusteringResult",
    "PowerStateEstimate",
    "SVMConfig",
    "BinaryMargin",
    "MarginClassifier",
    "TrainingFailure",
    "cluster_energy",
    "estimate_power_states",
    "train_classifier",
    "classify",
    "classify_batch",
    "decision_grid",
    "save_classifier",
    "load_classifier",
]

_VAR_FLOOR = 1e-12


class TrainingFailure(RuntimeError):
    """Raised when SMO does not converge within its pass budget."""

    def __init__(self, message: str, residual_gap: float):
        super().__init__(f"{message} (residual duality gap {residual_gap:.3e})")
        self.residual_gap = residual_gap


@dataclass(frozen=True)
class ClusteringResult:
    """k-means partition of normalized energy vectors.

    Cluster indices are relabeled ascending by centroid mean energy, so
    cluster 0 is the lowest-energy (noise) cluster and cluster index
    doubles as the power-state index. `normalizer` is the global mean
    energy divided out before clustering.
    """

    assignments: np.ndarray
    centroids: np.ndarray
    k: int
    model_score: float
    normalizer: float
    wcss: float
    scores_by_k: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PowerStateEstimate:
    """Noise energy plus per-state transmit powers in original units."""

    noise_energy: float
    state_powers: tuple[float, ...]

    def __post_init__(self):
        if self.noise_energy <= 0:
            raise ValueError(f"noise_energy must be > 0, got {self.noise_energy}")
        if not self.state_powers or self.state_powers[0] != 0.0:
            raise ValueError("state_powers must start at 0 (idle state)")


@dataclass(frozen=True)
class SVMConfig:
    """Soft-margin solver knobs: regularization, KKT tolerance, pass budget."""

    c: float = 1.0
    tol: float = 1e-3
    max_passes: int = 2000

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"regularization constant must be > 0, got {self.c}")
        if self.tol <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tol}")


@dataclass(frozen=True)
class BinaryMargin:
    """One trained one-vs-one margin: f(x) = sum coef_i k(sv_i, x) + bias.

    f(x) > 0 votes for `class_hi`, otherwise `class_lo` (boundary points go
    to the lower index).
    """

    class_lo: int
    class_hi: int
    support_x: np.ndarray
    coef: np.ndarray
    bias: float
    dual_gap: float
    passes: int

    @property
    def n_support(self) -> int:
        return int(self.coef.size)


@dataclass(frozen=True)
class MarginClassifier:
    """One-vs-one soft-margin classifier over normalized energy features."""

    kernel: str
    gamma: float | None
    classes: tuple[int, ...]
    pairs: list[BinaryMargin]
    normalizer: float
    feature_dim: int


# ---------------------------------------------------------------------------
# clustering


def _kmeans_once(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    """One Lloyd run from a k-means++ seed; returns per-iteration WCSS too."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[j:] = X[rng.integers(n, size=k - j)]
            break
        centroids[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centroids[j]) ** 2, axis=1))
    assign = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iter):
        dist = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        wcss = float(dist[np.arange(n), new_assign].sum())
        history.append(wcss)
        for j in range(k):
            members = new_assign == j
            if members.any():
                centroids[j] = X[members].mean(axis=0)
            else:
                # reseed an emptied cluster at the worst-fit point
                far = int(np.argmax(dist[np.arange(n), new_assign]))
                centroids[j] = X[far]
                new_assign[far] = j
        if np.array_equal(new_assign, assign) and len(history) > 1:
            break
        assign = new_assign
    dist = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assign = dist.argmin(axis=1)
    wcss = float(dist[np.arange(n), assign].sum())
    return assign, centroids, wcss, history


def _spherical_bic(X: np.ndarray, assign: np.ndarray, k: int, wcss: float) -> float:
    """BIC of the classification likelihood under a shared spherical variance."""
    n, d = X.shape
    var = max(wcss / (n * d), _VAR_FLOOR)
    counts = np.bincount(assign, minlength=k).astype(float)
    counts = counts[counts > 0]
    log_lik = (
        float(np.sum(counts * np.log(counts / n)))
        - 0.5 * n * d * math.log(2.0 * math.pi * var)
        - 0.5 * n * d
    )
    n_params = (k - 1) + k * d + 1
    return -2.0 * log_lik + n_params * math.log(n)


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        X = np.asarray(vectors, dtype=np.float64)
    else:
        X = np.array([np.asarray(v.energies, dtype=np.float64) for v in vectors])
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a non-empty collection of equal-length energy vectors")
    return X


def cluster_energy(
    vectors,
    k_max: int,
    rng: np.random.Generator,
    n_restarts: int = 8,
) -> ClusteringResult:
    """Discover power states: normalized k-means with BIC model selection.

    Requires at least 10*k_max vectors. Deterministic given the generator
    state. Cluster labels come out sorted by centroid mean energy.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    X_raw = _as_matrix(vectors)
    n = X_raw.shape[0]
    if n < 10 * k_max:
        raise ValueError(f"need at least 10*k_max = {10 * k_max} vectors, got {n}")
    scale = float(X_raw.mean())
    if scale <= 0:
        scale = 1.0
    X = X_raw / scale

    scores: dict[int, float] = {}
    best = None  # (bic, k, assign, centroids, wcss)
    for k in range(1, k_max + 1):
        run_best = None
        for _ in range(n_restarts):
            assign, cents, wcss, _hist = _kmeans_once(X, k, rng)
            if run_best is None or wcss < run_best[2]:
                run_best = (assign, cents, wcss)
        assign, cents, wcss = run_best
        bic = _spherical_bic(X, assign, k, wcss)
        scores[k] = bic
        if best is None or bic < best[0]:
            best = (bic, k, assign, cents, wcss)

    bic, k, assign, cents, wcss = best
    # relabel ascending by centroid mean energy; recompute exact means
    order = np.argsort(cents.mean(axis=1), kind="stable")
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(k)
    assign = relabel[assign]
    centroids = np.vstack([X[assign == j].mean(axis=0) for j in range(k)])
    return ClusteringResult(
        assignments=assign,
        centroids=centroids,
        k=k,
        model_score=float(bic),
        normalizer=scale,
        wcss=float(wcss),
        scores_by_k=scores,
    )


def estimate_power_states(result: ClusteringResult) -> PowerStateEstimate:
    """Map cluster centroids to (noise energy, per-state powers) in raw units.

    The lowest-energy cluster is the idle/noise state; each state's power
    is its centroid mean energy minus the noise energy, clamped at 0.
    """
    mean_e = result.centroids.mean(axis=1) * result.normalizer
    noise = float(mean_e[0])
    powers = tuple(float(max(e - noise, 0.0)) for e in mean_e)
    return PowerStateEstimate(noise_energy=noise, state_powers=powers)


# ---------------------------------------------------------------------------
# margin classifier


def _kernel_matrix(kernel: str, gamma: float | None, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "gaussian":
        d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unknown kernel {kernel!r} (expected 'linear' or 'gaussian')")


def _default_gamma(X: np.ndarray) -> float:
    v = float(X.var())
    return 1.0 / (X.shape[1] * v) if v > 0 else 1.0


def _smo_binary(K: np.ndarray, y: np.ndarray, config: SVMConfig) -> tuple[np.ndarray, float, float, int]:
    """Solve the soft-margin dual on a precomputed kernel matrix.

    Pairwise alpha updates with an error cache; alternates full sweeps and
    non-bound sweeps until a full sweep makes no update. Returns
    (alphas, bias, duality_gap, passes).
    """
    n = y.size
    C, tol = config.c, config.tol
    alphas = np.zeros(n)
    b = 0.0
    f = np.zeros(n)  # cache of K @ (alpha*y) + b
    passes = 0
    converged = False
    examine_all = True
    while passes < config.max_passes:
        passes += 1
        changed = 0
        idx = np.arange(n) if examine_all else np.where((alphas > 0) & (alphas < C))[0]
        for i in idx:
            e_i = f[i] - y[i]
            r = e_i * y[i]
            if not ((r < -tol and alphas[i] < C) or (r > tol and alphas[i] > 0)):
                continue
            errors = f - y
            j = int(np.argmax(np.abs(errors - e_i)))
            if j == i:
                continue
            e_j = errors[j]
            a_i, a_j = alphas[i], alphas[j]
            if y[i] != y[j]:
                lo, hi = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
            else:
                lo, hi = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
            if lo >= hi:
                continue
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0:
                continue
            a_j_new = np.clip(a_j - y[j] * (e_i - e_j) / eta, lo, hi)
            if abs(a_j_new - a_j) < 1e-12:
                continue
            a_i_new = a_i + y[i] * y[j] * (a_j - a_j_new)
            d_i = (a_i_new - a_i) * y[i]
            d_j = (a_j_new - a_j) * y[j]
            b1 = b - e_i - d_i * K[i, i] - d_j * K[i, j]
            b2 = b - e_j - d_i * K[i, j] - d_j * K[j, j]
            if 0 < a_i_new < C:
                b_new = b1
            elif 0 < a_j_new < C:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)
            f = f + d_i * K[i] + d_j * K[j] + (b_new - b)
            alphas[i], alphas[j] = a_i_new, a_j_new
            b = b_new
            changed += 1
        if examine_all:
            if changed == 0:
                converged = True
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    ay = alphas * y
    w_norm2 = float(ay @ K @ ay)
    dual = float(alphas.sum()) - 0.5 * w_norm2
    hinge = np.maximum(0.0, 1.0 - y * f).sum()
    primal = 0.5 * w_norm2 + C * float(hinge)
    gap = primal - dual
    if not converged:
        raise TrainingFailure("SMO did not converge within the pass budget", residual_gap=gap)
    return alphas, b, gap, passes


def train_classifier(
    labeled,
    kernel: str = "gaussian",
    config: SVMConfig | None = None,
) -> MarginClassifier:
    """Train one-vs-one soft-margin classifiers on cluster-labeled vectors.

    `labeled` is a sequence of (EnergyFeatureVector, state index) pairs as
    produced by labeling each vector with its cluster number. Needs at
    least 2 classes and 2 examples per class.
    """
    config = config or SVMConfig()
    vecs = [v for v, _ in labeled]
    labels = np.array([int(s) for _, s in labeled], dtype=np.int64)
    X_raw = _as_matrix(vecs)
    classes = tuple(sorted(np.unique(labels).tolist()))
    if len(classes) < 2:
        raise ValueError(f"need at least 2 classes to train, got {len(classes)}")
    counts = {c: int(np.sum(labels == c)) for c in classes}
    lacking = [c for c, m in counts.items() if m < 2]
    if lacking:
        raise ValueError(f"need >= 2 examples per class, classes {lacking} have fewer")

    scale = float(X_raw.mean())
    if scale <= 0:
        scale = 1.0
    X = X_raw / scale
    gamma = _default_gamma(X) if kernel == "gaussian" else None

    pairs: list[BinaryMargin] = []
    for ai, a in enumerate(classes):
        for b_cls in classes[ai + 1 :]:
            mask = (labels == a) | (labels == b_cls)
            Xp = X[mask]
            yp = np.where(labels[mask] == b_cls, 1.0, -1.0)
            K = _kernel_matrix(kernel, gamma, Xp, Xp)
            alphas, bias, gap, passes = _smo_binary(K, yp, config)
            sv = alphas > 1e-10
            pairs.append(
                BinaryMargin(
                    class_lo=a,
                    class_hi=b_cls,
                    support_x=Xp[sv],
                    coef=(alphas * yp)[sv],
                    bias=float(bias),
                    dual_gap=float(gap),
                    passes=passes,
                )
            )
    return MarginClassifier(
        kernel=kernel,
        gamma=gamma,
        classes=classes,
        pairs=pairs,
        normalizer=scale,
        feature_dim=X.shape[1],
    )


def _vote_matrix(clf: MarginClassifier, X: np.ndarray) -> np.ndarray:
    """Vote counts per (sample, class index position)."""
    class_pos = {c: k for k, c in enumerate(clf.classes)}
    votes = np.zeros((X.shape[0], len(clf.classes)), dtype=np.int64)
    for pair in clf.pairs:
        k = _kernel_matrix(clf.kernel, clf.gamma, X, pair.support_x)
        fx = k @ pair.coef + pair.bias
        hi = fx > 0
        votes[hi, class_pos[pair.class_hi]] += 1
        votes[~hi, class_pos[pair.class_lo]] += 1
    return votes


def classify_batch(clf: MarginClassifier, vectors) -> np.ndarray:
    """Vectorized `classify`; returns the winning state index per vector."""
    X_raw = _as_matrix(vectors)
    if X_raw.shape[1] != clf.feature_dim:
        raise ValueError(f"feature dimension {X_raw.shape[1]} != classifier dimension {clf.feature_dim}")
    X = X_raw / clf.normalizer
    votes = _vote_matrix(clf, X)
    winners = votes.argmax(axis=1)  # argmax takes the first max: lowest index wins ties
    return np.asarray(clf.classes)[winners]


def classify(clf: MarginClassifier, vector: EnergyFeatureVector) -> int:
    """One-vs-one vote winner for a single energy feature vector."""
    return int(classify_batch(clf, [vector])[0])


def decision_grid(
    clf: MarginClassifier,
    e0: tuple[float, float],
    e1: tuple[float, float],
    resolution: int = 50,
) -> np.ndarray:
    """Sample the decision surface of a 2-slot classifier on a raw-unit grid.

    Returns rows (e0, e1, decision) for plotting clustered features with
    their trained boundary.
    """
    if clf.feature_dim != 2:
        raise ValueError("decision grid requires 2-dimensional features")
    g0 = np.linspace(e0[0], e0[1], resolution)
    g1 = np.linspace(e1[0], e1[1], resolution)
    pts = np.array([(a, b) for a in g0 for b in g1])
    decided = classify_batch(clf, pts)
    return np.column_stack([pts, decided])


# ---------------------------------------------------------------------------
# persistence (documented flat text format)

_MAGIC = "cogniscope-margin-classifier v1"


def save_classifier(clf: MarginClassifier, path) -> None:
    """Write the classifier as flat text: kernel, gamma, normalizer, classes,
    then per pair its bias and support vectors with dual coefficients."""
    lines = [
        _MAGIC,
        f"kernel {clf.kernel}",
        f"gamma {'none' if clf.gamma is None else repr(clf.gamma)}",
        f"normalizer {clf.normalizer!r}",
        f"feature_dim {clf.feature_dim}",
        "classes " + " ".join(str(c) for c in clf.classes),
        f"pairs {len(clf.pairs)}",
    ]
    for p in clf.pairs:
        lines.append(f"pair {p.class_lo} {p.class_hi}")
        lines.append(f"bias {p.bias!r}")
        lines.append(f"dual_gap {p.dual_gap!r}")
        lines.append(f"passes {p.passes}")
        lines.append(f"nsv {p.n_support}")
        for coef, x in zip(p.coef, p.support_x):
            lines.append("sv " + repr(float(coef)) + " " + " ".join(repr(float(v)) for v in x))
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_classifier(path) -> MarginClassifier:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"not a classifier file (missing header {_MAGIC!r})")
    fields = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("pair "):
        key, _, val = lines[i].partition(" ")
        fields[key] = val
        i += 1
    gamma = None if fields["gamma"] == "none" else float(fields["gamma"])
    classes = tuple(int(c) for c in fields["classes"].split())
    n_pairs = int(fields["pairs"])
    pairs = []
    for _ in range(n_pairs):
        _, lo, hi = lines[i].split()
        bias = float(lines[i + 1].split()[1])
        gap = float(lines[i + 2].split()[1])
        passes = int(lines[i + 3].split()[1])
        nsv = int(lines[i + 4].split()[1])
        i += 5
        coef = np.empty(nsv)
        svx = np.empty((nsv, int(fields["feature_dim"])))
        for s in range(nsv):
            parts = lines[i].split()
            coef[s] = float(parts[1])
            svx[s] = [float(v) for v in parts[2:]]
            i += 1
        pairs.append(
            BinaryMargin(
                class_lo=int(lo), class_hi=int(hi), support_x=svx, coef=coef,
                bias=bias, dual_gap=gap, passes=passes,
            )
        )
    return MarginClassifier(
        kernel=fields["kernel"],
        gamma=gamma,
        classes=classes,
        pairs=pairs,
        normalizer=float(fields["normalizer"]),
        feature_dim=int(fields["feature_dim"]),
    )
