"""Unsupervised modulation-pattern discovery with a Dirichlet-process GMM.

Cumulant vectors are clustered by collapsed Gibbs sampling under a
Chinese-restaurant-process prior with a conjugate normal-inverse-Wishart
base measure, so the number of mixture components is inferred rather than
fixed. The component hugging the origin of the higher-order coordinates is
the noise constellation: its second-order mean recovers the noise
variance. Remaining components are matched against a dictionary of
theoretical constellation signatures (scaled by the component's estimated
power), the dictionary is pruned to the modulations actually observed, and
new vectors are classified by the posterior predictive, with a
new-component escape hatch for patterns never seen in training.

Inference notes: assignments are initialized one-point-per-component
(merges are cheap for Gibbs, splits are slow), sufficient statistics are
kept per component and downdated/updated in place, and the reported
clustering is the highest-joint-posterior sweep after burn-in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .features import CumulantVector, theoretical_cumulants
from .signal_model import ModulationType, make_constellation

__all__ = [
    "DOMINANCE_THRESHOLD",
    "DPGMMConfig",
    "MixtureComponent",
    "MixtureModel",
    "ModulationDictionary",
    "PatternAssignment",
    "dpgmm_fit",
    "update_posterior",
    "dominant_components",
    "identify_noise_component",
    "auto_noise_gate",
    "match_patterns",
    "classify_vector",
    "save_model",
    "load_model",
    "write_component_csv",
]

# weight below which a component is considered a sampler remnant and kept
# out of pattern matching
DOMINANCE_THRESHOLD = 0.025

_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DPGMMConfig:
    """Sampler and base-measure hyperparameters.

    The normal-inverse-Wishart base measure is (mu0, kappa0, nu0, Psi0)
    with mu0 = `prior_mean` (empirical data mean when None), kappa0 =
    `prior_precision_scale`, nu0 = `prior_dof` (dim + 2 when None) and
    Psi0 = `prior_scale` * diag(empirical per-dimension variance), scaled
    so the prior expected covariance equals `prior_scale` times the data's
    diagonal covariance. `concentration` is the Chinese-restaurant-process
    new-component propensity.
    """

    concentration: float = 1.0
    prior_mean: np.ndarray | None = None
    prior_scale: float = 1.0
    prior_dof: float | None = None
    prior_precision_scale: float = 0.01
    n_sweeps: int = 500
    burn_in: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.concentration <= 0:
            raise ValueError(f"concentration must be > 0, got {self.concentration}")
        if self.prior_scale <= 0:
            raise ValueError(f"prior_scale must be > 0, got {self.prior_scale}")
        if self.prior_precision_scale <= 0:
            raise ValueError(f"prior_precision_scale must be > 0, got {self.prior_precision_scale}")
        if self.n_sweeps < 1:
            raise ValueError(f"n_sweeps must be >= 1, got {self.n_sweeps}")
        if not 0 <= self.burn_in < self.n_sweeps:
            raise ValueError(f"burn_in must be in [0, n_sweeps), got {self.burn_in} vs {self.n_sweeps}")


@dataclass(frozen=True)
class MixtureComponent:
    """Posterior summary of one discovered pattern cluster."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    count: int


@dataclass(frozen=True)
class MixtureModel:
    """Mode-partition mixture found by the sampler.

    `assignments` maps each training vector to its component (components
    sorted by count, descending). The raw training data and resolved base
    measure ride along so the posterior can be updated with new vectors;
    models loaded from a data-free export cannot be updated.
    """

    components: list[MixtureComponent]
    assignments: np.ndarray
    n_points: int
    config: DPGMMConfig
    joint_log_posterior: float
    mode_sweep: int
    n_components_trace: np.ndarray
    log_posterior_trace: np.ndarray
    train_x: np.ndarray | None = field(repr=False, default=None)
    prior: "_NIWPrior | None" = field(repr=False, default=None)

    def __post_init__(self):
        w = sum(c.weight for c in self.components)
        if abs(w - 1.0) > 1e-9:
            raise ValueError(f"component weights must sum to 1 within 1e-9, got {w}")
        for k, c in enumerate(self.components):
            np.linalg.cholesky(c.cov)  # raises if not positive definite

    @property
    def dim(self) -> int:
        return int(self.components[0].mean.size)


@dataclass
class ModulationDictionary:
    """Candidate modulations with unit-power theoretical cumulant signatures.

    `active_flags` start all True; `match_patterns` clears the flags of
    entries never matched, leaving the minimal dictionary.
    """

    entries: list[tuple[ModulationType, CumulantVector]]
    active_flags: list[bool] = field(default_factory=list)

    def __post_init__(self):
        mods = [m for m, _ in self.entries]
        if len(set(mods)) != len(mods):
            raise ValueError("dictionary entries must be unique by modulation")
        if ModulationType.NOISE_ONLY in mods:
            raise ValueError("NOISE_ONLY has no dictionary signature")
        if not self.active_flags:
            self.active_flags = [True] * len(self.entries)

    @classmethod
    def standard(cls) -> "ModulationDictionary":
        mods = [ModulationType.BPSK, ModulationType.QPSK, ModulationType.PSK8, ModulationType.QAM16]
        return cls(entries=[(m, theoretical_cumulants(make_constellation(m), 1.0, 0.0)) for m in mods])


@dataclass(frozen=True)
class PatternAssignment:
    """Pattern label for one mixture component (or an unknown-pattern marker).

    `modulation` is NOISE_ONLY for the idle cluster (power exactly 0) and
    None when the component is unmatched (micro-component or a new-pattern
    classification result).
    """

    component_id: int
    modulation: ModulationType | None
    power: float | None
    residual: float | None
    dominant: bool = True

    def __post_init__(self):
        if self.modulation is ModulationType.NOISE_ONLY and self.power != 0.0:
            raise ValueError("idle assignment must carry power exactly 0")
        if (
            self.modulation is not None
            and self.modulation is not ModulationType.NOISE_ONLY
            and not (self.power is not None and self.power > 0)
        ):
            raise ValueError("matched modulation requires a positive power estimate")

    @property
    def is_unknown(self) -> bool:
        return self.modulation is None


# ---------------------------------------------------------------------------
# collapsed Gibbs machinery


@dataclass(frozen=True)
class _NIWPrior:
    """Resolved normal-inverse-Wishart base measure with cached predictive."""

    mu0: np.ndarray
    kappa0: float
    nu0: float
    psi0: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.mu0.size)

    def prior_predictive_logpdf(self, x: np.ndarray) -> float:
        d = self.dim
        dof = self.nu0 - d + 1.0
        scale = self.psi0 * ((self.kappa0 + 1.0) / (self.kappa0 * dof))
        r = x - self.mu0
        m = float(r @ np.linalg.solve(scale, r))
        _, logdet = np.linalg.slogdet(scale)
        return float(
            gammaln((dof + d) / 2.0)
            - gammaln(dof / 2.0)
            - 0.5 * d * (math.log(dof) + math.log(math.pi))
            - 0.5 * logdet
            - 0.5 * (dof + d) * math.log1p(m / dof)
        )


def _resolve_prior(X: np.ndarray, config: DPGMMConfig) -> _NIWPrior:
    d = X.shape[1]
    nu0 = float(config.prior_dof) if config.prior_dof is not None else d + 2.0
    if nu0 <= d - 1:
        raise ValueError(f"prior_dof must exceed dim - 1 = {d - 1}, got {nu0}")
    if config.prior_mean is not None:
        mu0 = np.asarray(config.prior_mean, dtype=np.float64)
        if mu0.shape != (d,):
            raise ValueError(f"prior_mean shape {mu0.shape} != ({d},)")
    else:
        mu0 = X.mean(axis=0)
    var = X.var(axis=0)
    floor = 1e-9 * (1.0 + float(np.mean(X * X)))
    var = np.maximum(var, floor)
    iw_norm = nu0 - d - 1.0 if nu0 > d + 1.0 else 1.0
    psi0 = config.prior_scale * np.diag(var) * iw_norm
    return _NIWPrior(mu0=mu0, kappa0=float(config.prior_precision_scale), nu0=nu0, psi0=psi0)


class _GibbsState:
    """Per-component sufficient statistics with in-place seat/unseat updates."""

    def __init__(self, X: np.ndarray, z: np.ndarray, prior: _NIWPrior):
        self.X = X
        self.z = z.copy()
        self.prior = prior
        n, d = X.shape
        cap = n + 1
        self.counts = np.zeros(cap, dtype=np.int64)
        self.sums = np.zeros((cap, d))
        self.sumsq = np.zeros((cap, d, d))
        self.K = int(z.max()) + 1
        for k in range(self.K):
            members = X[z == k]
            self.counts[k] = members.shape[0]
            self.sums[k] = members.sum(axis=0)
            self.sumsq[k] = members.T @ members

    def unseat(self, i: int) -> None:
        x = self.X[i]
        c = int(self.z[i])
        self.counts[c] -= 1
        self.sums[c] -= x
        self.sumsq[c] -= np.outer(x, x)
        if self.counts[c] == 0:
            last = self.K - 1
            if c != last:
                self.counts[c] = self.counts[last]
                self.sums[c] = self.sums[last]
                self.sumsq[c] = self.sumsq[last]
                self.z[self.z == last] = c
            self.counts[last] = 0
            self.sums[last] = 0.0
            self.sumsq[last] = 0.0
            self.K = last

    def seat(self, i: int, k: int) -> None:
        x = self.X[i]
        if k == self.K:
            self.K += 1
        self.z[i] = k
        self.counts[k] += 1
        self.sums[k] += x
        self.sumsq[k] += np.outer(x, x)


def _posterior_params(state: _GibbsState):
    """Batched NIW posterior parameters for all active components."""
    p = state.prior
    K = state.K
    nk = state.counts[:K].astype(np.float64)
    kap = p.kappa0 + nk
    nu = p.nu0 + nk
    mu_n = (p.kappa0 * p.mu0[None, :] + state.sums[:K]) / kap[:, None]
    psi_n = (
        p.psi0[None, :, :]
        + state.sumsq[:K]
        + p.kappa0 * np.outer(p.mu0, p.mu0)[None, :, :]
        - kap[:, None, None] * np.einsum("ki,kj->kij", mu_n, mu_n)
    )
    psi_n = 0.5 * (psi_n + psi_n.transpose(0, 2, 1))
    return nk, kap, nu, mu_n, psi_n


def _gibbs_sweep(state: _GibbsState, log_alpha: float, rng: np.random.Generator, tables) -> None:
    """One full scan: reseat every point from its collapsed conditional."""
    X = state.X
    prior = state.prior
    d = prior.dim
    g1, g2, logn, dterm = tables
    for i in range(X.shape[0]):
        state.unseat(i)
        x = X[i]
        K = state.K
        nk_i = state.counts[:K]
        _, kap, nu, mu_n, psi_n = _posterior_params(state)
        dof = nu - d + 1.0
        scale = psi_n * ((kap + 1.0) / (kap * dof))[:, None, None]
        inv = np.linalg.inv(scale)
        _, logdet = np.linalg.slogdet(scale)
        r = x[None, :] - mu_n
        m = np.einsum("ki,kij,kj->k", r, inv, r)
        logpdf = (
            g1[nk_i]
            - g2[nk_i]
            - dterm[nk_i]
            - 0.5 * logdet
            - 0.5 * (dof + d) * np.log1p(np.maximum(m, 0.0) / dof)
        )
        scores = np.empty(K + 1)
        scores[:K] = logn[nk_i] + logpdf
        scores[K] = log_alpha + prior.prior_predictive_logpdf(x)
        pick = int(np.argmax(scores + rng.gumbel(size=K + 1)))
        state.seat(i, pick)


def _predictive_tables(n: int, prior: _NIWPrior):
    """gammaln/log lookup tables indexed by component count (0 unused)."""
    d = prior.dim
    nk = np.arange(n + 1, dtype=np.float64)
    dof = prior.nu0 + nk - d + 1.0
    g1 = gammaln((dof + d) / 2.0)
    g2 = gammaln(dof / 2.0)
    with np.errstate(divide="ignore"):
        logn = np.log(nk)
    dterm = 0.5 * d * (np.log(dof) + math.log(math.pi))
    return g1, g2, logn, dterm


def _joint_log_posterior(state: _GibbsState, concentration: float) -> float:
    """log p(z, X) up to a z-independent constant: CRP prior x NIW marginals."""
    p = state.prior
    d = p.dim
    K = state.K
    nk, kap, nu, _mu_n, psi_n = _posterior_params(state)
    _, psi0_logdet = np.linalg.slogdet(p.psi0)
    _, psi_logdet = np.linalg.slogdet(psi_n)
    j = np.arange(1, d + 1, dtype=np.float64)
    mvg_n = gammaln((nu[:, None] + 1.0 - j[None, :]) / 2.0).sum(axis=1)
    mvg_0 = float(gammaln((p.nu0 + 1.0 - j) / 2.0).sum())
    log_marginals = (
        -0.5 * nk * d * math.log(math.pi)
        + 0.5 * d * (math.log(p.kappa0) - np.log(kap))
        + 0.5 * p.nu0 * psi0_logdet
        - 0.5 * nu * psi_logdet
        + mvg_n
        - mvg_0
    )
    crp = K * math.log(concentration) + float(gammaln(nk).sum())
    return float(crp + log_marginals.sum())


def _build_model(
    X: np.ndarray,
    z_best: np.ndarray,
    prior: _NIWPrior,
    config: DPGMMConfig,
    best_logpost: float,
    best_sweep: int,
    k_trace: np.ndarray,
    lp_trace: np.ndarray,
) -> MixtureModel:
    state = _GibbsState(X, z_best, prior)
    nk, kap, nu, mu_n, psi_n = _posterior_params(state)
    d = prior.dim
    order = np.lexsort((mu_n[:, 0], -nk))  # count desc, then mean of first coordinate
    relabel = np.empty(state.K, dtype=np.int64)
    relabel[order] = np.arange(state.K)
    n = X.shape[0]
    components = []
    for k in order:
        denom = nu[k] - d - 1.0
        cov = psi_n[k] / denom if denom > 0 else psi_n[k] / (nu[k] + d + 1.0)
        components.append(
            MixtureComponent(
                weight=float(nk[k] / n),
                mean=mu_n[k].copy(),
                cov=0.5 * (cov + cov.T),
                count=int(nk[k]),
            )
        )
    return MixtureModel(
        components=components,
        assignments=relabel[state.z],
        n_points=n,
        config=config,
        joint_log_posterior=best_logpost,
        mode_sweep=best_sweep,
        n_components_trace=k_trace,
        log_posterior_trace=lp_trace,
        train_x=X,
        prior=prior,
    )


def _cumulant_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        X = np.asarray(vectors, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-D array of feature vectors")
        return X
    return np.array([np.asarray(v.values, dtype=np.float64) for v in vectors])


def _run_chain(
    X: np.ndarray,
    z0: np.ndarray,
    prior: _NIWPrior,
    config: DPGMMConfig,
    rng: np.random.Generator,
) -> MixtureModel:
    state = _GibbsState(X, z0, prior)
    tables = _predictive_tables(X.shape[0], prior)
    log_alpha = math.log(config.concentration)
    k_trace = np.zeros(config.n_sweeps, dtype=np.int64)
    lp_trace = np.zeros(config.n_sweeps)
    best_lp = -np.inf
    best_z = state.z.copy()
    best_sweep = -1
    for sweep in range(config.n_sweeps):
        _gibbs_sweep(state, log_alpha, rng, tables)
        lp = _joint_log_posterior(state, config.concentration)
        k_trace[sweep] = state.K
        lp_trace[sweep] = lp
        if sweep >= config.burn_in and lp > best_lp:
            best_lp = lp
            best_z = state.z.copy()
            best_sweep = sweep
    return _build_model(X, best_z, prior, config, best_lp, best_sweep, k_trace, lp_trace)


def dpgmm_fit(vectors, config: DPGMMConfig) -> MixtureModel:
    """Fit the infinite mixture by collapsed Gibbs sampling.

    Deterministic given `config.seed`. Needs at least 10 vectors. The
    returned model is the highest-joint-posterior partition after burn-in,
    with posterior-mean component parameters and empirical weights.
    """
    X = _cumulant_matrix(vectors)
    if X.shape[0] < 10:
        raise ValueError(f"need at least 10 vectors, got {X.shape[0]}")
    prior = _resolve_prior(X, config)
    rng = np.random.default_rng(config.seed)
    z0 = np.arange(X.shape[0], dtype=np.int64)  # one point per component
    return _run_chain(X, z0, prior, config, rng)


def update_posterior(model: MixtureModel, new_vectors, config: DPGMMConfig) -> MixtureModel:
    """Resume Gibbs sweeps with new vectors appended; may grow components.

    Appending nothing returns the model unchanged. The base measure is the
    one resolved at the original fit (held fixed across updates).
    """
    new = _cumulant_matrix(new_vectors) if len(new_vectors) else None
    if new is None or new.shape[0] == 0:
        return model
    if model.train_x is None or model.prior is None:
        raise ValueError("model carries no assignment state (loaded without data); cannot update")
    if new.shape[1] != model.dim:
        raise ValueError(f"new vectors have dim {new.shape[1]}, model has {model.dim}")
    X = np.vstack([model.train_x, new])
    k_old = len(model.components)
    z0 = np.concatenate(
        [model.assignments, k_old + np.arange(new.shape[0], dtype=np.int64)]
    )
    rng = np.random.default_rng(config.seed)
    return _run_chain(X, z0, model.prior, config, rng)


# ---------------------------------------------------------------------------
# pattern identification


def dominant_components(model: MixtureModel, threshold: float = DOMINANCE_THRESHOLD) -> list[int]:
    """Indices of components holding at least `threshold` of the data."""
    return [k for k, c in enumerate(model.components) if c.weight >= threshold]


def _higher_order_norm(mean: np.ndarray) -> float:
    return float(np.hypot(mean[1], mean[2]))


def auto_noise_gate(model: MixtureModel, rel: float = 0.3) -> float:
    """Gate scaled to the lowest-energy dominant component's squared C21.

    The noise constellation's higher-order estimation noise scales with
    sigma^4, so a gate relative to the candidate's own energy squared keeps
    the threshold unit-free.
    """
    dom = dominant_components(model)
    if not dom:
        dom = list(range(len(model.components)))
    c21_min = min(model.components[k].mean[0] for k in dom)
    return rel * max(float(c21_min) ** 2, 1e-12)


def identify_noise_component(model: MixtureModel, noise_gate: float) -> int | None:
    """Dominant component nearest the higher-order origin, if within the gate.

    Returns None ("no idle observed") when even the best candidate's
    (C40, C42) norm exceeds `noise_gate`. The winner's C21 mean is the
    recovered noise variance.
    """
    if not model.components:
        raise ValueError("empty mixture model")
    dom = dominant_components(model)
    if not dom:
        dom = list(range(len(model.components)))
    best = min(dom, key=lambda k: _higher_order_norm(model.components[k].mean))
    if _higher_order_norm(model.components[best].mean) <= noise_gate:
        return best
    return None


def match_patterns(
    model: MixtureModel,
    dictionary: ModulationDictionary,
    noise_variance: float,
    noise_gate: float | None = None,
    dominance_threshold: float = DOMINANCE_THRESHOLD,
) -> list[PatternAssignment]:
    """Label every component: idle, a dictionary modulation, or unknown.

    Non-noise dominant components get power estimate C21 - noise_variance
    (clamped positive) and the dictionary entry minimizing the Euclidean
    distance between the component's (C40, C42) mean and the entry's
    theoretical signature scaled by the squared power. Entries matched by
    no component get their active flag cleared (dictionary pruning).
    """
    if noise_gate is None:
        noise_gate = auto_noise_gate(model)
    tiny = 1e-12 * max(1.0, noise_variance)
    assignments: list[PatternAssignment] = []
    matched: set[ModulationType] = set()
    for k, comp in enumerate(model.components):
        dominant = comp.weight >= dominance_threshold
        hon = _higher_order_norm(comp.mean)
        if hon <= noise_gate:
            assignments.append(PatternAssignment(k, ModulationType.NOISE_ONLY, 0.0, hon, dominant))
            continue
        if not dominant:
            assignments.append(PatternAssignment(k, None, None, None, dominant=False))
            continue
        power = max(float(comp.mean[0]) - noise_variance, tiny)
        target = comp.mean[1:3]
        best_mod = None
        best_res = math.inf
        for mod, sig in dictionary.entries:
            theo = power * power * np.array([sig.c40, sig.c42])
            res = float(np.linalg.norm(target - theo))
            if res < best_res:
                best_res = res
                best_mod = mod
        matched.add(best_mod)
        assignments.append(PatternAssignment(k, best_mod, power, best_res, dominant=True))
    for idx, (mod, _sig) in enumerate(dictionary.entries):
        dictionary.active_flags[idx] = mod in matched
    return assignments


def classify_vector(
    model: MixtureModel,
    assignments: list[PatternAssignment],
    v,
) -> PatternAssignment:
    """Assign a new vector by predictive density, allowing "none of these".

    Component mass is weight x Gaussian(component mean, covariance); the
    Chinese-restaurant new-component mass is concentration/(n + alpha)
    times the base-measure predictive. When the new-component mass wins,
    an unknown-pattern assignment (component_id -1) is returned instead of
    forcing a dictionary match.
    """
    x = np.asarray(v.values if isinstance(v, CumulantVector) else v, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"vector shape {x.shape} != model dimension ({model.dim},)")
    alpha = model.config.concentration
    denom = math.log(model.n_points + alpha)
    d = model.dim
    scores = []
    for comp in model.components:
        L = np.linalg.cholesky(comp.cov)
        r = np.linalg.solve_triangular if False else None  # placeholder, see below
        y = np.linalg.solve(L, x - comp.mean)
        logdet = 2.0 * float(np.log(np.diag(L)).sum())
        logpdf = -0.5 * (d * _LOG2PI + logdet + float(y @ y))
        scores.append(math.log(comp.count) - denom + logpdf)
    if model.prior is not None:
        scores.append(math.log(alpha) - denom + model.prior.prior_predictive_logpdf(x))
    best = int(np.argmax(scores))
    if best == len(model.components):
        return PatternAssignment(component_id=-1, modulation=None, power=None, residual=None, dominant=False)
    by_id = {a.component_id: a for a in assignments}
    if best in by_id:
        return by_id[best]
    return PatternAssignment(component_id=best, modulation=None, power=None, residual=None, dominant=False)


# ---------------------------------------------------------------------------
# persistence and dumps

_MAGIC = "cogniscope-dpgmm v1"


def save_model(model: MixtureModel, path, include_data: bool = True) -> None:
    """Flat-text export: config echo, components (mean + covariance Cholesky),
    and optionally the training data with mode assignments (needed to
    update the posterior after reloading)."""
    cfg = model.config
    prior = model.prior
    lines = [
        _MAGIC,
        f"seed {cfg.seed}",
        f"concentration {cfg.concentration!r}",
        f"prior_scale {cfg.prior_scale!r}",
        f"prior_precision_scale {cfg.prior_precision_scale!r}",
        f"n_sweeps {cfg.n_sweeps}",
        f"burn_in {cfg.burn_in}",
        f"dim {model.dim}",
        f"n_points {model.n_points}",
        f"joint_log_posterior {model.joint_log_posterior!r}",
        f"mode_sweep {model.mode_sweep}",
        "prior_mu0 " + " ".join(repr(float(v)) for v in prior.mu0),
        f"prior_kappa0 {prior.kappa0!r}",
        f"prior_nu0 {prior.nu0!r}",
        "prior_psi0 " + " ".join(repr(float(v)) for v in prior.psi0.ravel()),
        f"n_components {len(model.components)}",
    ]
    for comp in model.components:
        L = np.linalg.cholesky(comp.cov)
        lines.append(f"component {comp.count} {comp.weight!r}")
        lines.append("mean " + " ".join(repr(float(v)) for v in comp.mean))
        lines.append("chol " + " ".join(repr(float(v)) for v in L[np.tril_indices(model.dim)]))
    if include_data and model.train_x is not None:
        lines.append(f"data {model.n_points}")
        for x, z in zip(model.train_x, model.assignments):
            lines.append("point " + " ".join(repr(float(v)) for v in x) + f" {int(z)}")
    else:
        lines.append("data 0")
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> MixtureModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"not a dpgmm model file (missing header {_MAGIC!r})")
    fields = {}
    i = 1
    while not lines[i].startswith("n_components "):
        key, _, val = lines[i].partition(" ")
        fields[key] = val
        i += 1
    d = int(fields["dim"])
    n_comp = int(lines[i].split()[1])
    i += 1
    components = []
    for _ in range(n_comp):
        _, count, weight = lines[i].split()
        mean = np.array([float(v) for v in lines[i + 1].split()[1:]])
        tril = np.array([float(v) for v in lines[i + 2].split()[1:]])
        L = np.zeros((d, d))
        L[np.tril_indices(d)] = tril
        components.append(
            MixtureComponent(weight=float(weight), mean=mean, cov=L @ L.T, count=int(count))
        )
        i += 3
    n_data = int(lines[i].split()[1])
    i += 1
    train_x = None
    assignments = np.array([], dtype=np.int64)
    if n_data:
        train_x = np.empty((n_data, d))
        assignments = np.empty(n_data, dtype=np.int64)
        for r in range(n_data):
            parts = lines[i].split()
            train_x[r] = [float(v) for v in parts[1 : 1 + d]]
            assignments[r] = int(parts[-1])
            i += 1
    config = DPGMMConfig(
        concentration=float(fields["concentration"]),
        prior_scale=float(fields["prior_scale"]),
        prior_precision_scale=float(fields["prior_precision_scale"]),
        n_sweeps=int(fields["n_sweeps"]),
        burn_in=int(fields["burn_in"]),
        seed=int(fields["seed"]),
    )
    prior = _NIWPrior(
        mu0=np.array([float(v) for v in fields["prior_mu0"].split()]),
        kappa0=float(fields["prior_kappa0"]),
        nu0=float(fields["prior_nu0"]),
        psi0=np.array([float(v) for v in fields["prior_psi0"].split()]).reshape(d, d),
    )
    n_points = int(fields["n_points"])
    return MixtureModel(
        components=components,
        assignments=assignments,
        n_points=n_points,
        config=config,
        joint_log_posterior=float(fields["joint_log_posterior"]),
        mode_sweep=int(fields["mode_sweep"]),
        n_components_trace=np.array([], dtype=np.int64),
        log_posterior_trace=np.array([]),
        train_x=train_x,
        prior=prior,
    )


def write_component_csv(path, model: MixtureModel, assignments: list[PatternAssignment]) -> None:
    """Dump per-component summaries for pattern plots."""
    import csv

    by_id = {a.component_id: a for a in assignments}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "weight", "mu_c21", "mu_c40", "mu_c42", "matched_mod", "est_power"])
        for k, comp in enumerate(model.components):
            a = by_id.get(k)
            mod = "" if a is None or a.modulation is None else a.modulation.value
            power = "" if a is None or a.power is None else repr(float(a.power))
            w.writerow(
                [k, repr(float(comp.weight))]
                + [repr(float(v)) for v in comp.mean[:3]]
                + [mod, power]
            )
