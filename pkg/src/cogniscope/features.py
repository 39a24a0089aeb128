"""Feature extraction: per-slot energy vectors and higher-order cumulants.

Two representations feed the learning stages. Energy feature vectors
collect average |sample|^2 per sensing slot. Cumulant vectors collect
[C21, Re C40, C42] estimated by moment plug-in:

    Mpq = (1/N) sum x^(p-q) conj(x)^q
    C21 = M21
    C40 = M40 - 3 M20^2
    C42 = M42 - |M20|^2 - 2 M21^2

C21 carries the energy information and is kept first; Gaussian noise
contributes only to C21, so (C40, C42) fingerprint the constellation
shape. Cumulants are stored raw (no normalization by C21 powers).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .signal_model import Constellation, IQFrame, ModulationType, TransmitPattern

__all__ = [
    "CUMULANT_ORDERS",
    "EnergyFeatureVector",
    "CumulantVector",
    "energy_features",
    "estimate_cumulants",
    "theoretical_cumulants",
    "write_energy_csv",
    "write_cumulant_csv",
]

CUMULANT_ORDERS = ("c21", "c40", "c42")

# imaginary part of C40 above this fraction of |Re C40| flags a modeling
# violation (carrier offset / asymmetric constellation)
_IMAG_FLAG_RATIO = 0.10


@dataclass(frozen=True)
class EnergyFeatureVector:
    """Per-slot average energies of one frame, with optional truth label."""

    energies: np.ndarray
    truth_label: TransmitPattern | None = None

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=np.float64)
        object.__setattr__(self, "energies", e)
        if e.ndim != 1 or e.size < 1:
            raise ValueError("energies must be a non-empty 1-D vector")
        if np.any(e < 0):
            raise ValueError("energies must be >= 0")

    @property
    def mean_energy(self) -> float:
        return float(np.mean(self.energies))


@dataclass(frozen=True)
class CumulantVector:
    """Ordered [C21, Re C40, C42] estimates with sample-count provenance.

    `imag_flagged` is set when |Im C40| exceeds 10% of |Re C40|, which
    signals a symmetric-constellation assumption violation rather than a
    numerical failure.
    """

    values: np.ndarray
    sample_count: int
    c40_imag: float = 0.0
    imag_flagged: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != (3,):
            raise ValueError(f"cumulant vector must have exactly 3 entries, got shape {v.shape}")
        if v[0] < 0:
            raise ValueError(f"second-order cumulant must be >= 0, got {v[0]}")

    @property
    def c21(self) -> float:
        return float(self.values[0])

    @property
    def c40(self) -> float:
        return float(self.values[1])

    @property
    def c42(self) -> float:
        return float(self.values[2])


def energy_features(frame: IQFrame) -> EnergyFeatureVector:
    """Average |sample|^2 over each slot of the frame; truth label copied."""
    cfg = frame.slot_config
    mags = np.abs(frame.samples.reshape(cfg.slots_per_frame, cfg.samples_per_slot)) ** 2
    return EnergyFeatureVector(energies=mags.mean(axis=1), truth_label=frame.truth)


def estimate_cumulants(samples, orders: tuple[str, ...] = CUMULANT_ORDERS) -> CumulantVector:
    """Plug-in moment estimates of [C21, Re C40, C42] from complex samples."""
    if tuple(orders) != CUMULANT_ORDERS:
        raise ValueError(f"unsupported cumulant order set {orders!r}, only {CUMULANT_ORDERS} implemented")
    x = np.asarray(samples, dtype=np.complex128).ravel()
    n = x.size
    if n < 4:
        raise ValueError(f"need at least 4 samples for fourth-order cumulants, got {n}")
    ax2 = x.real**2 + x.imag**2
    m21 = float(np.mean(ax2))
    m20 = complex(np.mean(x * x))
    m40 = complex(np.mean((x * x) ** 2))
    m42 = float(np.mean(ax2 * ax2))
    c21 = m21
    c40 = m40 - 3.0 * m20 * m20
    c42 = m42 - abs(m20) ** 2 - 2.0 * m21 * m21
    flagged = abs(c40.imag) > _IMAG_FLAG_RATIO * abs(c40.real)
    return CumulantVector(
        values=np.array([c21, c40.real, c42]),
        sample_count=n,
        c40_imag=c40.imag,
        imag_flagged=bool(flagged),
    )


def theoretical_cumulants(
    constellation: Constellation, power: float, noise_variance: float
) -> CumulantVector:
    """Exact population cumulants of sqrt(power)*symbol + CN(0, noise_variance).

    Computed by enumeration over the constellation points. Fourth-order
    cumulants scale as power^2 and get no Gaussian-noise contribution;
    C21 = power + noise_variance.
    """
    if power < 0:
        raise ValueError(f"power must be >= 0, got {power}")
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    pts = constellation.points
    m21 = float(np.mean(np.abs(pts) ** 2))
    m20 = complex(np.mean(pts * pts))
    m40 = complex(np.mean(pts**4))
    m42 = float(np.mean(np.abs(pts) ** 4))
    c40_unit = m40 - 3.0 * m20 * m20
    c42_unit = m42 - abs(m20) ** 2 - 2.0 * m21 * m21
    c21 = power * m21 + noise_variance
    c40 = power * power * c40_unit
    c42 = power * power * c42_unit
    flagged = abs(c40.imag) > _IMAG_FLAG_RATIO * abs(c40.real)
    return CumulantVector(
        values=np.array([c21, c40.real, c42]),
        sample_count=0,
        c40_imag=c40.imag,
        imag_flagged=bool(flagged),
    )


def _truth_fields(truth: TransmitPattern | None) -> tuple[str, str]:
    if truth is None:
        return "", ""
    return truth.modulation.value, repr(float(truth.power))


def write_energy_csv(path, vectors: list[EnergyFeatureVector]) -> None:
    """Dump energy feature vectors: frame_id, slot_0..slot_{S-1}, truth_mod, truth_power."""
    if not vectors:
        raise ValueError("no vectors to write")
    n_slots = vectors[0].energies.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_id"] + [f"slot_{k}" for k in range(n_slots)] + ["truth_mod", "truth_power"])
        for i, v in enumerate(vectors):
            mod, pw = _truth_fields(v.truth_label)
            w.writerow([i] + [repr(float(e)) for e in v.energies] + [mod, pw])


def write_cumulant_csv(
    path, vectors: list[CumulantVector], truths: list[TransmitPattern | None] | None = None
) -> None:
    """Dump cumulant vectors: frame_id, c21, c40, c42, n_samples, truth_mod, truth_power."""
    if truths is None:
        truths = [None] * len(vectors)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_id", "c21", "c40", "c42", "n_samples", "truth_mod", "truth_power"])
        for i, (v, t) in enumerate(zip(vectors, truths)):
            mod, pw = _truth_fields(t)
            w.writerow([i, repr(v.c21), repr(v.c40), repr(v.c42), v.sample_count, mod, pw])
