"""Frequency identification and source localization from covariances.

Random multi-tone signals are sampled at random integer times; the
covariance of the samples, after subtracting the known noise covariance,
factors through the partial Fourier sensing matrix, so the subspace imaging
engine identifies which tones are active.  The same pipeline localizes
incoherent sources on a transverse plane through the paraxial sensing
matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankCollapseError
from .forward import SensingPair
from .music import decompose, imaging_function, top_peaks
from .scene import _freeze
from .seeding import make_rng

__all__ = [
    "SignalModel",
    "CovarianceTriple",
    "make_signal_model",
    "synthesize",
    "exact_covariance",
    "empirical_covariance",
    "exact_source_covariance",
    "synthesize_sources",
    "covariance_music",
    "localize_sources",
]


@dataclass(frozen=True)
class SignalModel:
    """Random multi-tone signal: which tones are active and when we sample.

    Tone j (1-based) has frequency j / n_tones; the active set carries
    zero-mean complex amplitudes redrawn per realization with the given
    standard deviations.  Sampling times are integers in {1, ..., n_tones},
    drawn with replacement.
    """

    n_tones: int
    support: np.ndarray         # (s,) 0-based tone indices
    amp_std: np.ndarray         # (s,) per-tone amplitude standard deviations
    times: np.ndarray           # (n,) integer sampling times

    def __post_init__(self):
        object.__setattr__(self, "support", _freeze(np.asarray(self.support, dtype=np.int64)))
        object.__setattr__(self, "amp_std", _freeze(np.asarray(self.amp_std, dtype=float)))
        object.__setattr__(self, "times", _freeze(np.asarray(self.times, dtype=np.int64)))

    @property
    def sparsity(self) -> int:
        return self.support.size

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def frequencies(self) -> np.ndarray:
        """Frequencies of the active tones, in cycles per unit time."""
        return (self.support + 1) / self.n_tones

    def tone_matrix(self) -> np.ndarray:
        """Raw tone samples exp(-2 pi i t_k j / N) for all N tones."""
        j = np.arange(1, self.n_tones + 1)
        return np.exp(-2j * np.pi * np.outer(self.times, j) / self.n_tones)

    def sensing_matrix(self) -> np.ndarray:
        """Unit-column partial Fourier matrix of the sampling times."""
        return self.tone_matrix() / np.sqrt(self.n_samples)


@dataclass(frozen=True)
class CovarianceTriple:
    """Sample, object and noise covariances (exact or empirical)."""

    r_y: np.ndarray
    r_z: np.ndarray             # diagonal vector of tone variances (length N)
    r_e: np.ndarray
    mode: str = "exact"

    def __post_init__(self):
        for name in ("r_y", "r_z", "r_e"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name))))
        for m in (self.r_y, self.r_e):
            if np.linalg.norm(m - m.conj().T) > 1e-10 * max(1.0, np.linalg.norm(m)):
                raise ValueError("covariances must be Hermitian")

    def denoised(self) -> np.ndarray:
        return self.r_y - self.r_e


def make_signal_model(n_tones: int, s: int, n_samples: int, seed=0,
                      amp_std=1.0) -> SignalModel:
    """Draw a random active set and random sampling times."""
    if not (0 < s <= n_tones):
        raise ValueError("active tone count out of range")
    if n_samples < 1:
        raise ValueError("need at least one sampling time")
    rng = make_rng(seed)
    support = np.sort(rng.choice(n_tones, size=s, replace=False))
    times = rng.integers(1, n_tones + 1, size=n_samples)
    std = np.broadcast_to(np.asarray(amp_std, dtype=float), (s,)).copy()
    return SignalModel(n_tones=n_tones, support=support, amp_std=std, times=times)


def synthesize(model: SignalModel, noise_var: float = 0.0, realizations: int = 1,
               seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Sample the noisy random signal.

    Returns ``(samples, amplitudes)`` with samples of shape (n, R): each
    realization redraws circular complex Gaussian amplitudes on the active
    set and adds white complex Gaussian noise of variance ``noise_var`` per
    sample.
    """
    if realizations < 1:
        raise ValueError("need at least one realization")
    rng = make_rng(seed)
    s, n = model.sparsity, model.n_samples
    amps = (rng.standard_normal((s, realizations)) + 1j * rng.standard_normal((s, realizations)))
    amps *= model.amp_std[:, None] / np.sqrt(2.0)
    tones = model.tone_matrix()[:, model.support]
    x = tones @ amps
    if noise_var > 0:
        e = (rng.standard_normal((n, realizations)) + 1j * rng.standard_normal((n, realizations)))
        x = x + np.sqrt(noise_var / 2.0) * e
    return x, amps


def exact_covariance(model: SignalModel, noise_var: float = 0.0) -> CovarianceTriple:
    """Analytic covariances for independent zero-mean amplitudes."""
    n = model.n_samples
    var = np.zeros(model.n_tones)
    var[model.support] = model.amp_std ** 2
    tones = model.tone_matrix()[:, model.support]
    r_y = (tones * var[model.support][None, :]) @ tones.conj().T + noise_var * np.eye(n)
    return CovarianceTriple(r_y=r_y, r_z=var, r_e=noise_var * np.eye(n), mode="exact")


def empirical_covariance(samples: np.ndarray, noise_var: float = 0.0,
                         amplitudes: np.ndarray | None = None,
                         support: np.ndarray | None = None,
                         n_tones: int | None = None) -> CovarianceTriple:
    """Sample covariance over realizations, with the known noise covariance."""
    y = np.asarray(samples, dtype=np.complex128)
    if y.ndim != 2:
        raise ValueError("samples must be (n, realizations)")
    n, r = y.shape
    r_y = y @ y.conj().T / r
    r_y = 0.5 * (r_y + r_y.conj().T)
    if amplitudes is not None and support is not None and n_tones is not None:
        var = np.zeros(n_tones)
        var[np.asarray(support)] = np.mean(np.abs(amplitudes) ** 2, axis=1)
    else:
        var = np.zeros(0)
    return CovarianceTriple(r_y=r_y, r_z=var, r_e=noise_var * np.eye(n), mode=f"empirical({r})")


def exact_source_covariance(pair: SensingPair, support, variances,
                            noise_var: float = 0.0) -> CovarianceTriple:
    """Analytic covariance of incoherent sources seen through a sensing pair."""
    sup = np.asarray(support, dtype=np.int64)
    var_s = np.broadcast_to(np.asarray(variances, dtype=float), (sup.size,))
    phi = pair.phi_ext[:, sup]
    n = phi.shape[0]
    r_y = (phi * var_s[None, :]) @ phi.conj().T + noise_var * np.eye(n)
    var = np.zeros(pair.n_grid)
    np.add.at(var, sup, var_s)       # duplicated cells accumulate variance
    return CovarianceTriple(r_y=r_y, r_z=var, r_e=noise_var * np.eye(n), mode="exact")


def synthesize_sources(pair: SensingPair, support, variances, noise_var: float,
                       realizations: int, seed=0) -> np.ndarray:
    """Draw sensor snapshots of incoherent random sources."""
    sup = np.asarray(support, dtype=np.int64)
    var_s = np.broadcast_to(np.asarray(variances, dtype=float), (sup.size,))
    rng = make_rng(seed)
    phi = pair.phi_ext[:, sup]
    amps = (rng.standard_normal((sup.size, realizations))
            + 1j * rng.standard_normal((sup.size, realizations)))
    amps *= np.sqrt(var_s)[:, None] / np.sqrt(2.0)
    y = phi @ amps
    if noise_var > 0:
        e = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        y = y + np.sqrt(noise_var / 2.0) * e
    return y


_RANK_FLOOR = 1e-10


def covariance_music(triple: CovarianceTriple, steering: np.ndarray, s: int):
    """Identify s component indices from a denoised covariance.

    Subtracts the noise covariance, checks that the remaining matrix really
    has numerical rank s (correlated or duplicated components collapse the
    rank and are flagged), then images over the steering columns and picks
    the s largest peaks.
    """
    by = triple.denoised()
    sv = np.linalg.svd(by, compute_uv=False)
    if sv[0] == 0 or (s <= sv.size and sv[min(s, sv.size) - 1] <= _RANK_FLOOR * sv[0]):
        raise RankCollapseError(
            f"denoised covariance has numerical rank below {s}")
    dec = decompose(by, s=s)
    img = imaging_function(dec, steering)
    peaks, ties = top_peaks(img, s)
    img = img.with_recovery(peaks, rule="top-peaks", ties_broken=ties)
    return peaks, img


def localize_sources(pair: SensingPair, triple: CovarianceTriple, s: int):
    """Source positions on the grid from a denoised sensor covariance."""
    return covariance_music(triple, pair.phi_ext, s)
