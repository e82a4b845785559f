"""Photon-number statistics for weak-laser, thermal and amplified-coherent light.

Three single-mode laws are supported:

* ``Poisson(mean)`` -- an attenuated laser pulse.
* ``BoseEinstein(mean)`` -- one mode of thermal light (amplified spontaneous
  emission), i.e. a geometric law.
* ``LaguerreGauss(signal, noise)`` -- a coherent pulse plus thermal noise in the
  same mode (displaced thermal state).

The family is closed under binomial thinning, which is how fiber loss and
detector efficiency act on photon numbers.

Samplers go through the Glauber P-representation: a complex field amplitude is
drawn (fixed displacement plus circular Gaussian noise) and the photon count is
Poisson in the instantaneous intensity. This is independent of the closed-form
PMFs and is used as their oracle in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "PhotonDistribution",
    "Poisson",
    "BoseEinstein",
    "LaguerreGauss",
    "pmf",
    "vacuum_probability",
    "sample",
    "sample_intensity",
    "sample_amplified_pair",
    "thin",
    "cutoff",
]


def _check_mean(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")
    return value


def _check_transmittance(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {eta!r}")
    return eta


class PhotonDistribution:
    """Base class for the single-mode photon-number laws."""

    @property
    def signal(self) -> float:
        """Coherent (displacement) part of the mean photon number."""
        raise NotImplementedError

    @property
    def noise(self) -> float:
        """Thermal part of the mean photon number."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return self.signal + self.noise

    @property
    def variance(self) -> float:
        s, n = self.signal, self.noise
        return s * (1.0 + 2.0 * n) + n * (1.0 + n)

    def pmf(self, n):
        """Probability of ``n`` photons; ``n`` may be an integer or an array."""
        scalar = np.ndim(n) == 0
        n = np.asarray(n)
        if np.any(n < 0):
            raise ValueError("photon number must be non-negative")
        out = np.exp(self.logpmf(n.astype(np.int64)))
        return float(out) if scalar else out

    def logpmf(self, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vacuum_probability(self) -> float:
        s, n = self.signal, self.noise
        return math.exp(-s / (1.0 + n)) / (1.0 + n)

    def thin(self, eta: float) -> "PhotonDistribution":
        raise NotImplementedError

    def sample_intensity(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Instantaneous intensity |amplitude|^2 drawn from the P-representation."""
        s, n = self.signal, self.noise
        shape = () if size is None else tuple(np.atleast_1d(size))
        if n == 0.0:
            return np.full(shape, s)
        # circular complex Gaussian with E|z|^2 = n
        z = rng.standard_normal((2,) + shape) * math.sqrt(n / 2.0)
        return (math.sqrt(s) + z[0]) ** 2 + z[1] ** 2

    def sample(self, rng: np.random.Generator, size=None):
        """Draw photon counts. Returns an int for ``size=None``."""
        counts = rng.poisson(self.sample_intensity(rng, size))
        return int(counts) if size is None else counts

    def pmf_table(self, nmax: int | None = None) -> np.ndarray:
        """PMF evaluated on ``0..nmax`` (defaults to :func:`cutoff`)."""
        if nmax is None:
            nmax = cutoff(self)
        return self.pmf(np.arange(nmax + 1))


@dataclass(frozen=True)
class Poisson(PhotonDistribution):
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "mu", _check_mean("mu", self.mu))

    @property
    def signal(self) -> float:
        return self.mu

    @property
    def noise(self) -> float:
        return 0.0

    def logpmf(self, n):
        n = np.asarray(n)
        if self.mu == 0.0:
            return np.where(n == 0, 0.0, -np.inf)
        return n * math.log(self.mu) - self.mu - gammaln(n + 1)

    def thin(self, eta):
        return Poisson(_check_transmittance(eta) * self.mu)


@dataclass(frozen=True)
class BoseEinstein(PhotonDistribution):
    n_mean: float

    def __post_init__(self):
        object.__setattr__(self, "n_mean", _check_mean("n_mean", self.n_mean))

    @property
    def signal(self) -> float:
        return 0.0

    @property
    def noise(self) -> float:
        return self.n_mean

    def logpmf(self, n):
        n = np.asarray(n)
        N = self.n_mean
        if N == 0.0:
            return np.where(n == 0, 0.0, -np.inf)
        return n * math.log(N) - (n + 1) * math.log1p(N)

    def thin(self, eta):
        return BoseEinstein(_check_transmittance(eta) * self.n_mean)


@dataclass(frozen=True)
class LaguerreGauss(PhotonDistribution):
    """Coherent signal of mean ``s`` displaced on thermal noise of mean ``n_noise``."""

    s: float
    n_noise: float

    def __post_init__(self):
        object.__setattr__(self, "s", _check_mean("s", self.s))
        object.__setattr__(self, "n_noise", _check_mean("n_noise", self.n_noise))

    @property
    def signal(self) -> float:
        return self.s

    @property
    def noise(self) -> float:
        return self.n_noise

    def logpmf(self, n):
        # p(n) = e^{-S/(1+N)}/(1+N) * sum_k C(n,k) q^{n-k} t^k / k!
        # with q = N/(1+N), t = S/(1+N)^2; every term is positive, so the sum
        # is done in the log domain.
        S, N = self.s, self.n_noise
        if N == 0.0:
            return Poisson(S).logpmf(n)
        if S == 0.0:
            return BoseEinstein(N).logpmf(n)
        n = np.asarray(n)
        flat = np.atleast_1d(n).ravel()
        nmax = int(flat.max()) if flat.size else 0
        k = np.arange(nmax + 1)
        log_q = math.log(N) - math.log1p(N)
        log_t = math.log(S) - 2.0 * math.log1p(N)
        nn = flat[:, None]
        kk = k[None, :]
        terms = (
            gammaln(nn + 1) - gammaln(kk + 1) - gammaln(np.maximum(nn - kk, 0) + 1)
            + (nn - kk) * log_q + kk * log_t - gammaln(kk + 1)
        )
        terms = np.where(kk <= nn, terms, -np.inf)
        out = logsumexp(terms, axis=1) - S / (1.0 + N) - math.log1p(N)
        return out.reshape(np.shape(n))

    def thin(self, eta):
        eta = _check_transmittance(eta)
        return LaguerreGauss(eta * self.s, eta * self.n_noise)


def cutoff(dist: PhotonDistribution) -> int:
    """Truncation point ``mean + 20*sd`` used for PMF tables."""
    return int(math.ceil(dist.mean + 20.0 * math.sqrt(dist.variance))) + 1


def pmf(dist: PhotonDistribution, n):
    return dist.pmf(n)


def vacuum_probability(dist: PhotonDistribution) -> float:
    return dist.vacuum_probability()


def sample(dist: PhotonDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


def sample_intensity(dist: PhotonDistribution, rng: np.random.Generator, size=None):
    return dist.sample_intensity(rng, size)


def thin(dist: PhotonDistribution, eta: float) -> PhotonDistribution:
    return dist.thin(eta)


def sample_amplified_pair(mu, gain, chi=1.0, rng=None, size=None):
    """Joint photon counts (signal mode, orthogonal mode) after a phase-insensitive amplifier.

    The signal mode carries amplitude ``sqrt(gain * mu)`` plus ASE noise of mean
    ``chi * (gain - 1)``; the orthogonal mode carries ASE only.
    """
    mu = _check_mean("mu", mu)
    gain = float(gain)
    chi = float(chi)
    if gain < 1.0:
        raise ValueError(f"gain must be >= 1, got {gain!r}")
    if chi < 1.0:
        raise ValueError(f"excess noise factor must be >= 1, got {chi!r}")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    n_sp = chi * (gain - 1.0)
    n_sig = LaguerreGauss(gain * mu, n_sp).sample(rng, size)
    n_orth = BoseEinstein(n_sp).sample(rng, size)
    return n_sig, n_orth
