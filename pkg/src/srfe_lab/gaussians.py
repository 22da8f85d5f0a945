"""Diagonal Gaussians, shared-variance mixtures and a box-contaminated variant.

These are the continuous models used by the Monte Carlo estimators and the
training loop: a mean-field Gaussian with parameters (mu, log_sigma), a
mixture of isotropic Gaussians with one shared variance, and the mixture
blended with a uniform outlier box.  All densities are evaluated in the log
domain; batched inputs have shape (n, d).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "DiagonalGaussian",
    "GaussianMixture",
    "ContaminatedMixture",
    "srfe_equal_covariance",
]

LOG_2PI = float(np.log(2.0 * np.pi))


def _as_batch(x) -> tuple[np.ndarray, bool]:
    """Promote a single point (d,) to a batch (1, d); report if it was single."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected point or batch of points, got shape {arr.shape}")


def _frozen_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DiagonalGaussian:
    """Mean-field Gaussian N(mu, diag(exp(log_sigma))^2)."""

    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        mu = _frozen_vector(self.mu, "mu")
        ls = _frozen_vector(self.log_sigma, "log_sigma")
        if mu.shape != ls.shape:
            raise ValueError("mu and log_sigma must have the same shape")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_sigma", ls)

    @property
    def dim(self) -> int:
        return int(self.mu.size)

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def transform(self, eps: np.ndarray) -> np.ndarray:
        """Reparameterization x = mu + sigma * eps, elementwise."""
        return self.mu + self.sigma * eps

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.transform(rng.standard_normal((n, self.dim)))

    def log_prob(self, x):
        xb, single = _as_batch(x)
        z = (xb - self.mu) / self.sigma
        out = -0.5 * self.dim * LOG_2PI - self.log_sigma.sum() \
            - 0.5 * (z * z).sum(axis=1)
        return float(out[0]) if single else out

    def entropy(self) -> float:
        """0.5 d (1 + log 2 pi) + sum log_sigma."""
        return 0.5 * self.dim * (1.0 + LOG_2PI) + float(self.log_sigma.sum())

    def score_x(self, x):
        """Gradient of log density in x: -(x - mu) / sigma^2."""
        xb, single = _as_batch(x)
        out = -(xb - self.mu) / self.sigma ** 2
        return out[0] if single else out

    def param_score(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample gradients of log q in (mu, log_sigma).

        d/dmu_k     = (x_k - mu_k) / sigma_k^2
        d/dlogsig_k = ((x_k - mu_k) / sigma_k)^2 - 1
        """
        xb, single = _as_batch(x)
        z = (xb - self.mu) / self.sigma
        d_mu = z / self.sigma
        d_ls = z * z - 1.0
        if single:
            return d_mu[0], d_ls[0]
        return d_mu, d_ls


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of isotropic Gaussians sharing one variance.

    means has shape (K, d); weights is a length-K probability vector.
    """

    means: np.ndarray
    variance: float
    weights: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim != 2:
            raise ValueError("means must have shape (K, d)")
        w = _frozen_vector(self.weights, "weights")
        if w.size != means.shape[0]:
            raise ValueError("one weight per component required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        means = means.copy()
        means.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])

    def _component_log_probs(self, xb: np.ndarray) -> np.ndarray:
        # (n, K) log of weight_k * N(x; m_k, variance I)
        diff = xb[:, None, :] - self.means[None, :, :]
        sq = (diff * diff).sum(axis=2)
        norm = -0.5 * self.dim * (LOG_2PI + np.log(self.variance))
        return np.log(self.weights)[None, :] + norm - 0.5 * sq / self.variance

    def log_prob(self, x):
        xb, single = _as_batch(x)
        out = logsumexp(self._component_log_probs(xb), axis=1)
        return float(out[0]) if single else out

    def score_x(self, x):
        """Gradient of log density: responsibility-weighted pulls to the means."""
        xb, single = _as_batch(x)
        comp = self._component_log_probs(xb)
        resp = np.exp(comp - logsumexp(comp, axis=1, keepdims=True))
        pull = (self.means[None, :, :] - xb[:, None, :]) / self.variance
        out = (resp[:, :, None] * pull).sum(axis=1)
        return out[0] if single else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comps = rng.choice(self.n_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[comps] + np.sqrt(self.variance) * noise

    def mean(self) -> np.ndarray:
        return self.weights @ self.means


@dataclass(frozen=True)
class ContaminatedMixture:
    """(1 - w) * base + w * Uniform(box), the box being [low, high]^d.

    outlier_weight = 0 reduces exactly to the base mixture.
    """

    base: GaussianMixture
    outlier_weight: float
    box_low: float = -10.0
    box_high: float = 10.0

    def __post_init__(self):
        if not (0.0 <= self.outlier_weight < 1.0):
            raise ValueError("outlier_weight must lie in [0, 1)")
        if not self.box_high > self.box_low:
            raise ValueError("box_high must exceed box_low")

    @property
    def dim(self) -> int:
        return self.base.dim

    def _log_box_density(self) -> float:
        side = self.box_high - self.box_low
        return float(np.log(self.outlier_weight) - self.dim * np.log(side))

    def _in_box(self, xb: np.ndarray) -> np.ndarray:
        return np.all((xb >= self.box_low) & (xb <= self.box_high), axis=1)

    def log_prob(self, x):
        xb, single = _as_batch(x)
        base_lp = np.log1p(-self.outlier_weight) \
            + np.asarray(self.base.log_prob(xb))
        if self.outlier_weight == 0.0:
            out = base_lp
        else:
            box_lp = np.where(self._in_box(xb), self._log_box_density(), -np.inf)
            out = np.logaddexp(base_lp, box_lp)
        return float(out[0]) if single else out

    def score_x(self, x):
        """Gradient of log density in x.

        The uniform component is flat, so inside the box the base gradient is
        shrunk by the base component's posterior share; outside it passes
        through unchanged.  Points exactly on the box boundary (where the
        density jumps) get the base gradient and a warning.
        """
        xb, single = _as_batch(x)
        base_score = np.asarray(self.base.score_x(xb))
        if self.outlier_weight == 0.0:
            return base_score[0] if single else base_score
        on_edge = np.any((xb == self.box_low) | (xb == self.box_high), axis=1)
        if on_edge.any():
            warnings.warn("score requested exactly on the outlier box boundary;"
                          " returning the base-mixture gradient there",
                          RuntimeWarning, stacklevel=2)
        base_lp = np.log1p(-self.outlier_weight) \
            + np.asarray(self.base.log_prob(xb))
        total_lp = np.asarray(self.log_prob(xb))
        share = np.exp(base_lp - total_lp)  # posterior weight of the base part
        share = np.where(self._in_box(xb) & ~on_edge, share, 1.0)
        out = share[:, None] * base_score
        return out[0] if single else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # Fixed draw order keeps results reproducible for a given generator.
        from_box = rng.random(n) < self.outlier_weight
        base_draws = self.base.sample(n, rng)
        box_draws = rng.uniform(self.box_low, self.box_high, size=(n, self.dim))
        return np.where(from_box[:, None], box_draws, base_draws)


def srfe_equal_covariance(mu1, mu2, variance: float) -> float:
    """Free-energy divergence between N(mu1, v I) and N(mu2, v I).

    The Gaussian overlap integral gives F(tau) = exp(-tau(1-tau)|dmu|^2/(2v)),
    so the value is |mu1 - mu2|^2 / (2 v) for every tau.
    """
    if not variance > 0:
        raise ValueError("variance must be positive")
    d = np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64)
    return float(d @ d) / (2.0 * variance)
