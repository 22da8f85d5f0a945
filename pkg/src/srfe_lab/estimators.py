"""Monte Carlo losses and pathwise gradients for fitting a mean-field Gaussian.

The free-energy loss follows the clamped estimator: draw eps, push it through
the reparameterization, average exp(tau * log ratio) with a running-max shift,
clamp the overlap estimate into [f_clamp_low, f_clamp_high], and take
-log of it over tau(1-tau).  Gradients are exact derivatives of that loss in
(mu, log_sigma); when the clamp is active the loss is locally constant and
the gradient is zero.  Forward and reverse KL losses use the same sample-in,
numbers-out style so the training loop can treat all three uniformly.

The second-moment tools at the bottom work on a finite support with a
softmax-parameterized model, where everything can also be enumerated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from srfe_lab.discrete import DiscreteDist
from srfe_lab.gaussians import DiagonalGaussian

__all__ = [
    "SrfeConfig",
    "LossReport",
    "GradReport",
    "SecondMomentReport",
    "srfe_mc_loss",
    "srfe_mc_grad",
    "forward_kl_loss",
    "forward_kl_grad",
    "reverse_kl_loss",
    "reverse_kl_grad",
    "softmax",
    "softmax_scores",
    "estimator_second_moment",
    "exact_second_moment",
]


@dataclass(frozen=True)
class SrfeConfig:
    tau: float
    n_samples: int
    f_clamp_low: float = 1e-10
    f_clamp_high: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if not (0.0 < self.f_clamp_low < self.f_clamp_high):
            raise ValueError("clamp bounds must satisfy 0 < low < high")


@dataclass(frozen=True)
class LossReport:
    loss: float
    f_hat: float
    max_log_ratio: float
    clamped: bool


@dataclass(frozen=True)
class GradReport:
    d_mu: np.ndarray
    d_log_sigma: np.ndarray
    second_moment: float


@dataclass(frozen=True)
class SecondMomentReport:
    empirical: float
    bound: float


def _log_ratios(q: DiagonalGaussian, target, eps: np.ndarray) -> np.ndarray:
    x = q.transform(eps)
    return np.asarray(target.log_prob(x)) - np.asarray(q.log_prob(x))


def _log_f_hat(r: np.ndarray, tau: float) -> tuple[float, float]:
    """(log f_hat, max log ratio) for f_hat = mean exp(tau r), shift-stabilized."""
    r_max = float(r.max())
    w = np.exp(tau * (r - r_max))
    return tau * r_max + math.log(float(w.mean())), r_max


def _clamp_log_f(log_f: float, cfg: SrfeConfig) -> tuple[float, bool]:
    if log_f < math.log(cfg.f_clamp_low):
        return cfg.f_clamp_low, True
    if log_f > math.log(cfg.f_clamp_high):
        return cfg.f_clamp_high, True
    return math.exp(log_f), False


def srfe_mc_loss(q: DiagonalGaussian, target, cfg: SrfeConfig,
                 eps: np.ndarray) -> LossReport:
    """Clamped free-energy loss from a fixed noise batch eps of shape (n, d).

    Deterministic given eps.  loss = -log f_hat / (tau (1 - tau)) with f_hat
    the clamped mean of exp(tau (log p - log q)) at x = mu + sigma eps.
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (cfg.n_samples, q.dim):
        raise ValueError(f"eps must have shape {(cfg.n_samples, q.dim)}")
    log_f, r_max = _log_f_hat(_log_ratios(q, target, eps), cfg.tau)
    f_hat, clamped = _clamp_log_f(log_f, cfg)
    loss = -math.log(f_hat) / (cfg.tau * (1.0 - cfg.tau))
    return LossReport(loss=loss, f_hat=f_hat, max_log_ratio=r_max,
                      clamped=clamped)


def srfe_mc_grad(q: DiagonalGaussian, target, cfg: SrfeConfig,
                 eps: np.ndarray) -> GradReport:
    """Exact (mu, log_sigma) derivative of srfe_mc_loss for the same eps.

    Differentiating -log f_hat / (tau(1-tau)) gives a weighted average with
    weights exp(tau r_i) over the per-sample derivative of r_i.  For the
    mean-field Gaussian the model-score term cancels against the sampling
    path, leaving

        dr/dmu_k       = s_k(x)                    (target x-score)
        dr/dlogsigma_k = s_k(x) sigma_k eps_k + 1

    and d loss/dtheta = -mean_w[dr/dtheta] / (1 - tau).  Zero when the clamp
    is active (the loss is locally flat there).
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (cfg.n_samples, q.dim):
        raise ValueError(f"eps must have shape {(cfg.n_samples, q.dim)}")
    x = q.transform(eps)
    r = np.asarray(target.log_prob(x)) - np.asarray(q.log_prob(x))
    log_f, _ = _log_f_hat(r, cfg.tau)
    _, clamped = _clamp_log_f(log_f, cfg)
    if clamped:
        zero = np.zeros(q.dim)
        return GradReport(d_mu=zero, d_log_sigma=zero.copy(), second_moment=0.0)

    w = np.exp(cfg.tau * (r - r.max()))
    w /= w.sum()
    target_score = np.asarray(target.score_x(x))
    b_mu = target_score
    b_ls = target_score * (q.sigma * eps) + 1.0
    scale = -1.0 / (1.0 - cfg.tau)
    d_mu = scale * (w[:, None] * b_mu).sum(axis=0)
    d_ls = scale * (w[:, None] * b_ls).sum(axis=0)
    # per-sample contributions g_i with mean equal to the full gradient
    g = scale * (cfg.n_samples * w)[:, None] * np.concatenate([b_mu, b_ls], axis=1)
    second = float((g * g).sum(axis=1).mean())
    return GradReport(d_mu=d_mu, d_log_sigma=d_ls, second_moment=second)


def srfe_mc_step(q: DiagonalGaussian, target, cfg: SrfeConfig,
                 eps: np.ndarray) -> tuple[LossReport, GradReport]:
    """Loss and gradient from one pass over the batch.

    Same numbers as calling srfe_mc_loss and srfe_mc_grad separately; the
    target density and score are evaluated once.
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (cfg.n_samples, q.dim):
        raise ValueError(f"eps must have shape {(cfg.n_samples, q.dim)}")
    x = q.transform(eps)
    r = np.asarray(target.log_prob(x)) - np.asarray(q.log_prob(x))
    log_f, r_max = _log_f_hat(r, cfg.tau)
    f_hat, clamped = _clamp_log_f(log_f, cfg)
    loss = LossReport(loss=-math.log(f_hat) / (cfg.tau * (1.0 - cfg.tau)),
                      f_hat=f_hat, max_log_ratio=r_max, clamped=clamped)
    if clamped:
        zero = np.zeros(q.dim)
        return loss, GradReport(d_mu=zero, d_log_sigma=zero.copy(),
                                second_moment=0.0)
    w = np.exp(cfg.tau * (r - r_max))
    w /= w.sum()
    target_score = np.asarray(target.score_x(x))
    b_mu = target_score
    b_ls = target_score * (q.sigma * eps) + 1.0
    scale = -1.0 / (1.0 - cfg.tau)
    d_mu = scale * (w[:, None] * b_mu).sum(axis=0)
    d_ls = scale * (w[:, None] * b_ls).sum(axis=0)
    g = scale * (cfg.n_samples * w)[:, None] * np.concatenate([b_mu, b_ls], axis=1)
    second = float((g * g).sum(axis=1).mean())
    return loss, GradReport(d_mu=d_mu, d_log_sigma=d_ls, second_moment=second)


def forward_kl_loss(q: DiagonalGaussian, target, xs: np.ndarray) -> float:
    """mean[log p(x) - log q(x)] over target samples xs (shape (n, d))."""
    xs = np.asarray(xs, dtype=np.float64)
    return float(np.mean(np.asarray(target.log_prob(xs))
                         - np.asarray(q.log_prob(xs))))


def forward_kl_grad(q: DiagonalGaussian, xs: np.ndarray) -> GradReport:
    """Gradient of forward_kl_loss: minus the mean model score at fixed xs."""
    xs = np.asarray(xs, dtype=np.float64)
    d_mu_i, d_ls_i = q.param_score(xs)
    g = -np.concatenate([d_mu_i, d_ls_i], axis=1)
    second = float((g * g).sum(axis=1).mean())
    return GradReport(d_mu=g[:, :q.dim].mean(axis=0),
                      d_log_sigma=g[:, q.dim:].mean(axis=0),
                      second_moment=second)


def reverse_kl_loss(q: DiagonalGaussian, target, eps: np.ndarray) -> float:
    """mean[log q(x) - log p(x)] at x = mu + sigma eps."""
    return float(-np.mean(_log_ratios(q, target, np.asarray(eps, dtype=np.float64))))


def reverse_kl_grad(q: DiagonalGaussian, target, eps: np.ndarray) -> GradReport:
    """Pathwise derivative of reverse_kl_loss; the same score cancellation as
    in srfe_mc_grad applies, with uniform weights and opposite sign."""
    eps = np.asarray(eps, dtype=np.float64)
    x = q.transform(eps)
    target_score = np.asarray(target.score_x(x))
    b_mu = target_score
    b_ls = target_score * (q.sigma * eps) + 1.0
    g = -np.concatenate([b_mu, b_ls], axis=1)
    second = float((g * g).sum(axis=1).mean())
    return GradReport(d_mu=-b_mu.mean(axis=0), d_log_sigma=-b_ls.mean(axis=0),
                      second_moment=second)


# ---------------------------------------------------------------------------
# Second moments of one-sample gradient estimators on a finite support
# ---------------------------------------------------------------------------

_KINDS = ("cr", "srfe_escort", "srfe_q")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_scores(logits: np.ndarray) -> np.ndarray:
    """Rows are grad_theta log q_theta(j) = e_j - q for the softmax family."""
    q = softmax(logits)
    return np.eye(q.size) - q[None, :]


def _moment_pieces(p: DiscreteDist, logits: np.ndarray, tau: float):
    q = softmax(logits)
    if p.size != q.size:
        raise ValueError("support size mismatch")
    u = p.probs / q
    f = float((p.probs ** tau * q ** (1.0 - tau)).sum())
    scores = softmax_scores(logits)
    norms2 = (scores * scores).sum(axis=1)
    c = float(norms2.max())
    # sum_j q_j u_j^(2 tau), the integral in the ratio-based bounds
    s2 = float((q * u ** (2.0 * tau)).sum())
    return q, u, f, scores, norms2, c, s2


def exact_second_moment(kind: str, p: DiscreteDist, logits: np.ndarray,
                        tau: float) -> SecondMomentReport:
    """Enumerated E||g||^2 and its analytic bound for one-sample estimators.

    kind "cr":          g = -(1/tau) u(X)^tau score(X),        X ~ q
    kind "srfe_escort": g = -(1/tau) score(X),                 X ~ escort
    kind "srfe_q":      g = -(1/tau) (u(X)^tau / F) score(X),  X ~ q

    Bounds use C = max_j ||score_j||^2: respectively (C/tau^2) sum q u^(2tau),
    C/tau^2, and the first bound divided by F^2.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    q, u, f, _, norms2, c, s2 = _moment_pieces(p, logits, tau)
    inv_t2 = 1.0 / (tau * tau)
    if kind == "cr":
        emp = inv_t2 * float((q * u ** (2.0 * tau) * norms2).sum())
        bound = inv_t2 * c * s2
    elif kind == "srfe_escort":
        r = p.probs ** tau * q ** (1.0 - tau) / f
        emp = inv_t2 * float((r * norms2).sum())
        bound = inv_t2 * c
    elif kind == "srfe_q":
        emp = inv_t2 * float((q * u ** (2.0 * tau) * norms2).sum()) / (f * f)
        bound = inv_t2 * c * s2 / (f * f)
    else:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    return SecondMomentReport(empirical=emp, bound=bound)


def estimator_second_moment(kind: str, p: DiscreteDist, logits: np.ndarray,
                            tau: float, n: int,
                            rng: np.random.Generator) -> SecondMomentReport:
    """Sampled mean ||g||^2 over n one-sample draws, with the analytic bound."""
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    q, u, f, scores, norms2, c, s2 = _moment_pieces(p, logits, tau)
    inv_t2 = 1.0 / (tau * tau)
    if kind == "srfe_escort":
        r = p.probs ** tau * q ** (1.0 - tau) / f
        idx = rng.choice(p.size, size=n, p=r / r.sum())
        sq = inv_t2 * norms2[idx]
        bound = inv_t2 * c
    else:
        idx = rng.choice(p.size, size=n, p=q)
        amp = u[idx] ** (2.0 * tau)
        if kind == "srfe_q":
            amp = amp / (f * f)
            bound = inv_t2 * c * s2 / (f * f)
        else:
            bound = inv_t2 * c * s2
        sq = inv_t2 * amp * norms2[idx]
    return SecondMomentReport(empirical=float(sq.mean()), bound=bound)
