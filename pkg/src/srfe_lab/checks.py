"""Numerical verification suite for the free-energy divergence family.

Every claim the library leans on gets an executable probe here: limit
behaviour at the interpolation endpoints, endpoint expansions with their
quadratic convergence rates, the local Fisher metric, tail bounds, KL
upper bounds, gradient identities, monotone equivalence with the power
divergence, the mixed-partial witness that the family is not an
f-divergence, and the one-sample estimator moment bounds.  Each probe
returns a CheckReport; run_all assembles the full battery.

Checks are deterministic given their seeds.  Thresholds live next to the
quantities they bound, and the pass flag is always recomputable from the
report fields.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discrete import (
    DiscreteDist,
    cr_associated,
    cr_expansion_prediction,
    cr_standard,
    escort,
    exact_tail_prob,
    expansion_prediction,
    kl_discrete,
    kl_upper_bound_gap,
    mixed_partial_probe,
    monotone_map,
    srfe_discrete,
    surprisal_stats,
    tail_bound,
)
from .estimators import exact_second_moment, softmax
from .gaussians import DiagonalGaussian, srfe_equal_covariance

TAU_GRID_9 = tuple(round(0.1 * k, 1) for k in range(1, 10))
A_GRID_31 = tuple(np.linspace(-1.0, 2.0, 31))


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    observed: np.ndarray
    threshold: np.ndarray
    details: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "observed": [float(x) for x in np.atleast_1d(self.observed)],
            "threshold": [float(x) for x in np.atleast_1d(self.threshold)],
            "details": self.details,
        }


def _report(name: str, passed: bool, observed, threshold, details: str) -> CheckReport:
    return CheckReport(name, bool(passed),
                       np.asarray(observed, dtype=float),
                       np.asarray(threshold, dtype=float), details)


def dirichlet_pair(rng: np.random.Generator, size: int) -> tuple[DiscreteDist, DiscreteDist]:
    """A random pair of fully-supported distributions on `size` points."""
    return (DiscreteDist.from_unnormalized(rng.dirichlet(np.ones(size))),
            DiscreteDist.from_unnormalized(rng.dirichlet(np.ones(size))))


def check_kl_limits(p: DiscreteDist, q: DiscreteDist,
                    eps_grid: tuple[float, float] = (0.02, 0.01)) -> CheckReport:
    """Endpoint limits: tau -> 1 recovers KL(p||q), tau -> 0 recovers KL(q||p).

    The error at distance eps from an endpoint shrinks linearly, so halving
    eps should roughly halve it; the same holds for the power divergence as
    its order approaches 0 (KL(p||q)) and -1 (KL(q||p)).
    """
    big, small = eps_grid
    kf = kl_discrete(p, q)
    kr = kl_discrete(q, p)
    errs = np.array([
        [abs(srfe_discrete(p, q, 1.0 - e) - kf) for e in eps_grid],
        [abs(srfe_discrete(p, q, e) - kr) for e in eps_grid],
        [abs(cr_standard(p, q, e) - kf) for e in eps_grid],
        [abs(cr_standard(p, q, -1.0 + e) - kr) for e in eps_grid],
    ])
    if errs.max() < 1e-12:
        # degenerate instance (p == q): the limits hold exactly
        return _report("kl_limits", True, errs.ravel(), [1e-12] * 8,
                       "all endpoint errors below 1e-12")
    ratios = errs[:, 0] / errs[:, 1]
    in_bracket = (ratios >= 1.7) & (ratios <= 2.3)

    # first-order slope of the error matches the expansion coefficient
    slope_f = abs(kf - 0.5 * surprisal_stats(p, q).variance)
    slope_r = abs(kr - 0.5 * surprisal_stats(q, p).variance)
    slope_obs = errs[:2, 1] / small
    slope_ok = True
    for obs, pred in zip(slope_obs, (slope_f, slope_r)):
        if pred > 1e-8:
            slope_ok = slope_ok and abs(obs - pred) <= 0.25 * pred
    return _report(
        "kl_limits", bool(in_bracket.all()) and slope_ok,
        np.concatenate([ratios, slope_obs]),
        [1.7, 2.3, 1.7, 2.3, slope_f, slope_r],
        f"error ratios at eps {big}/{small} (want within [1.7, 2.3]): "
        f"{np.round(ratios, 3).tolist()}; "
        f"observed slopes {np.round(slope_obs, 5).tolist()} vs predicted "
        f"[{slope_f:.5f}, {slope_r:.5f}]",
    )


def check_expansions(p: DiscreteDist, q: DiscreteDist,
                     delta: float = 0.02) -> CheckReport:
    """Quadratic remainder of the first-order endpoint expansions.

    Halving the distance to the endpoint should cut the residual by about
    4x (bracket [3, 5]); same for the power-divergence expansion in its
    order parameter.
    """
    def residual(tau: float, side: str) -> float:
        return abs(srfe_discrete(p, q, tau) - expansion_prediction(p, q, tau, side))

    r_f = (residual(1.0 - delta, "forward"), residual(1.0 - delta / 2, "forward"))
    r_r = (residual(delta, "reverse"), residual(delta / 2, "reverse"))
    r_c = (abs(cr_standard(p, q, delta) - cr_expansion_prediction(p, q, delta)),
           abs(cr_standard(p, q, delta / 2) - cr_expansion_prediction(p, q, delta / 2)))
    pairs = (r_f, r_r, r_c)
    if max(r[0] for r in pairs) < 1e-13:
        return _report("expansions", True, [4.0, 4.0, 4.0], [3.0, 5.0],
                       "residuals vanish (p == q)")
    ratios = np.array([a / b for a, b in pairs])
    ok = ((ratios >= 3.0) & (ratios <= 5.0)).all()
    return _report(
        "expansions", bool(ok), ratios, [3.0, 5.0],
        f"residual ratios at step {delta} vs {delta / 2} "
        f"(forward, reverse, power-divergence): {np.round(ratios, 3).tolist()}",
    )


def _srfe_gaussian_location(shift: float, sigma: float, tau: float) -> float:
    # Same-scale normals have overlap integral exp(-tau(1-tau) shift^2 / (2 sigma^2)),
    # in closed form; the defining ratio is then evaluated in ordinary float
    # arithmetic so tau genuinely flows through the computation.
    log_f = -tau * (1.0 - tau) * shift * shift / (2.0 * sigma * sigma)
    return -log_f / (tau * (1.0 - tau))


def check_fisher_metric(sigma: float, tau_grid=(0.2, 0.5, 0.8),
                        delta: float = 1e-3, rel_tol: float = 1e-3,
                        spread_tol: float = 1e-8) -> CheckReport:
    """Local curvature equals the Fisher information of the location family.

    For N(theta, sigma^2) the divergence between parameters theta and
    theta + delta is delta^2 / (2 sigma^2) at every interpolation weight, so
    the second difference quotient must give 1/sigma^2, independent of tau.
    """
    fisher = 1.0 / (sigma * sigma)
    fd2 = np.array([
        (_srfe_gaussian_location(delta, sigma, tau)
         + _srfe_gaussian_location(-delta, sigma, tau)) / (delta * delta)
        for tau in tau_grid
    ])
    rel_err = np.abs(fd2 - fisher) / fisher
    spread = (fd2.max() - fd2.min()) / fisher
    ok = rel_err.max() <= rel_tol and spread <= spread_tol
    return _report(
        f"fisher_metric_sigma_{sigma:g}", bool(ok),
        np.append(rel_err, spread), [rel_tol] * len(tau_grid) + [spread_tol],
        f"sigma={sigma}: second difference vs 1/sigma^2 rel errors "
        f"{[float(f'{e:.2e}') for e in rel_err]}, cross-tau spread {spread:.2e}",
    )


def check_fisher_metric_simplex(t: float = 1e-2,
                                tau_grid=(0.2, 0.5, 0.8)) -> CheckReport:
    """Local curvature on the simplex matches the Fisher quadratic form.

    Along p + t d (d a tangent direction) the divergence is
    (t^2/2) sum(d^2/p) up to a cubic remainder whose tau dependence is
    bounded by t^3 sum|d|^3 / p^2, so values across tau agree to that order.
    """
    p = np.array([0.3, 0.25, 0.2, 0.15, 0.1])
    d = np.array([1.0, -1.0, 0.5, -0.5, 0.0])
    base = DiscreteDist(p)
    quad = 0.5 * t * t * float(np.sum(d * d / p))
    cubic = t ** 3 * float(np.sum(np.abs(d) ** 3 / p ** 2))
    vals = np.array([
        [srfe_discrete(base, DiscreteDist.from_unnormalized(p + s * t * d), tau)
         for s in (1.0, -1.0)]
        for tau in tau_grid
    ])
    resid = np.abs(vals - quad).max()
    spread = float(vals[:, 0].max() - vals[:, 0].min())
    ok = resid <= cubic and spread <= cubic
    return _report(
        "fisher_metric_simplex", bool(ok), [resid, spread], [cubic, cubic],
        f"worst |value - quadratic form| {resid:.3e} and cross-tau spread "
        f"{spread:.3e}, both within the cubic remainder bound {cubic:.3e}",
    )


def check_tail_bounds(p: DiscreteDist, q: DiscreteDist,
                      tau_grid=TAU_GRID_9, a_grid=A_GRID_31) -> CheckReport:
    """Exceedance probability of the surprisal gap never beats its bound."""
    exact = np.array([exact_tail_prob(p, q, a) for a in a_grid])
    worst = -np.inf
    violations = 0
    for tau in tau_grid:
        bounds = np.array([tail_bound(p, q, tau, a) for a in a_grid])
        margin = exact - bounds
        violations += int((margin > 0).sum())
        worst = max(worst, float(margin.max()))
    return _report(
        "tail_bounds", violations == 0, [violations], [0],
        f"{len(tau_grid)}x{len(a_grid)} grid, {violations} violations, "
        f"worst exact-minus-bound margin {worst:.3e}",
    )


def check_tail_bounds_mc(mean_shift: float = 1.0, variance: float = 0.5,
                         n: int = 10 ** 6, tau_grid=TAU_GRID_9,
                         a_grid=A_GRID_31, seed: int = 0) -> CheckReport:
    """Monte-Carlo tail check on a same-scale normal pair.

    Empirical exceedance frequencies may sit above the bound only by
    sampling noise; four binomial standard errors of slack makes a false
    alarm essentially impossible at n = 10^6.
    """
    log_sigma = np.array([0.5 * np.log(variance)])
    p = DiagonalGaussian(np.array([mean_shift]), log_sigma)
    q = DiagonalGaussian(np.array([0.0]), log_sigma)
    rng = np.random.default_rng(seed)
    x = q.sample(n, rng)
    gaps = np.sort(p.log_prob(x) - q.log_prob(x))
    freq = (n - np.searchsorted(gaps, np.asarray(a_grid), side="left")) / n
    slack = 4.0 * np.sqrt(freq * (1.0 - freq) / n)
    value = srfe_equal_covariance(p.mu, q.mu, variance)
    violations = 0
    worst = -np.inf
    for tau in tau_grid:
        log_f = -tau * (1.0 - tau) * value
        bounds = np.exp(-tau * np.asarray(a_grid) + log_f)
        margin = freq - bounds - slack
        violations += int((margin > 0).sum())
        worst = max(worst, float(margin.max()))
    return _report(
        "tail_bounds_mc", violations == 0, [violations], [0],
        f"normal pair shift {mean_shift}, variance {variance}, n={n}: "
        f"{violations} violations, worst margin {worst:.3e}",
    )


def check_kl_upper_bounds(pairs, tau_grid=TAU_GRID_9) -> CheckReport:
    """Scaled KL in either direction upper-bounds the divergence.

    Also exercises a nearly-disjoint pair where the slack becomes large
    and positive rather than degenerate.
    """
    min_gap = np.inf
    for p, q in pairs:
        for tau in tau_grid:
            min_gap = min(min_gap, kl_upper_bound_gap(p, q, tau))
    near = DiscreteDist(np.array([1.0 - 1e-9, 1e-9]))
    far = DiscreteDist(np.array([1e-9, 1.0 - 1e-9]))
    nd_gap = kl_upper_bound_gap(near, far, 0.5)
    ok = min_gap >= -1e-12 and nd_gap >= 1.0
    return _report(
        "kl_upper_bounds", bool(ok), [min_gap, nd_gap], [-1e-12, 1.0],
        f"{len(pairs)} pairs x {len(tau_grid)} weights: min gap {min_gap:.3e}; "
        f"nearly-disjoint witness gap {nd_gap:.3f}",
    )


def check_gradient_identity(p: DiscreteDist, logits: np.ndarray, tau: float,
                            fd_step: float = 1e-5) -> CheckReport:
    """Closed-form logit gradients vs central differences, softmax family.

    The free-energy gradient is -(escort - q)/tau; the power-divergence
    gradient at order tau - 1 is -(1/tau) E_q[(p/q)^tau (onehot - q)],
    whose baseline-subtracted variant is algebraically identical because
    scores average to zero.
    """
    logits = np.asarray(logits, dtype=float)
    q = softmax(logits)
    q_dist = DiscreteDist.from_unnormalized(q)
    lam = tau - 1.0

    closed_srfe = -(escort(p, q_dist, tau).probs - q) / tau
    u_tau = (p.probs / q) ** tau
    mean_u = float(q @ u_tau)
    closed_cr = -q * (u_tau - mean_u) / tau
    baselined = -q * ((u_tau - 1.0) - (mean_u - 1.0)) / tau

    fd_srfe = np.empty_like(logits)
    fd_cr = np.empty_like(logits)
    for k in range(logits.size):
        bump = np.zeros_like(logits)
        bump[k] = fd_step
        hi = DiscreteDist.from_unnormalized(softmax(logits + bump))
        lo = DiscreteDist.from_unnormalized(softmax(logits - bump))
        fd_srfe[k] = (srfe_discrete(p, hi, tau) - srfe_discrete(p, lo, tau)) / (2 * fd_step)
        fd_cr[k] = (cr_standard(p, hi, lam) - cr_standard(p, lo, lam)) / (2 * fd_step)

    err_srfe = float(np.abs(fd_srfe - closed_srfe).max())
    err_cr = float(np.abs(fd_cr - closed_cr).max())
    err_base = float(np.abs(closed_cr - baselined).max())
    ok = err_srfe <= 1e-6 and err_cr <= 1e-6 and err_base <= 1e-12
    return _report(
        "gradient_identity", bool(ok), [err_srfe, err_cr, err_base],
        [1e-6, 1e-6, 1e-12],
        f"max |fd - closed|: free-energy {err_srfe:.2e}, power-divergence "
        f"{err_cr:.2e}; baseline-subtracted discrepancy {err_base:.2e}",
    )


def check_monotone_equivalence(n_pairs: int = 10 ** 4, tau: float = 0.5,
                               seed: int = 0) -> CheckReport:
    """Order agreement with the power divergence, plus the explicit map.

    The two divergences rank alternatives identically, and
    h(d) = -log(1 - tau(1-tau) d) / (tau(1-tau)) carries one value to the
    other exactly.
    """
    rng = np.random.default_rng(seed)
    disagreements = 0
    worst_map = 0.0
    for _ in range(n_pairs):
        p, q1 = dirichlet_pair(rng, 5)
        q2 = DiscreteDist.from_unnormalized(rng.dirichlet(np.ones(5)))
        s1, s2 = srfe_discrete(p, q1, tau), srfe_discrete(p, q2, tau)
        d1, d2 = cr_associated(p, q1, tau), cr_associated(p, q2, tau)
        if abs(d1 - d2) > 1e-12 * max(1.0, abs(d1), abs(d2)):
            if (s1 - s2) * (d1 - d2) < 0:
                disagreements += 1
        worst_map = max(worst_map,
                        abs(monotone_map(d1, tau) - s1),
                        abs(monotone_map(d2, tau) - s2))
    ok = disagreements == 0 and worst_map <= 1e-12
    return _report(
        "monotone_equivalence", bool(ok), [disagreements, worst_map],
        [0, 1e-12],
        f"{n_pairs} random triples at weight {tau}: {disagreements} order "
        f"disagreements; worst |map(cr) - value| {worst_map:.2e}",
    )


def check_not_f_divergence(tau: float) -> CheckReport:
    """Mixed second partials distinguish points with equal residual mass.

    An f-divergence against the uniform reference has cross partials that
    depend only on the residual coordinate; the free-energy divergence
    separates (0.1, 0.4) from (0.2, 0.3) even though both leave 0.5 behind.
    KL serves as the control.
    """
    srfe_a = mixed_partial_probe(0.1, 0.4, tau, divergence="srfe")
    srfe_b = mixed_partial_probe(0.2, 0.3, tau, divergence="srfe")
    kl_a = mixed_partial_probe(0.1, 0.4, tau, divergence="kl")
    kl_b = mixed_partial_probe(0.2, 0.3, tau, divergence="kl")
    diff = abs(srfe_a - srfe_b)
    control = abs(kl_a - kl_b)
    ok = diff > 1e-3 and control <= 1e-6
    return _report(
        f"not_f_divergence_tau_{tau:g}", bool(ok), [diff, control],
        [1e-3, 1e-6],
        f"probe difference {diff:.5f} (want > 1e-3); KL control difference "
        f"{control:.2e} (want <= 1e-6)",
    )


def check_second_moment_bounds(p: DiscreteDist, logits: np.ndarray,
                               tau_grid=TAU_GRID_9) -> CheckReport:
    """One-sample estimator second moments respect their bounds.

    Also verifies the ratio-form identity (proposal-sampled moment equals
    the power-divergence moment over the overlap squared) and the blow-up
    contrast: along proposals that starve a heavy target point, the
    power-divergence moment grows without bound while the escort-sampled
    moment stays below max-score-norm / tau^2.
    """
    logits = np.asarray(logits, dtype=float)
    worst_excess = -np.inf
    worst_ratio = 0.0
    for tau in tau_grid:
        moments = {kind: exact_second_moment(kind, p, logits, tau)
                   for kind in ("cr", "srfe_escort", "srfe_q")}
        for rep in moments.values():
            worst_excess = max(worst_excess,
                               rep.empirical - rep.bound * (1.0 + 1e-12))
        cr = moments["cr"]
        ratio_err = abs(moments["srfe_q"].empirical * cr.bound
                        - cr.empirical * moments["srfe_q"].bound)
        scale = max(1.0, cr.empirical * moments["srfe_q"].bound)
        worst_ratio = max(worst_ratio, ratio_err / scale)

    # starved-point sequence: proposal mass 10^-k on the heaviest target point
    tau_v = 0.7
    heavy = np.array([0.4, 0.3, 0.2, 0.1])
    heavy_dist = DiscreteDist(heavy)
    cr_series = []
    escort_ok = True
    for k in range(2, 9):
        eps = 10.0 ** -k
        q = np.concatenate([[eps], np.full(3, (1.0 - eps) / 3.0)])
        lk = np.log(q)
        cr_series.append(exact_second_moment("cr", heavy_dist, lk, tau_v).empirical)
        esc = exact_second_moment("srfe_escort", heavy_dist, lk, tau_v)
        escort_ok = escort_ok and esc.empirical <= esc.bound * (1.0 + 1e-12)
    growth = np.diff(np.array(cr_series))
    grows = bool((growth > 0).all())
    span = cr_series[-1] / cr_series[0]

    ok = worst_excess <= 0 and worst_ratio <= 1e-12 and grows and escort_ok
    return _report(
        "second_moment_bounds", bool(ok),
        [worst_excess, worst_ratio, span], [0.0, 1e-12, 10.0],
        f"worst moment excess over bound {worst_excess:.3e}; ratio-identity "
        f"error {worst_ratio:.2e}; starved-point power-divergence moment "
        f"grows monotonically by {span:.1f}x while escort moment stays "
        f"bounded: {escort_ok}",
    )


def _max_workers() -> int:
    env = os.environ.get("SRFE_LAB_THREADS")
    if env:
        n = int(env)
        if n > 0:
            return n
    return os.cpu_count() or 1


def run_all(seed: int = 0, inject_failure: bool = False) -> list[CheckReport]:
    """The full battery, deterministic for a given seed.

    inject_failure adds a negative-control report that must fail: the
    location-family curvature check rerun with a zero tolerance.
    """
    rng = np.random.default_rng(seed)
    worked_p = DiscreteDist(np.array([0.5, 0.5]))
    worked_q = DiscreteDist(np.array([0.25, 0.75]))
    kl_pairs = [dirichlet_pair(rng, 6) for _ in range(1000)]
    tail_pairs = [dirichlet_pair(rng, int(rng.integers(2, 11))) for _ in range(50)]
    grad_cases = []
    for _ in range(50):
        size = int(rng.integers(3, 7))
        grad_cases.append((DiscreteDist.from_unnormalized(rng.dirichlet(np.ones(size))),
                           rng.standard_normal(size),
                           float(rng.uniform(0.1, 0.9))))
    moment_p = DiscreteDist.from_unnormalized(rng.dirichlet(np.ones(5)))
    moment_logits = rng.standard_normal(5)

    def tail_sweep() -> CheckReport:
        reports = [check_tail_bounds(p, q) for p, q in tail_pairs]
        failing = sum(not r.passed for r in reports)
        total = int(sum(r.observed[0] for r in reports))
        return _report("tail_bounds", failing == 0, [total], [0],
                       f"{len(reports)} random pairs, 9x31 grid each: "
                       f"{total} violations")

    def grad_sweep() -> CheckReport:
        reports = [check_gradient_identity(p, lg, tau) for p, lg, tau in grad_cases]
        failing = sum(not r.passed for r in reports)
        worst = np.max([r.observed for r in reports], axis=0)
        return _report("gradient_identity", failing == 0, worst,
                       [1e-6, 1e-6, 1e-12],
                       f"{len(reports)} random softmax instances, worst "
                       f"errors {[float(f'{w:.2e}') for w in worst]}")

    tasks = [
        lambda: check_kl_limits(worked_p, worked_q),
        lambda: check_expansions(worked_p, worked_q),
        lambda: check_fisher_metric(0.5),
        lambda: check_fisher_metric(1.0),
        lambda: check_fisher_metric(2.0),
        check_fisher_metric_simplex,
        tail_sweep,
        lambda: check_tail_bounds_mc(seed=seed + 1),
        lambda: check_kl_upper_bounds(kl_pairs),
        grad_sweep,
        lambda: check_monotone_equivalence(seed=seed + 2),
        lambda: check_not_f_divergence(0.3),
        lambda: check_not_f_divergence(0.5),
        lambda: check_not_f_divergence(0.9),
        lambda: check_second_moment_bounds(moment_p, moment_logits),
    ]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        futures = [pool.submit(t) for t in tasks]
        reports = [f.result() for f in futures]

    if inject_failure:
        bad = check_fisher_metric(1.0, rel_tol=0.0, spread_tol=0.0)
        reports.append(_report("injected_failure", bad.passed, bad.observed,
                               bad.threshold,
                               "negative control: curvature check with zero "
                               "tolerance, must fail"))
    return reports
