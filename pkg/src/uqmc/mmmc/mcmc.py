"""Random-walk Metropolis sampling of distribution parameters.

Positivity-constrained coordinates walk in log space with the Jacobian
correction; proposal scales adapt during burn-in toward a moderate
acceptance rate and are frozen afterwards so the kept chain targets the
exact posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..distributions import Dataset, Distribution, Family, mle_fit
from ..exceptions import EstimatorError, InvalidParameterError
from ..rng import RngStream

# Which of the two parameters are constrained positive, per family.
_POSITIVE = {
    Family.NORMAL: (False, True),
    Family.LOGNORMAL: (False, True),
    Family.GAMMA: (True, True),
    Family.WEIBULL: (True, True),
    Family.UNIFORM: (False, False),
}


@dataclass(frozen=True)
class McmcOptions:
    burn_in: int = 5000
    keep: int = 2000
    thin: int = 5
    adapt_window: int = 100
    accept_low: float = 0.2
    accept_high: float = 0.5

    def __post_init__(self):
        if min(self.burn_in, self.keep, self.thin, self.adapt_window) < 1:
            raise InvalidParameterError("MCMC options must be positive")


@dataclass
class ParameterPosterior:
    """Thinned post-burn-in parameter draws for one family."""

    family: Family
    samples: np.ndarray  # (keep, 2)
    acceptance_rate: float
    chain_length: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from the initial positive sequence of autocorrelations."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    x = x - np.mean(x)
    denom = float(np.dot(x, x))
    if denom == 0.0:
        return float(n)
    acf_sum = 0.0
    for lag in range(1, n // 2):
        r = float(np.dot(x[:-lag], x[lag:])) / denom
        if r <= 0.0:
            break
        acf_sum += r
    return float(n / (1.0 + 2.0 * acf_sum))


def _log_posterior_factory(family: Family, data: Dataset, prior: list):
    def log_post(theta: np.ndarray) -> float:
        lp = 0.0
        for j, pr in enumerate(prior):
            v = float(pr.logpdf(theta[j]))
            if not np.isfinite(v):
                return -np.inf
            lp += v
        try:
            dist = Distribution(family, tuple(theta))
        except Exception:
            return -np.inf
        ll = float(np.sum(dist.logpdf(data.values)))
        return ll + lp if np.isfinite(ll) else -np.inf

    return log_post


def _initial_point(family: Family, data: Dataset, prior: list) -> np.ndarray:
    try:
        dist, _ = mle_fit(family, data)
        theta = np.array(dist.params, dtype=np.float64)
    except Exception:
        theta = np.array([pr.ppf(0.5) for pr in prior], dtype=np.float64)
    # Pull coordinates the prior excludes back to the prior median.
    for j, pr in enumerate(prior):
        if not np.isfinite(float(pr.logpdf(theta[j]))):
            theta[j] = float(pr.ppf(0.5))
    return theta


def _initial_scales(family: Family, data: Dataset, free: list[int]) -> np.ndarray:
    d = np.log(data.values) if family is Family.LOGNORMAL else data.values
    spread = max(float(np.std(d)), 1e-6 * (abs(float(np.mean(d))) + 1.0))
    root_n = math.sqrt(data.n)
    positive = _POSITIVE[family]
    scales = []
    for j in free:
        if positive[j]:
            scales.append(max(1.0 / root_n, 0.05))  # log-space coordinate
        else:
            scales.append(spread / root_n)
    return np.array(scales)


def posterior_sample(
    family: Family,
    data: Dataset,
    prior: list,
    options: McmcOptions = McmcOptions(),
    rng: RngStream | None = None,
) -> ParameterPosterior:
    """Random-walk Metropolis on the parameter posterior.

    Coordinates with point-mass priors stay fixed at their value.  The
    proposal is an independent Gaussian step per free coordinate; one
    global scale factor adapts in burn-in windows and is then frozen.
    """
    family = Family(family)
    if rng is None:
        raise InvalidParameterError("posterior_sample requires an RngStream")
    if len(prior) != family.param_count:
        raise InvalidParameterError("one prior per parameter required")
    positive = _POSITIVE[family]
    free = [j for j, pr in enumerate(prior) if not getattr(pr, "fixed", False)]
    if not free:
        raise InvalidParameterError("all parameters fixed; nothing to sample")

    log_post = _log_posterior_factory(family, data, prior)
    theta = _initial_point(family, data, prior)
    for j, pr in enumerate(prior):
        if getattr(pr, "fixed", False):
            theta[j] = pr.value

    def to_phi(th):
        return np.array(
            [math.log(th[j]) if positive[j] else th[j] for j in free]
        )

    def to_theta(phi):
        th = theta.copy()
        for idx, j in enumerate(free):
            th[j] = math.exp(phi[idx]) if positive[j] else phi[idx]
        return th

    def target(phi):
        th = to_theta(phi)
        lp = log_post(th)
        if not np.isfinite(lp):
            return -np.inf
        jac = sum(phi[idx] for idx, j in enumerate(free) if positive[j])
        return lp + jac

    phi = to_phi(theta)
    if not np.isfinite(target(phi)):
        # Fall back to prior medians when the start is infeasible.
        theta = np.array([pr.ppf(0.5) for pr in prior], dtype=np.float64)
        for j, pr in enumerate(prior):
            if getattr(pr, "fixed", False):
                theta[j] = pr.value
        phi = to_phi(theta)
        if not np.isfinite(target(phi)):
            raise EstimatorError("no feasible starting point for the chain")

    scales = _initial_scales(family, data, free)
    factor = 1.0
    gen = rng.generator()
    lp_cur = target(phi)

    warnings = []
    window_acc = 0
    for step in range(options.burn_in):
        prop = phi + factor * scales * gen.standard_normal(len(free))
        lp_prop = target(prop)
        if math.log(gen.random()) < lp_prop - lp_cur:
            phi, lp_cur = prop, lp_prop
            window_acc += 1
        if (step + 1) % options.adapt_window == 0:
            rate = window_acc / options.adapt_window
            if rate < options.accept_low:
                factor *= 0.7
            elif rate > options.accept_high:
                factor *= 1.4
            window_acc = 0

    kept = np.empty((options.keep, family.param_count))
    accepted = 0
    total = options.keep * options.thin
    for step in range(total):
        prop = phi + factor * scales * gen.standard_normal(len(free))
        lp_prop = target(prop)
        if math.log(gen.random()) < lp_prop - lp_cur:
            phi, lp_cur = prop, lp_prop
            accepted += 1
        if (step + 1) % options.thin == 0:
            kept[(step + 1) // options.thin - 1] = to_theta(phi)

    rate = accepted / total
    if accepted == 0:
        raise EstimatorError("chain never accepted a proposal; posterior degenerate")
    if not 0.05 <= rate <= 0.95:
        warnings.append(f"acceptance rate {rate:.3f} outside [0.05, 0.95]")

    return ParameterPosterior(
        family=family,
        samples=kept,
        acceptance_rate=rate,
        chain_length=options.burn_in + total,
        diagnostics={
            "proposal_scales": (factor * scales).tolist(),
            "free_parameters": free,
            "warnings": warnings,
        },
    )
