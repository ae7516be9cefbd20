"""Parametric distribution families: density, sampling, likelihood, MLE.

Five scalar families (normal, lognormal, gamma, weibull, uniform) with a
common two-parameter interface.  Gamma and Weibull use the shape/scale
parameterization.  Sampling is inverse-CDF on counter-based uniform
draws, so sample i of a stream is reproducible in isolation.

The ``family_logpdf`` / ``family_ppf`` kernels broadcast over parameter
arrays as well as argument arrays; mixtures and evidence integrals reuse
them to evaluate many parameter vectors at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincinv, gammaln, ndtr, ndtri, polygamma, psi

from .exceptions import (
    DegenerateDataError,
    FitConvergenceError,
    InvalidParameterError,
    SupportError,
)
from .rng import RngStream

_LOG_2PI = math.log(2.0 * math.pi)

# Newton tolerance on the per-datum profile score for gamma/weibull fits.
_SCORE_TOL = 1e-10
_MAX_NEWTON_ITER = 100


class Family(str, enum.Enum):
    NORMAL = "normal"
    LOGNORMAL = "lognormal"
    GAMMA = "gamma"
    WEIBULL = "weibull"
    UNIFORM = "uniform"

    @property
    def param_count(self) -> int:
        return 2

    @property
    def param_names(self) -> tuple[str, str]:
        return _PARAM_NAMES[self]

    @property
    def positive_support(self) -> bool:
        """True when the support is (0, inf)."""
        return self in (Family.LOGNORMAL, Family.GAMMA, Family.WEIBULL)


_PARAM_NAMES = {
    Family.NORMAL: ("mu", "sigma"),
    Family.LOGNORMAL: ("mu", "sigma"),
    Family.GAMMA: ("shape", "scale"),
    Family.WEIBULL: ("shape", "scale"),
    Family.UNIFORM: ("lower", "upper"),
}


def family_logpdf(family: Family, a, b, x) -> np.ndarray:
    """Log density with broadcasting over parameters and argument.

    Out-of-support arguments yield -inf; invalid parameter combinations
    (non-positive scale/shape, upper <= lower) also yield -inf rather
    than raising, which lets vectorized parameter sweeps self-filter.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is Family.NORMAL:
            z = (x - a) / b
            out = -0.5 * z * z - np.log(b) - 0.5 * _LOG_2PI
            return np.where(b > 0.0, out, -np.inf)
        if family is Family.UNIFORM:
            width = b - a
            inside = (width > 0.0) & (x >= a) & (x <= b)
            return np.where(
                inside, -np.log(np.where(width > 0.0, width, 1.0)), -np.inf
            )
        lx = np.where(x > 0.0, np.log(np.where(x > 0.0, x, 1.0)), -np.inf)
        if family is Family.LOGNORMAL:
            z = (lx - a) / b
            out = -0.5 * z * z - lx - np.log(b) - 0.5 * _LOG_2PI
            ok = (b > 0.0) & (x > 0.0)
        elif family is Family.GAMMA:
            out = (a - 1.0) * lx - x / b - gammaln(a) - a * np.log(b)
            ok = (a > 0.0) & (b > 0.0) & (x > 0.0)
        else:  # WEIBULL
            lz = lx - np.log(b)
            out = np.log(a / b) + (a - 1.0) * lz - np.exp(a * lz)
            ok = (a > 0.0) & (b > 0.0) & (x > 0.0)
        return np.where(ok, out, -np.inf)


def family_cdf(family: Family, a, b, x) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if family is Family.NORMAL:
        return ndtr((x - a) / b)
    if family is Family.UNIFORM:
        return np.clip((x - a) / (b - a), 0.0, 1.0)
    xp = np.maximum(x, 0.0)
    with np.errstate(divide="ignore"):
        if family is Family.LOGNORMAL:
            out = ndtr((np.log(np.maximum(x, 1e-300)) - a) / b)
        elif family is Family.GAMMA:
            out = gammainc(a, xp / b)
        else:  # WEIBULL
            out = -np.expm1(-((xp / b) ** a))
    return np.where(x > 0.0, out, 0.0)


def family_ppf(family: Family, a, b, u) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if family is Family.NORMAL:
        return a + b * ndtri(u)
    if family is Family.LOGNORMAL:
        return np.exp(a + b * ndtri(u))
    if family is Family.GAMMA:
        return b * gammaincinv(a, u)
    if family is Family.WEIBULL:
        return b * (-np.log1p(-u)) ** (1.0 / a)
    return a + u * (b - a)


@dataclass(frozen=True)
class Dataset:
    """A vector of scalar observations."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size < 1:
            raise InvalidParameterError("dataset must contain at least one value")
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("dataset values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """One value per line; '#' starts a comment."""
        vals = []
        with open(path) as fh:
            for line in fh:
                body = line.split("#", 1)[0].strip()
                if body:
                    vals.append(float(body))
        return cls(np.asarray(vals))


@dataclass(frozen=True)
class Distribution:
    """A parametric scalar distribution (family + parameter pair)."""

    family: Family
    params: tuple[float, float]

    def __post_init__(self):
        fam = Family(self.family)
        p = tuple(float(v) for v in self.params)
        if len(p) != fam.param_count:
            raise InvalidParameterError(f"{fam.value} takes {fam.param_count} parameters")
        if not all(math.isfinite(v) for v in p):
            raise InvalidParameterError("parameters must be finite")
        if fam is Family.UNIFORM:
            if not p[0] < p[1]:
                raise InvalidParameterError("uniform requires lower < upper")
        elif p[1] <= 0.0 or (fam in (Family.GAMMA, Family.WEIBULL) and p[0] <= 0.0):
            raise InvalidParameterError(f"{fam.value} requires positive shape/scale parameters")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", p)

    def support(self) -> tuple[float, float]:
        if self.family is Family.UNIFORM:
            return self.params
        if self.family.positive_support:
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    def logpdf(self, x) -> np.ndarray:
        return family_logpdf(self.family, self.params[0], self.params[1], x)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def cdf(self, x) -> np.ndarray:
        return family_cdf(self.family, self.params[0], self.params[1], x)

    def ppf(self, u) -> np.ndarray:
        return family_ppf(self.family, self.params[0], self.params[1], u)

    def to_json(self) -> dict:
        return {"family": self.family.value, "params": list(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "Distribution":
        try:
            fam = Family(obj["family"])
            params = tuple(obj["params"])
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidParameterError(f"bad distribution object: {obj!r}") from exc
        return cls(fam, params)


# -- module-level operations ----------------------------------------------


def density(dist: Distribution, x, log_scale: bool = False):
    """pdf (or log pdf) at x; zero (-inf in log scale) outside the support."""
    out = dist.logpdf(x) if log_scale else dist.pdf(x)
    return float(out) if np.isscalar(x) else out


def sample(dist: Distribution, rng: RngStream, n: int) -> np.ndarray:
    """n i.i.d. inverse-CDF draws; draw i depends only on (stream, counter+i)."""
    if n < 1:
        raise InvalidParameterError("sample size must be >= 1")
    return dist.ppf(rng.uniforms(n))


def log_likelihood(dist: Distribution, data: Dataset) -> float:
    """Sum of log densities; -inf when any datum is outside the support."""
    return float(np.sum(dist.logpdf(data.values)))


def data_in_support(family: Family, data: Dataset) -> bool:
    if Family(family).positive_support:
        return bool(np.all(data.values > 0.0))
    return True


def mle_fit(family: Family, data: Dataset) -> tuple[Distribution, float]:
    """Maximum-likelihood fit; returns the fitted distribution and its
    maximized log-likelihood.

    Scale estimates use the 1/n convention so the returned log-likelihood
    is the true maximum (as information criteria require).  Gamma and
    Weibull solve the 1-D profile score by Newton iteration from a
    method-of-moments start.
    """
    family = Family(family)
    d = data.values
    if d.size < 2:
        raise DegenerateDataError("MLE requires at least 2 observations")
    if np.min(d) == np.max(d):
        raise DegenerateDataError("all observations identical; scale MLE degenerates to zero")
    if not data_in_support(family, data):
        raise SupportError(f"data outside the support of {family.value}")

    if family is Family.NORMAL:
        dist = Distribution(family, (float(np.mean(d)), float(np.std(d))))
    elif family is Family.LOGNORMAL:
        ld = np.log(d)
        dist = Distribution(family, (float(np.mean(ld)), float(np.std(ld))))
    elif family is Family.UNIFORM:
        dist = Distribution(family, (float(np.min(d)), float(np.max(d))))
    elif family is Family.GAMMA:
        dist = _fit_gamma(d)
    else:
        dist = _fit_weibull(d)
    return dist, log_likelihood(dist, data)


def _fit_gamma(d: np.ndarray) -> Distribution:
    mean = np.mean(d)
    var = np.var(d)
    mean_log = np.mean(np.log(d))
    k = float(mean * mean / var)  # method-of-moments start
    # Profile score per datum: log k - psi(k) + mean(log x) - log(mean x).
    const = mean_log - math.log(mean)
    for _ in range(_MAX_NEWTON_ITER):
        score = math.log(k) - psi(k) + const
        if abs(score) < _SCORE_TOL:
            return Distribution(Family.GAMMA, (k, mean / k))
        dscore = 1.0 / k - polygamma(1, k)
        step = score / dscore
        k_new = k - step
        while k_new <= 0.0:
            step *= 0.5
            k_new = k - step
        k = float(k_new)
    raise FitConvergenceError("gamma MLE did not converge in 100 Newton iterations")


def _fit_weibull(d: np.ndarray) -> Distribution:
    log_d = np.log(d)
    sd_log = np.std(log_d)
    k = float(math.pi / (sd_log * math.sqrt(6.0)))  # moment-based start
    m = np.max(log_d)
    mean_log = np.mean(log_d)
    for _ in range(_MAX_NEWTON_ITER):
        # Work with x^k / exp(k*m) to avoid overflow for large shapes.
        w = np.exp(k * (log_d - m))
        sw = np.sum(w)
        mw = np.sum(w * log_d) / sw
        score = 1.0 / k + mean_log - mw
        if abs(score) < _SCORE_TOL:
            scale = math.exp(m + math.log(sw / d.size) / k)
            return Distribution(Family.WEIBULL, (k, scale))
        var_w = np.sum(w * (log_d - mw) ** 2) / sw
        dscore = -1.0 / (k * k) - var_w
        step = score / dscore
        k_new = k - step
        while k_new <= 0.0:
            step *= 0.5
            k_new = k - step
        k = float(k_new)
    raise FitConvergenceError("weibull MLE did not converge in 100 Newton iterations")
