"""Continuous-time diffusion schedule.

Convention: t=0 is clean data, t=1 is the endpoint distribution. The
variance-preserving cosine parameterization is used throughout:

    alpha_t = cos(pi t / 2),   sigma_t = sin(pi t / 2),
    lambda_t = log(alpha_t^2 / sigma_t^2) = 2 log cot(pi t / 2).

lambda_t is the log signal-to-noise ratio, strictly decreasing in t. Times
are clamped to [t_eps, 1 - t_eps] so lambda and its derivative stay finite.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Schedule:
    """Cosine schedule with log-SNR truncation bounds.

    lambda_min/lambda_max default to the values induced by the t_eps clamp,
    i.e. the widest range the clamped schedule can produce.
    """

    kind: str = "cosine"
    t_eps: float = 1e-3
    lambda_min: float = field(default=math.nan)
    lambda_max: float = field(default=math.nan)

    def __post_init__(self):
        if self.kind != "cosine":
            raise ValueError(f"unsupported schedule kind: {self.kind!r}")
        if not 0.0 < self.t_eps < 0.5:
            raise ValueError(f"t_eps must lie in (0, 0.5), got {self.t_eps}")
        # fill in clamp-induced defaults (frozen dataclass: go through object.__setattr__)
        if math.isnan(self.lambda_max):
            object.__setattr__(self, "lambda_max", _log_snr_raw(self.t_eps))
        if math.isnan(self.lambda_min):
            object.__setattr__(self, "lambda_min", _log_snr_raw(1.0 - self.t_eps))
        if not self.lambda_min < self.lambda_max:
            raise ValueError(
                f"lambda_min ({self.lambda_min}) must be < lambda_max ({self.lambda_max})"
            )


def clamp_t(sched: Schedule, t: float) -> float:
    """Clamp t into [t_eps, 1 - t_eps]."""
    return min(max(t, sched.t_eps), 1.0 - sched.t_eps)


def alpha_sigma(sched: Schedule, t: float) -> tuple[float, float]:
    """Signal/noise coefficients (alpha_t, sigma_t) at clamped time t.

    Satisfies alpha^2 + sigma^2 = 1 (variance preserving).
    """
    t = clamp_t(sched, t)
    half = 0.5 * math.pi * t
    return math.cos(half), math.sin(half)


def log_snr(sched: Schedule, t: float) -> float:
    """Log signal-to-noise ratio lambda_t = 2 log cot(pi t / 2)."""
    return _log_snr_raw(clamp_t(sched, t))


def _log_snr_raw(t: float) -> float:
    half = 0.5 * math.pi * t
    return 2.0 * (math.log(math.cos(half)) - math.log(math.sin(half)))


def dlogsnr_dt(sched: Schedule, t: float) -> float:
    """Analytic d(lambda_t)/dt = -2 pi / sin(pi t). Always negative.

    Symmetric about t = 1/2 for the cosine schedule since sin(pi t)
    = sin(pi (1 - t)).
    """
    t = clamp_t(sched, t)
    return -2.0 * math.pi / math.sin(math.pi * t)


def loss_weight(sched: Schedule, lam: float) -> float:
    """Loss weight w(lambda) = exp(-lambda / 2)."""
    return math.exp(-0.5 * lam)


def coeffs_weights(sched: Schedule, t: np.ndarray):
    """Vectorized (alpha, sigma, lambda, weight) over an array of times.

    weight = w(lambda) * (-dlambda/dt) = exp(-lambda/2) * 2 pi / sin(pi t),
    which simplifies to pi / alpha^2; it grows without bound as t -> 1, so
    the clamp (and batch averaging) is what keeps batch losses finite.
    """
    t = np.clip(np.asarray(t, dtype=np.float64), sched.t_eps, 1.0 - sched.t_eps)
    half = 0.5 * math.pi * t
    alpha, sigma = np.cos(half), np.sin(half)
    lam = 2.0 * (np.log(alpha) - np.log(sigma))
    weight = np.exp(-0.5 * lam) * (2.0 * math.pi / np.sin(math.pi * t))
    return alpha, sigma, lam, weight


def t_of_log_snr(sched: Schedule, lam: float) -> float:
    """Inverse of log_snr: t = (2/pi) atan(exp(-lambda/2)), then clamped."""
    return clamp_t(sched, (2.0 / math.pi) * math.atan(math.exp(-0.5 * lam)))


def t_range(sched: Schedule) -> tuple[float, float]:
    """Time interval implied by the schedule's [lambda_min, lambda_max] band.

    With default bounds this is exactly [t_eps, 1 - t_eps]. lambda decreases
    in t, so lambda_max maps to the lower end of the interval.
    """
    return t_of_log_snr(sched, sched.lambda_max), t_of_log_snr(sched, sched.lambda_min)
