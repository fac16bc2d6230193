"""Forward corruption and reverse sampling for trajectory diffusion.

Tables are indexed by step t in 0..T_diff with alpha_bar[0] = 1. The
forward jump uses sqrt_alpha_bar built as the cumulative product of
sqrt(alpha_t), so iterating the one-step recursion with zero noise
telescopes to the closed form exactly (same multiplication sequence).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NoiseSchedule",
    "diffusion_forward",
    "diffusion_forward_stepwise",
    "reverse_coefficients",
    "reverse_sample",
]


@dataclass
class NoiseSchedule:
    family: str
    t_diff: int
    alpha: np.ndarray  # (T+1,), alpha[0] unused (= 1)
    alpha_bar: np.ndarray  # cumulative products of alpha
    sqrt_alpha: np.ndarray
    sqrt_alpha_bar: np.ndarray  # cumulative products of sqrt_alpha
    sigma: np.ndarray  # posterior noise scale sigma_q(t)

    @classmethod
    def cosine(cls, t_diff: int = 100, s: float = 0.008) -> "NoiseSchedule":
        steps = np.arange(t_diff + 1, dtype=np.float64)
        f = np.cos((steps / t_diff + s) / (1.0 + s) * np.pi / 2.0) ** 2
        alpha = np.ones(t_diff + 1)
        alpha[1:] = np.clip(f[1:] / f[:-1], 1e-3, 0.9999)
        alpha_bar = np.cumprod(alpha)
        sqrt_alpha = np.sqrt(alpha)
        sqrt_alpha_bar = np.cumprod(sqrt_alpha)
        sigma2 = np.zeros(t_diff + 1)
        sigma2[1:] = (1.0 - alpha[1:]) * (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:])
        return cls(
            family="cosine",
            t_diff=t_diff,
            alpha=alpha,
            alpha_bar=alpha_bar,
            sqrt_alpha=sqrt_alpha,
            sqrt_alpha_bar=sqrt_alpha_bar,
            sigma=np.sqrt(sigma2),
        )

    @classmethod
    def create(cls, family: str, t_diff: int) -> "NoiseSchedule":
        if family != "cosine":
            raise ValueError(f"unknown schedule family {family!r}")
        return cls.cosine(t_diff)

    def validate(self):
        assert np.all(self.alpha[1:] > 0) and np.all(self.alpha[1:] < 1)
        assert np.all(np.diff(self.alpha_bar) < 0)


def _check_t(t: int, sched: NoiseSchedule):
    if not 1 <= t <= sched.t_diff:
        raise ValueError(f"diffusion step {t} outside [1, {sched.t_diff}]")


def diffusion_forward(tau0: np.ndarray, t: int, sched: NoiseSchedule, rng=None, eps=None):
    """Single closed-form jump to step t: sqrt(abar_t) tau0 + sqrt(1-abar_t) eps."""
    _check_t(t, sched)
    if eps is None:
        eps = rng.standard_normal(tau0.shape)
    eps = np.asarray(eps, dtype=tau0.dtype)
    c_signal = tau0.dtype.type(sched.sqrt_alpha_bar[t])
    c_noise = tau0.dtype.type(np.sqrt(1.0 - sched.alpha_bar[t]))
    return c_signal * tau0 + c_noise * eps


def diffusion_forward_stepwise(tau0: np.ndarray, t: int, sched: NoiseSchedule, rng=None, eps=None):
    """Literal one-step-at-a-time corruption (test hook).

    ``eps`` may be an array of per-step draws shaped (t, *tau0.shape); zeros
    reproduce the deterministic part of the closed-form jump.
    """
    _check_t(t, sched)
    d = tau0.copy()
    for s in range(1, t + 1):
        if eps is not None:
            e = np.asarray(eps[s - 1], dtype=d.dtype)
        else:
            e = rng.standard_normal(d.shape).astype(d.dtype, copy=False)
        d = d.dtype.type(sched.sqrt_alpha[s]) * d + d.dtype.type(
            np.sqrt(1.0 - sched.alpha[s])
        ) * e
    return d


def reverse_coefficients(t: int, sched: NoiseSchedule) -> tuple:
    """(c_prev, c_pred): tau_{t-1} = c_prev * tau_t + c_pred * predicted tau_0."""
    _check_t(t, sched)
    abar_t = sched.alpha_bar[t]
    abar_prev = sched.alpha_bar[t - 1]
    c_prev = (1.0 - abar_prev) * sched.sqrt_alpha[t] / (1.0 - abar_t)
    c_pred = (1.0 - sched.alpha[t]) * np.sqrt(abar_prev) / (1.0 - abar_t)
    return c_prev, c_pred


def reverse_sample(denoise_fn, shape, sched: NoiseSchedule, rng, sigma_scale: float = 1.0,
                   tau_init: np.ndarray | None = None):
    """Iterative denoising from pure noise down to the clean estimate.

    ``denoise_fn(tau_t, t) -> tau0_hat`` supplies the trained prediction;
    noise injection is skipped at t = 1 and scaled by ``sigma_scale``
    (0 gives the deterministic sampler used in tests). ``tau_init`` replaces
    the N(0, I) start for consistency checks.
    """
    tau = rng.standard_normal(shape) if tau_init is None else tau_init.copy()
    for t in range(sched.t_diff, 0, -1):
        pred = denoise_fn(tau, t)
        c_prev, c_pred = reverse_coefficients(t, sched)
        tau = c_prev * tau + c_pred * pred
        if t > 1 and sigma_scale > 0.0:
            tau = tau + sigma_scale * sched.sigma[t] * rng.standard_normal(shape)
    return tau
