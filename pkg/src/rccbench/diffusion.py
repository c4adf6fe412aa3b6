"""Reverse-diffusion engine over analytically solvable Gaussian priors.

State indexing: a :class:`DiffusionState` carries ``t`` in ``[1, levels+1]``
where ``t = 1`` is the terminal (clean) state and ``t = levels + 1`` is the
pure-noise start.  Internally the noise level of state ``t`` is ``j = t - 1``
with ``abar[0] = 1`` (no noise) down to ``abar[levels]`` (almost none of the
signal left).  The transition out of state ``t = 2`` is the final one and is
noiseless by construction.

The denoisers implement the exact posterior mean under a Gaussian prior
``N(mean, cov)`` for the observation ``x_t = sqrt(abar)*x0 + sqrt(1-abar)*eps``:

    E[x0 | x_t] = m + sqrt(abar) * cov @ (abar*cov + (1-abar)*I)^-1 @ (x_t - sqrt(abar)*m)

:class:`GaussianDenoiser` stores a dense covariance (eigendecomposed once);
:class:`StationaryGaussianDenoiser` uses a wrapped squared-exponential kernel
on an h x w torus, which is diagonal in the 2-D Fourier basis, so the same
posterior costs one FFT round trip.  The two agree to rounding on matching
covariances (see tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_REF_STEPS = 1000
_BETA_START = 1e-4
_BETA_END = 0.02


class DiffusionSchedule:
    """Noise levels abar and reverse noise scales sigma for a step count."""

    def __init__(self, alphas_bar: np.ndarray) -> None:
        ab = np.asarray(alphas_bar, dtype=np.float64)
        if ab.ndim != 1 or ab.size < 2:
            raise ValueError("need at least 2 noise levels")
        if not np.all((ab > 0) & (ab <= 1)):
            raise ValueError("alphas_bar must lie in (0, 1]")
        if not np.all(np.diff(ab) < 0):
            raise ValueError("alphas_bar must be strictly decreasing")
        self._abar = np.concatenate([[1.0], ab])  # index 0 = clean sentinel

    @classmethod
    def linear_beta(cls, levels: int) -> "DiffusionSchedule":
        """The 1000-step linear-beta reference grid subsampled to `levels`."""
        if not 2 <= levels <= _REF_STEPS:
            raise ValueError(f"levels must be in [2, {_REF_STEPS}], got {levels}")
        beta = np.linspace(_BETA_START, _BETA_END, _REF_STEPS)
        abar_full = np.cumprod(1.0 - beta)
        idx = np.round(np.arange(1, levels + 1) * (_REF_STEPS / levels)).astype(int) - 1
        return cls(abar_full[idx])

    @property
    def levels(self) -> int:
        return self._abar.size - 1

    @property
    def alphas_bar(self) -> np.ndarray:
        """abar at levels 1..levels (the clean sentinel excluded)."""
        return self._abar[1:].copy()

    def abar(self, level: int) -> float:
        """abar at a level in [0, levels]; level 0 is the clean sentinel 1.0."""
        if not 0 <= level <= self.levels:
            raise IndexError(f"level {level} out of range [0, {self.levels}]")
        return float(self._abar[level])

    def sigma(self, level: int) -> float:
        """Reverse noise scale for the transition out of source level `level`.

        sigma(1) == 0: the final transition adds no noise.
        """
        if not 1 <= level <= self.levels:
            raise IndexError(f"transition level {level} out of range")
        a_src = self._abar[level]
        a_dst = self._abar[level - 1]
        beta = 1.0 - a_src / a_dst
        return float(np.sqrt((1.0 - a_dst) / (1.0 - a_src) * beta))

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([self.sigma(j) for j in range(1, self.levels + 1)])


@dataclass
class DiffusionState:
    t: int  # in [1, levels + 1]; t = 1 is terminal
    x: np.ndarray


class GaussianDenoiser:
    """Exact MMSE denoiser for a dense Gaussian prior N(mean, cov)."""

    def __init__(self, mean: np.ndarray, cov: np.ndarray, schedule: DiffusionSchedule) -> None:
        mean = np.asarray(mean, dtype=np.float64).ravel()
        cov = np.asarray(cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape must match the mean")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        evals, evecs = np.linalg.eigh(cov)
        if evals.min() <= 0:
            raise ValueError("covariance must be positive definite")
        self.prior_mean = mean
        self.dim = mean.size
        self.schedule = schedule
        self._evals = evals
        self._evecs = evecs

    def mmse_estimate(self, x: np.ndarray, t: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        a = self.schedule.abar(t - 1)
        root = np.sqrt(a)
        gain = root * self._evals / (a * self._evals + (1.0 - a))
        centered = self._evecs.T @ (x - root * self.prior_mean)
        return self.prior_mean + self._evecs @ (gain * centered)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        w = rng.standard_normal(self.dim)
        return self.prior_mean + self._evecs @ (np.sqrt(self._evals) * w)


class StationaryGaussianDenoiser:
    """Gaussian prior with a wrapped squared-exponential kernel on a torus grid.

    kernel(d) = amplitude^2 * exp(-d^2 / (2 ell^2)) + nugget * [d == 0], with
    toroidal pixel distances, so the covariance is diagonalized by the 2-D DFT
    and every posterior solve is O(dim log dim).
    """

    def __init__(
        self,
        height: int,
        width: int,
        schedule: DiffusionSchedule,
        mean_level: float = 0.5,
        amplitude: float = 0.15,
        length_scale: float = 6.0,
        nugget: float = 1e-6,
    ) -> None:
        if height < 1 or width < 1:
            raise ValueError("grid dimensions must be positive")
        self.height = height
        self.width = width
        self.dim = height * width
        self.schedule = schedule
        self.mean_level = float(mean_level)
        self.prior_mean = np.full(self.dim, self.mean_level)
        self.amplitude = float(amplitude)
        self.length_scale = float(length_scale)
        self.nugget = float(nugget)

        dr = np.minimum(np.arange(height), height - np.arange(height))
        dc = np.minimum(np.arange(width), width - np.arange(width))
        d2 = dr[:, None] ** 2 + dc[None, :] ** 2
        kernel = self.amplitude**2 * np.exp(-d2 / (2.0 * self.length_scale**2))
        kernel[0, 0] += self.nugget
        spectrum = np.fft.fft2(kernel).real
        # the wrapped SE kernel has a positive spectrum; clamp rounding dust
        self._spectrum = np.maximum(spectrum, 1e-15 * spectrum.max())
        self._half_spectrum = self._spectrum[:, : width // 2 + 1]

    def _filter(self, v: np.ndarray, gains: np.ndarray) -> np.ndarray:
        grid = v.reshape(self.height, self.width)
        out = np.fft.irfft2(np.fft.rfft2(grid) * gains, s=grid.shape)
        return out.ravel()

    def mmse_estimate(self, x: np.ndarray, t: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        a = self.schedule.abar(t - 1)
        root = np.sqrt(a)
        gains = root * self._half_spectrum / (a * self._half_spectrum + (1.0 - a))
        return self.prior_mean + self._filter(x - root * self.prior_mean, gains)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        w = rng.standard_normal(self.dim)
        return self.prior_mean + self._filter(w, np.sqrt(self._half_spectrum))

    def dense_cov(self) -> np.ndarray:
        """Materialize the covariance (small grids only; tests and audits)."""
        kernel = np.fft.ifft2(self._spectrum).real
        rows = np.arange(self.height)
        cols = np.arange(self.width)
        rr = (rows[:, None] - rows[None, :]) % self.height
        cc = (cols[:, None] - cols[None, :]) % self.width
        cov = kernel[rr[:, None, :, None], cc[None, :, None, :]]
        return cov.reshape(self.dim, self.dim)


def make_toy_model(
    height: int,
    width: int,
    levels: int,
    mean_level: float = 0.5,
    amplitude: float = 0.15,
    length_scale: float = 6.0,
) -> StationaryGaussianDenoiser:
    return StationaryGaussianDenoiser(
        height,
        width,
        DiffusionSchedule.linear_beta(levels),
        mean_level=mean_level,
        amplitude=amplitude,
        length_scale=length_scale,
    )


def mmse_estimate(model, x: np.ndarray, t: int) -> np.ndarray:
    if not 1 <= t <= model.schedule.levels + 1:
        raise ValueError(f"state index {t} out of range")
    return model.mmse_estimate(x, t)


def reverse_step(model, state: DiffusionState, noise: np.ndarray) -> DiffusionState:
    """Posterior-mean transition plus sigma-scaled noise; decrements t."""
    if state.t < 2:
        raise ValueError("no reverse transition out of the terminal state")
    j = state.t - 1
    sched = model.schedule
    a_src, a_dst = sched.abar(j), sched.abar(j - 1)
    alpha = a_src / a_dst
    beta = 1.0 - alpha
    xhat = model.mmse_estimate(state.x, state.t)
    mu = (
        np.sqrt(a_dst) * beta / (1.0 - a_src) * xhat
        + np.sqrt(alpha) * (1.0 - a_dst) / (1.0 - a_src) * state.x
    )
    sigma = sched.sigma(j)
    x_next = mu if sigma == 0.0 else mu + sigma * np.asarray(noise, dtype=np.float64).ravel()
    return DiffusionState(t=state.t - 1, x=x_next)


def ddim_step(model, state: DiffusionState) -> DiffusionState:
    """Deterministic refinement transition; consumes no randomness."""
    if state.t < 2:
        raise ValueError("no reverse transition out of the terminal state")
    j = state.t - 1
    sched = model.schedule
    a_src, a_dst = sched.abar(j), sched.abar(j - 1)
    xhat = model.mmse_estimate(state.x, state.t)
    eps = (state.x - np.sqrt(a_src) * xhat) / np.sqrt(1.0 - a_src)
    x_next = np.sqrt(a_dst) * xhat + np.sqrt(1.0 - a_dst) * eps
    return DiffusionState(t=state.t - 1, x=x_next)


def ddcm_select(residual: np.ndarray, cb, t: int) -> int:
    """Atom with maximal signed correlation; ties go to the smaller index."""
    corr = cb.correlations(t, residual)
    return int(np.argmax(corr))
