"""Incremental GP posterior over path rewards and the UCB score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateUpdateError, InputError, ParameterError
from .kernels import ChiSequence, kernel_matrix, kernel_vector

JITTER = 1e-10
_PIVOT_FLOOR = 1e-12


class PosteriorState:
    """Training arms, rewards and a growing Cholesky factor of
    ``C_t = K_t + noise_var * I``.

    Besides ``L`` the state keeps ``w = L^{-1} y`` so that the posterior mean
    at ``x`` is ``v . w`` with ``v = L^{-1} k_t(x)``, and the variance is
    ``kappa(x, x) - v . v``. Each ``add_observation`` costs O(t^2).
    """

    def __init__(self, chi: ChiSequence, noise_var: float):
        if not noise_var >= 0 or not math.isfinite(noise_var):
            raise ParameterError(f"noise_var must be finite and >= 0, got {noise_var!r}")
        self.chi = chi
        self.noise_var = float(noise_var)
        self.t = 0
        cap = 16
        self._arms = np.zeros((cap, chi.D), dtype=np.int64)
        self._y = np.zeros(cap)
        self._L = np.zeros((cap, cap))
        self._w = np.zeros(cap)
        self.jittered = 0

    @property
    def arms(self) -> np.ndarray:
        return self._arms[: self.t]

    @property
    def rewards(self) -> np.ndarray:
        return self._y[: self.t]

    @property
    def factor(self) -> np.ndarray:
        return self._L[: self.t, : self.t]

    @property
    def whitened_rewards(self) -> np.ndarray:
        return self._w[: self.t]

    def covariance(self) -> np.ndarray:
        """Explicit ``C_t`` (for checks; not used by the update path)."""
        K = kernel_matrix(self.chi, self.arms, self.arms)
        return K + self.noise_var * np.eye(self.t)

    def _grow(self):
        cap = 2 * len(self._y)
        arms = np.zeros((cap, self.chi.D), dtype=np.int64)
        arms[: self.t] = self.arms
        y = np.zeros(cap)
        y[: self.t] = self.rewards
        L = np.zeros((cap, cap))
        L[: self.t, : self.t] = self.factor
        w = np.zeros(cap)
        w[: self.t] = self.whitened_rewards
        self._arms, self._y, self._L, self._w = arms, y, L, w

    def add_observation(self, x: Sequence[int], y: float) -> "PosteriorState":
        """Append ``(x, y)`` and extend the factor by one row. Returns self."""
        if not math.isfinite(y):
            raise InputError(f"reward must be finite, got {y!r}")
        x = tuple(int(a) for a in x)
        k = kernel_vector(self.chi, self.arms, x)
        if self.noise_var == 0 and self.t and (self.arms == np.asarray(x)).all(axis=1).any():
            raise DegenerateUpdateError(f"noise-free duplicate observation of arm {x}")
        t = self.t
        l = solve_triangular(self.factor, k, lower=True) if t else k
        pivot2 = self.chi.chi0 + self.noise_var - l @ l
        if pivot2 <= _PIVOT_FLOOR * self.chi.chi0:
            if self.noise_var > 0:
                raise DegenerateUpdateError(f"covariance lost positive definiteness (pivot {pivot2:.3g})")
            pivot2 += JITTER * self.chi.chi0
            self.jittered += 1
            if pivot2 <= 0:
                raise DegenerateUpdateError(f"noise-free factorization failed for arm {x}")
        if t == len(self._y):
            self._grow()
        piv = math.sqrt(pivot2)
        self._L[t, :t] = l
        self._L[t, t] = piv
        self._w[t] = (y - l @ self._w[:t]) / piv
        self._arms[t] = x
        self._y[t] = y
        self.t = t + 1
        return self

    def whiten(self, K: np.ndarray) -> np.ndarray:
        """``L^{-1} K`` for a ``(t, m)`` block of kernel columns."""
        if self.t == 0:
            return np.zeros((0,) + K.shape[1:])
        return solve_triangular(self.factor, K, lower=True)

    def posterior(self, x: Sequence[int]) -> tuple[float, float]:
        mu, var = self.posterior_many(np.asarray([x]).reshape(1, -1))
        return float(mu[0]), float(var[0])

    def posterior_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at each row of the ``(m, D)`` array ``X``."""
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.chi.D:
            raise ParameterError(f"query paths must have depth {self.chi.D}")
        prior = self.chi.chi0
        if self.t == 0:
            return np.zeros(len(X)), np.full(len(X), prior)
        V = self.whiten(kernel_matrix(self.chi, self.arms, X))
        return moments_from_whitened(V, self.whitened_rewards, prior)

    def to_dict(self) -> dict:
        return {
            "chi": self.chi.to_dict(),
            "noise_var": self.noise_var,
            "arms": self.arms.tolist(),
            "rewards": self.rewards.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PosteriorState":
        state = cls(ChiSequence.from_dict(data["chi"]), data["noise_var"])
        for x, y in zip(data["arms"], data["rewards"]):
            state.add_observation(x, y)
        return state


def moments_from_whitened(V: np.ndarray, w: np.ndarray, prior_var: float):
    mu = V.T @ w
    var = prior_var - np.einsum("ij,ij->j", V, V)
    return mu, np.clip(var, 0.0, prior_var)


def add_observation(state: PosteriorState, x: Sequence[int], y: float) -> PosteriorState:
    return state.add_observation(x, y)


def posterior(state: PosteriorState, x: Sequence[int]) -> tuple[float, float]:
    return state.posterior(x)


def ucb(state: PosteriorState, x: Sequence[int], beta_val: float) -> float:
    if not beta_val >= 0:
        raise ParameterError(f"beta must be >= 0, got {beta_val!r}")
    mu, var = state.posterior(x)
    return mu + beta_val * math.sqrt(var)


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence multiplier ``sqrt(2 log(N t^2 pi^2 / (6 delta)))`` times ``scale``.

    ``num_arms`` may be astronomically large; only its logarithm is used.
    """

    delta: float
    num_arms: int
    scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.num_arms < 1:
            raise ParameterError(f"num_arms must be >= 1, got {self.num_arms!r}")
        if not self.scale >= 0:
            raise ParameterError(f"beta scale must be >= 0, got {self.scale!r}")

    def __call__(self, t: int) -> float:
        return beta(self, t)


def beta(schedule: BetaSchedule, t: int) -> float:
    if t < 1:
        raise ParameterError(f"beta_t needs t >= 1, got {t!r}")
    log_arg = math.log(schedule.num_arms) + 2 * math.log(t) + math.log(math.pi**2 / (6 * schedule.delta))
    return schedule.scale * math.sqrt(2 * log_arg)
