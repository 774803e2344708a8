"""Eigenvalues of the kernel matrix over all paths of a uniform tree.

``K_{B,D}`` (all ``N = B**D`` paths, lexicographic order) has ``D+1``
distinct eigenvalues

    lbar_i     = sum_{j<i} B^j (chi_j - chi_{j+1}),   multiplicity (B-1) B^(D-i)
    lbar_{D+1} = lbar_D + B^D chi_D,                  multiplicity 1

The dense builders here are oracles for small trees only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RegimeError, SizeError
from .kernels import ChiSequence, enumerate_paths, kernel_matrix, require_gaussian_regime

DEFAULT_CAP = 4096
SAMPLE_JITTER = 1e-10


@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues ``lbar_1..lbar_{D+1}`` (nondecreasing) with multiplicities."""

    distinct: tuple[tuple[float, int], ...]
    B: int
    D: int
    chi: ChiSequence

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.distinct])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.distinct], dtype=np.int64)

    def trace(self) -> float:
        return float(sum(v * m for v, m in self.distinct))

    def expanded(self) -> np.ndarray:
        """All ``N`` eigenvalues, ascending."""
        return np.repeat(self.values, self.multiplicities)

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "D": self.D,
            "chi": self.chi.to_dict(),
            "distinct": [{"value": v, "multiplicity": m} for v, m in self.distinct],
            "trace": self.trace(),
        }


def closed_form_spectrum(chi: ChiSequence) -> Spectrum:
    B, D, c = chi.B, chi.D, chi.values
    out, acc = [], 0.0
    for i in range(1, D + 1):
        acc += B ** (i - 1) * (c[i - 1] - c[i])
        out.append((acc, (B - 1) * B ** (D - i)))
    out.append((acc + B**D * c[D], 1))
    return Spectrum(tuple(out), B, D, chi)


def distinct_index(t: int, B: int, D: int) -> int:
    """1-based index ``i`` of the distinct eigenvalue equal to ``lhat_t``.

    ``t = 1`` maps to ``D+1``; otherwise ``lhat_t = lbar_{D-i}`` for the
    integer ``i`` with ``B^i < t <= B^(i+1)``.
    """
    if not 1 <= t <= B**D:
        raise ParameterError(f"t must lie in [1, {B**D}], got {t}")
    if t == 1:
        return D + 1
    i, top = 0, B
    while t > top:
        i += 1
        top *= B
    return D - i


@dataclass(frozen=True)
class OrderedEigs:
    """Eigenvalues relisted as ``lhat_1 >= ... >= lhat_N``; indexed lazily from 1."""

    spectrum: Spectrum

    @property
    def N(self) -> int:
        return self.spectrum.B ** self.spectrum.D

    def __len__(self) -> int:
        return self.N

    def __getitem__(self, t: int) -> float:
        s = self.spectrum
        return s.distinct[distinct_index(t, s.B, s.D) - 1][0]

    def to_array(self, cap: int = 1 << 22) -> np.ndarray:
        if self.N > cap:
            raise SizeError(f"N={self.N} eigenvalues exceed cap {cap}")
        return self.spectrum.expanded()[::-1].copy()


def reorder(spec: Spectrum) -> OrderedEigs:
    return OrderedEigs(spec)


def _check_cap(chi: ChiSequence, cap: int):
    if chi.n_paths > cap:
        raise SizeError(f"N = B^D = {chi.n_paths} exceeds dense cap {cap}")


def build_gram(chi: ChiSequence, cap: int = DEFAULT_CAP, method: str = "recursive") -> np.ndarray:
    """Dense ``N x N`` kernel matrix over all paths in lexicographic order.

    ``recursive`` assembles the block recursion (a depth-k subtree is B
    depth-(k-1) subtrees joined at a root, off-diagonal blocks ``chi_k J``);
    ``pairwise`` evaluates the kernel on every pair of enumerated paths.
    """
    _check_cap(chi, cap)
    if method == "pairwise":
        P = np.array(list(enumerate_paths(chi.B, chi.D)), dtype=np.int64)
        return kernel_matrix(chi, P, P)
    if method != "recursive":
        raise ParameterError(f"unknown Gram construction {method!r}")
    c = chi.values
    K = np.array([[c[0]]])
    for k in range(1, chi.D + 1):
        n = K.shape[0]
        big = np.full((chi.B * n, chi.B * n), c[k])
        for b in range(chi.B):
            big[b * n:(b + 1) * n, b * n:(b + 1) * n] = K
        K = big
    return K


def numeric_eigenvalues(chi: ChiSequence, cap: int = DEFAULT_CAP) -> np.ndarray:
    return np.linalg.eigvalsh(build_gram(chi, cap))


def sample_gp_prior(chi: ChiSequence, rng: np.random.Generator,
                    cap: int = DEFAULT_CAP) -> tuple[np.ndarray, float]:
    """Draw ``f ~ N(0, K_{B,D})`` over all paths; returns ``(f, max f)``."""
    K = build_gram(chi, cap)
    L = np.linalg.cholesky(K + SAMPLE_JITTER * np.eye(len(K)))
    f = L @ rng.standard_normal(len(K))
    return f, float(f.max())


def width_constants(B: int, s: float) -> tuple[float, float, float]:
    """``(q_s, C_s, C_s q_s)`` with ``q_s = B exp(-1/s^2)``, ``C_s = (1 - q_s/B)/(q_s - 1)``."""
    if not s > 1 / math.sqrt(math.log(B)):
        raise RegimeError(f"s={s} must exceed 1/sqrt(log B)={1 / math.sqrt(math.log(B)):.6g}")
    q = B * math.exp(-1 / s**2)
    C = (1 - q / B) / (q - 1)
    return q, C, C * q


def lambda_hat_bounds(chi: ChiSequence, t: int) -> tuple[float, float]:
    """Closed-form lower/upper bounds on ``lhat_t`` for linear and Gaussian kernels.

    For ``t = 1`` the exact ``lbar_{D+1}`` is returned as both bounds.
    """
    B, D, N = chi.B, chi.D, chi.n_paths
    if not 1 <= t <= N:
        raise ParameterError(f"t must lie in [1, {N}], got {t}")
    if t == 1:
        top = closed_form_spectrum(chi).distinct[-1][0]
        return top, top
    if chi.kind == "linear":
        den = (B - 1) * (D + 1) * t
        return (N - t) / den, (N * B - t) / den
    if chi.kind == "gaussian":
        s = require_gaussian_regime(chi)
        q, C, _ = width_constants(B, s)
        return C * (N * math.exp(-D / s**2) - t) / t, C * (N * q - t) / t
    raise ParameterError(f"no closed-form lambda-hat bounds for {chi.kind!r} kernels")
