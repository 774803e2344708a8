"""Information-gain and regret bounds for GP tree search.

All evaluators are pure functions of numbers the caller extracts (horizon,
spectrum, noise level, realized information gain); nothing here touches a
running search.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InputError, ParameterError
from .kernels import ChiSequence, kernel_matrix, require_gaussian_regime
from .spectrum import OrderedEigs, closed_form_spectrum, reorder, width_constants

SUBMODULAR = 1.0 / (1.0 - math.exp(-1.0))
_PSD_TOL = 1e-9


def _check_noise(noise_var):
    if not noise_var > 0:
        raise ParameterError(f"bounds require noise_var > 0, got {noise_var!r}")


def infogain_actual(gram_T: np.ndarray, noise_var: float) -> float:
    """``1/2 log det(I + K_T / noise_var)`` by Cholesky."""
    _check_noise(noise_var)
    K = np.asarray(gram_T, dtype=float)
    if K.size == 0:
        return 0.0
    if K.ndim != 2 or K.shape[0] != K.shape[1] or not np.allclose(K, K.T, atol=1e-12):
        raise InputError("kernel matrix must be square and symmetric")
    scale = max(1.0, float(np.abs(K).max()))
    if np.linalg.eigvalsh(K)[0] < -_PSD_TOL * scale * len(K):
        raise InputError("kernel matrix is not positive semidefinite")
    L = np.linalg.cholesky(np.eye(len(K)) + K / noise_var)
    return float(np.log(np.diag(L)).sum())


def infogain_of_arms(chi: ChiSequence, arms: np.ndarray, noise_var: float) -> float:
    arms = np.asarray(arms).reshape(-1, chi.D)
    return infogain_actual(kernel_matrix(chi, arms, arms), noise_var)


Eigs = Union[OrderedEigs, Sequence[float], np.ndarray]


def infogain_greedy(lambda_hat: Eigs, T: int, noise_var: float) -> tuple[float, np.ndarray]:
    """Greedy information gain over eigendirections of the whole-arm kernel.

    Each of the ``T`` picks takes the direction with the largest posterior
    eigenvalue ``lhat_i / (1 + m_i lhat_i / noise_var)`` (lowest index on
    ties). Returns ``I_g`` and the pick counts ``m`` (length ``min(T, N)``).
    """
    _check_noise(noise_var)
    if T < 0:
        raise ParameterError(f"T must be >= 0, got {T}")
    N = len(lambda_hat)
    at = (lambda i: lambda_hat[i + 1]) if isinstance(lambda_hat, OrderedEigs) else (lambda i: float(lambda_hat[i]))
    width = min(T, N)
    m = np.zeros(width, dtype=np.int64)
    if width == 0:
        return 0.0, m
    lam = [at(0)]
    heap = [(-lam[0], 0)]
    for _ in range(T):
        _, i = heapq.heappop(heap)
        m[i] += 1
        heapq.heappush(heap, (-lam[i] / (1 + m[i] * lam[i] / noise_var), i))
        if m[i] == 1 and i + 1 < width:
            lam.append(at(i + 1))
            heapq.heappush(heap, (-lam[i + 1], i + 1))
    gain = 0.5 * sum(math.log1p(mi * li / noise_var) for mi, li in zip(m, lam))
    return gain, m


def infogain_bound_kernel_independent(T: int, N_n: int, noise_var: float) -> tuple[float, float]:
    """``((T/2) log(1 + T/noise_var), (N_n/2) log(1 + N_n/noise_var))``."""
    _check_noise(noise_var)
    return 0.5 * T * math.log1p(T / noise_var), 0.5 * N_n * math.log1p(N_n / noise_var)


def decay_constant(chi: ChiSequence) -> float:
    """Constant ``c`` with ``lhat_t <= c / t``.

    Gaussian: ``N C_s q_s``; linear: ``N B / ((B-1)(D+1))``; discounted MDP
    kernel: ``N B / (B - gamma^2)``. For the MDP kernel
    ``lbar_i <= gamma^(2(D-i)) B^i / (B - gamma^2)`` and ``B^i <= N B / t`` on
    the range where ``lhat_t = lbar_i``; the worst case ``i = D`` sets the
    constant. Only valid for ``t >= 2``.
    """
    B, D, N = chi.B, chi.D, chi.n_paths
    if chi.kind == "gaussian":
        s = require_gaussian_regime(chi)
        return N * width_constants(B, s)[2]
    if chi.kind == "linear":
        return N * B / ((B - 1) * (D + 1))
    if chi.kind == "mdp":
        g = chi.params["gamma"]
        return N * B / (B - g * g)
    raise ParameterError(f"no eigenvalue decay constant for {chi.kind!r} kernels")


def sumlog_bound(T: int, lam_T: float, n_cq: float, noise_var: float, B: int, D: int) -> float:
    """``log((1/lhat_T + 1/noise_var) n_cq e) T / (2(1 - 1/e)) + D log B``."""
    _check_noise(noise_var)
    if not lam_T > 0:
        raise InputError(f"smallest eigenvalue must be > 0, got {lam_T!r}")
    return 0.5 * SUBMODULAR * math.log((1 / lam_T + 1 / noise_var) * n_cq * math.e) * T + D * math.log(B)


def infogain_bound_sumlog(T: int, chi: ChiSequence, noise_var: float) -> float:
    """Sum-of-log-eigenvalues bound on the max information gain after ``T`` plays.

    Uses the exact ``lhat_min(T, N)`` from the closed-form spectrum.
    """
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    lam = reorder(closed_form_spectrum(chi))
    return sumlog_bound(T, lam[min(T, chi.n_paths)], decay_constant(chi), noise_var, chi.B, chi.D)


def infogain_bound_tailsum(T: int, T_star: int, N: int, cq: float) -> float:
    """``N cq log(min(T, N) / T_star) / (2(1 - 1/e))``; zero once ``T <= T_star``."""
    if T_star < 1:
        raise ParameterError(f"T_star must be >= 1, got {T_star}")
    top = min(T, N)
    if top <= T_star:
        return 0.0
    return 0.5 * SUBMODULAR * N * cq * math.log(top / T_star)


def a_s(B: int, D: int, s: float) -> float:
    N = B**D
    q, _, cq = width_constants(B, s)
    e = math.exp(-D / s**2)
    return N * cq * (e - 1) / (e - 1 - q / 2)


def t_prime(T: int, A_s: float, noise_var: float) -> tuple[float, bool]:
    """Positive root of ``T'^2 + T' - A_s T / noise_var = 0`` and whether it is below ``T``."""
    _check_noise(noise_var)
    val = (-1 + math.sqrt(1 + 4 * A_s * T / noise_var)) / 2
    return val, val < T


def _marginal_cost(lam: OrderedEigs, t: int, n_cq: float, noise_var: float) -> float:
    return math.log((1 / lam[t] + 1 / noise_var) * n_cq * math.e) * t - n_cq * math.log(t)


def t_star(chi: ChiSequence, noise_var: float) -> tuple[int, bool]:
    """Smallest ``T_* >= 1`` where moving ``T_*+1`` into the log-sum costs at least as much
    as leaving it in the tail-sum. Returns ``(T_*, found)``; ``(N, False)`` if none.
    """
    _check_noise(noise_var)
    n_cq = decay_constant(chi)
    lam = reorder(closed_form_spectrum(chi))
    N = chi.n_paths
    prev = _marginal_cost(lam, 1, n_cq, noise_var)
    for ts in range(1, N):
        nxt = _marginal_cost(lam, ts + 1, n_cq, noise_var)
        if nxt >= prev:
            return ts, True
        prev = nxt
    return N, False


def combined_bound(T: int, T_star_val: int, chi: ChiSequence, noise_var: float) -> float:
    """Log-sum bound up to ``T_*`` plus tail-sum bound beyond it."""
    if T <= T_star_val:
        return infogain_bound_sumlog(T, chi, noise_var)
    return infogain_bound_sumlog(T_star_val, chi, noise_var) + infogain_bound_tailsum(
        T, T_star_val, chi.n_paths, decay_constant(chi) / chi.n_paths
    )


def regret_bound(T: int, N: int, delta: float, noise_var: float, I_u: float) -> float:
    """High-probability cumulative regret bound for UCB arm selection."""
    _check_noise(noise_var)
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta!r}")
    if I_u < 0:
        raise ParameterError(f"information gain must be >= 0, got {I_u!r}")
    if T == 0:
        return 0.0
    log_term = math.log(N) + 2 * math.log(T) + math.log(math.pi**2 / (6 * delta))
    return math.sqrt(16 / math.log1p(1 / noise_var) * log_term * T * I_u)


@dataclass(frozen=True)
class ChainVerdict:
    I_u: float
    I_g: float
    ceiling: float
    holds: bool

    def report(self) -> str:
        status = "holds" if self.holds else "VIOLATED"
        return f"I_u={self.I_u:.6g} <= I_g/(1-1/e)={self.ceiling:.6g}: {status}"


def submodularity_chain(I_u_actual: float, I_g: float, tol: float = 1e-9) -> ChainVerdict:
    """Check ``I_u <= I_g / (1 - 1/e)``; a violation means a bug upstream."""
    ceiling = SUBMODULAR * I_g
    return ChainVerdict(I_u_actual, I_g, ceiling, I_u_actual <= ceiling + tol)


def bound_report(chi: ChiSequence, T: int, delta: float, noise_var: float,
                 I_u: float | None = None) -> dict:
    """Every bound that applies to ``chi`` at horizon ``T``, as a JSON-ready dict."""
    N = chi.n_paths
    lam = reorder(closed_form_spectrum(chi))
    b_T, b_Nn = infogain_bound_kernel_independent(T, chi.n_nodes, noise_var)
    I_g, _ = infogain_greedy(lam, T, noise_var)
    out = {
        "kernel": chi.to_dict(),
        "T": T,
        "N": N,
        "N_n": chi.n_nodes,
        "delta": delta,
        "noise_var": noise_var,
        "infogain_greedy": I_g,
        "max_infogain_bound_greedy": SUBMODULAR * I_g,
        "bound_T": b_T,
        "bound_Nn": b_Nn,
    }
    try:
        n_cq = decay_constant(chi)
    except ParameterError:
        n_cq = None
    if n_cq is not None and T >= 1:
        ts, found = t_star(chi, noise_var)
        out["decay_constant"] = n_cq
        out["bound_sumlog"] = infogain_bound_sumlog(T, chi, noise_var)
        out["bound_tailsum"] = infogain_bound_tailsum(T, ts, N, n_cq / N)
        out["bound_combined"] = combined_bound(T, ts, chi, noise_var)
        out["t_star"] = ts
        out["t_star_found"] = found
        out["sumlog_linear_constant_assumed"] = chi.kind != "gaussian"
    if chi.kind == "gaussian":
        q, C, cq = width_constants(chi.B, chi.params["s"])
        A = a_s(chi.B, chi.D, chi.params["s"])
        tp, below = t_prime(T, A, noise_var)
        out.update({"q_s": q, "C_s": C, "C_s_q_s": cq, "A_s": A, "t_prime": tp, "t_prime_below_T": below})
    if I_u is not None:
        out["I_u"] = I_u
        out["regret_bound"] = regret_bound(T, N, delta, noise_var, I_u)
    return out
