"""Path kernels on uniform trees.

A kernel between two root-to-leaf paths of a depth-``D`` tree is fully
described by its chi-sequence: ``chi[d]`` is the kernel value between two
paths that differ on ``d`` nodes. Paths are tuples of action indices (the
root is implicit), so two paths sharing ``h`` leading actions have
``d = D - h`` differing nodes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError, RegimeError, UnsupportedKernelError

Path = tuple[int, ...]

KINDS = ("linear", "gaussian", "mdp", "custom")


@dataclass(frozen=True)
class ChiSequence:
    """Kernel profile ``chi_0 .. chi_D`` for a tree of branching ``B``."""

    values: tuple[float, ...]
    B: int
    D: int
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _check_shape(self.B, self.D)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) != self.D + 1:
            raise ParameterError(f"chi needs D+1={self.D + 1} values, got {len(vals)}")
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ParameterError("chi values must be finite and nonnegative")
        if any(a < b for a, b in zip(vals, vals[1:])):
            raise ParameterError("chi values must be nonincreasing in d")

    @property
    def normalized(self) -> bool:
        return self.values[0] == 1.0

    @property
    def chi0(self) -> float:
        return self.values[0]

    @property
    def n_paths(self) -> int:
        return self.B**self.D

    @property
    def n_nodes(self) -> int:
        return (self.B ** (self.D + 1) - 1) // (self.B - 1)

    @property
    def in_gaussian_regime(self) -> bool | None:
        """True when s > 1/sqrt(log B); None for non-Gaussian kernels."""
        if self.kind != "gaussian":
            return None
        return self.params["s"] > 1.0 / math.sqrt(math.log(self.B))

    def __getitem__(self, d: int) -> float:
        return self.values[d]

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "B": self.B,
            "D": self.D,
            "params": dict(self.params),
            "values": list(self.values),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChiSequence":
        kind = data.get("kind", "custom")
        B, D = int(data["B"]), int(data["D"])
        params = dict(data.get("params") or {})
        if kind in ("linear", "gaussian", "mdp") and "values" not in data:
            return make_chi(kind, B, D, **params)
        return cls(tuple(data["values"]), B, D, kind, params)


def _check_shape(B, D):
    if not isinstance(B, (int, np.integer)) or B < 2:
        raise ParameterError(f"branching factor B must be an integer >= 2, got {B!r}")
    if not isinstance(D, (int, np.integer)) or D < 1:
        raise ParameterError(f"depth D must be an integer >= 1, got {D!r}")


def chi_linear(B: int, D: int) -> ChiSequence:
    """Normalized node-count kernel: ``chi_d = (D+1-d)/(D+1)``."""
    _check_shape(B, D)
    vals = tuple((D + 1 - d) / (D + 1) for d in range(D + 1))
    return ChiSequence(vals, B, D, "linear", {})


def chi_gaussian(B: int, D: int, s: float) -> ChiSequence:
    """Gaussian kernel in path feature space: ``chi_d = exp(-d/s^2)``.

    ``s = inf`` is accepted and gives the constant kernel. Use
    ``ChiSequence.in_gaussian_regime`` to check s > 1/sqrt(log B).
    """
    _check_shape(B, D)
    if not s > 0:
        raise ParameterError(f"Gaussian width s must be > 0, got {s!r}")
    vals = tuple(math.exp(-d / s**2) for d in range(D + 1))
    return ChiSequence(vals, B, D, "gaussian", {"s": float(s)})


def chi_mdp(B: int, D: int, gamma: float) -> ChiSequence:
    """Discounted-sum kernel; two paths sharing ``h`` actions get
    ``(1 - gamma^(2h)) / (1 - gamma^2)``. Not normalized."""
    _check_shape(B, D)
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma!r}")
    g2 = gamma * gamma
    vals = tuple((1 - g2 ** (D - d)) / (1 - g2) for d in range(D + 1))
    return ChiSequence(vals, B, D, "mdp", {"gamma": float(gamma)})


def make_chi(kind: str, B: int, D: int, s: float | None = None,
             gamma: float | None = None) -> ChiSequence:
    if kind == "linear":
        return chi_linear(B, D)
    if kind == "gaussian":
        if s is None:
            raise ParameterError("Gaussian kernel requires s")
        return chi_gaussian(B, D, s)
    if kind == "mdp":
        if gamma is None:
            raise ParameterError("MDP kernel requires gamma")
        return chi_mdp(B, D, gamma)
    raise ParameterError(f"unknown kernel kind {kind!r}; expected one of {KINDS[:3]}")


def require_gaussian_regime(chi: ChiSequence) -> float:
    """Return s, raising RegimeError unless chi is Gaussian with s > 1/sqrt(log B)."""
    if chi.kind != "gaussian":
        raise UnsupportedKernelError(f"expected a Gaussian kernel, got {chi.kind!r}")
    if not chi.in_gaussian_regime:
        raise RegimeError(
            f"s={chi.params['s']} must exceed 1/sqrt(log B)={1 / math.sqrt(math.log(chi.B)):.6g}"
        )
    return chi.params["s"]


def common_prefix(x: Sequence[int], x2: Sequence[int]) -> int:
    h = 0
    for a, b in zip(x, x2):
        if a != b:
            break
        h += 1
    return h


def _check_path(chi: ChiSequence, x: Sequence[int]):
    if len(x) != chi.D:
        raise ParameterError(f"path of depth {len(x)} does not match kernel depth {chi.D}")


def kernel_eval(chi: ChiSequence, x: Sequence[int], x2: Sequence[int]) -> float:
    _check_path(chi, x)
    _check_path(chi, x2)
    return chi.values[chi.D - common_prefix(x, x2)]


def kernel_vector(chi: ChiSequence, arms: np.ndarray, x: Sequence[int]) -> np.ndarray:
    """Kernel values between ``x`` and each row of the ``(t, D)`` int array ``arms``."""
    _check_path(chi, x)
    if len(arms) == 0:
        return np.zeros(0)
    eq = arms == np.asarray(x)[None, :]
    h = np.cumprod(eq, axis=1).sum(axis=1)
    return chi.as_array()[chi.D - h]


def kernel_matrix(chi: ChiSequence, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Kernel values between every row of ``rows`` (m, D) and of ``cols`` (n, D)."""
    rows = np.asarray(rows).reshape(-1, chi.D)
    cols = np.asarray(cols).reshape(-1, chi.D)
    eq = rows[:, None, :] == cols[None, :, :]
    h = np.cumprod(eq, axis=2).sum(axis=2)
    return chi.as_array()[chi.D - h]


def feature_map(chi: ChiSequence, x: Sequence[int]) -> dict[Path, float]:
    """Sparse embedding indexed by tree node (a node is its action prefix).

    The root ``()`` carries ``sqrt(chi_D)``; the depth-``i`` node of the path
    carries ``sqrt(chi_{D-i} - chi_{D-i+1})``. Only normalized kernels have
    this embedding.
    """
    if not chi.normalized:
        raise UnsupportedKernelError(
            f"feature map requires chi_0 = 1; {chi.kind!r} kernel has chi_0 = {chi.chi0}"
        )
    _check_path(chi, x)
    D, v = chi.D, chi.values
    phi = {(): math.sqrt(v[D])}
    for i in range(1, D + 1):
        phi[tuple(x[:i])] = math.sqrt(v[D - i] - v[D - i + 1])
    return phi


def feature_inner(phi: dict, phi2: dict) -> float:
    if len(phi2) < len(phi):
        phi, phi2 = phi2, phi
    return sum(val * phi2[node] for node, val in phi.items() if node in phi2)


def enumerate_paths(B: int, D: int) -> Iterator[Path]:
    """All ``B**D`` paths in lexicographic order (the block order of the Gram matrix)."""
    return itertools.product(range(B), repeat=D)


def path_index(x: Sequence[int], B: int) -> int:
    idx = 0
    for a in x:
        idx = idx * B + a
    return idx
