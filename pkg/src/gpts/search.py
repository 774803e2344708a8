"""GP bandit tree search with lazily grown trees and dummy nodes.

The tree only holds nodes that lie on played paths. Every explored node
with uncreated children owns one *dummy* that stands for all paths through
those children: they share the explored prefix, hence the same kernel
vector and the same upper confidence value. The candidate set ``S`` holds
the dummies and the played leaves; the UCB argmax over all ``B**D`` paths
is the argmax over ``S``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ExhaustedTreeError, ParameterError
from .gp import BetaSchedule, PosteriorState, moments_from_whitened
from .kernels import ChiSequence, Path, kernel_matrix

TIE_TOL = 1e-12
TRACE_COLUMNS = ("t", "path", "reward", "mu", "sigma", "beta", "ucb", "cum_regret")
TRACE_VERSION = "gpts-trace v1"

Branching = Union[int, Callable[[Path], int]]


@dataclass
class Node:
    prefix: Path
    parent: Optional[int]
    arity: int
    children: dict = field(default_factory=dict)
    dummy_slot: Optional[int] = None
    leaf_slot: Optional[int] = None

    @property
    def depth(self) -> int:
        return len(self.prefix)

    def uncreated(self) -> list[int]:
        return [a for a in range(self.arity) if a not in self.children]


@dataclass(frozen=True)
class Element:
    """A member of the candidate set: a played leaf or a dummy node.

    For a dummy, ``node`` is the explored parent whose uncreated children
    it stands for.
    """

    kind: str
    node: int
    slot: int

    @property
    def is_dummy(self) -> bool:
        return self.kind == "dummy"


class SearchTree:
    """Arena of explored nodes plus the candidate set with cached posterior values."""

    def __init__(self, D: int, branching: Branching):
        if D < 1:
            raise ParameterError(f"depth must be >= 1, got {D}")
        self.D = D
        self._arity = (lambda prefix: branching) if isinstance(branching, (int, np.integer)) else branching
        self.nodes: list[Node] = []
        # candidate slots; removed slots stay allocated but inactive
        self.kinds: list[str] = []
        self.owner: list[int] = []
        self._cap = 16
        self._active = np.zeros(self._cap, dtype=bool)
        self._reps = np.zeros((self._cap, D), dtype=np.int64)
        self._mu = np.zeros(self._cap)
        self._var = np.zeros(self._cap)
        self._ucb = np.zeros(self._cap)
        self._V = np.zeros((16, self._cap))
        self._vt = 0
        self._stale: set[int] = set()
        root = self._new_node((), None)
        self.root_dummy = self._add_dummy(root)

    # -- structure ---------------------------------------------------------

    def arity(self, prefix: Path) -> int:
        a = int(self._arity(prefix))
        if a < 1:
            raise ParameterError(f"node {prefix} at depth {len(prefix)} < D has no actions")
        return a

    def _new_node(self, prefix: Path, parent: Optional[int]) -> int:
        arity = self.arity(prefix) if len(prefix) < self.D else 0
        self.nodes.append(Node(prefix, parent, arity))
        idx = len(self.nodes) - 1
        if parent is not None:
            self.nodes[parent].children[prefix[-1]] = idx
        return idx

    @property
    def active(self) -> np.ndarray:
        return self._active[: len(self.kinds)]

    @property
    def reps(self) -> np.ndarray:
        return self._reps[: len(self.kinds)]

    @property
    def mu(self) -> np.ndarray:
        return self._mu[: len(self.kinds)]

    @property
    def var(self) -> np.ndarray:
        return self._var[: len(self.kinds)]

    @property
    def ucb(self) -> np.ndarray:
        return self._ucb[: len(self.kinds)]

    def _grow_slots(self):
        cap = 2 * self._cap

        def widen(a):
            out = np.zeros((cap,) + a.shape[1:], dtype=a.dtype)
            out[: self._cap] = a
            return out

        self._active, self._reps = widen(self._active), widen(self._reps)
        self._mu, self._var, self._ucb = widen(self._mu), widen(self._var), widen(self._ucb)
        V = np.zeros((self._V.shape[0], cap))
        V[:, : self._cap] = self._V
        self._V, self._cap = V, cap

    def _new_slot(self, kind: str, owner: int, rep: Sequence[int]) -> int:
        slot = len(self.kinds)
        if slot == self._cap:
            self._grow_slots()
        self.kinds.append(kind)
        self.owner.append(owner)
        self._active[slot] = True
        self._reps[slot] = rep
        self._mu[slot], self._var[slot], self._ucb[slot] = 0.0, np.nan, np.nan
        self._stale.add(slot)
        return slot

    def _dummy_rep(self, node: Node) -> tuple[int, ...]:
        free = node.uncreated()
        return node.prefix + (free[0],) + (0,) * (self.D - node.depth - 1)

    def _add_dummy(self, idx: int) -> int:
        node = self.nodes[idx]
        node.dummy_slot = self._new_slot("dummy", idx, self._dummy_rep(node))
        return node.dummy_slot

    def remove(self, slot: int):
        self._active[slot] = False
        self._stale.discard(slot)
        node = self.nodes[self.owner[slot]]
        if self.kinds[slot] == "dummy":
            node.dummy_slot = None
        else:
            node.leaf_slot = None

    def element(self, slot: int) -> Element:
        return Element(self.kinds[slot], self.owner[slot], slot)

    def elements(self) -> list[Element]:
        return [self.element(int(s)) for s in np.flatnonzero(self.active)]

    def __len__(self) -> int:
        return int(self.active.sum())

    def n_dummies(self) -> int:
        return sum(1 for s in np.flatnonzero(self.active) if self.kinds[s] == "dummy")

    def representative(self, elem: Element) -> Path:
        """A concrete path through ``elem``; all such paths have the same posterior."""
        return tuple(int(a) for a in self.reps[elem.slot])

    # -- cached posterior values -------------------------------------------

    def refresh(self, state: PosteriorState, beta_val: float, incremental: bool = True):
        """Bring the cached (mu, var, ucb) of every element of S in line with ``state``."""
        t = state.t
        slots = np.flatnonzero(self.active)
        if self._V.shape[0] < t:
            grown = np.zeros((max(2 * self._V.shape[0], t), self._cap))
            grown[: self._V.shape[0]] = self._V
            self._V = grown
        if incremental and self._vt == t - 1:
            old = np.array([s for s in slots if s not in self._stale], dtype=np.int64)
            if len(old):
                # one new row of L^{-1} K: forward-substitution step
                k_new = kernel_matrix(state.chi, state.arms[t - 1 : t], self.reps[old])[0]
                L = state.factor
                self._V[t - 1, old] = (k_new - L[t - 1, : t - 1] @ self._V[: t - 1, old]) / L[t - 1, t - 1]
            fresh = np.array(sorted(self._stale), dtype=np.int64)
        else:
            fresh = slots
        if len(fresh):
            K = kernel_matrix(state.chi, state.arms, self.reps[fresh])
            self._V[:t, fresh] = state.whiten(K)
        self._stale.clear()
        self._vt = t
        mu, var = moments_from_whitened(self._V[:t, slots], state.whitened_rewards, state.chi.chi0)
        self.mu[slots] = mu
        self.var[slots] = var
        self.rescore(beta_val)

    def rescore(self, beta_val: float):
        slots = np.flatnonzero(self.active)
        self.ucb[slots] = self.mu[slots] + beta_val * np.sqrt(self.var[slots])

    # -- invariants --------------------------------------------------------

    def check_invariants(self, t: int):
        size = len(self)
        assert size <= (self.D + 1) * t + 1, f"|S|={size} exceeds (D+1)t+1={(self.D + 1) * t + 1}"
        with_free = sum(1 for n in self.nodes if n.depth < self.D and len(n.children) < n.arity)
        assert self.n_dummies() == with_free, "dummy count differs from nodes with uncreated children"
        for s in np.flatnonzero(self.active):
            if self.kinds[s] == "dummy":
                node = self.nodes[self.owner[s]]
                assert node.uncreated(), f"dummy of {node.prefix} has no unexplored child"


def select_arm(tree: SearchTree, state: PosteriorState, beta_val: float,
               rng: np.random.Generator, method: str = "flat") -> Element:
    """Pick the element of S with the highest cached UCB; ties broken uniformly.

    ``beta_val`` must match the value the cache was scored with; pass it
    again to rescore if it changed. ``method="tree"`` propagates maxima to
    ancestors and descends from the root like UCT.
    """
    if state.t == 0:
        return tree.element(tree.root_dummy)
    if not tree.active.any():
        raise ExhaustedTreeError("candidate set is empty: every arm has been played noise-free")
    if method == "flat":
        slots = np.flatnonzero(tree.active)
        u = tree.ucb[slots]
        best = slots[u >= u.max() - TIE_TOL]
        return tree.element(int(best[rng.integers(len(best))]))
    if method == "tree":
        return _descend(tree, rng)
    raise ParameterError(f"unknown selection method {method!r}")


def _descend(tree: SearchTree, rng: np.random.Generator) -> Element:
    ucb = tree.ucb
    best = np.full(len(tree.nodes), -np.inf)
    # children are always created after their parent, so reverse order is post-order
    for idx in range(len(tree.nodes) - 1, -1, -1):
        node = tree.nodes[idx]
        vals = [best[c] for c in node.children.values()]
        for slot in (node.dummy_slot, node.leaf_slot):
            if slot is not None:
                vals.append(ucb[slot])
        best[idx] = max(vals, default=-np.inf)
    idx = 0
    while True:
        node = tree.nodes[idx]
        if node.leaf_slot is not None:
            return tree.element(node.leaf_slot)
        options = [(best[c], "node", c) for c in node.children.values()]
        if node.dummy_slot is not None:
            options.append((ucb[node.dummy_slot], "dummy", node.dummy_slot))
        top = max(v for v, _, _ in options)
        ties = [o for o in options if o[0] >= top - TIE_TOL]
        _, kind, ref = ties[rng.integers(len(ties))]
        if kind == "dummy":
            return tree.element(ref)
        idx = ref


def materialize(tree: SearchTree, chosen: Element, rng: np.random.Generator) -> Path:
    """Turn a selected element into a concrete played leaf (random walk below dummies)."""
    if not tree.active[chosen.slot]:
        raise ParameterError(f"element {chosen} is not in the candidate set")
    if not chosen.is_dummy:
        return tree.nodes[chosen.node].prefix
    parent = tree.nodes[chosen.node]
    free = parent.uncreated()
    a = free[rng.integers(len(free))]
    x = tree._new_node(parent.prefix + (a,), chosen.node)
    if len(free) == 1:
        tree.remove(chosen.slot)
    else:
        tree.reps[chosen.slot] = tree._dummy_rep(parent)
    while tree.nodes[x].depth < tree.D:
        node = tree.nodes[x]
        a = int(rng.integers(node.arity))
        child = tree._new_node(node.prefix + (a,), x)
        if node.arity > 1:
            tree._add_dummy(x)
        x = child
    leaf = tree.nodes[x]
    leaf.leaf_slot = tree._new_slot("leaf", x, leaf.prefix)
    return leaf.prefix


@dataclass
class TraceRow:
    t: int
    path: Path
    reward: float
    mu: float
    sigma: float
    beta: float
    ucb: float
    cum_regret: Optional[float] = None


@dataclass
class SearchTrace:
    rows: list[TraceRow] = field(default_factory=list)
    best_reward: float = -math.inf
    best_path: Optional[Path] = None
    exhausted: bool = False

    def append(self, row: TraceRow):
        self.rows.append(row)
        if row.reward > self.best_reward:
            self.best_reward, self.best_path = row.reward, row.path

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.rows])

    @property
    def paths(self) -> list[Path]:
        return [r.path for r in self.rows]

    def to_csv(self, extra: Optional[dict[str, Sequence]] = None) -> str:
        """RFC-4180 CSV preceded by a ``#`` version comment; ``extra`` appends columns."""
        extra = extra or {}
        buf = io.StringIO()
        buf.write(f"# {TRACE_VERSION}\n")
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(TRACE_COLUMNS + tuple(extra))
        for i, r in enumerate(self.rows):
            w.writerow([
                r.t, "-".join(map(str, r.path)), repr(r.reward), repr(r.mu), repr(r.sigma),
                repr(r.beta), repr(r.ucb), "" if r.cum_regret is None else repr(r.cum_regret),
                *(extra[k][i] for k in extra),
            ])
        return buf.getvalue()


def step(tree: SearchTree, state: PosteriorState, schedule: BetaSchedule,
         reward_source: Callable[[Path], float], rng: np.random.Generator,
         method: str = "flat", incremental: bool = True) -> TraceRow:
    """One iteration: select, materialize, observe, update the posterior and the cache.

    The arm played at iteration ``t+1`` is scored with ``beta_{t+1}``.
    """
    t = state.t
    beta_t = schedule(t + 1)
    if t:
        tree.rescore(beta_t)
    chosen = select_arm(tree, state, beta_t, rng, method)
    if t == 0:
        mu, var = 0.0, state.chi.chi0
    else:
        mu, var = float(tree.mu[chosen.slot]), float(tree.var[chosen.slot])
    path = materialize(tree, chosen, rng)
    y = float(reward_source(path))
    state.add_observation(path, y)
    if state.noise_var == 0:
        slot = _leaf_slot(tree, path)
        if slot is not None:
            tree.remove(slot)
    tree.refresh(state, schedule(state.t + 1), incremental)
    sigma = math.sqrt(var)
    return TraceRow(state.t, path, y, mu, sigma, beta_t, mu + beta_t * sigma)


def _leaf_slot(tree: SearchTree, path: Path) -> Optional[int]:
    idx = 0
    for a in path:
        idx = tree.nodes[idx].children[a]
    return tree.nodes[idx].leaf_slot


@dataclass
class SearchConfig:
    """Everything ``run`` needs besides the reward source.

    Stopping: the run ends at ``max_steps``, when the confidence width
    ``2 beta sigma`` at the best observed arm drops to ``width_threshold``,
    or after ``time_budget`` seconds, whichever comes first.
    """

    chi: ChiSequence
    noise_var: float
    schedule: BetaSchedule
    max_steps: Optional[int] = None
    width_threshold: Optional[float] = None
    time_budget: Optional[float] = None
    seed: int = 0
    branching: Optional[Branching] = None
    method: str = "flat"
    incremental: bool = True

    def __post_init__(self):
        if self.max_steps is None and self.width_threshold is None and self.time_budget is None:
            raise ParameterError("a stopping rule is required (max_steps, width_threshold or time_budget)")
        if self.max_steps is not None and self.max_steps < 0:
            raise ParameterError(f"max_steps must be >= 0, got {self.max_steps}")


def run(config: SearchConfig, reward_source: Callable[[Path], float],
        mean_fn: Optional[Callable[[Path], float]] = None,
        f_star: Optional[float] = None,
        rng: Optional[np.random.Generator] = None) -> tuple[SearchTrace, SearchTree, PosteriorState]:
    """Run the search until the stopping rule fires or the tree is exhausted.

    With ``mean_fn`` and ``f_star`` the trace carries the cumulative regret
    ``t f* - sum f(x_tau)``.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    chi = config.chi
    tree = SearchTree(chi.D, config.branching if config.branching is not None else chi.B)
    state = PosteriorState(chi, config.noise_var)
    trace = SearchTrace()
    track_regret = mean_fn is not None and f_star is not None
    cum = 0.0
    start = time.monotonic()
    while True:
        if config.max_steps is not None and state.t >= config.max_steps:
            break
        if config.time_budget is not None and time.monotonic() - start >= config.time_budget:
            break
        if config.width_threshold is not None and trace.best_path is not None:
            _, var = state.posterior(trace.best_path)
            if 2 * config.schedule(state.t + 1) * math.sqrt(var) <= config.width_threshold:
                break
        try:
            row = step(tree, state, config.schedule, reward_source, rng, config.method, config.incremental)
        except ExhaustedTreeError:
            trace.exhausted = True
            break
        if track_regret:
            cum += f_star - mean_fn(row.path)
            row.cum_regret = cum
        trace.append(row)
    return trace, tree, state
