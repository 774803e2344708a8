"""Open-loop planning in deterministic discounted MDPs with GP tree search.

An action sequence of length ``D`` is an arm; its reward is the discounted
sum of intermediate rewards along the induced state sequence. The search
depth follows ``D(T) = max(1, ceil(log_B T))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Hashable, Optional, Protocol, Sequence

import numpy as np

from .errors import MDPError, ParameterError
from .gp import BetaSchedule
from .kernels import chi_mdp
from .search import SearchConfig, SearchTrace, run

ENUMERATION_CAP = 1 << 16


class GenerativeMDP(Protocol):
    gamma: float
    initial_state: Hashable

    def n_actions(self, state) -> int: ...

    def step(self, state, action: int) -> tuple[Hashable, float]: ...


@dataclass
class TabularMDP:
    """Deterministic MDP given as per-state action lists ``{"next": s', "reward": r}``.

    Rewards must lie in [-1, 1]. Read-only after construction, so
    concurrent queries are safe.
    """

    transitions: dict
    gamma: float
    initial_state: Hashable
    name: str = "mdp"

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise MDPError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if self.initial_state not in self.transitions:
            raise MDPError(f"initial state {self.initial_state!r} is not defined")
        for s, acts in self.transitions.items():
            if not acts:
                raise MDPError(f"state {s!r} has no actions")
            for a in acts:
                if a["next"] not in self.transitions:
                    raise MDPError(f"state {s!r} leads to undefined state {a['next']!r}")
                if not -1 <= a["reward"] <= 1:
                    raise MDPError(f"reward {a['reward']} from state {s!r} lies outside [-1, 1]")

    def n_actions(self, state) -> int:
        return len(self.transitions[state])

    def step(self, state, action: int):
        acts = self.transitions[state]
        if not 0 <= action < len(acts):
            raise MDPError(f"action {action} invalid in state {state!r} ({len(acts)} actions)")
        a = acts[action]
        return a["next"], float(a["reward"])

    @property
    def max_actions(self) -> int:
        return max(len(a) for a in self.transitions.values())

    @classmethod
    def from_dict(cls, data: dict) -> "TabularMDP":
        try:
            states = data["states"]
            trans = {
                s: [{"next": a["next"], "reward": float(a["reward"]), "name": a.get("name", str(i))}
                    for i, a in enumerate(data["actions"][s])]
                for s in states
            }
            return cls(trans, float(data["gamma"]), data.get("initial_state", states[0]), data.get("name", "mdp"))
        except (KeyError, TypeError) as exc:
            raise MDPError(f"malformed MDP description: {exc!r}") from exc

    @classmethod
    def load(cls, path) -> "TabularMDP":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def chain_mdp() -> TabularMDP:
    """The bundled enumerable chain fixture."""
    text = resources.files("gpts").joinpath("data/chain_mdp.json").read_text(encoding="utf-8")
    return TabularMDP.from_dict(json.loads(text))


def discounted_reward(mdp: GenerativeMDP, actions: Sequence[int]) -> float:
    state, total, disc = mdp.initial_state, 0.0, 1.0
    for a in actions:
        state, r = mdp.step(state, int(a))
        total += disc * r
        disc *= mdp.gamma
    return total


def depth_schedule(T: int, B: int) -> int:
    """``max(1, ceil(log_B T))`` computed in exact integer arithmetic."""
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    D, cover = 0, 1
    while cover < T:
        D += 1
        cover *= B
    return max(1, D)


def _arity_oracle(mdp: GenerativeMDP):
    cache = {(): mdp.initial_state}

    def state_of(prefix):
        if prefix not in cache:
            cache[prefix] = mdp.step(state_of(prefix[:-1]), prefix[-1])[0]
        return cache[prefix]

    return lambda prefix: mdp.n_actions(state_of(tuple(prefix)))


def enumerate_values(mdp: GenerativeMDP, D: int) -> dict[tuple, float]:
    """Discounted reward of every valid length-``D`` action sequence."""
    out = {}

    def walk(state, prefix, total, disc):
        if len(prefix) == D:
            out[prefix] = total
            return
        for a in range(mdp.n_actions(state)):
            nxt, r = mdp.step(state, a)
            walk(nxt, prefix + (a,), total + disc * r, disc * mdp.gamma)
            if len(out) > ENUMERATION_CAP:
                raise OverflowError

    walk(mdp.initial_state, (), 0.0, 1.0)
    return out


def empirical_simple_regret(rewards: Sequence[float], f_star: float) -> tuple[float, float]:
    """``(max(0, f* - y_best), T f* - sum y)``; checks ``f* - y_best <= R'_T / T``."""
    y = np.asarray(rewards, dtype=float)
    if len(y) == 0:
        return 0.0, 0.0
    gap = f_star - y.max()
    cumulative = len(y) * f_star - y.sum()
    if gap > cumulative / len(y) + 1e-12 * max(1.0, abs(f_star)):
        raise AssertionError(f"f* - y_best = {gap} exceeds R'_T / T = {cumulative / len(y)}")
    return max(0.0, gap), float(cumulative)


@dataclass
class PlanResult:
    best_actions: tuple
    best_reward: float
    horizon: int
    T: int
    trace: SearchTrace
    f_star: Optional[float] = None
    optimal_actions: Optional[tuple] = None
    simple_regret: Optional[float] = None
    empirical_simple_regret: Optional[float] = None
    empirical_cumulative_regret: Optional[float] = None
    truncation_cost: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def generative_calls(self) -> int:
        return self.horizon * len(self.trace)

    def to_dict(self) -> dict:
        return {
            "best_actions": list(self.best_actions),
            "best_reward": self.best_reward,
            "horizon": self.horizon,
            "T": self.T,
            "plays": len(self.trace),
            "generative_calls": self.generative_calls,
            "f_star": self.f_star,
            "optimal_actions": None if self.optimal_actions is None else list(self.optimal_actions),
            "simple_regret": self.simple_regret,
            "empirical_simple_regret": self.empirical_simple_regret,
            "empirical_cumulative_regret": self.empirical_cumulative_regret,
            "truncation_cost": self.truncation_cost,
            **self.extra,
        }

    def trace_csv(self) -> str:
        """Trace CSV with an extra ``n`` column counting generative-model calls."""
        n = [r.t * self.horizon for r in self.trace.rows]
        return self.trace.to_csv({"n": n})


def plan(mdp: GenerativeMDP, T: int, noise_var: float, delta: float, seed: int,
         beta_scale: float = 1.0, obs_noise_std: float = 0.0,
         horizon: Optional[int] = None) -> PlanResult:
    """Open-loop plan with the discounted-sum kernel at depth ``D(T)``.

    ``obs_noise_std`` adds Gaussian noise to each observed return; the
    planner's own ``noise_var`` is a model parameter and may differ.
    """
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    arity = _arity_oracle(mdp)
    B = max(2, arity(()))
    if isinstance(mdp, TabularMDP):
        B = max(2, mdp.max_actions)
    D = horizon if horizon is not None else depth_schedule(T, B)
    chi = chi_mdp(B, D, mdp.gamma)
    rng = np.random.default_rng(seed)
    try:
        table = enumerate_values(mdp, D)
    except OverflowError:
        table = None
    n_arms = len(table) if table is not None else B**D

    def reward(path):
        f = discounted_reward(mdp, path)
        if obs_noise_std > 0:
            f += obs_noise_std * rng.standard_normal()
        return f

    config = SearchConfig(chi, noise_var, BetaSchedule(delta, n_arms, beta_scale),
                          max_steps=T, seed=seed, branching=arity)
    trace, _, _ = run(config, reward, rng=rng)
    best = tuple(trace.best_path)
    res = PlanResult(best, trace.best_reward, D, T, trace,
                     truncation_cost=2 * mdp.gamma**D / (1 - mdp.gamma))
    if table is not None:
        opt = max(table, key=table.get)
        res.f_star = table[opt]
        res.optimal_actions = opt
        res.simple_regret = res.f_star - table[best]
        res.empirical_simple_regret, res.empirical_cumulative_regret = empirical_simple_regret(
            trace.rewards, res.f_star
        )
    return res
