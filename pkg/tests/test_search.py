import math
import time

import numpy as np
import pytest
from scipy import stats

from gpts.errors import ExhaustedTreeError, ParameterError
from gpts.gp import BetaSchedule, PosteriorState
from gpts.kernels import chi_gaussian, chi_linear, chi_mdp, enumerate_paths
from gpts.search import (
    TRACE_COLUMNS,
    TRACE_VERSION,
    SearchConfig,
    SearchTree,
    materialize,
    run,
    select_arm,
    step,
)

from .helpers import all_kernels


def table_reward(B, D, seed=0):
    """Deterministic reward table over all paths."""
    vals = np.random.default_rng(seed).normal(size=B**D)
    index = {p: i for i, p in enumerate(enumerate_paths(B, D))}
    return lambda path: float(vals[index[tuple(path)]])


def run_steps(chi, noise_var, n, seed=0, method="flat", incremental=True, reward=None):
    reward = reward or table_reward(chi.B, chi.D, seed)
    tree = SearchTree(chi.D, chi.B)
    state = PosteriorState(chi, noise_var)
    sched = BetaSchedule(0.1, chi.n_paths)
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        rows.append(step(tree, state, sched, reward, rng, method, incremental))
    return tree, state, rows, sched


class TestSelection:
    def test_first_pick_is_root_dummy(self, rng):
        tree = SearchTree(3, 2)
        state = PosteriorState(chi_linear(2, 3), 0.1)
        e = select_arm(tree, state, 1.0, rng)
        assert e.is_dummy and e.slot == tree.root_dummy and e.node == 0

    def test_materialize_from_root(self, rng):
        tree = SearchTree(3, 2)
        path = materialize(tree, tree.element(tree.root_dummy), rng)
        assert len(path) == 3
        # root keeps a dummy for its other child; each inner node gets one too
        assert tree.n_dummies() == 3
        assert len(tree) == 4
        tree.check_invariants(1)

    def test_materialize_unary_tree(self, rng):
        tree = SearchTree(2, 1)
        assert materialize(tree, tree.element(tree.root_dummy), rng) == (0, 0)
        assert tree.n_dummies() == 0 and len(tree) == 1

    def test_ties_uniform(self):
        chi = chi_linear(3, 1)
        tree = SearchTree(1, 3)
        state = PosteriorState(chi, 1.0)
        rng = np.random.default_rng(7)
        path = materialize(tree, tree.element(tree.root_dummy), rng)
        state.add_observation(path, 0.0)
        tree.refresh(state, 1.0)
        # S = {played leaf, dummy}; make them tie exactly
        tree.ucb[:] = 0.5
        counts = {}
        for _ in range(1000):
            e = select_arm(tree, state, 1.0, rng)
            counts[e.slot] = counts.get(e.slot, 0) + 1
        assert len(counts) == 2
        assert stats.chisquare(list(counts.values())).pvalue > 1e-3

    def test_greedy_picks_observed_max(self):
        chi = chi_linear(2, 2)
        tree, state, rows, _ = run_steps(chi, 0.01, 1, reward=lambda p: 1.0)
        tree.rescore(0.0)
        e = select_arm(tree, state, 0.0, np.random.default_rng(0))
        assert not e.is_dummy
        assert tree.nodes[e.node].prefix == rows[0].path

    def test_empty_candidate_set(self):
        chi = chi_linear(2, 1)
        tree, state, _, sched = run_steps(chi, 0.0, 2)
        with pytest.raises(ExhaustedTreeError):
            select_arm(tree, state, 1.0, np.random.default_rng(0))

    def test_unknown_method(self):
        tree, state, _, _ = run_steps(chi_linear(2, 2), 0.1, 1)
        with pytest.raises(ParameterError):
            select_arm(tree, state, 1.0, np.random.default_rng(0), method="bogus")


class TestCandidateSet:
    @pytest.mark.parametrize("noise_var", [0.0, 0.1])
    def test_invariants(self, noise_var):
        for chi in all_kernels(3, 3):
            tree = SearchTree(3, 3)
            state = PosteriorState(chi, noise_var)
            sched = BetaSchedule(0.1, chi.n_paths)
            rng = np.random.default_rng(1)
            reward = table_reward(3, 3)
            for t in range(1, 28):
                step(tree, state, sched, reward, rng)
                tree.check_invariants(t)

    def test_noise_free_explores_every_arm_once(self):
        chi = chi_linear(2, 2)
        tree, state, rows, sched = run_steps(chi, 0.0, 4)
        assert sorted(r.path for r in rows) == sorted(enumerate_paths(2, 2))
        assert len(tree) == 0
        with pytest.raises(ExhaustedTreeError):
            step(tree, state, sched, table_reward(2, 2), np.random.default_rng(0))

    def test_cached_values_match_fresh_posterior(self):
        for chi in all_kernels(2, 3):
            tree, state, _, _ = run_steps(chi, 0.05, 50)
            for e in tree.elements():
                mu, var = state.posterior(tree.representative(e))
                assert abs(tree.mu[e.slot] - mu) <= 1e-9
                assert abs(tree.var[e.slot] - var) <= 1e-9

    def test_dummy_paths_share_posterior(self):
        chi = chi_gaussian(3, 3, 2.0)
        tree, state, _, _ = run_steps(chi, 0.05, 12)
        for e in tree.elements():
            if not e.is_dummy:
                continue
            node = tree.nodes[e.node]
            through = [p for p in enumerate_paths(3, 3)
                       if p[: node.depth] == node.prefix and p[node.depth] in node.uncreated()]
            moments = np.array([state.posterior(p) for p in through])
            assert np.ptp(moments[:, 0]) <= 1e-12 and np.ptp(moments[:, 1]) <= 1e-12

    def test_argmax_over_all_paths(self):
        for chi in all_kernels(2, 3):
            tree, state, _, sched = run_steps(chi, 0.1, 20)
            b = sched(state.t + 1)
            best_all = max(mu + b * math.sqrt(v)
                           for mu, v in (state.posterior(p) for p in enumerate_paths(2, 3)))
            assert tree.ucb[tree.active].max() == pytest.approx(best_all, abs=1e-9)

    def test_incremental_equals_recompute(self):
        for chi in all_kernels(2, 4):
            a, _, ra, _ = run_steps(chi, 0.05, 40, incremental=True)
            b, _, rb, _ = run_steps(chi, 0.05, 40, incremental=False)
            assert [r.path for r in ra] == [r.path for r in rb]
            np.testing.assert_allclose(a.mu, b.mu, atol=1e-9)
            np.testing.assert_allclose(a.var, b.var, atol=1e-9)

    def test_tree_selection_matches_flat(self):
        for chi in all_kernels(2, 4):
            tree, state, _, sched = run_steps(chi, 0.1, 25)
            for seed in range(5):
                e = select_arm(tree, state, sched(state.t + 1), np.random.default_rng(seed), "tree")
                assert tree.ucb[e.slot] >= tree.ucb[tree.active].max() - 1e-12

    def test_tree_method_runs(self):
        tree, state, rows, _ = run_steps(chi_mdp(2, 3, 0.7), 0.1, 30, method="tree")
        assert len(rows) == 30
        tree.check_invariants(30)

    def test_variable_arity(self):
        chi = chi_linear(3, 3)
        config = SearchConfig(chi, 0.0, BetaSchedule(0.1, 6), max_steps=20,
                              branching=lambda prefix: 1 + len(prefix))
        trace, _, _ = run(config, lambda p: float(sum(p)))
        assert trace.exhausted and len(trace) == 6
        assert all(p[0] == 0 and p[1] < 2 for p in trace.paths)


class TestRun:
    def config(self, **kw):
        chi = kw.pop("chi", chi_linear(2, 3))
        return SearchConfig(chi, kw.pop("noise_var", 0.1), BetaSchedule(0.1, chi.n_paths), **kw)

    def test_requires_stopping_rule(self):
        with pytest.raises(ParameterError):
            self.config()

    def test_zero_steps(self):
        trace, tree, state = run(self.config(max_steps=0), table_reward(2, 3))
        assert len(trace) == 0 and state.t == 0 and trace.best_path is None

    def test_deterministic(self):
        cfg = self.config(max_steps=30, seed=4)
        a, _, _ = run(cfg, table_reward(2, 3))
        b, _, _ = run(cfg, table_reward(2, 3))
        assert a.to_csv() == b.to_csv()

    def test_width_stop(self):
        cfg = self.config(chi=chi_linear(2, 2), noise_var=0.0001, width_threshold=0.5, max_steps=500)
        trace, _, state = run(cfg, table_reward(2, 2))
        assert 0 < len(trace) < 500
        _, var = state.posterior(trace.best_path)
        assert 2 * cfg.schedule(state.t + 1) * math.sqrt(var) <= 0.5

    def test_time_budget(self):
        cfg = self.config(chi=chi_linear(2, 10), time_budget=0.2)
        start = time.monotonic()
        trace, _, _ = run(cfg, lambda p: 0.0)
        assert time.monotonic() - start < 2.0 and len(trace) > 0

    def test_cumulative_regret(self):
        f = table_reward(2, 3)
        f_star = max(f(p) for p in enumerate_paths(2, 3))
        trace, _, _ = run(self.config(max_steps=15), f, mean_fn=f, f_star=f_star)
        expected = np.cumsum([f_star - f(r.path) for r in trace.rows])
        np.testing.assert_allclose([r.cum_regret for r in trace.rows], expected)

    def test_beta_index(self):
        cfg = self.config(max_steps=5)
        trace, _, _ = run(cfg, table_reward(2, 3))
        for r in trace.rows:
            assert r.beta == cfg.schedule(r.t)

    def test_best_tracking(self):
        trace, _, _ = run(self.config(max_steps=20), table_reward(2, 3))
        assert trace.best_reward == trace.rewards.max()
        assert trace.best_path == trace.paths[int(trace.rewards.argmax())]


class TestTraceCsv:
    def test_format(self):
        chi = chi_linear(2, 3)
        cfg = SearchConfig(chi, 0.1, BetaSchedule(0.1, 8), max_steps=3)
        trace, _, _ = run(cfg, lambda p: 0.25)
        text = trace.to_csv({"n": [3, 6, 9]})
        lines = text.split("\r\n")
        assert text.startswith(f"# {TRACE_VERSION}\n")
        assert lines[0].split("\n")[1] == ",".join(TRACE_COLUMNS) + ",n"
        first = lines[1].split(",")
        assert first[0] == "1" and first[2] == "0.25" and first[-1] == "3"
        assert first[3] == "0.0" and first[4] == "1.0"
        assert len(lines) == 5 and lines[-1] == ""

    def test_float_round_trip(self):
        chi = chi_gaussian(2, 3, 2.0)
        cfg = SearchConfig(chi, 0.1, BetaSchedule(0.1, 8), max_steps=5)
        trace, _, _ = run(cfg, table_reward(2, 3))
        body = trace.to_csv().split("\r\n")[1:-1]
        for row, line in zip(trace.rows, body):
            assert float(line.split(",")[2]) == row.reward
