"""Command-line experiment harness: ``gpts simulate|spectrum|bounds|plan``.

Every subcommand reads an optional JSON config (``--config``) and applies
flag overrides on top. Outputs are UTF-8 CSV and indented JSON; identical
config and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds import (
    SUBMODULAR,
    bound_report,
    infogain_bound_kernel_independent,
    infogain_greedy,
    infogain_of_arms,
    regret_bound,
)
from .errors import GPTSError, ParameterError
from .gp import BetaSchedule
from .kernels import ChiSequence, make_chi, path_index
from .planning import TabularMDP, chain_mdp, plan
from .search import SearchConfig, run
from .spectrum import DEFAULT_CAP, build_gram, closed_form_spectrum, reorder, sample_gp_prior


@dataclass
class ExperimentConfig:
    kind: str = "linear"
    B: int = 2
    D: int = 3
    s: Optional[float] = None
    gamma: Optional[float] = None
    noise_std: float = 0.1
    delta: float = 0.05
    beta_scale: float = 1.0
    T: int = 100
    replications: int = 1
    seed: int = 0
    width_threshold: Optional[float] = None
    time_budget: Optional[float] = None
    checkpoints: list = field(default_factory=list)
    selection: str = "flat"
    mdp: Optional[str] = None
    horizon: Optional[int] = None
    obs_noise_std: float = 0.0
    I_u: Optional[float] = None
    gram: bool = False
    out: Optional[str] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError(f"replications must be >= 1, got {self.replications}")
        if self.T < 0:
            raise ParameterError(f"T must be >= 0, got {self.T}")
        if not self.noise_std >= 0:
            raise ParameterError(f"noise_std must be >= 0, got {self.noise_std}")

    @property
    def noise_var(self) -> float:
        return self.noise_std**2

    def chi(self) -> ChiSequence:
        return make_chi(self.kind, self.B, self.D, s=self.s, gamma=self.gamma)

    @classmethod
    def from_sources(cls, path: Optional[str], overrides: dict) -> "ExperimentConfig":
        data = {}
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ParameterError(f"cannot read config {path}: {exc}") from exc
            data.update(data.pop("kernel", {}) or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write(out: Optional[str], name: str, text: str) -> Optional[Path]:
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    target.write_bytes(text.encode("utf-8"))
    return target


def _mean_std(values) -> dict:
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    if len(arr) == 0:
        return {"mean": None, "std": None}
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def simulate_replication(cfg: ExperimentConfig, chi: ChiSequence, rep: int) -> tuple[dict, str]:
    """One synthetic run: draw f from the GP prior, search, score regret and bounds."""
    rng = np.random.default_rng(cfg.seed + rep)
    f, f_star = sample_gp_prior(chi, rng)
    B = chi.B

    def mean_fn(path):
        return float(f[path_index(path, B)])

    def reward(path):
        y = mean_fn(path)
        return y + cfg.noise_std * rng.standard_normal() if cfg.noise_std > 0 else y

    search_cfg = SearchConfig(
        chi, cfg.noise_var, BetaSchedule(cfg.delta, chi.n_paths, cfg.beta_scale),
        max_steps=cfg.T, width_threshold=cfg.width_threshold, time_budget=cfg.time_budget,
        seed=cfg.seed + rep, method=cfg.selection,
    )
    trace, _, state = run(search_cfg, reward, mean_fn=mean_fn, f_star=f_star, rng=rng)
    T = len(trace)
    cum = [r.cum_regret for r in trace.rows]
    played = [mean_fn(p) for p in trace.paths]
    row = {
        "replication": rep,
        "seed": cfg.seed + rep,
        "T": T,
        "exhausted": trace.exhausted,
        "f_star": f_star,
        "cumulative_regret": cum[-1] if cum else 0.0,
        "regret_per_step": cum[-1] / T if T else 0.0,
        "empirical_cumulative_regret": T * f_star - float(trace.rewards.sum()) if T else 0.0,
        "simple_regret": f_star - max(played) if played else None,
        "distinct_arms": len(set(trace.paths)),
        "checkpoints": {str(c): cum[c - 1] / c for c in cfg.checkpoints if 1 <= c <= T},
    }
    if cfg.noise_var > 0 and T:
        I_u = infogain_of_arms(chi, state.arms, cfg.noise_var)
        b_T, b_Nn = infogain_bound_kernel_independent(T, chi.n_nodes, cfg.noise_var)
        I_g, _ = infogain_greedy(reorder(closed_form_spectrum(chi)), T, cfg.noise_var)
        rb = regret_bound(T, chi.n_paths, cfg.delta, cfg.noise_var, I_u)
        row.update({
            "infogain_actual": I_u,
            "bound_T": b_T,
            "bound_Nn": b_Nn,
            "infogain_greedy": I_g,
            "max_infogain_bound_greedy": SUBMODULAR * I_g,
            "regret_bound": rb,
            "violations": {
                "bound_T": I_u > b_T + 1e-9,
                "bound_Nn": I_u > b_Nn + 1e-9,
                "submodularity_chain": I_u > SUBMODULAR * I_g + 1e-9,
            },
            "regret_below_bound": row["cumulative_regret"] <= rb,
        })
    return row, trace.to_csv()


def cmd_simulate(cfg: ExperimentConfig) -> dict:
    chi = cfg.chi()
    if chi.n_paths > DEFAULT_CAP:
        raise ParameterError(f"simulate samples f exactly; N = {chi.n_paths} exceeds cap {DEFAULT_CAP}")
    reps = []
    for rep in range(cfg.replications):
        row, text = simulate_replication(cfg, chi, rep)
        _write(cfg.out, f"trace_rep{rep:03d}.csv", text)
        reps.append(row)
    keys = ["cumulative_regret", "regret_per_step", "empirical_cumulative_regret", "simple_regret",
            "infogain_actual", "regret_bound"]
    summary = {
        "config": asdict(cfg) | {"out": None},
        "kernel": chi.to_dict(),
        "aggregate": {k: _mean_std(r.get(k) for r in reps) for k in keys},
        "checkpoints": {
            str(c): _mean_std(r["checkpoints"].get(str(c)) for r in reps) for c in cfg.checkpoints
        },
        "any_violation": any(any(r.get("violations", {}).values()) for r in reps),
        "replications": reps,
    }
    _write(cfg.out, "summary.json", _dumps(summary))
    return summary


def gram_csv(K: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    for row in K:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_spectrum(cfg: ExperimentConfig) -> dict:
    chi = cfg.chi()
    spec = closed_form_spectrum(chi)
    report = {"spectrum": spec.to_dict(), "in_gaussian_regime": chi.in_gaussian_regime}
    if chi.n_paths <= DEFAULT_CAP:
        report["lambda_hat"] = reorder(spec).to_array().tolist()
    _write(cfg.out, "spectrum.json", _dumps(report))
    if cfg.gram:
        _write(cfg.out, "gram.csv", gram_csv(build_gram(chi)))
    return report


def cmd_bounds(cfg: ExperimentConfig) -> dict:
    if cfg.noise_var <= 0:
        raise ParameterError("bounds require noise_std > 0")
    report = bound_report(cfg.chi(), cfg.T, cfg.delta, cfg.noise_var, cfg.I_u)
    _write(cfg.out, "bounds.json", _dumps(report))
    return report


def cmd_plan(cfg: ExperimentConfig):
    mdp = TabularMDP.load(cfg.mdp) if cfg.mdp else chain_mdp()
    res = plan(mdp, cfg.T, cfg.noise_var, cfg.delta, cfg.seed, beta_scale=cfg.beta_scale,
               obs_noise_std=cfg.obs_noise_std, horizon=cfg.horizon)
    _write(cfg.out, "plan.json", _dumps(res.to_dict()))
    _write(cfg.out, "trace.csv", res.trace_csv())
    return res


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpts", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--T", type=int, dest="T")
        sp.add_argument("--out", help="output directory")

    def kernel(sp):
        sp.add_argument("--kind", choices=["linear", "gaussian", "mdp"])
        sp.add_argument("--B", type=int, dest="B")
        sp.add_argument("--D", type=int, dest="D")
        sp.add_argument("--s", type=float)
        sp.add_argument("--gamma", type=float)

    sim = sub.add_parser("simulate", help="regret experiments on GP-prior draws")
    common(sim)
    kernel(sim)
    sim.add_argument("--noise", type=float, dest="noise_std", help="observation noise std")
    sim.add_argument("--delta", type=float)
    sim.add_argument("--beta-scale", type=float, dest="beta_scale")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--selection", choices=["flat", "tree"])
    sim.add_argument("--checkpoints", type=int, nargs="+", help="report R_t/t at these t")

    spec = sub.add_parser("spectrum", help="closed-form eigenvalues of the whole-tree kernel")
    common(spec)
    kernel(spec)
    spec.add_argument("--gram", action="store_true", default=None, help="also write gram.csv")

    bnd = sub.add_parser("bounds", help="information-gain and regret bounds")
    common(bnd)
    kernel(bnd)
    bnd.add_argument("--noise", type=float, dest="noise_std")
    bnd.add_argument("--delta", type=float)
    bnd.add_argument("--I-u", type=float, dest="I_u", help="realized information gain")

    pl = sub.add_parser("plan", help="open-loop planning in a tabular MDP")
    common(pl)
    pl.add_argument("--mdp", help="MDP JSON (default: bundled chain)")
    pl.add_argument("--noise", type=float, dest="noise_std")
    pl.add_argument("--delta", type=float)
    pl.add_argument("--beta-scale", type=float, dest="beta_scale")
    pl.add_argument("--horizon", type=int)
    pl.add_argument("--obs-noise", type=float, dest="obs_noise_std")
    return p


COMMANDS = {"simulate": cmd_simulate, "spectrum": cmd_spectrum, "bounds": cmd_bounds, "plan": cmd_plan}


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        cfg = ExperimentConfig.from_sources(config_path, args)
        result = COMMANDS[command](cfg)
    except GPTSError as exc:
        print(f"gpts {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except TypeError as exc:
        print(f"gpts {command}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if command in ("spectrum", "bounds"):
        sys.stdout.write(_dumps(result))
    elif command == "plan":
        sys.stdout.write(_dumps(result.to_dict()))
    else:
        sys.stdout.write(_dumps({"aggregate": result["aggregate"], "checkpoints": result["checkpoints"],
                                 "any_violation": result["any_violation"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
