"""Run configuration, seeded experiment execution and result export."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data import (CsvSchema, FederationSplit, load_csv, make_regional_regression,
                   make_rotated_domains)
from .federation import (ExperimentResult, StrategyConfig, TopologyConfig, default_spec,
                         learn_topology, run_experiment)
from .models import LocalTrainConfig, ModelSpec
from .robust import DualConfig
from .topology import topology_to_dot, topology_to_json

RESULT_COLUMNS = ("seed", "round", "strategy", "mean_train_loss", "if_metric", "oof_metric",
                  "lambda_max", "lambda_entropy", "comm_params_cumulative", "wall_ms")

_TOP_KEYS = {"strategy", "rounds", "clients_per_round", "eval_interval", "seeds", "output_dir",
             "record_wall_time", "model", "local", "dual", "topology", "data"}
_MODEL_KEYS = {"kind", "hidden_dim", "activation"}
_LOCAL_KEYS = {"epochs", "batch_size", "eta_theta", "prox_mu"}
_DUAL_KEYS = {"q", "eta_lambda", "clamp_floor"}
_TOPO_KEYS = {"metric", "epsilon", "centrality", "update_frequency", "layer_filter", "clusters"}
_DATA_KEYS = {
    "rotated_domains": {"source", "num_domains", "clients_per_domain", "samples_per_client",
                        "num_classes", "rotation_step_degrees", "noise_sigma", "holdout"},
    "regional_regression": {"source", "num_regions", "clients_per_region", "series_len",
                            "region_offset", "samples_per_client", "noise_sigma", "holdout"},
    "csv": {"source", "path", "feature_cols", "label_col", "client_col", "task", "oof_clients"},
}


class ConfigError(ValueError):
    pass


def _check_keys(section: str, given: dict, allowed: set) -> None:
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected an object")
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}; valid keys are {sorted(allowed)}")


@dataclass
class RunConfig:
    strategy: StrategyConfig
    data: dict
    model: dict = field(default_factory=dict)
    seeds: List[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs"
    record_wall_time: bool = False
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "RunConfig":
        _check_keys("config", raw, _TOP_KEYS)
        for name, keys in (("model", _MODEL_KEYS), ("local", _LOCAL_KEYS),
                           ("dual", _DUAL_KEYS), ("topology", _TOPO_KEYS)):
            _check_keys(name, raw.get(name, {}), keys)
        data = raw.get("data")
        if data is None:
            raise ConfigError("config: missing 'data' section")
        _check_keys("data", data, {"source"} | set().union(*_DATA_KEYS.values()))
        source = data.get("source")
        if source not in _DATA_KEYS:
            raise ConfigError(f"data.source: unknown {source!r}; expected one of {sorted(_DATA_KEYS)}")
        _check_keys(f"data ({source})", data, _DATA_KEYS[source])
        if source == "csv":
            for key in ("path", "feature_cols", "label_col", "client_col"):
                if key not in data:
                    raise ConfigError(f"data: csv source needs {key!r}")
        seeds = raw.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds: expected a non-empty list of integers")
        try:
            strategy = StrategyConfig(
                strategy=raw.get("strategy", "tfl"),
                m=raw.get("clients_per_round", 5),
                rounds=raw.get("rounds", 50),
                dual=DualConfig(**raw.get("dual", {})),
                topo=TopologyConfig(**raw.get("topology", {})),
                local=LocalTrainConfig(**raw.get("local", {})),
                eval_interval=raw.get("eval_interval", 1),
            )
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from None
        return cls(strategy, dict(data), dict(raw.get("model", {})), list(seeds),
                   raw.get("output_dir", "runs"), bool(raw.get("record_wall_time", False)),
                   Path(base_dir))

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from None
        return cls.from_dict(raw, base_dir=path.parent)

    def build_split(self, seed: int = 0) -> FederationSplit:
        """Client datasets; synthetic generators are seeded with the run seed."""
        data = dict(self.data)
        source = data.pop("source")
        if source == "rotated_domains":
            return make_rotated_domains(**data, seed=seed)
        if source == "regional_regression":
            return make_regional_regression(**data, seed=seed)
        path = Path(data["path"])
        if not path.is_absolute():
            path = self.base_dir / path
        schema = CsvSchema(data["feature_cols"], data["label_col"], data["client_col"],
                           data.get("task", "classification"))
        clients = load_csv(path, schema)
        oof = set(data.get("oof_clients", []))
        return FederationSplit([c for c in clients if c.client_id not in oof],
                               [c for c in clients if c.client_id in oof],
                               {"source": "csv", "path": str(path)})

    def model_spec(self, split: FederationSplit) -> ModelSpec:
        base = default_spec(split)
        kind = self.model.get("kind", base.kind)
        try:
            return ModelSpec(kind, base.input_dim, base.output_dim,
                             hidden_dim=self.model.get("hidden_dim", 16 if kind == "mlp1" else None),
                             activation=self.model.get("activation", "relu"),
                             task="regression" if split.in_federation[0].task == "regression"
                             else "classification")
        except ValueError as err:
            raise ConfigError(f"model: {err}") from None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _entropy(lam) -> float:
    lam = np.asarray(lam)
    nz = lam[lam > 0]
    return float(-(nz * np.log(nz)).sum())


def result_rows(result: ExperimentResult, seed: int, strategy: str, wall_time: bool):
    for rec in result.records:
        yield [seed, rec.round, strategy, rec.mean_train_loss, rec.if_metric, rec.oof_metric,
               float(rec.lam.max()), _entropy(rec.lam), rec.comm_params,
               round(rec.wall_ms, 3) if wall_time else None]


def write_results_csv(rows: Sequence[list], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _trajectory(result: ExperimentResult) -> dict:
    return {
        "round": [r.round for r in result.records],
        "sampled": [[int(c) for c in r.sampled] for r in result.records],
        "lambda": [[float(v) for v in r.lam] for r in result.records],
        "prior": [[float(v) for v in r.prior] for r in result.records],
    }


def export_topology(result, node_ids, directory: Path, round_: int) -> List[Path]:
    """Write ``topology_<round>.json`` and ``.dot`` for one topology snapshot."""
    directory.mkdir(parents=True, exist_ok=True)
    labels = node_ids
    if result.assignment is not None:
        labels = [f"cluster{c}" for c in range(result.assignment.cluster_count)]
    js = directory / f"topology_{round_}.json"
    dot = directory / f"topology_{round_}.dot"
    payload = json.loads(topology_to_json(result.topology, result.centrality, result.prior
                                          if result.assignment is None else None, labels))
    if result.assignment is not None:
        payload["client_prior"] = [float(v) for v in result.prior]
        payload["client_cluster"] = [int(v) for v in result.assignment.labels]
    js.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    dot.write_text(topology_to_dot(result.topology, labels), encoding="utf-8")
    return [js, dot]


def _summary(finals: Dict[int, dict], cfg: RunConfig, n_params: int) -> dict:
    report = {"strategy": cfg.strategy.strategy, "seeds": sorted(finals), "per_seed": finals}
    for key in ("if_metric", "oof_metric"):
        values = [f[key] for f in finals.values() if f[key] is not None]
        if values:
            report[f"{key}_mean"] = float(np.mean(values))
            if len(values) >= 2:
                report[f"{key}_std"] = float(np.std(values, ddof=1))
    report["communication"] = {
        "rounds": cfg.strategy.rounds,
        "model_params": n_params,
        "transmitted_params": next(iter(finals.values()))["comm_params_cumulative"],
    }
    return report


def run(cfg: RunConfig, out_dir=None, seeds: Optional[Sequence[int]] = None, echo=print) -> Path:
    """Run every seed, write per-seed and merged outputs, return the output directory."""
    out = Path(out_dir) if out_dir is not None else cfg.base_dir / cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    merged, finals, n_params = [], {}, 0
    for seed in (list(seeds) if seeds else cfg.seeds):
        split = cfg.build_split(seed)
        spec = cfg.model_spec(split)
        n_params = spec.n_params
        node_ids = [d.client_id for d in split.in_federation]
        result = run_experiment(cfg.strategy, split, seed, spec)
        rows = list(result_rows(result, seed, cfg.strategy.strategy, cfg.record_wall_time))
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        write_results_csv(rows, seed_dir / "results.csv")
        (seed_dir / "trajectory.json").write_text(json.dumps(_trajectory(result)) + "\n",
                                                  encoding="utf-8")
        for rnd, topo in result.topologies.items():
            export_topology(topo, node_ids, seed_dir, rnd)
        merged.extend(rows)
        last = result.records[-1]
        finals[seed] = {"if_metric": last.if_metric, "oof_metric": last.oof_metric,
                        "comm_params_cumulative": last.comm_params}
        echo(f"seed={seed} strategy={cfg.strategy.strategy} rounds={last.round} "
             f"if={_fmt_metric(last.if_metric)} oof={_fmt_metric(last.oof_metric)} "
             f"comm_params={last.comm_params}")
    write_results_csv(merged, out / "results.csv")
    (out / "summary.json").write_text(
        json.dumps(_summary(finals, cfg, n_params), indent=2) + "\n", encoding="utf-8")
    return out


def _fmt_metric(v):
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4f}"


def export_topology_at(cfg: RunConfig, round_: int, out_dir=None, seed: Optional[int] = None):
    """Train up to ``round_`` and write the topology over the clients' latest local models."""
    if round_ < 0 or round_ > cfg.strategy.rounds:
        raise ConfigError(f"round must lie in [0, {cfg.strategy.rounds}]")
    out = Path(out_dir) if out_dir is not None else cfg.base_dir / cfg.output_dir
    seed = cfg.seeds[0] if seed is None else seed
    split = cfg.build_split(seed)
    spec = cfg.model_spec(split)
    result = run_experiment(cfg.strategy, split, seed, spec, stop_after=round_)
    clients = result.state.clients
    topo = learn_topology([c.params for c in clients], cfg.strategy.topo,
                          np.random.SeedSequence([seed, round_]))
    return export_topology(topo, [d.client_id for d in split.in_federation], out, round_)
