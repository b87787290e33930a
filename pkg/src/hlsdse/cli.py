"""Command-line entry point: ``hlsdse {toy,train,predict,dse,oracle,adrs}``.

Settings resolve in three layers: built-in defaults, then an optional JSON
``--config`` file, then explicit flags. Unknown config keys are rejected.

Exit codes: 0 success, 2 usage, 3 schema/input format, 4 runtime, 5 external service.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .cdfg import (
    ConfigurationError,
    DatasetError,
    load_dataset,
    load_space,
    save_dataset,
    save_space,
    split_dataset,
)
from .seeding import derive_seed

log = logging.getLogger("hlsdse")

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_RUNTIME, EXIT_EXTERNAL = 0, 2, 3, 4, 5

ALGORITHMS = ("nsga2", "sa", "aco", "llmga", "llmsa", "llmaco", "exhaustive")


class UsageError(Exception):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "toy": {"out_dir": None, "seed": 0, "graphs": 20, "kernels": 4},
    "train": {
        "dataset": None, "out_dir": None, "seed": 0, "epochs": 500, "batch_size": 64, "lr": 1e-3,
        "hidden_dim": 128, "env_layers": 3, "action_layers": 2, "env_kind": "sum", "action_kind": "mean",
        "loss": "sum", "plots": True,
    },
    "predict": {"dataset": None, "checkpoint": None, "out_dir": None, "seed": 0, "mode": "soft", "plots": True},
    "dse": {
        "space": None, "out_dir": None, "seed": 0, "algorithm": "nsga2", "evaluator": "synthetic",
        "synthetic_seed": 0, "table": None, "checkpoint": None, "base_graph": None, "graph_id": None,
        "budget": None, "pop": None, "time_cap_s": 3600.0, "reference": None, "workers": 1,
        "capacities": None, "llm": "mock", "mock_mode": "random", "llm_endpoint": None, "llm_model": None,
        "llm_token_env": "LLM_API_TOKEN", "llm_timeout_s": 60.0, "llm_retries": 2,
        "t_init": 0.1, "t_stop": 1e-4, "cooling": 0.05, "rho": 0.9, "alpha": 1.0, "beta": 0.0, "q": 0.1,
        "llm_t_init": 1.0, "v_d": 0.2, "n_ost": 3, "literal_acceptance": False, "plots": True,
    },
    "adrs": {"reference": None, "approx": None},
}
DEFAULTS["oracle"] = dict(DEFAULTS["dse"], algorithm="exhaustive")

REQUIRED = {
    "toy": ("out_dir",),
    "train": ("dataset", "out_dir"),
    "predict": ("dataset", "checkpoint", "out_dir"),
    "dse": ("out_dir",),
    "oracle": ("out_dir",),
    "adrs": ("reference", "approx"),
}


# -- argument parsing --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hlsdse", description="QoR surrogate training and design-space exploration.")
    p.add_argument("--version", action="version", version=f"hlsdse {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp, *, seed=True):
        sp.add_argument("--config", default=S, help="JSON file of settings; flags override it")
        if seed:
            sp.add_argument("--seed", type=int, default=S)
        sp.add_argument("-v", "--verbose", action="store_true", default=S)

    t = sub.add_parser("toy", help="write a small synthetic dataset, space and base graph")
    common(t)
    t.add_argument("--out-dir", default=S)
    t.add_argument("--graphs", type=int, default=S)
    t.add_argument("--kernels", type=int, default=S)

    tr = sub.add_parser("train", help="train the ECoGNN surrogate")
    common(tr)
    tr.add_argument("--dataset", default=S)
    tr.add_argument("--out-dir", default=S)
    tr.add_argument("--epochs", type=int, default=S)
    tr.add_argument("--batch-size", type=int, default=S)
    tr.add_argument("--lr", type=float, default=S)
    tr.add_argument("--hidden-dim", type=int, default=S)
    tr.add_argument("--env-layers", type=int, default=S)
    tr.add_argument("--action-layers", type=int, default=S)
    tr.add_argument("--env-kind", default=S, help="mean|sum|gcn (or alpha|beta|gamma)")
    tr.add_argument("--action-kind", default=S, help="mean|sum|gcn (or alpha|beta|gamma)")
    tr.add_argument("--loss", choices=("sum", "joint"), default=S)
    tr.add_argument("--plots", type=_bool, default=S)

    pr = sub.add_parser("predict", help="predict QoR for graphs with a trained checkpoint")
    common(pr)
    pr.add_argument("--dataset", default=S)
    pr.add_argument("--checkpoint", default=S)
    pr.add_argument("--out-dir", default=S)
    pr.add_argument("--mode", choices=("soft", "sample", "hard"), default=S)
    pr.add_argument("--plots", type=_bool, default=S)

    for name, helptext in (("dse", "run a design-space exploration"),
                           ("oracle", "exhaustive reference front (dse --algorithm exhaustive)")):
        d = sub.add_parser(name, help=helptext)
        common(d)
        d.add_argument("--space", default=S)
        d.add_argument("--out-dir", default=S)
        if name == "dse":
            d.add_argument("--algorithm", choices=ALGORITHMS, default=S)
        d.add_argument("--evaluator", choices=("synthetic", "table", "surrogate"), default=S)
        d.add_argument("--synthetic-seed", type=int, default=S)
        d.add_argument("--table", default=S)
        d.add_argument("--checkpoint", default=S)
        d.add_argument("--base-graph", default=S, help="dataset bundle holding the kernel graph to template")
        d.add_argument("--graph-id", default=S)
        d.add_argument("--budget", type=int, default=S, help="maximum evaluations (n_se)")
        d.add_argument("--pop", type=int, default=S, help="population size (n_pop)")
        d.add_argument("--time-cap-s", type=float, default=S)
        d.add_argument("--reference", default=S, help="reference front CSV for ADRS")
        d.add_argument("--workers", type=int, default=S)
        d.add_argument("--capacities", default=S, help="zcu104, unit, or a JSON object of LUT/FF/BRAM/DSP")
        d.add_argument("--llm", choices=("mock", "http"), default=S)
        d.add_argument("--mock-mode", choices=("random", "adversarial"), default=S)
        d.add_argument("--llm-endpoint", default=S)
        d.add_argument("--llm-model", default=S)
        d.add_argument("--llm-token-env", default=S)
        d.add_argument("--llm-timeout-s", type=float, default=S)
        d.add_argument("--llm-retries", type=int, default=S)
        for flag, typ in (("--t-init", float), ("--t-stop", float), ("--cooling", float), ("--rho", float),
                          ("--alpha", float), ("--beta", float), ("--q", float), ("--llm-t-init", float),
                          ("--v-d", float), ("--n-ost", int)):
            d.add_argument(flag, type=typ, default=S)
        d.add_argument("--literal-acceptance", type=_bool, default=S)
        d.add_argument("--plots", type=_bool, default=S)

    a = sub.add_parser("adrs", help="ADRS of an approximate front against a reference front")
    common(a, seed=False)
    a.add_argument("reference_pos", nargs="?", metavar="REFERENCE")
    a.add_argument("approx_pos", nargs="?", metavar="APPROX")
    a.add_argument("--reference", default=S)
    a.add_argument("--approx", default=S)
    return p


def resolve(command: str, flags: dict[str, Any]) -> dict[str, Any]:
    """Merge defaults, config file and flags into a complete run configuration."""
    cfg = dict(DEFAULTS[command])
    path = flags.pop("config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update(data)
    for key in ("reference_pos", "approx_pos"):
        if flags.get(key) is not None:
            flags[key[:-4]] = flags[key]
        flags.pop(key, None)
    flags.pop("verbose", None)
    flags.pop("command", None)
    cfg.update(flags)
    missing = [k for k in REQUIRED[command] if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError(f"{command}: missing required setting(s) {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return cfg


# -- helpers -------------------------------------------------------------------


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(command: str, cfg: dict[str, Any]) -> dict[str, Any]:
    return {"tool": "hlsdse", "version": __version__, "command": command, "run_config": cfg}


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _emit(data: dict[str, Any]) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, default=str))


# -- commands -------------------------------------------------------------------


def cmd_toy(cfg: dict[str, Any]) -> int:
    from dataclasses import replace

    from .toy import make_toy_bundle, toy_manifest, toy_space

    out = _out_dir(cfg)
    graphs, manifest = make_toy_bundle(int(cfg["graphs"]), seed=derive_seed(cfg["seed"], "toy"), n_kernels=int(cfg["kernels"]))
    save_dataset(graphs, manifest, out / "dataset.jsonl")
    save_space(toy_space(), out / "space.json")
    base = replace(graphs[0], graph_id=graphs[0].benchmark_id or graphs[0].graph_id, label=None)
    save_dataset([base], toy_manifest(), out / "base_graph.jsonl")
    _emit({"dataset": str(out / "dataset.jsonl"), "space": str(out / "space.json"),
           "base_graph": str(out / "base_graph.jsonl"), "graphs": len(graphs)})
    return EXIT_OK


def cmd_train(cfg: dict[str, Any]) -> int:
    from .surrogate.checkpoint import save_checkpoint
    from .surrogate.model import GREEK, EcognnConfig, EcognnModel
    from .surrogate.training import TrainConfig, summed_rmse, train

    graphs, manifest = load_dataset(cfg["dataset"])
    unlabelled = [g.graph_id for g in graphs if g.label is None]
    if unlabelled:
        raise DatasetError(f"training graphs without labels: {', '.join(unlabelled[:5])}")
    train_set, test_set, val_set = split_dataset(graphs, manifest)
    mcfg = EcognnConfig(
        env_layers=int(cfg["env_layers"]), action_layers=int(cfg["action_layers"]),
        hidden_dim=int(cfg["hidden_dim"]), env_kind=cfg["env_kind"], action_kind=cfg["action_kind"],
        targets=manifest.targets, seed=derive_seed(cfg["seed"], "model") % 2**32,
    )
    cfg["kinds"] = f"({GREEK[mcfg.env_kind]}, {GREEK[mcfg.action_kind]})"
    model = EcognnModel(mcfg, manifest.feature_dim, manifest.edge_feature_dim, manifest.normalization)
    tcfg = TrainConfig(epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]), lr=float(cfg["lr"]),
                       seed=derive_seed(cfg["seed"], "train") % 2**32, loss=cfg["loss"])
    result = train(model, train_set, val_set, tcfg, manifest)
    out = _out_dir(cfg)
    meta = _meta("train", cfg)
    save_checkpoint(out / "checkpoint.json", model, history=result.history, seed=cfg["seed"], run_config=meta)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "split", "target", "rmse", "mae", "mape"])
        for row in result.history:
            w.writerow([row["epoch"], row["split"], row["target"], repr(row["rmse"]), repr(row["mae"]),
                        "" if row["mape"] is None else repr(row["mape"])])
    if cfg["plots"] and result.history:
        from .plotting import loss_curve

        loss_curve(result.history, out / "loss_curve.png", meta)
    tr = summed_rmse(result.history, "train")
    summary = {
        "checkpoint": str(out / "checkpoint.json"), "epochs": len(tr), "best_epoch": result.best_epoch,
        "diverged": result.diverged, "splits": {"train": len(train_set), "val": len(val_set), "test": len(test_set)},
        "train_rmse_first": tr.get(1), "train_rmse_last": tr.get(max(tr)) if tr else None, **meta,
    }
    _write_json(out / "train_summary.json", summary)
    _emit(summary)
    return EXIT_OK


def cmd_predict(cfg: dict[str, Any]) -> int:
    from .surrogate.checkpoint import load_checkpoint
    from .surrogate.metrics import mae, mape, rmse, ZeroTargetError

    model, _raw = load_checkpoint(cfg["checkpoint"])
    graphs, manifest = load_dataset(cfg["dataset"])
    if manifest.feature_dim != model.node_dim or manifest.edge_feature_dim != model.edge_dim:
        raise DatasetError(
            f"checkpoint expects {model.node_dim}/{model.edge_dim}-dim node/edge features, "
            f"dataset has {manifest.feature_dim}/{manifest.edge_feature_dim}"
        )
    if not graphs:
        raise DatasetError("dataset holds no graphs")
    targets = list(model.config.targets)
    preds = model.predict(graphs, mode=cfg["mode"], seed=derive_seed(cfg["seed"], "predict"))
    labelled = all(g.label is not None and all(getattr(g.label, t) is not None for t in targets) for g in graphs)
    rows = []
    for g, p in zip(graphs, preds):
        row: dict[str, Any] = {"graph_id": g.graph_id}
        for t in targets:
            row[f"pred_{t}"] = p.get(t)
        if labelled:
            for t in targets:
                row[f"label_{t}"] = g.label.get(t)
                row[f"abserr_{t}"] = abs(p.get(t) - g.label.get(t))
        rows.append(row)
    out = _out_dir(cfg)
    meta = _meta("predict", cfg)
    summary: dict[str, Any] = {}
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        header = list(rows[0])
        w.writerow(header)
        for row in rows:
            w.writerow([row[h] if isinstance(row[h], str) else repr(float(row[h])) for h in header])
        if labelled:
            w.writerow(["#summary", "target", "rmse", "mae", "mape", "note"])
            for t in targets:
                y = [r[f"label_{t}"] for r in rows]
                yh = [r[f"pred_{t}"] for r in rows]
                m = {"rmse": rmse(yh, y), "mae": mae(yh, y)}
                try:
                    m["mape"], note = mape(yh, y), ""
                except ZeroTargetError:
                    log.warning("MAPE undefined for %s (zero labels); reporting MAE instead", t)
                    m["mape"], note = m["mae"], "mae substituted for mape"
                summary[t] = dict(m, note=note)
                w.writerow(["#summary", t, repr(m["rmse"]), repr(m["mae"]), repr(m["mape"]), note])
    if labelled and cfg["plots"]:
        from .plotting import parity_plot

        parity_plot(rows, targets, out / "parity.png", meta)
    report = {"predictions": str(out / "predictions.csv"), "graphs": len(rows), "metrics": summary or None, **meta}
    _write_json(out / "predict_summary.json", report)
    _emit(report)
    return EXIT_OK


def _capacities(value, evaluator_kind: str):
    from .dse.pareto import DeviceCapacities

    if value is None:
        return DeviceCapacities.unit() if evaluator_kind == "synthetic" else DeviceCapacities()
    if isinstance(value, dict):
        return DeviceCapacities.from_dict(value)
    text = str(value).strip()
    if text.lower() == "unit":
        return DeviceCapacities.unit()
    if text.lower() == "zcu104":
        return DeviceCapacities()
    try:
        return DeviceCapacities.from_dict(json.loads(text))
    except (json.JSONDecodeError, TypeError, AttributeError) as exc:
        raise UsageError(f"cannot parse capacities {text!r}") from exc


def _evaluator(cfg, space):
    from .dse.evaluators import SurrogateEvaluator, SyntheticEvaluator, TableEvaluator

    kind = cfg["evaluator"]
    if kind == "synthetic":
        return SyntheticEvaluator(space, seed=int(cfg["synthetic_seed"]))
    if kind == "table":
        if not cfg["table"]:
            raise UsageError("--evaluator table needs --table")
        return TableEvaluator.from_csv(space, cfg["table"])
    from .surrogate.checkpoint import load_checkpoint

    if not cfg["checkpoint"] or not cfg["base_graph"]:
        raise UsageError("--evaluator surrogate needs --checkpoint and --base-graph")
    model, _ = load_checkpoint(cfg["checkpoint"])
    graphs, manifest = load_dataset(cfg["base_graph"])
    if manifest.feature_dim != model.node_dim or manifest.edge_feature_dim != model.edge_dim:
        raise DatasetError("base graph feature dimensions do not match the checkpoint")
    chosen = [g for g in graphs if cfg["graph_id"] in (None, g.graph_id)]
    if not chosen:
        raise DatasetError(f"no graph {cfg['graph_id']!r} in {cfg['base_graph']}")
    return SurrogateEvaluator(model, chosen[0], manifest.pragma_feature_index, seed=derive_seed(cfg["seed"], "surrogate"))


def _client(cfg, space):
    from .llm.client import HttpChatClient, MockClient

    if cfg["llm"] == "mock":
        return MockClient(space, cfg["mock_mode"], seed=derive_seed(cfg["seed"], "llm/mock"))
    if not cfg["llm_endpoint"] or not cfg["llm_model"]:
        raise UsageError("--llm http needs --llm-endpoint and --llm-model")
    return HttpChatClient(cfg["llm_endpoint"], cfg["llm_model"], cfg["llm_token_env"],
                          timeout=float(cfg["llm_timeout_s"]), max_retries=int(cfg["llm_retries"]))


def run_search(cfg: dict[str, Any], space, evaluator, caps):
    """Dispatch to the selected algorithm; returns the run result."""
    from .dse import algorithms as A
    from .dse.budget import BudgetSchedule, budget_for

    alg = cfg["algorithm"]
    cap = float(cfg["time_cap_s"])
    workers = int(cfg["workers"])
    if alg == "exhaustive":
        return A.exhaustive_run(space, evaluator, caps, wall_clock_cap=cap, workers=workers)
    default = budget_for(space.size, cap)
    n_se = int(cfg["budget"]) if cfg["budget"] is not None else default.n_se
    n_pop = int(cfg["pop"]) if cfg["pop"] is not None else min(default.n_pop, n_se)
    try:
        budget = BudgetSchedule(n_se, n_pop, cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seed = derive_seed(cfg["seed"], f"dse/{alg}")
    if alg == "nsga2":
        return A.nsga2_run(space, evaluator, budget, seed, caps, workers=workers)
    if alg == "sa":
        return A.sa_run(space, evaluator, budget, seed, cfg["t_init"], cfg["t_stop"], cfg["cooling"], caps,
                        literal_acceptance=bool(cfg["literal_acceptance"]), workers=workers)
    if alg == "aco":
        return A.aco_run(space, evaluator, budget, seed, cfg["alpha"], cfg["beta"], cfg["rho"], cfg["q"],
                         caps=caps, workers=workers)
    from .llm import algorithms as L

    client = _client(cfg, space)
    params = L.LlmParams(t_init=float(cfg["llm_t_init"]), v_d=float(cfg["v_d"]), n_ost_limit=int(cfg["n_ost"]),
                         caps=caps, workers=workers)
    if alg == "llmga":
        return L.llmga_run(space, evaluator, budget, client, seed, params)
    if alg == "llmsa":
        return L.llmsa_run(space, evaluator, budget, client, seed, cfg["t_init"], cfg["t_stop"], cfg["cooling"],
                           params, literal_acceptance=bool(cfg["literal_acceptance"]))
    return L.llmaco_run(space, evaluator, budget, client, seed, cfg["rho"], params=params)


def cmd_dse(cfg: dict[str, Any], command: str = "dse") -> int:
    from .dse.evaluators import synthetic_space
    from .dse.explorer import write_run_log
    from .dse.io import read_front, write_front
    from .dse.pareto import adrs

    if cfg["space"]:
        space = load_space(cfg["space"])
    elif cfg["evaluator"] == "synthetic":
        space = synthetic_space()
    else:
        raise UsageError("--space is required unless the synthetic evaluator is used")
    caps = _capacities(cfg["capacities"], cfg["evaluator"])
    evaluator = _evaluator(cfg, space)
    reference = read_front(cfg["reference"]) if cfg["reference"] else None
    result = run_search(cfg, space, evaluator, caps)
    out = _out_dir(cfg)
    meta = _meta(command, cfg)
    write_front(out / "front.csv", space, result.front, meta)
    write_run_log(out / "run_log.jsonl", [meta, *result.log])
    transcript = result.extras.pop("transcript", None)
    if transcript is not None:
        write_run_log(out / "transcript.jsonl", [meta, *transcript])
    summary = result.summary()
    summary["space_size"] = space.size
    if reference is not None:
        summary["adrs"] = round(adrs(reference, result.front), 6)
    if cfg["plots"]:
        from .plotting import front_scatter

        front_scatter(result.evaluated, result.front, out / "front.png", reference, title=result.algorithm, meta=meta)
    summary.update(meta)
    _write_json(out / "summary.json", summary)
    _emit(summary)
    return EXIT_OK


def cmd_adrs(cfg: dict[str, Any]) -> int:
    from .dse.io import read_front
    from .dse.pareto import adrs

    value = adrs(read_front(cfg["reference"]), read_front(cfg["approx"]))
    print(f"{value:.4f}")
    return EXIT_OK


# -- entry -----------------------------------------------------------------------


def _classify(exc: BaseException) -> int:
    from .dse.io import FrontFormatError
    from .llm.client import ClientError
    from .surrogate.checkpoint import CheckpointError
    from .surrogate.model import DimensionError

    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, ClientError):
        return EXIT_EXTERNAL
    if isinstance(exc, (DatasetError, CheckpointError, FrontFormatError, DimensionError, ConfigurationError,
                        FileNotFoundError, IsADirectoryError)):
        return EXIT_SCHEMA
    return EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"hlsdse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    flags = vars(ns)
    command = flags.pop("command")
    logging.basicConfig(level=logging.INFO if flags.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(command, flags)
        if command == "toy":
            return cmd_toy(cfg)
        if command == "train":
            return cmd_train(cfg)
        if command == "predict":
            return cmd_predict(cfg)
        if command in ("dse", "oracle"):
            if command == "oracle":
                cfg["algorithm"] = "exhaustive"
            return cmd_dse(cfg, command)
        return cmd_adrs(cfg)
    except Exception as exc:  # mapped onto the documented exit classes
        code = _classify(exc)
        if code == EXIT_RUNTIME:
            log.debug("unhandled error", exc_info=True)
        print(f"hlsdse: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
