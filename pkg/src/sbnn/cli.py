"""``sbnn`` command line: train, bench, sweep, gradcheck.

Exit codes: 0 success, 1 runtime or training failure, 2 usage or
ingestion error.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields

from . import gradcheck
from .baseline import BaselineConfig, retrain_baseline, train_baseline
from .bench import (DEFAULT_GAMMA_GRID, DEFAULT_LAMBDA_GRID, SweepSpec, prepare,
                    run_monte_carlo, run_sweep)
from .data import load_csv
from .errors import ConfigurationError, IngestionError, SBNNError
from .model import mse_cost, predict, save_model
from .splitboost import TrainConfig, retrain, train, write_history_csv

log = logging.getLogger("sbnn")


@dataclass
class RunConfig:
    trainer: str = "splitboost"
    data_path: str = None
    target_column: str = "charges"
    hidden: int = 10
    gamma: float = 0.1
    lam: float = 0.01
    epsilon: float = 1e-6
    max_epochs: int = 500
    seed: int = 0
    standardize: bool = True
    one_hot_region: bool = False
    lr_switch_as_written: bool = True
    workers: int = 1

    def sb_config(self):
        return TrainConfig(gamma_star=self.gamma, epsilon=self.epsilon, max_epochs=self.max_epochs,
                           hidden=self.hidden, seed=self.seed,
                           lr_switch_as_written=self.lr_switch_as_written)

    def ff_config(self):
        return BaselineConfig(gamma=self.gamma, lam=self.lam, max_epochs=self.max_epochs,
                              epsilon=self.epsilon, hidden=self.hidden, seed=self.seed)


# config-file keys that differ from the attribute name
_FILE_ALIASES = {"lambda": "lam", "data": "data_path"}


def _default_seed():
    env = os.environ.get("SBNN_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigurationError(f"SBNN_SEED must be an integer, got {env!r}") from None


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IngestionError(f"cannot open config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"config {path} is not valid JSON: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, value in doc.items():
        name = _FILE_ALIASES.get(key, key)
        if name not in known:
            raise ConfigurationError(f"unknown config key {key!r}")
        out[name] = value
    return out


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(p, defaults):
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--data", dest="data_path", required=defaults.data_path is None,
                   default=defaults.data_path, help="input CSV")
    p.add_argument("--target-column", default=defaults.target_column, help="column holding the target")
    p.add_argument("--hidden", type=int, default=defaults.hidden, help="hidden units H")
    p.add_argument("--gamma", type=float, default=defaults.gamma, help="learning rate (gamma* for split-boost)")
    p.add_argument("--lambda", dest="lam", type=float, default=defaults.lam,
                   help="L2 weight of the baseline")
    p.add_argument("--epsilon", type=float, default=defaults.epsilon, help="early-stop threshold")
    p.add_argument("--max-epochs", type=int, default=defaults.max_epochs, help="epoch budget")
    p.add_argument("--seed", type=int, default=defaults.seed, help="seed (falls back to $SBNN_SEED)")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=defaults.standardize,
                   help="z-score features and target")
    p.add_argument("--one-hot-region", action=argparse.BooleanOptionalAction, default=defaults.one_hot_region,
                   help="one-hot encode region instead of integer codes")
    p.add_argument("--lr-switch-as-written", action=argparse.BooleanOptionalAction,
                   default=defaults.lr_switch_as_written,
                   help="full rate after a training-cost increase; --no-... inverts the switch")
    p.add_argument("-v", "--verbose", action="store_true", default=False, help="log progress")


def build_parser(defaults=None):
    defaults = defaults or RunConfig(seed=_default_seed())
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="sbnn", description="Split-boost neural network training.",
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train, early-stop, retrain and test one model", formatter_class=fmt)
    _add_common(p, defaults)
    p.add_argument("--trainer", choices=("splitboost", "baseline"), default=defaults.trainer)
    p.add_argument("--out", default="model.json", help="model JSON path")
    p.add_argument("--history", default=None, help="per-epoch history CSV of the early-stopping run")
    p.add_argument("--retrain-history", default=None, help="history CSV of the retraining run (test cost as j_val)")
    p.add_argument("--usd", action="store_true", default=False, help="report j_test in target units")

    p = sub.add_parser("bench", help="Monte Carlo comparison of both trainers", formatter_class=fmt)
    _add_common(p, defaults)
    p.add_argument("--seeds", type=int, default=50, help="number of seeds (0..N-1)")
    p.add_argument("--workers", type=int, default=defaults.workers)
    p.add_argument("--out", default="report.json", help="report JSON path")
    p.add_argument("--csv", default=None, help="per-seed CSV path (default: OUT with .csv suffix)")

    p = sub.add_parser("sweep", help="validation cost over a hyperparameter grid", formatter_class=fmt)
    _add_common(p, defaults)
    p.add_argument("--trainer", choices=("splitboost", "baseline"), default=defaults.trainer)
    p.add_argument("--param", choices=("gamma", "lambda"), default="gamma")
    p.add_argument("--values", type=_float_list, default=None,
                   help=f"comma-separated grid (gamma: {DEFAULT_GAMMA_GRID}, lambda: {DEFAULT_LAMBDA_GRID})")
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")

    p = sub.add_parser("gradcheck", help="finite-difference verification of all gradients", formatter_class=fmt)
    p.add_argument("--seed", type=int, default=defaults.seed, help="first instance seed")
    p.add_argument("--instances", type=int, default=10, help="instances per check")
    p.add_argument("-v", "--verbose", action="store_true", default=False, help="log progress")
    return parser


def _run_config(args):
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(args).items() if k in known})


def _load(cfg):
    return load_csv(cfg.data_path, target_column=cfg.target_column, one_hot_region=cfg.one_hot_region)


def cmd_train(args):
    cfg = _run_config(args)
    dataset = _load(cfg)
    parts = prepare(dataset, cfg.seed, cfg.standardize)
    if cfg.trainer == "splitboost":
        sb = cfg.sb_config()
        first = train(sb, parts.a, parts.b, parts.val)
        final = retrain(sb, parts.a, parts.b, parts.val, first.best_epoch, monitor=parts.test)
    else:
        ff = cfg.ff_config()
        first = train_baseline(ff, parts.train, parts.val)
        final = retrain_baseline(ff, parts.train, parts.val, first.best_epoch, monitor=parts.test)

    xt, yt = parts.test
    yhat = predict(final.params, xt)
    if args.usd:
        j_test = mse_cost(parts.scaler.invert_target(yhat), parts.scaler.invert_target(yt))
    else:
        j_test = mse_cost(yhat, yt)
    save_model(args.out, final.params, parts.scaler, trainer=cfg.trainer,
               feature_names=dataset.feature_names, best_epoch=first.best_epoch)
    if args.history:
        write_history_csv(first.history, args.history)
    if args.retrain_history:
        write_history_csv(final.history, args.retrain_history)
    print(f"best_epoch={first.best_epoch} j_test={j_test!r}")
    return 0


def cmd_bench(args):
    cfg = _run_config(args)
    if args.seeds < 1:
        raise ConfigurationError("--seeds must be at least 1")
    dataset = _load(cfg)
    report = run_monte_carlo(args.seeds, cfg.sb_config(), cfg.ff_config(), dataset,
                             workers=cfg.workers, standardize=cfg.standardize)
    report.write_json(args.out)
    csv_path = args.csv or os.path.splitext(args.out)[0] + ".csv"
    report.write_csv(csv_path)
    print(f"win_rate={report.win_rate!r} seeds={len(report.seeds)} "
          f"sb_epoch_time_s={report.sb_epoch_time_s:.6f} ff_epoch_time_s={report.ff_epoch_time_s:.6f}")
    return 0


def cmd_sweep(args):
    cfg = _run_config(args)
    values = args.values
    if values is None:
        values = DEFAULT_GAMMA_GRID if args.param == "gamma" else DEFAULT_LAMBDA_GRID
    base = cfg.sb_config() if cfg.trainer == "splitboost" else cfg.ff_config()
    spec = SweepSpec(args.param, values, cfg.trainer, base)
    result = run_sweep(spec, _load(cfg), standardize=cfg.standardize)
    if args.out:
        result.write_csv(args.out)
    else:
        result.write_csv(sys.stdout)
    print(f"argmin={result.best_value!r}", file=sys.stderr)
    return 0


def cmd_gradcheck(args):
    errors = gradcheck.run_all(args.seed, args.instances)
    ok = True
    for name, err in errors.items():
        tol = gradcheck.TOLERANCES[name]
        passed = err < tol
        ok &= passed
        print(f"{name}: max_rel_error={err:.3e} tol={tol:.0e} {'ok' if passed else 'FAIL'}")
    return 0 if ok else 1


COMMANDS = {"train": cmd_train, "bench": cmd_bench, "sweep": cmd_sweep, "gradcheck": cmd_gradcheck}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults = RunConfig(seed=_default_seed())
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            defaults = RunConfig(**{**asdict(defaults), **load_config_file(known.config)})
    except (IngestionError, ConfigurationError, TypeError) as exc:
        print(f"sbnn: error: {exc}", file=sys.stderr)
        return 2

    args = build_parser(defaults).parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (IngestionError, ConfigurationError) as exc:
        print(f"sbnn: error: {exc}", file=sys.stderr)
        return 2
    except SBNNError as exc:
        print(f"sbnn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
