"""Experiment harness CLI: gen-data, train, sweep, compare, calibrate."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from . import fusion, plotting, synthdata, trainer
from .config import ConfigError
from .nn import load_checkpoint, save_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(text)


def _require(cfg: dict[str, str], key: str) -> str:
    value = cfg[key]
    if not value:
        raise ConfigError(f"config key {key!r} is required for this command")
    return value


def _train_run(cfg: dict[str, str], outdir: str) -> trainer.RunRecord:
    dataset = synthdata.load_dataset(_require(cfg, "data_dir"))
    record = trainer.train(cfgmod.train_config_from(cfg), dataset)
    record.config = dict(cfg)
    os.makedirs(outdir, exist_ok=True)
    _write_text(os.path.join(outdir, "run.csv"),
                "\n".join(trainer.run_csv_lines(record)) + "\n")
    _write_text(os.path.join(outdir, "summary.txt"),
                "".join(f"{k}={_fmt(v)}\n" for k, v in record.summary.items()))
    _write_text(os.path.join(outdir, "config.echo"), cfgmod.format_config(cfg))
    save_checkpoint(os.path.join(outdir, "model.ckpt"), record.state.items())
    return record


def _load_run(run_dir: str, cfg: dict[str, str]):
    """Rebuild a trained model from a run directory's echo and checkpoint."""
    with open(os.path.join(run_dir, "config.echo")) as f:
        run_cfg = cfgmod.effective_config(cfgmod.parse_config_text(f.read()))
    data_dir = cfg["data_dir"] or run_cfg["data_dir"]
    if not data_dir:
        raise ConfigError("config key 'data_dir' is required (not recorded in the run)")
    dataset = synthdata.load_dataset(data_dir)
    tc = cfgmod.train_config_from(run_cfg)
    model = trainer.build_model(dataset.feat_dims, dataset.num_classes, tc)
    state = load_checkpoint(os.path.join(run_dir, "model.ckpt"))
    alpha = trainer.load_model_state(model, state)
    return model, alpha, tc, dataset


def cmd_gen_data(cfg: dict[str, str], outdir: str) -> int:
    spec = cfgmod.synth_spec_from(cfg)
    dataset = synthdata.generate(spec)
    os.makedirs(outdir, exist_ok=True)
    synthdata.save_dataset(outdir, dataset)
    _write_text(os.path.join(outdir, "config.echo"), cfgmod.format_config(cfg))
    return EXIT_OK


def cmd_train(cfg: dict[str, str], outdir: str) -> int:
    _train_run(cfg, outdir)
    return EXIT_OK


def cmd_sweep(cfg: dict[str, str], outdir: str) -> int:
    model, alpha, tc, dataset = _load_run(_require(cfg, "run_dir"), cfg)
    m = int(cfg["sweep_modality"]) - 1
    if not 0 <= m < model.num_modalities:
        raise ConfigError(f"sweep_modality {m + 1} out of range for {model.num_modalities} modalities")
    sigmas = [float(s) for s in cfg["sweep_sigmas"].split(",")]
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ConfigError("sweep_sigmas must be strictly increasing")

    nm = model.num_modalities
    header = (["sigma"]
              + [f"w_m{k + 1}" for k in range(nm)]
              + [f"rho_m{k + 1}" for k in range(nm)]
              + [f"alpha_m{k + 1}" for k in range(nm)]
              + ["acc_static", "acc_pe", "acc_udml"])
    rows = []
    w_curves = [[] for _ in range(nm)]
    for i, sigma in enumerate(sigmas):
        rng = np.random.default_rng([int(cfg["seed"]), i])
        feats = [f.copy() for f in dataset.test.features]
        feats[m] = synthdata.inject_gaussian(feats[m], sigma, rng)
        batch = synthdata.ModalityBatch(feats, dataset.test.labels.copy())
        accs = {}
        udml_eval = None
        for strategy in fusion.STRATEGIES:
            res = trainer.evaluate(model, batch, strategy=strategy, alpha=alpha,
                                   nue_off=tc.nue_off, eval_sample=tc.eval_sample)
            accs[strategy] = res["accuracy"]
            if strategy == "udml":
                udml_eval = res
        for k in range(nm):
            w_curves[k].append(float(udml_eval["mean_w"][k]))
        rows.append([sigma]
                    + [float(v) for v in udml_eval["mean_w"]]
                    + [float(v) for v in udml_eval["mean_rho"]]
                    + [float(v) for v in alpha]
                    + [accs["static"], accs["pe"], accs["udml"]])

    os.makedirs(outdir, exist_ok=True)
    _write_csv(os.path.join(outdir, "sweep.csv"), header, rows)
    series = [(f"w_m{k + 1}", w_curves[k]) for k in range(nm)]
    plotting.line_svg(os.path.join(outdir, "sweep.svg"), sigmas, series,
                      title=f"Fusion weights vs noise on modality {m + 1}",
                      xlabel="sigma", ylabel="mean weight")
    plotting.line_png(os.path.join(outdir, "sweep.png"), sigmas, series,
                      title=f"Fusion weights vs noise on modality {m + 1}",
                      xlabel="sigma", ylabel="mean weight")
    return EXIT_OK


def cmd_compare(cfg: dict[str, str], outdir: str) -> int:
    os.makedirs(outdir, exist_ok=True)
    parent = cfg["run_dir"] or os.path.join(outdir, "runs")
    kinds = [k for k in cfg["compare_kinds"].split(",") if k]
    for kind in kinds:
        if kind not in ("salt", "gaussian"):
            raise ConfigError(f"compare_kinds: unknown noise kind {kind!r}")
    epsilons = [float(e) for e in cfg["compare_epsilons"].split(",")]
    fraction = float(cfg["compare_fraction"])
    seed = int(cfg["seed"])

    header = ["method", "noise", "epsilon", "acc", "f1"]
    rows = []
    for strategy in fusion.STRATEGIES:
        run_dir = os.path.join(parent, strategy)
        if not os.path.exists(os.path.join(run_dir, "model.ckpt")):
            strat_cfg = dict(cfg)
            strat_cfg["strategy"] = strategy
            _train_run(strat_cfg, run_dir)
        strat_cfg_for_load = dict(cfg)
        model, alpha, tc, dataset = _load_run(run_dir, strat_cfg_for_load)

        def _eval(corruption):
            return trainer.evaluate(model, dataset.test, strategy=strategy,
                                    alpha=alpha, nue_off=tc.nue_off,
                                    eval_sample=tc.eval_sample,
                                    corruption=corruption,
                                    feature_stats=dataset.feature_stats)

        clean = _eval(None)
        rows.append([strategy, "clean", 0.0, clean["accuracy"], clean["macro_f1"]])
        for kind in kinds:
            for eps in epsilons:
                res = _eval(trainer.Corruption(kind=kind, epsilon=eps,
                                               fraction=fraction, seed=seed))
                rows.append([strategy, kind, eps, res["accuracy"], res["macro_f1"]])
    _write_csv(os.path.join(outdir, "compare.csv"), header, rows)
    return EXIT_OK


def cmd_calibrate(cfg: dict[str, str], outdir: str) -> int:
    model, alpha, tc, dataset = _load_run(_require(cfg, "run_dir"), cfg)
    levels = list(tc.noise_levels)
    nm = model.num_modalities
    header = ["sigma", "modality", "sigma_hat_mean", "sigma_hat_std", "n"]
    rows = []
    curves = [[] for _ in range(nm)]
    for i, sigma in enumerate(levels):
        for m in range(nm):
            rng = np.random.default_rng([int(cfg["seed"]), i, m])
            feats = [f.copy() for f in dataset.test.features]
            feats[m] = synthdata.inject_gaussian(feats[m], sigma, rng)
            sigma_hat = model.predict_noise(feats)[:, m]
            curves[m].append(float(sigma_hat.mean()))
            rows.append([sigma, m + 1, float(sigma_hat.mean()),
                         float(sigma_hat.std()), len(sigma_hat)])
    os.makedirs(outdir, exist_ok=True)
    _write_csv(os.path.join(outdir, "calibration.csv"), header, rows)
    series = [(f"modality {m + 1}", curves[m]) for m in range(nm)]
    plotting.line_svg(os.path.join(outdir, "calibration.svg"), levels, series,
                      title="Noise-level calibration", xlabel="injected sigma",
                      ylabel="mean predicted sigma")
    plotting.line_png(os.path.join(outdir, "calibration.png"), levels, series,
                      title="Noise-level calibration", xlabel="injected sigma",
                      ylabel="mean predicted sigma")
    return EXIT_OK


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udml",
                                     description="UDML synthetic-benchmark experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key = value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a single config key (repeatable)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, args.set, args.seed)
        return _COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"udml: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"udml: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
