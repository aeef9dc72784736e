"""Command-line entry point.

Subcommands:

* ``meta-train``: run the conditioning loop; writes meta_trace.csv and
  sculpture.ckpt.json, prints the final spectral summary.
* ``diagnose``: evaluate conditioning of generated parameters on held-out
  inputs (or one explicit parameter vector); writes logkappa_test.csv and
  theta_marginals.csv, optionally dumping a metric matrix.
* ``sweep``: run the lambda sweep of the downstream classifier; writes
  final_vs_lambda.csv and the three epoch-by-lambda heatmap CSVs.
* ``synth-data``: write a synthetic stand-in CSV with the public
  diabetes-dataset schema (for environments without the real file).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure (degenerate spectrum / barren-plateau abort).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, backends, downstream, fsmetric, sculpture
from .ansatz import AnsatzSpec
from .config import RunConfig, apply_overrides, load_config
from .errors import (BarrenPlateauError, CheckpointError, ConfigError,
                     DatasetError, DegenerateSpectrumError, FscondError,
                     SingularMetricError)
from .io_utils import write_csv, write_json, write_sidecar
from .spectral import SpectralSummary, eigh_symmetric, spectral_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this CLI reserves 2 for data
    # problems, so remap.
    def error(self, message):
        raise _UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--threads", type=int,
                        help="worker threads (default: machine cores)")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        dest="overrides", help="config override, e.g. meta.steps=10")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fscond", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_meta = sub.add_parser("meta-train", help="train the parameter generator")
    _add_common(p_meta)
    p_meta.add_argument("--steps", type=int,
                        help="shorthand for --set meta.steps=N")

    p_diag = sub.add_parser("diagnose", help="conditioning of generated parameters")
    _add_common(p_diag)
    p_diag.add_argument("--checkpoint", metavar="PATH",
                        help="generator checkpoint (default: paths.checkpoint)")
    p_diag.add_argument("--theta", metavar="PATH|zeros",
                        help="explicit parameter vector instead of a checkpoint "
                             "(JSON array file, or 'zeros'); evaluates a single input")
    p_diag.add_argument("--limit", type=int, default=0,
                        help="cap the number of held-out inputs (0 = all)")
    p_diag.add_argument("--dump-metric", action="store_true",
                        help="also dump the first metric matrix (CSV + JSON)")

    p_sweep = sub.add_parser("sweep", help="lambda sweep of the downstream classifier")
    _add_common(p_sweep)
    p_sweep.add_argument("--checkpoint", metavar="PATH",
                         help="generator checkpoint (default: paths.checkpoint)")
    p_sweep.add_argument("--grid", metavar="L0,L1,...",
                         help="shorthand for --set downstream.lambda_grid=[...]")

    p_synth = sub.add_parser("synth-data", help="write a synthetic dataset CSV")
    p_synth.add_argument("--out", metavar="PATH", required=True)
    p_synth.add_argument("--rows", type=int, default=768)
    p_synth.add_argument("--seed", type=int, default=0)

    return parser


def _resolve(args) -> tuple[RunConfig, Path, int, int]:
    config = load_config(args.config)
    overrides = list(args.overrides)
    if getattr(args, "steps", None) is not None:
        overrides.append(f"meta.steps={args.steps}")
    if getattr(args, "grid", None) is not None:
        overrides.append(f"downstream.lambda_grid=[{args.grid}]")
    if overrides:
        config = apply_overrides(config, overrides)
    seed = args.seed if args.seed is not None else config.seed
    threads = args.threads if args.threads is not None else config.threads
    if threads <= 0:
        threads = os.cpu_count() or 1
    out_dir = Path(args.out if args.out else config.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, out_dir, seed, threads


def _meta_inputs(config: RunConfig, seed: int) -> tuple[np.ndarray, downstream.Dataset | None]:
    """Standardized train features, falling back to synthetic normals."""
    if config.paths.dataset:
        raw = downstream.load_diabetes_csv(config.paths.dataset)
        data = downstream.prepare_dataset(raw, config.downstream.test_fraction,
                                          seed)
        if data.feature_dim != config.ansatz.feature_dim:
            raise DatasetError(
                f"dataset width {data.feature_dim} != ansatz feature_dim "
                f"{config.ansatz.feature_dim}")
        return data.train_features, data
    rng = np.random.default_rng(seed)
    pool = rng.standard_normal((config.meta.synthetic_inputs,
                                config.ansatz.feature_dim))
    logger.info("no dataset configured; meta-training on %d synthetic inputs",
                pool.shape[0])
    return pool, None


def cmd_meta_train(args) -> int:
    config, out_dir, seed, threads = _resolve(args)
    inputs, _ = _meta_inputs(config, seed)
    train_config = config.meta_train_config(threads)

    params, state, trace = sculpture.meta_train(train_config, inputs, seed)

    trace_path = out_dir / "meta_trace.csv"
    write_csv(trace_path, sculpture.MetaTrace.CSV_HEADER, trace.csv_rows())
    write_sidecar(trace_path, config.to_dict(), seed)

    ckpt_path = out_dir / "sculpture.ckpt.json"
    sculpture.save_checkpoint(params, state, ckpt_path, seed=seed,
                              step=len(trace.rows))
    write_sidecar(ckpt_path, config.to_dict(), seed)

    if trace.rows:
        print("final:", trace.rows[-1].summary.describe())
    else:
        print("no steps executed; checkpoint holds the initialization")
    print(f"wrote {trace_path} and {ckpt_path}")
    return EXIT_OK


def _load_theta(arg: str, spec: AnsatzSpec) -> np.ndarray:
    if arg == "zeros":
        return np.zeros(spec.num_params)
    try:
        with open(arg, "r", encoding="utf-8") as fh:
            values = json.load(fh)
    except FileNotFoundError:
        raise DatasetError(f"theta file not found: {arg}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid theta JSON {arg}: {exc}") from None
    theta = np.asarray(values, dtype=np.float64)
    if theta.shape != (spec.num_params,):
        raise DatasetError(
            f"theta has {theta.shape} entries, ansatz needs {spec.num_params}")
    return theta


def _held_out_inputs(config: RunConfig, seed: int, limit: int) -> np.ndarray:
    if config.paths.dataset:
        raw = downstream.load_diabetes_csv(config.paths.dataset)
        data = downstream.prepare_dataset(raw, config.downstream.test_fraction,
                                          seed)
        inputs = data.test_features
    else:
        rng = np.random.default_rng(seed + 1)
        inputs = rng.standard_normal((config.meta.synthetic_inputs // 4,
                                      config.ansatz.feature_dim))
    if limit > 0:
        inputs = inputs[:limit]
    return inputs


def cmd_diagnose(args) -> int:
    config, out_dir, seed, _ = _resolve(args)
    spec = config.ansatz

    explicit_theta = None
    phi = None
    if args.theta is not None:
        explicit_theta = _load_theta(args.theta, spec)
    else:
        ckpt = args.checkpoint or config.paths.checkpoint
        if not ckpt:
            raise CheckpointError(
                "diagnose needs --checkpoint (or paths.checkpoint) or --theta")
        phi, _, _ = sculpture.load_checkpoint(ckpt, spec.feature_dim,
                                              spec.num_params)

    if explicit_theta is not None:
        inputs = _held_out_inputs(config, seed, 1)
        if inputs.shape[0] == 0:
            inputs = np.zeros((1, spec.feature_dim))
        thetas = [explicit_theta]
        inputs = inputs[:1]
    else:
        inputs = _held_out_inputs(config, seed, args.limit)
        thetas = [sculpture.meta_forward(phi, x)[0] for x in inputs]

    rows = []
    first_metric = None
    for idx, (x, theta) in enumerate(zip(inputs, thetas)):
        metric = fsmetric.fs_metric_block_diag(spec, x, theta)
        if first_metric is None:
            first_metric = metric
        summary = spectral_summary(eigh_symmetric(metric),
                                   config.meta.epsilon_floor,
                                   config.meta.degeneracy_epsilon)
        rows.append([idx] + summary.csv_values())

    kappa_path = out_dir / "logkappa_test.csv"
    write_csv(kappa_path, ("input",) + tuple(SpectralSummary.CSV_HEADER), rows)
    write_sidecar(kappa_path, config.to_dict(), seed)

    marg_path = out_dir / "theta_marginals.csv"
    p = spec.num_params
    header = ("input",) + tuple(f"theta_{k:03d}" for k in range(p))
    write_csv(marg_path, header,
              ([idx] + [float(v) for v in theta]
               for idx, theta in enumerate(thetas)))
    write_sidecar(marg_path, config.to_dict(), seed)

    if args.dump_metric and first_metric is not None:
        mat_csv = out_dir / "metric_matrix.csv"
        write_csv(mat_csv, ("row", "col", "value"),
                  fsmetric.dump_metric_csv_rows(first_metric))
        write_sidecar(mat_csv, config.to_dict(), seed)
        mat_json = out_dir / "metric_matrix.json"
        write_json(mat_json, fsmetric.metric_to_json_dict(first_metric))
        write_sidecar(mat_json, config.to_dict(), seed)

    log_kappas = np.array([row[4] for row in rows])
    print(f"diagnosed {len(rows)} input(s): median log_kappa="
          f"{float(np.median(log_kappas)):.4f}")
    print(f"wrote {kappa_path} and {marg_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config, out_dir, seed, threads = _resolve(args)
    spec = config.ansatz

    ckpt = args.checkpoint or config.paths.checkpoint
    if not ckpt:
        raise CheckpointError("sweep needs --checkpoint (or paths.checkpoint)")
    phi, _, _ = sculpture.load_checkpoint(ckpt, spec.feature_dim, spec.num_params)

    if not config.paths.dataset:
        raise DatasetError("sweep needs paths.dataset (the classifier CSV)")
    raw = downstream.load_diabetes_csv(config.paths.dataset)
    data = downstream.prepare_dataset(raw, config.downstream.test_fraction, seed)
    if data.feature_dim != spec.feature_dim:
        raise DatasetError(
            f"dataset width {data.feature_dim} != ansatz feature_dim "
            f"{spec.feature_dim}")

    run_config = config.downstream_config(threads)
    grid = list(config.downstream.lambda_grid)
    seeds = list(config.downstream.seeds)
    table = downstream.lambda_sweep(run_config, data, grid, phi, seeds)

    ckpt_dir = out_dir / "checkpoints"
    for record in table.records:
        payload = {
            "lambda": record.lam,
            "seed": record.seed,
            "theta_task": record.theta_task.tolist(),
            "readout_w": record.readout.w.tolist(),
            "readout_b": record.readout.b.tolist(),
        }
        write_json(ckpt_dir / f"run_lambda_{record.lam!r}_seed_{record.seed}.json",
                   payload)

    final_path = out_dir / "final_vs_lambda.csv"
    write_csv(final_path,
              ("lambda", "seed", "final_loss", "final_accuracy", "final_grad_norm"),
              table.final_rows())
    write_sidecar(final_path, config.to_dict(), seed)

    heatmaps = {"heatmap_loss.csv": "train_loss",
                "heatmap_accuracy.csv": "test_accuracy",
                "heatmap_gradnorm.csv": "theta_grad_norm"}
    lam_header = ("epoch",) + tuple(repr(float(lam)) for lam in grid)
    for filename, field_name in heatmaps.items():
        matrix = table.heatmap(field_name)
        rows = ([e + 1] + [float(v) for v in matrix[e]]
                for e in range(matrix.shape[0]))
        path = out_dir / filename
        write_csv(path, lam_header, rows)
        write_sidecar(path, config.to_dict(), seed)

    print(f"swept {len(grid)} lambda value(s) x {len(seeds)} seed(s); "
          f"wrote outputs under {out_dir}")
    return EXIT_OK


def cmd_synth_data(args) -> int:
    path = downstream.synthesize_diabetes_csv(args.out, rows=args.rows,
                                              seed=args.seed)
    print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "meta-train": cmd_meta_train,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
    "synth-data": cmd_synth_data,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BarrenPlateauError, DegenerateSpectrumError, SingularMetricError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FscondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
