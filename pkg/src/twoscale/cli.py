"""Command line interface: simulate -> infer -> report, plus validate.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 IO/schema error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from .errors import (
    AllWeightsZero,
    ChecksumMismatch,
    ConfigError,
    NotPositiveDefinite,
    SchemaVersionMismatch,
    TwoscaleError,
)
from .gibbs import DOF_MODES, run_chain
from .model import validate_model
from .persist import (
    dataset_digest,
    export_csv,
    load_chain,
    load_config,
    load_dataset,
    save_chain,
    save_dataset,
)
from .simulate import generate
from .validate import run_validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger("twoscale")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoscale", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a config")
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--out", required=True, help="dataset file to write")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("infer", help="fit states and noise covariances to a dataset")
    p.add_argument("--dataset", required=True, help="dataset file")
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--out", required=True, help="chain file to write")

    p = sub.add_parser("report", help="export analysis CSVs for a chain/dataset pair")
    p.add_argument("--chain", required=True, help="chain file")
    p.add_argument("--dataset", required=True, help="dataset file")
    p.add_argument("--out-dir", required=True, help="directory for the CSV files")

    p = sub.add_parser("validate", help="run the built-in oracle suite")
    p.add_argument("--dof-mode", choices=DOF_MODES, default="full-count")
    return parser


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
        config = dataclasses.replace(config, seed=args.seed)
    coupling = config.resolved_coupling()
    validate_model(config.dims, coupling, config.transition)
    data = generate(config.dims, coupling, config.noise, config.seed, kind=config.transition)
    digest = save_dataset(args.out, data)
    log.info("wrote dataset %s (sha256 %s)", args.out, digest[:12])
    return EXIT_OK


def _same_transition(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if hasattr(a, "fine_matrix"):
        return np.array_equal(a.fine_matrix, b.fine_matrix) and np.array_equal(
            a.coarse_matrix, b.coarse_matrix
        )
    return True


def _cmd_infer(args) -> int:
    data = load_dataset(args.dataset)
    config = load_config(args.config)
    if config.dims != data.dims:
        raise ConfigError(
            f"config dims {config.dims} do not match dataset dims {data.dims}"
        )
    if not _same_transition(config.transition, data.kind):
        raise ConfigError("config transition kind does not match the dataset's stored kind")
    chain = run_chain(data, config.priors, config.settings())
    chain.config = config
    chain.dataset_digest = dataset_digest(data)
    digest = save_chain(args.out, chain)
    log.info("wrote chain %s (sha256 %s)", args.out, digest[:12])
    return EXIT_OK


def _cmd_report(args) -> int:
    chain = load_chain(args.chain)
    data = load_dataset(args.dataset)
    digest = dataset_digest(data)
    if chain.dataset_digest != digest:
        raise ChecksumMismatch(
            f"chain was fitted to dataset {chain.dataset_digest}, got {digest}"
        )
    paths = export_csv(chain, data, args.out_dir)
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    results = run_validate(dof_mode=args.dof_mode)
    failed = False
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        line = f"[{status}] {res.name}: {res.measured}"
        if res.note:
            line += f" ({res.note})"
        print(line)
        failed = failed or not res.passed
    return EXIT_NUMERIC if failed else EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "infer": _cmd_infer,
        "report": _cmd_report,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (SchemaVersionMismatch, ChecksumMismatch, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (AllWeightsZero, NotPositiveDefinite, TwoscaleError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
