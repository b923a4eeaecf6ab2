"""Command-line front end.

Exit codes: 0 success / validation pass, 1 validation fail, 2 usage or I/O
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .learn import (
    CV_THRESHOLD,
    LearnConfig,
    cross_validate,
    default_epochs,
    generate_dataset,
    init_a_priori,
    init_black_box,
    learn_model,
)
from .matcore import TOL_UNITARY, Rng, ShapeError, check_unitary, derive_seed
from .mesh import MeshModel
from .sweeps import SWEEP_KINDS, sweep_apriori, sweep_fidelity, sweep_noise, sweep_train_size
from .tune import TuneConfig, program_phases

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SWEEP_EPILOG = """\
CSV columns per kind:
  train-size            n_modes,train_size,reps,mean_j_test,median_j_test,pass_fraction
                        (grid: --modes x --sizes; black-box start, exact data)
  noise                 n_modes,train_size,alpha,reps,mean_j_test,median_j_test,pass_fraction
                        (grid: --alphas; one --modes value, --train-size)
  apriori               n_modes,apriori_alpha,train_size,reps,mean_j_test,median_j_test,pass_fraction
                        (grid: --modes x --alphas; start from perturbed true basis)
  fidelity-calibration  n_modes,alpha,samples,mean_fidelity,std_fidelity,mean_j
                        (grid: --alphas; one --modes value, --samples draws per alpha)
pass_fraction is the share of repetitions whose mean test J_FR <= --threshold.
"""


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _list_of(conv):
    def parse(text):
        items = [t for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty grid")
        return [conv(t.strip()) for t in items]

    return parse


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_synth_device(args):
    model = MeshModel.haar(args.modes, args.mixers, Rng(args.seed))
    mio.save_model(args.out, model)
    return EXIT_OK


def cmd_gen_train(args):
    device = mio.load_model(args.device)
    data = generate_dataset(device, args.count, args.alpha, Rng(args.seed))
    meta = {"n_modes": device.n_modes, "n_mixers": device.n_mixers, "seed": args.seed}
    mio.save_dataset(args.out, data, meta)
    return EXIT_OK


def cmd_learn(args):
    train = mio.load_dataset(args.train)
    test = mio.load_dataset(args.test) if args.test else None
    n, L = train.n_modes, train.phase_shape[0] - 1
    init_rng = Rng(derive_seed(args.seed, 0))
    if args.init == "blackbox":
        init = init_black_box(n, L, init_rng)
    elif args.init.startswith("file:"):
        init = init_a_priori(mio.load_model(args.init[5:]), args.apriori_alpha, init_rng)
    else:
        raise UsageError(f"--init must be 'blackbox' or 'file:PATH', got {args.init!r}")
    config = LearnConfig(
        minibatch_size=args.minibatch,
        epochs=default_epochs(n) if args.epochs is None else args.epochs,
        inner_iterations=args.inner_iterations,
        stop_j=args.stop_j,
        seed=derive_seed(args.seed, 1),
    )
    model, trace = learn_model(train, test, init, config)
    mio.save_model(args.out_model, model)
    if args.out_trace:
        _write(args.out_trace, mio.trace_to_csv(trace))
    return EXIT_OK


def cmd_validate(args):
    model = mio.load_model(args.model)
    test = mio.load_dataset(args.test)
    report = cross_validate(model, test, args.threshold)
    text = mio.dumps(report.to_dict())
    _write(args.out, text)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_program(args):
    model = mio.load_model(args.model)
    target = mio.load_matrix(args.target)
    if target.shape[0] != model.n_modes:
        raise ShapeError(f"target is {target.shape[0]}x{target.shape[0]}, model has N={model.n_modes}")
    check_unitary(target, TOL_UNITARY, "target")
    result = program_phases(model, target, TuneConfig(restarts=args.restarts, seed=args.seed))
    _write(args.out, mio.dumps(result.to_dict()))
    return EXIT_OK


def cmd_sweep(args):
    kind = args.kind
    common = dict(seed=args.seed)
    learn_opts = dict(reps=args.reps, epochs=args.epochs, test_size=args.test_size)
    if kind == "train-size":
        header, rows = sweep_train_size(args.modes, args.sizes or [], **learn_opts, **common)
    elif kind == "noise":
        header, rows = sweep_noise(args.modes[0], args.train_size, args.alphas or [], **learn_opts, **common)
    elif kind == "apriori":
        header, rows = sweep_apriori(args.modes, args.alphas or [], args.train_size, **learn_opts, **common)
    else:
        header, rows = sweep_fidelity(args.modes[0], args.alphas or [], args.samples, **common)
    _write(args.out, mio.rows_to_csv(header, rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshforge",
        description="Learn layered interferometer models from samples and program phases with them.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-device", help="write a Haar-random ground-truth device model")
    p.add_argument("--modes", type=_positive_int, required=True)
    p.add_argument("--mixers", type=_positive_int, default=None, help="mixing layers L (default: modes)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_device)

    p = sub.add_parser("gen-train", help="sample (phases, unitary) pairs from a device model")
    p.add_argument("--device", required=True)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--alpha", type=_nonneg_float, default=0.0, help="measurement noise level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_train)

    p = sub.add_parser("learn", help="fit basis matrices to a training set")
    p.add_argument("--train", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--init", default="blackbox", help="'blackbox' or 'file:PATH' (a-priori model)")
    p.add_argument("--apriori-alpha", type=_nonneg_float, default=0.0,
                   help="perturbation applied to the file: initial model")
    p.add_argument("--epochs", type=int, default=None, help="default: 1000 for N <= 5, 3000 above")
    p.add_argument("--minibatch", type=_positive_int, default=5)
    p.add_argument("--inner-iterations", type=_positive_int, default=20)
    p.add_argument("--stop-j", type=float, default=1e-12, help="stop once test J reaches this value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-trace", default=None)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("validate", help="cross-validate a model; exit 0 on pass, 1 on fail")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--threshold", type=_nonneg_float, default=CV_THRESHOLD)
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("program", help="find phases realizing a target unitary")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--restarts", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_program)

    p = sub.add_parser("sweep", help="parameter sweeps written as CSV",
                       epilog=SWEEP_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--kind", choices=SWEEP_KINDS, required=True)
    p.add_argument("--modes", type=_list_of(_positive_int), default=[2], help="comma-separated N values")
    p.add_argument("--sizes", type=_list_of(_positive_int), default=None, help="comma-separated M values")
    p.add_argument("--alphas", type=_list_of(_nonneg_float), default=None, help="comma-separated alpha values")
    p.add_argument("--train-size", type=_positive_int, default=5)
    p.add_argument("--reps", type=_positive_int, default=10)
    p.add_argument("--epochs", type=int, default=None, help="default: 1000 for N <= 5, 3000 above")
    p.add_argument("--test-size", type=_positive_int, default=100)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.command == "sweep":
        needs = {"train-size": "sizes", "noise": "alphas", "apriori": "alphas", "fidelity-calibration": "alphas"}
        if getattr(args, needs[args.kind]) is None:
            parser.error(f"--kind {args.kind} needs --{needs[args.kind]}")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError, ShapeError, np.linalg.LinAlgError) as exc:
        # FormatError and ShapeError are ValueErrors
        print(f"meshforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
