"""Command line entry point: certify, predict, curve, tightness."""

import argparse
import json
import sys

import numpy as np

from . import evaluation as ev
from .bounds import ProbabilityBounds
from .radius import DEFAULT_MU, certify_bounds
from .smoothing import GENERATOR_NAME
from .tightness import construct_worst_case, is_consistent, region_residuals, verify_violation

TIGHTNESS_COLUMNS = (
    "lam", "radius", "certified_radius", "consistent", "violated", "clean_error", "shift_shortfall",
)


def parse_floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def parse_grid(text):
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return parse_floats(text)


def _common_parser(with_mu=True):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sigma", type=float, default=0.5, help="noise standard deviation")
    common.add_argument("--k", type=int, default=3)
    common.add_argument("--n", type=int, default=100_000, help="noise samples per example")
    common.add_argument("--alpha", type=float, default=0.001, help="failure probability")
    if with_mu:
        common.add_argument("--mu", type=float, default=DEFAULT_MU, help="bisection width")
    common.add_argument("--bound-method", choices=("simuem", "binocp"), default="simuem")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return common


def _dataset_args(parser):
    parser.add_argument("--dataset", required=True, help="dataset JSON file")
    parser.add_argument("--examples", default=None, help="comma-separated example ids to keep")
    parser.add_argument("--workers", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topk-smoothing", description="Certified top-k robustness under Gaussian smoothing."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    p = sub.add_parser("certify", parents=[common], help="certify each example's label")
    _dataset_args(p)
    p.add_argument("--label", type=int, default=None, help="certify this label instead of true_label")

    p = sub.add_parser("predict", parents=[_common_parser(with_mu=False)],
                       help="abstaining top-k prediction per example")
    _dataset_args(p)

    p = sub.add_parser("curve", parents=[common], help="certified accuracy against radius")
    _dataset_args(p)
    p.add_argument("--grid", type=parse_grid, default=list(ev.DEFAULT_GRID),
                   help="radius grid, start:stop:step or a list (default 0:2:0.05)")
    p.add_argument("--rho", type=float, default=ev.DEFAULT_RHO,
                   help="failure probability of the corrected lower bound")
    p.add_argument("--per-example", default=None, help="also write the per-example CSV here")

    p = sub.add_parser("tightness", parents=[common], help="build worst-case classifiers on a shift grid")
    p.add_argument("--bounds-file", default=None,
                   help="JSON with target_label, lower and upper (one entry per label)")
    p.add_argument("--label", type=int, default=None, help="target label for inline bounds")
    p.add_argument("--lower", type=float, default=None, help="inline lower bound for the target")
    p.add_argument("--upper", type=parse_floats, default=None,
                   help="inline upper bounds, one per label (target entry ignored)")
    p.add_argument("--lam", type=parse_grid, default=None,
                   help="shift ratios; default brackets the certified radius")
    return parser


def _config(args, grid=ev.DEFAULT_GRID, rho=ev.DEFAULT_RHO):
    return ev.EvaluationConfig(
        sigma=args.sigma, k=args.k, n=args.n, alpha=args.alpha, mu=getattr(args, "mu", DEFAULT_MU),
        method=args.bound_method, seed=args.seed, grid=grid, rho=rho,
        workers=getattr(args, "workers", 1),
    )


def _dataset(args):
    dataset = ev.load_dataset(args.dataset)
    if args.examples:
        dataset = dataset.select(x.strip() for x in args.examples.split(","))
    return dataset


def _emit(args, text, metadata):
    if args.out is None:
        sys.stdout.write(text)
    else:
        ev.write_text(args.out, text)
        ev.write_metadata(args.out, metadata)


def cmd_certify(args):
    config = _config(args)
    dataset = _dataset(args)
    certificates = ev.certify_dataset(config, dataset, args.label)
    _emit(args, ev.format_csv(ev.certify_rows(dataset, certificates), ev.CERTIFY_COLUMNS), config.metadata())


def cmd_predict(args):
    config = _config(args)
    dataset = _dataset(args)
    predictions = ev.predict_dataset(config, dataset)
    metadata = config.metadata()
    del metadata["mu"]
    _emit(args, ev.format_csv(ev.predict_rows(dataset, predictions, config.n), ev.PREDICT_COLUMNS), metadata)


def cmd_curve(args):
    config = _config(args, grid=args.grid, rho=args.rho)
    dataset = _dataset(args)
    certificates = ev.certify_dataset(config, dataset)
    curve = ev.certified_accuracy_curve(zip(certificates, dataset.true_labels), config.grid,
                                        config.alpha, config.rho)
    if args.per_example:
        ev.write_text(args.per_example, ev.format_csv(ev.certify_rows(dataset, certificates),
                                                      ev.CERTIFY_COLUMNS))
        ev.write_metadata(args.per_example, config.metadata())
    _emit(args, ev.format_csv(ev.curve_rows(curve), ev.CURVE_COLUMNS), config.metadata())


def _bounds(args):
    if args.bounds_file:
        with open(args.bounds_file) as fh:
            data = json.load(fh)
        label, lower, upper = data["target_label"], data["lower"], data["upper"]
    else:
        if args.label is None or args.lower is None or args.upper is None:
            raise ValueError("give --bounds-file or all of --label, --lower, --upper")
        label, lower, upper = args.label, args.lower, args.upper
    upper = np.array(upper, dtype=float)
    upper[int(label)] = 0.0
    return ProbabilityBounds(int(label), float(lower), upper)


def cmd_tightness(args):
    bounds = _bounds(args)
    cert = certify_bounds(bounds, args.k, args.sigma, args.mu, args.seed)
    if args.lam is not None:
        grid = args.lam
    else:
        base = max(cert.radius / args.sigma, 0.0)
        grid = [max(base + d, 0.0) for d in (-0.1, -0.02, 0.02, 0.1)]
    rows = []
    for lam in grid:
        wc = construct_worst_case(bounds, args.k, lam, args.seed)
        clean_error, shortfall = region_residuals(wc, bounds)
        rows.append({
            "lam": repr(float(lam)),
            "radius": repr(float(lam * args.sigma)),
            "certified_radius": repr(cert.radius),
            "consistent": int(is_consistent(wc, bounds)),
            "violated": int(verify_violation(wc, bounds, args.k, lam)),
            "clean_error": repr(float(clean_error)),
            "shift_shortfall": repr(float(shortfall)),
        })
    metadata = {"sigma": args.sigma, "k": args.k, "mu": args.mu, "seed": args.seed,
                "generator": GENERATOR_NAME}
    _emit(args, ev.format_csv(rows, TIGHTNESS_COLUMNS), metadata)


COMMANDS = {"certify": cmd_certify, "predict": cmd_predict, "curve": cmd_curve, "tightness": cmd_tightness}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        parser.exit(2, f"topk-smoothing {args.command}: error: {exc}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
