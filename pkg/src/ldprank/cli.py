"""Command line entry point.

Every option also reads a default from an ``LDPRANK_<OPTION>`` environment
variable (e.g. ``LDPRANK_SEED=7``), which is handy in CI.

Exit codes: 0 success, 2 configuration error, 3 dataset error, 4 partial
sweep failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from .errors import ConfigError, DatasetError, FormatError, LdpRankError, ParseError, ValidationError
from .experiment import (
    DatasetSpec,
    ExperimentConfig,
    RunResult,
    load_grid,
    preset_grid,
    run_experiment,
    run_sweep,
)
from .mechanisms import PrivacyBudget
from .protocol import run_ldp_kwiksort
from .ranking import canonical_pairs
from .theory import BoundInputs, choose_k, is_informative, mu_bound

log = logging.getLogger("ldprank")

ENV_PREFIX = "LDPRANK_"
EXIT_OK, EXIT_CONFIG, EXIT_DATASET, EXIT_PARTIAL = 0, 2, 3, 4


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repeats", type=int, default=int(_env("repeats", 30)))
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--out", default=_env("out"))
    p.add_argument("--no-timing", action="store_true", default=bool(_env("no_timing")),
                   help="leave wall_time_s empty so output is byte-reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldprank", description="Locally private rank aggregation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one configuration repeatedly")
    run.add_argument("--solution", choices=("kwiksort", "dp", "ldp-rr", "ldp-lap"),
                     default=_env("solution", "ldp-rr"))
    source = run.add_mutually_exclusive_group()
    source.add_argument("--dataset", default=_env("dataset"),
                        help="turkdots | turkpuzzle | sushi | path.soc | path.csv | mallows:... | bernoulli:...")
    source.add_argument("--mallows", default=_env("mallows"), metavar="theta=,n=,m=")
    source.add_argument("--bernoulli", default=_env("bernoulli"), metavar="theta=,n=,m=")
    dispersion = run.add_mutually_exclusive_group()
    dispersion.add_argument("--theta-pairwise", action="store_true",
                            help="read theta as the pairwise dispersion (default)")
    dispersion.add_argument("--phi-raw", type=float, default=None,
                            help="raw Mallows spread phi, overriding theta")
    run.add_argument("--epsilon", type=float, default=_float_env("epsilon"))
    run.add_argument("--queries", default=_env("queries"), metavar="INT|auto|binom")
    run.add_argument("--data-dir", default=_env("data_dir"))
    run.add_argument("--count-zeros-as-half", action="store_true")
    run.add_argument("--dump-estimates", metavar="CSV",
                     help="write per-pair tallies and raw/clamped estimates of the first repeat")
    _add_common(run)

    sweep = sub.add_parser("sweep", help="run a grid of configurations")
    grid = sweep.add_mutually_exclusive_group(required=True)
    grid.add_argument("--preset", choices=("k", "epsilon", "n", "theta", "time"))
    grid.add_argument("--grid", metavar="JSON")
    sweep.add_argument("--plot-dir")
    _add_common(sweep)

    bound = sub.add_parser("bound", help="evaluate the utility bound mu")
    bound.add_argument("--n", type=int, required=True)
    bound.add_argument("--m", type=int, required=True)
    bound.add_argument("--k", default="auto")
    bound.add_argument("--epsilon", type=float, required=True)
    bound.add_argument("--theta", type=float, required=True)
    bound.add_argument("--mechanism", choices=("rr", "lap"), default="rr")

    ck = sub.add_parser("choose-k", help="query count maximizing the utility function")
    ck.add_argument("--epsilon", type=float, required=True)
    ck.add_argument("--m", type=int, required=True)
    ck.add_argument("--mechanism", choices=("rr", "lap"), default="rr")
    return parser


def _float_env(name: str):
    value = _env(name)
    return float(value) if value is not None else None


def _dataset_spec(args) -> DatasetSpec:
    if args.mallows:
        text = "mallows:" + args.mallows
    elif args.bernoulli:
        text = "bernoulli:" + args.bernoulli
    elif args.dataset:
        text = args.dataset
    else:
        raise ConfigError("one of --dataset, --mallows or --bernoulli is required")
    spec = DatasetSpec.parse(text)
    if args.phi_raw is not None:
        if spec.kind != "mallows":
            raise ConfigError("--phi-raw applies to Mallows data only")
        spec = DatasetSpec("mallows", theta=1.0 - args.phi_raw, n=spec.n, m=spec.m, phi=args.phi_raw)
    return spec


def _summary(result: RunResult) -> str:
    cfg = result.config
    parts = [f"{cfg.solution} on {result.dataset_label} (n={result.n}, m={result.m}, K={result.k})"]
    for metric in ("error_rate", "avg_kt_norm", "wall_time_s"):
        mean = result.mean(metric)
        if mean is not None:
            parts.append(f"  {metric}: mean={mean:.6g} std={result.std(metric):.6g}")
    return "\n".join(parts)


def _dump_estimates(cfg: ExperimentConfig, result: RunResult, path) -> None:
    data = cfg.dataset.resolve(cfg.seed, cfg.data_dir)
    source = getattr(data, "profile", data)
    mechanism = "rr" if cfg.solution == "ldp-rr" else "lap"
    _, est = run_ldp_kwiksort(source, mechanism, PrivacyBudget(cfg.epsilon, result.k), cfg.repeat_seed(0))
    rows, cols = canonical_pairs(result.m)
    clamped = est.clamped_estimates()
    margins = est.upper()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("j", "l", "answers", "est_jl_raw", "est_lj_raw",
                         "est_jl_clamped", "est_lj_clamped", "margin"))
        for p in range(len(rows)):
            writer.writerow((rows[p], cols[p], int(est.counts[p]), repr(float(est.estimates[0, p])),
                             repr(float(est.estimates[1, p])), repr(float(clamped[0, p])),
                             repr(float(clamped[1, p])), repr(float(margins[p]))))
    counts = est.counts
    print(f"pair coverage: mean={counts.mean():.3f} std={counts.std():.3f} "
          f"min={int(counts.min())} max={int(counts.max())}")


def _cmd_run(args) -> int:
    cfg = ExperimentConfig(
        solution=args.solution,
        dataset=_dataset_spec(args),
        epsilon=args.epsilon,
        queries=args.queries,
        repeats=args.repeats,
        seed=args.seed,
        out=args.out,
        data_dir=args.data_dir,
        count_zeros_as_half=args.count_zeros_as_half,
        timing=not args.no_timing,
    )
    result = run_experiment(cfg)
    print(_summary(result))
    if args.dump_estimates:
        if cfg.solution not in ("ldp-rr", "ldp-lap"):
            raise ConfigError("--dump-estimates needs an ldp solution")
        _dump_estimates(cfg, result, args.dump_estimates)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    if args.out is None:
        raise ConfigError("sweep needs --out")
    if args.preset:
        grid = preset_grid(args.preset, repeats=args.repeats, seed=args.seed, timing=not args.no_timing)
    else:
        grid = load_grid(args.grid)
    sweep = run_sweep(grid, args.out, plot_dir=args.plot_dir)
    for result in sweep.results:
        print(_summary(result))
    for path in sweep.plot_files:
        log.info("plot data: %s", path)
    if sweep.failures:
        for i, msg in sweep.failures:
            print(f"config {i} failed: {msg}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_bound(args) -> int:
    k = choose_k(args.epsilon, args.m, args.mechanism) if args.k == "auto" else int(args.k)
    mu = mu_bound(BoundInputs(args.n, args.m, k, args.epsilon, args.theta), args.mechanism)
    label = "" if is_informative(mu) else " (non-informative)"
    print(f"K={k} mu={mu:.6g} error<{6 * mu:.6g} w.p.>={1 - 2.0 ** (-6 * mu):.6g}{label}")
    return EXIT_OK


def _cmd_choose_k(args) -> int:
    print(choose_k(args.epsilon, args.m, args.mechanism))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "bound": _cmd_bound, "choose-k": _cmd_choose_k}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DatasetError, ParseError, ValidationError, FormatError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LdpRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
