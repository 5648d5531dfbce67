"""Command line interface: `flier run` drives a full experiment sweep."""

import argparse
import json
import sys

from . import harness


def _parse_pmus(text):
    if text in ("single", "sparse", "all") or text.startswith("random:"):
        return text
    if text.endswith(".json"):
        try:
            with open(text) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise harness.ConfigError("bad PMU file %s: %s" % (text, exc)) from None
        buses = doc["pmus"] if isinstance(doc, dict) else doc
        return [int(b) for b in buses]
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise harness.ConfigError("bad --pmus value %r" % text) from None


def build_parser():
    p = argparse.ArgumentParser(prog="flier",
                                description="Identify power-network topology changes "
                                            "from sparse PMU observations.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="simulate events and rank candidates")
    run.add_argument("--case", required=True,
                     help=".m or .json case path, bundled name (case57, case118), "
                          "or synth:<n>[:<seed>]")
    run.add_argument("--pmus", default="sparse",
                     help="single | sparse | all | random:<k> | comma list of "
                          "bus ids | path to a .json list")
    run.add_argument("--events", default="lines", choices=["lines", "splits", "merges"])
    run.add_argument("--noise", type=float, default=0.0, help="Gaussian sigma")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--filter", dest="filter_mode", default="on",
                     help="on | off | lenient:<k>")
    run.add_argument("--weights", default=None, metavar="WA,WM",
                     help="weighted score norm: angle,magnitude component weights")
    run.add_argument("--out", default=None, help="output directory for CSV/JSON")
    run.add_argument("--timing", action="store_true",
                     help="also time unfiltered scans (writes timing.csv)")
    run.add_argument("--timing-reps", type=int, default=3)
    run.add_argument("--sample-events", type=int, default=None, metavar="K",
                     help="randomly sample K solvable events instead of sweeping all")
    run.add_argument("--pmu-only", action="store_true",
                     help="observe only the PMU buses themselves, not their neighbours")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        weights = None
        if args.weights is not None:
            try:
                wa, wm = (float(t) for t in args.weights.split(","))
            except ValueError:
                raise harness.ConfigError("bad --weights value %r" % args.weights) \
                    from None
            weights = (wa, wm)
        config = harness.ExperimentConfig(
            case=args.case,
            pmus=_parse_pmus(args.pmus),
            events=args.events,
            noise=args.noise,
            seed=args.seed,
            filter_mode=args.filter_mode,
            observe_neighbors=not args.pmu_only,
            component_weights=weights,
            timing=args.timing,
            timing_reps=args.timing_reps,
            event_sample=args.sample_events,
            out=args.out,
        )
        config.use_filter()   # validate the filter mode early
        result = harness.run_sweep(config)
    except (harness.ConfigError, FileNotFoundError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    summary = result.summary()
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
