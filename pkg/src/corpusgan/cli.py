"""Command-line entry point: ``corpusgan <command> [options]``.

Commands: prepare, train, evaluate, report, verify-prop1.  Exit status is 0
on success; on failure a single JSON error line goes to stderr and the exit
status is 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment
from .degan import Prop1Config


def _parse_mass(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad mass vector {text!r}") from exc
    if any(v < 0 for v in vals) or sum(vals) <= 0:
        raise argparse.ArgumentTypeError("mass vector needs non-negative entries with positive sum")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corpusgan", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="tokenize, vectorize, train word2vec and LDA")
    p.add_argument("config")

    p = sub.add_parser("train", help="train weGAN or deGAN for every configured seed")
    p.add_argument("config")
    p.add_argument("--model", choices=("wegan", "degan"), required=True)
    p.add_argument("--stop-after", type=int, default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("evaluate", help="clustering, finetuned accuracy, significance, exports")
    p.add_argument("config")

    p = sub.add_parser("report", help="print the summary table from evaluation metrics")
    p.add_argument("config")

    p = sub.add_parser("verify-prop1", help="check generator convergence on a discrete support")
    p.add_argument("--p", type=_parse_mass, action="append", required=True,
                   help="comma-separated mass vector for one corpus (repeat per corpus)")
    p.add_argument("--epochs", type=int, default=Prop1Config.epochs)
    p.add_argument("--seed", type=int, default=Prop1Config.seed)
    p.add_argument("--frozen", action="store_true", help="freeze generators at q = p")
    p.add_argument("--out", default=None, help="write the JSON report here")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify-prop1":
            if len({len(x) for x in args.p}) != 1:
                raise ValueError("all mass vectors must have the same length")
            report = experiment.cmd_verify_prop1(args.p, args.out, Prop1Config(epochs=args.epochs, seed=args.seed),
                                                 frozen=args.frozen)
            print(json.dumps({"final_tv": report["final_tv"], "final_disc_gap": report["final_disc_gap"],
                              "tv_monotone": report["tv_monotone"]}))
            return 0
        cfg = experiment.load_config(args.config)
        if args.command == "prepare":
            res = experiment.cmd_prepare(cfg)
            print(f"prepare: {res['status']} ({res['manifest']['n_corpora']} corpora, "
                  f"{res['manifest']['vocabulary_size']} terms)")
        elif args.command == "train":
            dirs = experiment.cmd_train(cfg, args.model, stop_after_epoch=args.stop_after)
            print(f"train: {args.model} done for {len(dirs)} seed(s)")
        elif args.command == "evaluate":
            print(experiment.cmd_evaluate(cfg)["summary"], end="")
        elif args.command == "report":
            print(experiment.cmd_report(cfg), end="")
        return 0
    except Exception as exc:  # noqa: BLE001 - top-level error reporting
        logging.getLogger("corpusgan").debug("failure", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "command": args.command, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
