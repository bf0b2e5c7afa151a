"""Command-line entry point: ``msae train | encode | decode | eval``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model/stream mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .codec import ModelMismatchError, decode_image, encode_image
from .rangecoder import CorruptStreamError
from .training import DataError, TrainConfig, load_config, load_model, train

EXIT_USAGE, EXIT_DATA, EXIT_MISMATCH = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msae", description="multiscale autoencoder image codec")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", help="JSON config file (defaults when omitted)")
    t.add_argument("--data", required=True, help="directory of training images")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--resume", help="training checkpoint to continue from")

    e = sub.add_parser("encode", help="compress an image")
    e.add_argument("--model", required=True)
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--out", required=True)

    d = sub.add_parser("decode", help="reconstruct an image")
    d.add_argument("--model", required=True)
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--layers", type=int, choices=(1, 2, 3))

    v = sub.add_parser("eval", help="rate/quality report over a directory")
    v.add_argument("--model", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--csv", action="store_true", help="print the CSV to stdout")
    v.add_argument("--panels", action="store_true", help="write side-by-side panels")
    return p


def _run(args) -> int:
    if args.command == "train":
        cfg = load_config(args.config) if args.config else TrainConfig()
        state = train(cfg, args.data, args.out, args.resume)
        print(f"trained {state.step} steps; model written to {args.out}/model.pt")
    elif args.command == "encode":
        r = encode_image(args.inp, load_model(args.model), args.out)
        layers = " ".join(f"{b:.4f}" for b in r.layer_bpp)
        print(f"{r.file_bytes} bytes, {r.bpp:.4f} bpp (layers {layers}), {r.clipped} clipped latents")
    elif args.command == "decode":
        r = decode_image(args.inp, load_model(args.model), args.out, args.layers)
        note = " (partial)" if r.partial else ""
        print(f"decoded {r.layers} layer(s){note} at {r.orig_size[1]}x{r.orig_size[0]}")
    elif args.command == "eval":
        from pathlib import Path

        from .report import rd_report

        records = rd_report(load_model(args.model), args.data, args.out, panels=args.panels)
        if args.csv:
            sys.stdout.write(Path(args.out, "rd_report.csv").read_text())
        if not records:
            print("no images evaluated", file=sys.stderr)
            return EXIT_DATA
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ModelMismatchError as exc:
        print(f"msae: model/stream mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (DataError, CorruptStreamError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"msae: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
