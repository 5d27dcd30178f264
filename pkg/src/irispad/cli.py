"""Command-line entry point: ``irispad <subcommand> [flags]``.

Subcommands: synth, train, score, metrics, matrix, cam, report. Every
``--out`` is a directory and receives an ``experiment.toml`` provenance
record. Failures print one line ``error: <category>: <message>`` to stderr
and exit 1; usage errors exit 2.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, InputError, IrisPadError

log = logging.getLogger("irispad")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _records_for(args, side="test"):
    from .data import instantiate_protocol, load_manifest, load_protocol

    if not args.manifest:
        raise ConfigurationError("--manifest is required")
    records = load_manifest(args.manifest)
    if args.protocol:
        train, test = instantiate_protocol(load_protocol(args.protocol), records, getattr(args, "fold", 0) or 0)
        return {"train": train, "test": test, "all": records}[side]
    if side == "all":
        return records
    chosen = [r for r in records if r.split == side]
    return chosen if chosen else records


def cmd_synth(args):
    from ._toml import load_toml
    from .config import write_provenance
    from .data.synth import SynthSpec, synthesize_dataset

    table = {}
    if args.config:
        table = load_toml(args.config).get("synth", {})
    spec = SynthSpec.from_dict(table)
    if args.image_size:
        spec.image_size = args.image_size
    out = Path(args.out)
    write_provenance(out, "synth", args.seed, config={"synth": spec.to_dict()})
    records = synthesize_dataset(spec, out, seed=args.seed)
    print(f"wrote {len(records)} samples to {out / 'manifest.csv'}")
    return 0


def cmd_train(args):
    from .config import load_experiment, write_provenance
    from .data import instantiate_protocol, load_manifest
    from .model import build_model
    from .training import train

    exp = load_experiment(args.config, seed=args.seed, variant=args.variant, manifest=args.manifest,
                          protocol=args.protocol, out=args.out, epochs=args.epochs, fold=args.fold)
    if not exp.manifest:
        raise ConfigurationError("no manifest given (--manifest or [data] manifest)")
    if not exp.out_dir:
        raise ConfigurationError("no output directory given (--out or [output] dir)")
    out = Path(exp.out_dir)
    write_provenance(out, "train", exp.seed, config=exp.to_dict())
    records = load_manifest(exp.manifest)
    if exp.protocol is not None:
        train_records, _ = instantiate_protocol(exp.protocol, records, exp.fold)
    else:
        train_records = [r for r in records if r.split == "train"]
    model = build_model(exp.model, seed=exp.seed)
    result = train(model, train_records, exp.train, out_dir=out)
    last = result.log[-1].overall if result.log else float("nan")
    print(f"trained {exp.model.variant} for {len(result.log)} epochs (final loss {last:.4f}); "
          f"checkpoint {result.checkpoint}")
    return 0


def cmd_score(args):
    from .config import write_provenance
    from .model import load_checkpoint
    from .scores import write_scores
    from .training import score

    if not args.checkpoint:
        raise ConfigurationError("--checkpoint is required")
    model, extra = load_checkpoint(args.checkpoint, variant=args.variant)
    records = _records_for(args, args.side)
    out = Path(args.out)
    write_provenance(out, "score", args.seed, config={
        "checkpoint": str(Path(args.checkpoint).resolve()), "manifest": args.manifest,
        "protocol": args.protocol, "side": args.side, "stride": args.stride,
        "model": model.config.to_dict(),
    })
    scores = score(model, records, stride=args.stride)
    path = write_scores(scores, out / "scores.csv")
    print(f"wrote {len(scores)} scores to {path}")
    return 0


def _read_all_scores(paths):
    from .scores import read_scores

    records = []
    for p in paths:
        records.extend(read_scores(p))
    return records


def cmd_metrics(args):
    from .metrics import evaluate, format_report
    from .scores import aggregate_videos

    if not args.scores:
        raise ConfigurationError("--scores is required")
    records = _read_all_scores(args.scores)
    if not records:
        raise InputError("no scores found")
    blocks = [format_report(evaluate(records, args.threshold, args.bpcer_target), "[per sample]")]
    if any(r.frame is not None for r in records):
        videos = aggregate_videos(records)
        blocks.append(format_report(evaluate(videos, args.threshold, args.bpcer_target), "[per video, mean of frames]"))
    text = "\n\n".join(blocks)
    print(text)
    if args.out:
        from .config import write_provenance

        out = Path(args.out)
        write_provenance(out, "metrics", args.seed, config={
            "scores": [str(Path(p).resolve()) for p in args.scores],
            "threshold": args.threshold, "bpcer_target": args.bpcer_target,
        })
        (out / "metrics.txt").write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_matrix(args):
    from .config import write_provenance
    from .matrix import load_matrix_spec, matrix_csv, matrix_text, run_protocol_matrix

    if not args.config:
        raise ConfigurationError("--config (matrix file) is required")
    spec = load_matrix_spec(args.config)
    if args.threshold is not None:
        spec.threshold = args.threshold
    if args.bpcer_target is not None:
        spec.bpcer_target = args.bpcer_target
    report = run_protocol_matrix(spec)
    text = matrix_text(report)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        write_provenance(out, "matrix", args.seed, config={
            "name": spec.name, "layout": spec.layout, "train": spec.train, "test": spec.test,
            "variants": spec.variants, "scores": spec.scores, "base_dir": spec.base_dir,
            "threshold": spec.threshold, "bpcer_target": spec.bpcer_target,
        })
        (out / "matrix.csv").write_text(matrix_csv(report), encoding="utf-8")
        (out / "matrix.txt").write_text(text, encoding="utf-8")
    return 0


def cmd_cam(args):
    from .config import write_provenance
    from .explain import cam_filename, overlay, resolve_layer, score_cam
    from .model import load_checkpoint
    from .training import load_arrays, normalize

    if not args.checkpoint:
        raise ConfigurationError("--checkpoint is required")
    resolve_layer(args.layer)
    model, _ = load_checkpoint(args.checkpoint, variant=args.variant)
    records = _records_for(args, args.side)
    if args.limit:
        records = records[: args.limit]
    out = Path(args.out)
    write_provenance(out, "cam", args.seed, config={
        "checkpoint": str(Path(args.checkpoint).resolve()), "manifest": args.manifest,
        "layer": args.layer, "opacity": args.opacity, "limit": args.limit,
    })
    items, images = load_arrays(records, model.config.input_size, args.stride)
    for rec, img in zip(items, images):
        sal = score_cam(model, normalize(img[None])[0], args.layer)
        name = cam_filename(rec.path if rec.frame is None else f"{Path(rec.path).stem}_f{rec.frame}",
                            model.variant, args.layer)
        overlay(img.numpy().transpose(1, 2, 0), sal, args.opacity, out / name)
    print(f"wrote {len(items)} maps to {out}")
    return 0


def cmd_report(args):
    from .config import write_provenance
    from .metrics import evaluate, format_histogram, format_report

    if not args.scores:
        raise ConfigurationError("--scores is required")
    records = _read_all_scores(args.scores)
    hist = format_histogram(records, args.bins)
    text = format_report(evaluate(records, args.threshold, args.bpcer_target))
    print(text)
    print()
    print(hist, end="")
    if args.out:
        out = Path(args.out)
        write_provenance(out, "report", args.seed, config={
            "scores": [str(Path(p).resolve()) for p in args.scores], "bins": args.bins,
            "threshold": args.threshold, "bpcer_target": args.bpcer_target,
        })
        (out / "histogram.csv").write_text(hist, encoding="utf-8")
        (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    return 0


def build_parser():
    parser = _Parser(prog="irispad", description="Iris presentation attack detection toolkit")
    parser.add_argument("--version", action="version", version=f"irispad {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None)
        return p

    p = add("synth", cmd_synth, "generate a synthetic iris dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--image-size", type=int)

    p = add("train", cmd_train, "train one variant")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--protocol")
    p.add_argument("--variant", choices=("baseline", "pbs", "apbs"))
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--fold", type=int)

    for name, func, help in (("score", cmd_score, "score records with a checkpoint"),
                             ("cam", cmd_cam, "write Score-CAM overlays")):
        p = add(name, func, help)
        p.add_argument("--checkpoint")
        p.add_argument("--manifest")
        p.add_argument("--protocol")
        p.add_argument("--fold", type=int, default=0)
        p.add_argument("--side", choices=("train", "test", "all"), default="test")
        p.add_argument("--variant", choices=("baseline", "pbs", "apbs"))
        p.add_argument("--stride", type=int, default=5)
        p.add_argument("--out", required=True)
        if name == "cam":
            p.add_argument("--layer", default="transition2")
            p.add_argument("--opacity", type=float, default=0.5)
            p.add_argument("--limit", type=int)

    p = add("metrics", cmd_metrics, "metric block for score files")
    p.add_argument("--scores", nargs="+")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--bpcer-target", type=float, default=0.2)
    p.add_argument("--out")

    p = add("matrix", cmd_matrix, "evaluate a cross-database / cross-spectrum grid")
    p.add_argument("--config")
    p.add_argument("--threshold", type=float)
    p.add_argument("--bpcer-target", type=float)
    p.add_argument("--out")

    p = add("report", cmd_report, "score distribution histogram with FDR")
    p.add_argument("--scores", nargs="+")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--bpcer-target", type=float, default=0.2)
    p.add_argument("--out")
    return parser


def _fail(category, message):
    message = " ".join(str(message).split())
    print(f"error: {category}: {message}", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _fail("usage", exc)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is None:
        args.seed = 0 if args.command != "train" else None
    try:
        return args.func(args)
    except IrisPadError as exc:
        _fail(exc.category, exc)
    except FileNotFoundError as exc:
        _fail("io", exc)
    except Exception as exc:
        log.debug("unhandled error", exc_info=True)
        _fail("internal", f"{type(exc).__name__}: {exc}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
