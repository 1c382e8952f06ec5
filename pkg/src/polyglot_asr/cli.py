"""Command-line entry point: ``polyglot-asr <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .errors import PolyglotError

EXIT_USAGE = 2


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _pipeline(config_path):
    from .config import load_config
    from .service import Pipeline

    return Pipeline.from_config(load_config(config_path))


def cmd_serve(args) -> int:
    from .config import load_config
    from .service import serve

    config = load_config(args.config)
    if args.host or args.port is not None:
        from dataclasses import replace

        config = replace(config, host=args.host or config.host,
                         port=config.port if args.port is None else args.port)
    serve(config)
    return 0


def cmd_recognize(args) -> int:
    from .service import RequestError

    path = Path(args.wav)
    if not path.is_file():
        return _fail(f"no such file: {path}", EXIT_USAGE)
    pipeline = _pipeline(args.config)
    try:
        result = pipeline.recognize_utterance(path.read_bytes())
    except RequestError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    print(result.to_json())
    return 0


def read_tsv(path) -> dict:
    """``id<TAB>accent<TAB>text`` lines -> {id: (accent, text)}."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise PolyglotError(f"{path}:{lineno}: expected id<TAB>accent<TAB>text")
            utt_id, accent = row[0], row[1]
            text = "\t".join(row[2:])
            if utt_id in rows:
                raise PolyglotError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
            rows[utt_id] = (accent, text)
    return rows


def _emit(result, args, text=None):
    from .evaluation import emit_report, render

    if args.report:
        emit_report(result, args.report, args.format)
    if args.format == "text" and text is not None:
        print(text)
    else:
        sys.stdout.write(render(result, "json" if args.format == "text" else args.format))


def cmd_eval_wer(args) -> int:
    from .evaluation import aggregate_wer

    refs = read_tsv(args.refs)
    hyps = read_tsv(args.hyps)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        return _fail(f"{len(missing)} reference ids have no hypothesis (first: {missing[0]!r})")
    pairs = [
        (accent if args.by_accent else "all", text, hyps[utt_id][1])
        for utt_id, (accent, text) in refs.items()
    ]
    table = aggregate_wer(pairs, system=args.system)
    if args.format == "text" and args.report:
        args.format = "csv"
    _emit(table, args, table.format())
    return 0


def _parse_assignments(values, convert):
    out = {}
    for item in values or ():
        lang, sep, value = item.partition("=")
        if not sep:
            raise PolyglotError(f"expected <lang>=<value>, got {item!r}")
        out[lang] = convert(value)
    return out


def cmd_simulate(args) -> int:
    from .evaluation.routing import ConfusionMatrix, uniform_accent_matrix, uniform_lid_matrix, simulate_routing

    if args.lid_matrix:
        lid = ConfusionMatrix.from_csv(args.lid_matrix)
    else:
        lid = uniform_lid_matrix(args.lid_acc)
    accents = _parse_assignments(args.accent_matrix, ConfusionMatrix.from_csv)
    for lang, acc in _parse_assignments(args.accent_acc, float).items():
        accents[lang] = uniform_accent_matrix(lang, acc)
    true_langs = args.languages.split(",") if args.languages else None
    stats = simulate_routing(lid, accents, trials=args.trials, seed=args.seed, true_languages=true_langs)
    text = (
        f"trials={stats.trials} seed={stats.seed}\n"
        f"language_correct_rate={stats.language_correct_rate:.4f} ± {stats.confidence_interval_95:.4f}"
        f" (closed form {stats.expected_language_rate:.4f})\n"
        f"fully_correct_rate={stats.fully_correct_rate:.4f} ± {stats.fully_correct_ci_95:.4f}"
        f" (closed form {stats.expected_fully_correct_rate:.4f})\n"
        f"assumption: {stats.assumption}"
    )
    if args.format == "text" and args.report:
        args.format = "json"
    _emit(stats, args, text)
    return 0


def cmd_bench(args) -> int:
    from .evaluation import emit_report, measure_resources, render

    if args.target == "inproc":
        if not args.config:
            return _fail("--target inproc requires --config", EXIT_USAGE)
        target = _pipeline(args.config)
    else:
        target = args.target
    report = measure_resources(args.workload, target, repetitions=args.repetitions,
                               sample_hz=args.sample_hz, pid=args.pid)
    if args.report:
        emit_report(report, args.report, args.format)
    sys.stdout.write(render(report, args.format))
    return 0


def cmd_init_demo(args) -> int:
    from .demo import build_demo, write_sample_wavs

    route = tuple(args.route.split("/", 1))
    config = build_demo(args.directory, route=route, mode=args.mode, port=args.port)
    wavs = write_sample_wavs(Path(args.directory) / "wavs", count=args.samples)
    print(f"config: {config}")
    print(f"sample audio: {wavs[0].parent} ({len(wavs)} files)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyglot-asr",
        description="Language/accent-routed speech recognition on edge devices.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("recognize", help="run one WAV file through the pipeline")
    p.add_argument("wav")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("eval-wer", help="pooled WER, optionally per accent")
    p.add_argument("--refs", required=True, help="TSV: id<TAB>accent<TAB>reference")
    p.add_argument("--hyps", required=True, help="TSV: id<TAB>accent<TAB>hypothesis")
    p.add_argument("--by-accent", action="store_true")
    p.add_argument("--system", default="polyglot-asr", help="column name in the table")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval_wer)

    p = sub.add_parser("simulate", help="Monte Carlo model-selection accuracy")
    lid = p.add_mutually_exclusive_group(required=True)
    lid.add_argument("--lid-acc", type=float, help="uniform-confusion LID accuracy over en/ta/cmn")
    lid.add_argument("--lid-matrix", help="CSV confusion matrix")
    p.add_argument("--accent-matrix", action="append", metavar="LANG=CSV")
    p.add_argument("--accent-acc", action="append", metavar="LANG=ACC",
                   help="uniform-confusion accent accuracy over the language's accents")
    p.add_argument("--languages", help="comma-separated true languages to draw (default: all)")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="latency / CPU / memory over a WAV directory")
    p.add_argument("--workload", required=True)
    p.add_argument("--target", default="inproc", help="'inproc' or a service base URL")
    p.add_argument("--config", help="service config for --target inproc")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--sample-hz", type=float, default=20.0)
    p.add_argument("--pid", type=int, help="process to measure for URL targets")
    p.add_argument("--report")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("init-demo", help="write a runnable demo deployment with stub models")
    p.add_argument("directory")
    p.add_argument("--route", default="en/india", help="language/accent the stub classifiers pick")
    p.add_argument("--mode", choices=["lazy", "preload"], default="lazy")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--samples", type=int, default=3)
    p.set_defaults(func=cmd_init_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(str(exc), EXIT_USAGE)
    except PolyglotError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
