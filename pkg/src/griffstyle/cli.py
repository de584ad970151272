"""
Command-line front end.

    griffstyle extract   --manifest M --out DIR
    griffstyle classify  --manifest M --out DIR [--representation griff,2gram] [--scope all]
    griffstyle player    --manifest M --out DIR [--player ID]
    griffstyle segments  --manifest M --out DIR --score S [--segment-lengths 1,2,4,8]
    griffstyle note      --manifest M --out DIR --score S --note N
    griffstyle synth     --out DIR [--synth-config cfg.json] [--seed N]

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import report
from .classifier import ConvergenceError, KernelSpec
from .evaluation import (
    DEFAULT_SEGMENT_LENGTHS, cross_validate, griff_distribution, note_stats, player_focused,
    segment_scan, stratified_kfold,
)
from .features import REPRESENTATIONS, dataset_matrix, dataset_profiles, build_vocabulary, vocabulary_summary
from .griffs import extract_dataset
from .ingest import IngestError, load_dataset
from .synth import SynthConfig, export, generate

logger = logging.getLogger("griffstyle")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    manifest: str | None = None
    representation: list[str] = field(default_factory=lambda: ["griff"])
    window_ms: float = 35.0
    kernel: str = "linear"
    degree: int = 3
    gamma: float | str = "scale"
    coef0: float = 0.0
    C: float = 1.0
    folds: int = 5
    seed: int = 0
    scope: str = "per-score"
    segment_lengths: list[int] = field(default_factory=lambda: list(DEFAULT_SEGMENT_LENGTHS))
    out: str = "."
    format: str = "csv"
    keep_duplicates: bool = False
    vocab_mode: str = "corpus"
    multiclass: str = "ovo"
    player: str | None = None
    score: str | None = None
    note: str | None = None

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.degree, self.gamma, self.coef0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")        # output location does not change results
        return d


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _gamma(text: str):
    if text == "scale":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("gamma must be a positive number or 'scale'") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("gamma must be positive")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="griffstyle", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--manifest", required=True)
    common.add_argument("--out", default=".")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--window-ms", type=_positive, default=35.0)
    common.add_argument("--keep-duplicates", action="store_true",
                        help="keep restruck pitches inside one window as repeated intervals")

    model = _Parser(add_help=False)
    model.add_argument("--representation", default=None,
                       help="comma list of intervals, griff, 2gram, 3gram (or 'all')")
    model.add_argument("--ngram", type=int, default=None, help="shorthand for --representation <n>gram")
    model.add_argument("--kernel", choices=("linear", "polynomial", "rbf", "sigmoid"), default="linear")
    model.add_argument("--C", dest="C", type=_positive, default=1.0)
    model.add_argument("--gamma", type=_gamma, default="scale")
    model.add_argument("--degree", type=int, default=3)
    model.add_argument("--coef0", type=float, default=0.0)
    model.add_argument("--folds", type=int, default=5)
    model.add_argument("--seed", type=int, default=0)
    model.add_argument("--vocab-mode", choices=("corpus", "per-fold"), default="corpus")
    model.add_argument("--multiclass", choices=("ovo", "ovr"), default="ovo")

    sub.add_parser("extract", parents=[common], help="griff token files and vocabulary summary")
    p = sub.add_parser("classify", parents=[common, model], help="cross-validated player classification")
    p.add_argument("--scope", choices=("per-score", "whole-dataset", "all"), default="all")
    p = sub.add_parser("player", parents=[common, model], help="player-focused leave-one-out")
    p.add_argument("--player", default=None, help="player id (default: every player)")
    p.add_argument("--scope", choices=("per-score", "whole-dataset"), default="per-score")
    p = sub.add_parser("segments", parents=[common, model], help="segment-wise classification scan")
    p.add_argument("--score", required=True)
    p.add_argument("--segment-lengths", default=",".join(map(str, DEFAULT_SEGMENT_LENGTHS)))
    p = sub.add_parser("note", parents=[common, model], help="griff statistics at one score note")
    p.add_argument("--score", required=True)
    p.add_argument("--note", required=True)
    p.add_argument("--segment-lengths", default=None,
                   help="also attach mean segment accuracy for these lengths")

    p = sub.add_parser("synth", help="write a synthetic corpus in the ingest formats")
    p.add_argument("--out", required=True)
    p.add_argument("--synth-config", default=None, help="JSON file with generator settings")
    p.add_argument("--seed", type=int, default=None)
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig(args.command, manifest=args.manifest, out=args.out, format=args.format,
                    window_ms=args.window_ms, keep_duplicates=args.keep_duplicates)
    if args.command == "extract":
        cfg.representation = list(REPRESENTATIONS)
        return cfg
    reps = getattr(args, "representation", None)
    if args.ngram is not None:
        if reps is not None:
            raise UsageError("use either --representation or --ngram")
        if args.ngram < 1:
            raise UsageError("--ngram must be >= 1")
        reps = "griff" if args.ngram == 1 else f"{args.ngram}gram"
    if reps is None:
        reps = "all" if args.command == "classify" else "griff"
    reps = list(REPRESENTATIONS) if reps == "all" else _split(reps)
    for r in reps:
        if r not in REPRESENTATIONS and not (r.endswith("gram") and r[:-4].isdigit() and int(r[:-4]) >= 1):
            raise UsageError(f"unknown representation {r!r}")
    if args.command in ("segments", "note") and reps != ["griff"]:
        raise UsageError(f"{args.command} works on griffs only")
    cfg = replace(cfg, representation=reps, kernel=args.kernel, C=args.C, gamma=args.gamma,
                  degree=args.degree, coef0=args.coef0, folds=args.folds, seed=args.seed,
                  vocab_mode=args.vocab_mode, multiclass=args.multiclass)
    if args.degree < 1:
        raise UsageError("--degree must be >= 1")
    if hasattr(args, "scope"):
        cfg.scope = args.scope
    for name in ("player", "score", "note"):
        setattr(cfg, name, getattr(args, name, None))
    lengths = getattr(args, "segment_lengths", None)
    if lengths is not None:
        try:
            cfg.segment_lengths = [int(x) for x in _split(lengths)]
        except ValueError:
            raise UsageError(f"bad --segment-lengths {lengths!r}") from None
    elif args.command == "note":
        cfg.segment_lengths = []
    return cfg


def _write(cfg: RunConfig, meta, name: str, columns, rows, data) -> Path:
    out = Path(cfg.out)
    if cfg.format == "json":
        return report.write_json(out / f"{name}.json", meta, data)
    return report.write_csv(out / f"{name}.csv", meta, columns, rows)


def cmd_extract(cfg: RunConfig, dataset) -> list[Path]:
    meta = report.header(cfg.to_dict(), dataset.checksums)
    out = Path(cfg.out)
    sequences = extract_dataset(dataset, cfg.window_ms, cfg.keep_duplicates)
    written = []
    for (score, player, take), seq in sequences.items():
        notes = dataset.scores[score]
        path = out / "tokens" / score / f"{player}_{take}.tsv"
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["ordinal\tscore_note_id\ttoken"]
        lines += [f"{n.ordinal}\t{n.score_note_id}\t{t}" for n, t in zip(notes, seq.tokens)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    for rep in REPRESENTATIONS:
        profiles = dataset_profiles(dataset, rep, sequences=sequences)
        path = out / f"vocab_{rep}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(build_vocabulary(profiles, rep).to_text(), encoding="utf-8")
        written.append(path)
    rows = vocabulary_summary(dataset, cfg.window_ms, cfg.keep_duplicates)
    columns = ["scope", *REPRESENTATIONS, "griff_tokens"]
    written.append(_write(cfg, meta, "summary", columns,
                          [[r[c] for c in columns] for r in rows], rows))
    for r in rows:
        logger.info("%s: %s", r["scope"], " / ".join(str(r[c]) for c in columns[1:]))
    return written


def cmd_classify(cfg: RunConfig, dataset) -> list[Path]:
    meta = report.header(cfg.to_dict(), dataset.checksums)
    scopes = []
    if cfg.scope in ("per-score", "all"):
        scopes += [(name, [name]) for name in sorted(dataset.scores)]
    if cfg.scope in ("whole-dataset", "all"):
        scopes.append(("Whole Dataset", sorted(dataset.scores)))
    spec = cfg.kernel_spec()
    sequences = extract_dataset(dataset, cfg.window_ms, cfg.keep_duplicates)
    table, detail = [], {}
    for label, names in scopes:
        row = [label]
        for rep in cfg.representation:
            matrix = dataset_matrix(dataset, rep, scores=names, sequences=sequences)
            if not len(matrix.labels):
                row.append(float("nan"))
                continue
            plan = stratified_kfold(matrix.labels, cfg.folds, cfg.seed)
            result = cross_validate(matrix, plan, spec, cfg.C, cfg.vocab_mode, cfg.multiclass)
            row.append(result.accuracy)
            detail[f"{label}|{rep}"] = {"scope": label, "representation": rep,
                                         "vocabulary_size": len(matrix.vocabulary),
                                         **result.to_dict()}
        table.append(row)
    columns = ["scope", *cfg.representation]
    data = {"table": [dict(zip(columns, r)) for r in table], "detail": detail}
    return [_write(cfg, meta, "classify", columns, table, data)]


def cmd_player(cfg: RunConfig, dataset) -> list[Path]:
    meta = report.header(cfg.to_dict(), dataset.checksums)
    players = [cfg.player] if cfg.player else dataset.players
    scores = sorted(dataset.scores)
    rep = cfg.representation[0]
    rows, data = [], []
    for player in players:
        result = player_focused(dataset, player, rep, cfg.kernel_spec(), cfg.C, cfg.scope,
                                cfg.window_ms, cfg.keep_duplicates, cfg.multiclass)
        by_score = result.by_score()
        per_score = [by_score.get(s, float("nan")) for s in scores]
        rows.append([player, *per_score, result.accuracy, len(result.runs)])
        data.append({"player": player, "accuracy": result.accuracy, "by_score": by_score,
                     "runs": [{"score": r.key[0], "take": r.key[2], "predicted": r.predicted,
                               "correct": r.correct} for r in result.runs]})
    return [_write(cfg, meta, "player", ["player", *scores, "overall", "runs"], rows, data)]


def cmd_segments(cfg: RunConfig, dataset) -> list[Path]:
    meta = report.header(cfg.to_dict(), dataset.checksums)
    scan = segment_scan(dataset, cfg.score, cfg.segment_lengths, cfg.kernel_spec(), cfg.C,
                        cfg.folds, cfg.seed, cfg.window_ms, cfg.keep_duplicates,
                        strategy=cfg.multiclass)
    notes = dataset.scores[cfg.score]
    curves = [[n.ordinal, n.score_note_id, L, scan.note_means[L][n.ordinal]]
              for L in sorted(scan.note_means) for n in notes]
    segments = [[L, start, acc] for (L, start), acc in sorted(scan.segment_accuracy.items())]
    hist = []
    skewness = {}
    for L in sorted(scan.note_means):
        counts, edges = scan.histogram(L)
        hist += [[L, float(edges[i]), float(edges[i + 1]), int(c)] for i, c in enumerate(counts)]
        skewness[L] = scan.skewness(L)
    if cfg.format == "json":
        data = {"score": cfg.score,
                "curves": [dict(zip(("ordinal", "score_note_id", "length", "mean_accuracy"), r))
                           for r in curves],
                "segments": [dict(zip(("length", "start", "accuracy"), r)) for r in segments],
                "histogram": [dict(zip(("length", "bin_low", "bin_high", "count"), r)) for r in hist],
                "skewness": skewness}
        return [report.write_json(Path(cfg.out) / "segments.json", meta, data)]
    out = Path(cfg.out)
    return [
        report.write_csv(out / "segments_curves.csv", meta,
                         ["ordinal", "score_note_id", "length", "mean_accuracy"], curves),
        report.write_csv(out / "segments_accuracy.csv", meta, ["length", "start", "accuracy"], segments),
        report.write_csv(out / "segments_histogram.csv", meta,
                         ["length", "bin_low", "bin_high", "count"], hist),
        report.write_csv(out / "segments_skewness.csv", meta, ["length", "skewness"],
                         sorted(skewness.items())),
    ]


def cmd_note(cfg: RunConfig, dataset) -> list[Path]:
    meta = report.header(cfg.to_dict(), dataset.checksums)
    notes = dataset.scores.get(cfg.score)
    if notes is None:
        raise IngestError(f"unknown score {cfg.score!r}")
    match = [n for n in notes if n.score_note_id == cfg.note]
    if not match:
        raise IngestError(f"unknown note {cfg.note!r} in score {cfg.score!r}")
    accuracies = {}
    if cfg.segment_lengths:
        scan = segment_scan(dataset, cfg.score, cfg.segment_lengths, cfg.kernel_spec(), cfg.C,
                            cfg.folds, cfg.seed, cfg.window_ms, cfg.keep_duplicates,
                            covering=match[0].ordinal, strategy=cfg.multiclass)
        accuracies = {L: means[match[0].ordinal] for L, means in scan.note_means.items()}
    stats = note_stats(dataset, cfg.score, cfg.note, accuracies, cfg.window_ms, cfg.keep_duplicates)
    table = griff_distribution(dataset, cfg.score, cfg.note, cfg.window_ms, cfg.keep_duplicates)
    players = sorted({p.player for p in dataset.for_score(cfg.score)})
    stats_row = [cfg.score, stats.score_note_id, stats.spelling, stats.n_types, stats.occurrences,
                 stats.mean_usage, stats.mean_accuracy if stats.mean_accuracy is not None else float("nan")]
    stats_cols = ["score", "note", "spelling", "griff_types", "occurrences", "mean_usage", "mean_accuracy"]
    if cfg.format == "json":
        data = {"stats": {**dict(zip(stats_cols, stats_row)),
                          "accuracy_by_length": stats.accuracy_by_length},
                "distribution": table}
        return [report.write_json(Path(cfg.out) / "note.json", meta, data)]
    out = Path(cfg.out)
    return [
        report.write_csv(out / "note_stats.csv", meta, stats_cols, [stats_row]),
        report.write_csv(out / "note_distribution.csv", meta, ["token", *players],
                         [[t, *(row[p] for p in players)] for t, row in table.items()]),
    ]


def cmd_synth(args) -> list[Path]:
    settings = {}
    if args.synth_config:
        settings = json.loads(Path(args.synth_config).read_text(encoding="utf-8"))
    if args.seed is not None:
        settings["seed"] = args.seed
    try:
        config = SynthConfig(**settings)
    except TypeError as exc:
        raise UsageError(f"bad synth config: {exc}") from None
    return [export(generate(config), args.out)]


COMMANDS = {"extract": cmd_extract, "classify": cmd_classify, "player": cmd_player,
            "segments": cmd_segments, "note": cmd_note}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            written = cmd_synth(args)
        else:
            cfg = _config(args)
            dataset = load_dataset(cfg.manifest)
            written = COMMANDS[args.command](cfg, dataset)
    except UsageError as exc:
        print(f"griffstyle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"griffstyle: solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IngestError, ValueError, OSError) as exc:
        print(f"griffstyle: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for path in written:
        logger.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
