"""capmatch command line.

Subcommands operate on manifest files and emit machine-clean data streams;
diagnostics go to stderr only. Exit codes: 0 success, 1 configuration
error, 2 data error.

label / filter / transform fan out over a worker pool in line chunks.
Workers receive raw lines and return finished output lines, so results are
byte-identical for any --workers value: per-sample work is pure and the
parent writes chunks back in input order.
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing
import sys
from typing import IO, Iterator

from . import corpus, transforms
from .errors import CapmatchError, ManifestError, MetricError
from .matcher import CorpusTallies, FuzzyOptions, MatchStrategy, TermIndex, match_sample
from .metrics import (
    agreement,
    binomial_halfwidth,
    caption_stats,
    fit_trend,
    label_quality,
    read_results_table,
    verify_results_table,
)
from .termdb import RELATIONS, TermDatabase, expand_synset, load_lexicon, load_termdb
from .textproc import normalize

CHUNK_BYTES = 256 * 1024

STRATEGY_ALIASES = {
    "strict": "strict",
    "sc": "single_class",
    "mc": "multi_class",
    "anticlass": "anticlass",
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the contract here is 1 for
    # configuration problems and 2 for data problems.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _open_read(path: str) -> IO[str]:
    try:
        return open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _open_write(path: str) -> IO[str]:
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def _load_termdb(args) -> TermDatabase:
    with _open_read(args.termdb) as fh:
        db = load_termdb(fh, name=args.termdb)
    if getattr(args, "synset_lexicon", None):
        with _open_read(args.synset_lexicon) as fh:
            lexicon = load_lexicon(fh)
        relations = (
            [r.strip() for r in args.synset_relations.split(",") if r.strip()]
            if args.synset_relations
            else list(RELATIONS)
        )
        try:
            db, collisions = expand_synset(db, lexicon, relations)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if collisions:
            _log(f"synset expansion dropped {len(collisions)} ambiguous terms")
    return db


def _token_file(path: str) -> frozenset[str]:
    tokens: set[str] = set()
    with _open_read(path) as fh:
        for line in fh:
            tokens.update(normalize(line))
    return frozenset(tokens)


def _json_dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with _open_write(path) as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# worker pool over line chunks

_CFG: dict = {}
_INDEX: TermIndex | None = None


def _init_worker(cfg: dict) -> None:
    global _CFG, _INDEX
    _CFG = cfg
    _INDEX = TermIndex(cfg["termdb"]) if cfg.get("termdb") is not None else None


def _out_line(sample: corpus.Sample, cfg: dict) -> str:
    if cfg["format"] == "tsv":
        return corpus.tsv_line(sample, with_labels=cfg["tsv_labels"])
    return corpus.jsonl_line(sample)


def _resolve_label(sample: corpus.Sample, lineno: int) -> int:
    if sample.ground_truth is not None:
        return sample.ground_truth
    if sample.labels:
        return sample.labels[0]
    raise ManifestError(f"sample {sample.id!r} has neither ground_truth nor labels", lineno)


def _process_chunk(chunk: tuple[int, str]):
    """One chunk in, one chunk out: ids for duplicate detection, the
    finished output block, and partial tallies."""
    first_lineno, block = chunk
    cfg = _CFG
    mode = cfg["mode"]
    ids: list[str] = []
    out: list[str] = []
    tallies = CorpusTallies()
    for offset, line in enumerate(block.splitlines()):
        if not line.strip():
            continue
        lineno = first_lineno + offset
        if cfg["format"] == "tsv":
            sample = corpus.parse_tsv_row(line, cfg["columns"], lineno)
        else:
            sample = corpus.parse_jsonl_line(line, lineno)
        ids.append(sample.id)
        caption = corpus.compose_caption(sample, cfg["source"])
        if mode == "transform":
            spec: transforms.TransformSpec = cfg["spec"]
            label = (
                _resolve_label(sample, lineno)
                if spec.kind == "simpler_caption"
                else None
            )
            text = spec.apply(caption, sample_id=sample.id, db=cfg.get("termdb"), label=label)
            transforms.rewrite_caption(sample, cfg["source"], text)
            out.append(_out_line(sample, cfg))
            continue
        outcome = match_sample(caption, _INDEX, cfg["strategy"], cfg["fuzzy"], sample.id)
        tallies.add(outcome)
        if mode == "label":
            sample.labels = outcome.labels
            out.append(_out_line(sample, cfg))
        elif mode == "filter":
            if outcome.labels:
                sample.labels = outcome.labels
                out.append(_out_line(sample, cfg))
        elif mode == "anticlass":
            if not outcome.matched:
                out.append(_out_line(sample, cfg))
    return ids, ("\n".join(out) + "\n" if out else ""), tallies


def _read_chunks(stream: IO[str], start_lineno: int) -> Iterator[tuple[int, str]]:
    # one string per chunk: far cheaper to move between processes than a
    # list of line strings
    lineno = start_lineno
    while True:
        lines = stream.readlines(CHUNK_BYTES)
        if not lines:
            return
        yield lineno, "".join(lines)
        lineno += len(lines)


def _run_pipeline(args, cfg: dict) -> CorpusTallies:
    """Parse, process, and rewrite a manifest chunk by chunk."""
    tallies = CorpusTallies()
    seen: set[str] = set()
    with _open_read(args.input) as src, _open_write(args.output) as dst:
        start = 1
        if cfg["format"] == "tsv":
            header = src.readline()
            if not header:
                cfg["columns"] = list(corpus.parse_tsv_header(corpus.tsv_header()))
            else:
                cfg["columns"] = corpus.parse_tsv_header(header, 1)
            start = 2
            dst.write(corpus.tsv_header(cfg["tsv_labels"]) + "\n")
        chunks = _read_chunks(src, start)
        workers = args.workers
        if workers < 1:
            raise ConfigError("--workers must be at least 1")
        if workers == 1:
            _init_worker(cfg)
            results = map(_process_chunk, chunks)
            for ids, out, part in results:
                _collect(ids, out, part, seen, dst, tallies)
        else:
            with multiprocessing.Pool(workers, initializer=_init_worker, initargs=(cfg,)) as pool:
                for ids, out, part in pool.imap(_process_chunk, chunks):
                    _collect(ids, out, part, seen, dst, tallies)
    return tallies


def _collect(ids, out, part, seen: set[str], dst: IO[str], tallies: CorpusTallies) -> None:
    for sid in ids:
        if sid in seen:
            raise ManifestError(f"duplicate sample id {sid!r}")
        seen.add(sid)
    if out:
        dst.write(out)
    tallies.merge(part)


def _stats_json(tallies: CorpusTallies) -> dict:
    return {
        "total": tallies.total,
        "matched": tallies.matched,
        "labeled": tallies.labeled,
        "hit_rate": tallies.hit_rate,
        "per_class": {str(k): tallies.per_class[k] for k in sorted(tallies.per_class)},
    }


# ---------------------------------------------------------------------------
# subcommands


def _match_cfg(args, mode: str) -> dict:
    db = _load_termdb(args)
    try:
        strategy = MatchStrategy(STRATEGY_ALIASES[args.strategy], args.mc_cap)
        fuzzy = FuzzyOptions(args.fuzzy, args.fuzzy_threshold)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {
        "mode": mode,
        "format": args.format,
        "source": args.caption_source,
        "termdb": db,
        "strategy": strategy,
        "fuzzy": fuzzy,
        "tsv_labels": mode != "anticlass",
    }


def cmd_label(args) -> int:
    cfg = _match_cfg(args, "label")
    tallies = _run_pipeline(args, cfg)
    stats_path = args.stats or args.output + ".stats.json"
    _json_dump(_stats_json(tallies), stats_path)
    _log(f"labeled {tallies.labeled}/{tallies.total} samples (hit rate {tallies.hit_rate:.4f})")
    return 0


def cmd_filter(args) -> int:
    mode = "anticlass" if args.anticlass or args.strategy == "anticlass" else "filter"
    cfg = _match_cfg(args, mode)
    tallies = _run_pipeline(args, cfg)
    if args.stats:
        _json_dump(_stats_json(tallies), args.stats)
    kept = tallies.total - tallies.matched if mode == "anticlass" else tallies.labeled
    _log(f"kept {kept}/{tallies.total} samples")
    return 0


def cmd_transform(args) -> int:
    db = _load_termdb(args) if args.termdb else None
    try:
        spec = transforms.TransformSpec(
            kind=args.kind,
            seed=args.seed,
            shift=args.shift,
            whitelist=_token_file(args.whitelist) if args.whitelist else None,
            lexicon=_token_file(args.lexicon) if args.lexicon else None,
            template=args.template,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if spec.kind == "simpler_caption" and db is None:
        raise ConfigError("simpler_caption requires --termdb")
    cfg = {
        "mode": "transform",
        "format": args.format,
        "source": args.caption_source,
        "termdb": db,
        "spec": spec,
        "tsv_labels": False,
    }
    if args.format == "tsv":
        # keep the labels column when the input carries one
        with _open_read(args.input) as fh:
            header = fh.readline()
        cfg["tsv_labels"] = bool(header) and "labels" in corpus.parse_tsv_header(header, 1)
    _run_pipeline(args, cfg)
    return 0


def cmd_stats(args) -> int:
    with _open_read(args.input) as fh:
        stats = caption_stats(
            corpus.parse_manifest(fh, args.format), args.caption_source
        )
    _json_dump(stats.to_dict(), args.output)
    return 0


def _single_labels(samples, key: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for sample in samples:
        if key == "labels":
            if sample.labels and len(sample.labels) == 1:
                out[sample.id] = sample.labels[0]
        elif key == "ground_truth":
            if sample.ground_truth is not None:
                out[sample.id] = sample.ground_truth
        else:
            values = (sample.extra_labels or {}).get(key, [])
            if len(values) == 1:
                out[sample.id] = values[0]
    return out


def cmd_metrics(args) -> int:
    if args.kind == "robustness":
        with _open_read(args.input) as fh:
            rows = read_results_table(fh)
        report_rows = verify_results_table(rows)
        for entry, row in zip(report_rows, rows):
            rec = row.record
            if rec.n_base:
                entry["base_halfwidth"] = binomial_halfwidth(rec.base_acc, rec.n_base, args.z)
            if rec.n_shift:
                entry["avg_rob_halfwidth"] = binomial_halfwidth(entry["avg_rob"], rec.n_shift, args.z)
        report: dict = {"count": len(report_rows), "rows": report_rows}
        devs = [r["avg_rob_dev"] for r in report_rows if "avg_rob_dev" in r]
        if devs:
            report["max_avg_rob_dev"] = max(devs)
        devs = [r["err_dev"] for r in report_rows if "err_dev" in r]
        if devs:
            report["max_err_dev"] = max(devs)
        _json_dump(report, args.output)
        if args.tsv:
            with _open_write(args.tsv) as fh:
                fh.write("model_id\tbase_acc\tavg_rob\terr\n")
                for entry in report_rows:
                    fh.write(
                        f"{entry['model_id']}\t{entry['base_acc']}"
                        f"\t{entry['avg_rob']}\t{entry['err']}\n"
                    )
        if args.plot:
            from .plots import save_robustness_figure

            save_robustness_figure(args.plot, [row.record for row in rows])
        return 0

    with _open_read(args.input) as fh:
        samples = list(corpus.parse_manifest(fh, args.format))
    if args.kind == "quality":
        truth: dict[str, int] = {}
        pairs = []
        for sample in samples:
            if sample.ground_truth is not None:
                truth[sample.id] = sample.ground_truth
            if sample.labels is not None and len(sample.labels) > 1:
                raise MetricError(
                    f"sample {sample.id!r} has {len(sample.labels)} labels; "
                    "quality needs strict or sc output"
                )
            label = sample.labels[0] if sample.labels else None
            pairs.append((sample.id, label))
        _json_dump(label_quality(pairs, truth).to_dict(), args.output)
        return 0

    # agreement
    if not args.against:
        raise ConfigError("metrics --kind agreement requires --against")
    side_a = _single_labels(samples, "labels")
    side_b = _single_labels(samples, args.against)
    value = agreement(side_a, side_b)
    _json_dump(
        {"against": args.against, "compared": len(side_a.keys() & side_b.keys()),
         "agreement": value},
        args.output,
    )
    return 0


def cmd_fit(args) -> int:
    with _open_read(args.input) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or args.x_col not in reader.fieldnames or args.y_col not in reader.fieldnames:
            raise MetricError(
                f"fit input needs {args.x_col!r} and {args.y_col!r} columns"
            )
        try:
            points = [(float(row[args.x_col]), float(row[args.y_col])) for row in reader]
        except ValueError as exc:
            raise MetricError(f"non-numeric fit input: {exc}") from exc
    fit = fit_trend(points, args.space)
    _json_dump(
        {
            "space": fit.space,
            "n": len(points),
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r2,
            "r2_raw": fit.r2_raw,
        },
        args.output,
    )
    tsv_path = args.tsv
    if tsv_path is None and args.output:
        tsv_path = args.output.rsplit(".", 1)[0] + ".tsv"
    if tsv_path:
        with _open_write(tsv_path) as fh:
            fh.write("x\ty\ty_fit\n")
            for x, y in points:
                fh.write(f"{x}\t{y}\t{fit.predict(x)}\n")
    if args.plot:
        from .plots import save_fit_figure

        save_fit_figure(args.plot, points, fit)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="capmatch", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, output=True):
        p.add_argument("--input", required=True, help="input manifest path")
        if output:
            p.add_argument("--output", required=True, help="output path")
        p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")

    def add_match(p):
        p.add_argument("--termdb", required=True, help="term file path")
        p.add_argument("--caption-source", choices=corpus.CAPTION_SOURCES, default="ttd")
        p.add_argument("--strategy", choices=tuple(STRATEGY_ALIASES), default="sc")
        p.add_argument("--mc-cap", type=int, default=25)
        p.add_argument("--fuzzy", action="store_true", help="enable fuzzy token matching")
        p.add_argument("--fuzzy-threshold", type=int, default=55)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--synset-lexicon", help="JSONL synonym lexicon to expand the term file")
        p.add_argument(
            "--synset-relations",
            help=f"comma-separated subset of {','.join(RELATIONS)} (default: all)",
        )

    p = sub.add_parser("label", help="attach subset-matched labels to every sample")
    add_io(p)
    add_match(p)
    p.add_argument("--stats", help="stats JSON path (default: OUTPUT.stats.json)")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("filter", help="keep only labeled samples (or only unmatched ones)")
    add_io(p)
    add_match(p)
    p.add_argument("--anticlass", action="store_true", help="keep the complement: unmatched samples")
    p.add_argument("--stats", help="optional stats JSON path")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("transform", help="rewrite the caption field with an ablation")
    add_io(p)
    p.add_argument("--kind", choices=transforms.TRANSFORM_KINDS, required=True)
    p.add_argument("--caption-source", choices=corpus.CAPTION_SOURCES, default="ttd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shift", type=int, default=13)
    p.add_argument("--whitelist", help="token file for token_strip")
    p.add_argument("--lexicon", help="token file for simple_caption")
    p.add_argument("--termdb", help="term file for simpler_caption class names")
    p.add_argument("--template", default=transforms.DEFAULT_TEMPLATE)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("stats", help="caption statistics for a manifest")
    add_io(p, output=False)
    p.add_argument("--caption-source", choices=corpus.CAPTION_SOURCES, default="ttd")
    p.add_argument("--output", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("metrics", help="label quality, agreement, or robustness aggregates")
    p.add_argument("--kind", choices=("quality", "agreement", "robustness"), required=True)
    p.add_argument("--input", required=True, help="manifest (quality/agreement) or CSV (robustness)")
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--against", help="agreement reference: ground_truth or an extra_labels key")
    p.add_argument("--z", type=float, default=1.96, help="z value for confidence half-widths")
    p.add_argument("--output", help="report JSON path (default: stdout)")
    p.add_argument("--tsv", help="optional delimited report path (robustness)")
    p.add_argument("--plot", help="optional figure path (robustness)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fit", help="least-squares trend fit over (x, y) points")
    p.add_argument("--input", required=True, help="CSV with the point columns")
    p.add_argument("--x-col", default="base_acc")
    p.add_argument("--y-col", default="avg_rob")
    p.add_argument("--space", choices=("linear", "logit", "log10"), default="log10")
    p.add_argument("--output", help="report JSON path (default: stdout)")
    p.add_argument("--tsv", help="plot-ready TSV path (default: OUTPUT with .tsv suffix)")
    p.add_argument("--plot", help="optional figure path")
    p.set_defaults(func=cmd_fit)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"capmatch: {exc}")
        return 1
    except CapmatchError as exc:
        _log(f"capmatch: {exc}")
        return 2
    except OSError as exc:
        _log(f"capmatch: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
