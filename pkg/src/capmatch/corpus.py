"""Caption-dataset manifests: parsing, caption composition, serialization.

A manifest is a line-oriented file of samples, either JSONL (one object per
line) or TSV (header row required). The canonical field names are id, title,
tags, description, alt_text, ground_truth, labels, extra_labels. JSONL
round-trips unknown fields; TSV carries only the fixed columns.

Parsing is streaming: samples are yielded one at a time and never
accumulated, so memory stays flat over arbitrarily long manifests (apart
from the id set kept for duplicate detection).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import ManifestError

CAPTION_SOURCES = ("title", "tags", "descr", "titletags", "ttd", "alt_text")

_TSV_COLUMNS = ("id", "title", "tags", "description", "alt_text", "ground_truth")
_KNOWN_FIELDS = frozenset(_TSV_COLUMNS) | {"labels", "extra_labels"}


@dataclass
class Sample:
    """One image-caption metadata record.

    ``labels`` is None when the sample has never been labeled and a list
    (possibly empty) once a labeler has run. ``extras`` holds unknown
    manifest fields so JSONL round-trips are lossless.
    """

    id: str
    title: str = ""
    tags: list[str] = field(default_factory=list)
    description: str = ""
    alt_text: str = ""
    ground_truth: int | None = None
    labels: list[int] | None = None
    extra_labels: dict[str, list[int]] | None = None
    extras: dict = field(default_factory=dict)


def compose_caption(sample: Sample, source: str) -> str:
    """Build the caption text for a sample from the selected metadata fields.

    Multi-field selectors join the non-empty parts with a single space;
    tags join with single spaces in stored order.
    """
    if source == "title":
        return sample.title
    if source == "tags":
        return " ".join(sample.tags)
    if source == "descr":
        return sample.description
    if source == "alt_text":
        return sample.alt_text
    if source == "titletags":
        parts = [sample.title, " ".join(sample.tags)]
    elif source == "ttd":
        parts = [sample.title, " ".join(sample.tags), sample.description]
    else:
        raise ValueError(f"unknown caption source {source!r}")
    return " ".join(p for p in parts if p)


def _check_string(value, name: str, line: int) -> str:
    if not isinstance(value, str):
        raise ManifestError(f"field {name!r} must be a string", line)
    return value


def _check_label(value, name: str, line: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ManifestError(f"field {name!r} must be a non-negative integer", line)
    return value


def sample_from_obj(obj: dict, line: int) -> Sample:
    """Validate one decoded JSONL object and build a Sample."""
    if not isinstance(obj, dict):
        raise ManifestError("record is not a JSON object", line)
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise ManifestError("missing or empty 'id' field", line)

    tags = obj.get("tags", [])
    if not isinstance(tags, list):
        raise ManifestError("field 'tags' must be a list", line)
    tags = [_check_string(t, "tags[]", line) for t in tags]

    gt = obj.get("ground_truth")
    if gt is not None:
        gt = _check_label(gt, "ground_truth", line)

    labels = obj.get("labels")
    if labels is not None:
        if not isinstance(labels, list):
            raise ManifestError("field 'labels' must be a list", line)
        labels = [_check_label(v, "labels[]", line) for v in labels]

    extra = obj.get("extra_labels")
    if extra is not None:
        if not isinstance(extra, dict):
            raise ManifestError("field 'extra_labels' must be an object", line)
        extra = {
            _check_string(k, "extra_labels key", line): sorted(
                {_check_label(v, f"extra_labels[{k!r}]", line) for v in vals}
            )
            for k, vals in extra.items()
        }

    return Sample(
        id=sid,
        title=_check_string(obj.get("title", ""), "title", line),
        tags=tags,
        description=_check_string(obj.get("description", ""), "description", line),
        alt_text=_check_string(obj.get("alt_text", ""), "alt_text", line),
        ground_truth=gt,
        labels=labels,
        extra_labels=extra,
        extras={k: v for k, v in obj.items() if k not in _KNOWN_FIELDS},
    )


def parse_jsonl_line(line: str, lineno: int) -> Sample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON: {exc.msg}", lineno) from exc
    return sample_from_obj(obj, lineno)


def parse_tsv_header(line: str, lineno: int = 1) -> list[str]:
    """Validate a TSV header row and return its column names."""
    cols = line.rstrip("\n").split("\t")
    if tuple(cols[: len(_TSV_COLUMNS)]) != _TSV_COLUMNS:
        raise ManifestError(
            f"TSV header must start with {', '.join(_TSV_COLUMNS)}", lineno
        )
    for extra_col in cols[len(_TSV_COLUMNS) :]:
        if extra_col != "labels":
            raise ManifestError(f"unsupported TSV column {extra_col!r}", lineno)
    return cols


def parse_tsv_row(line: str, columns: list[str], lineno: int) -> Sample:
    cells = line.rstrip("\n").split("\t")
    if len(cells) != len(columns):
        raise ManifestError(
            f"expected {len(columns)} columns, found {len(cells)}", lineno
        )
    row = dict(zip(columns, cells))
    if not row["id"]:
        raise ManifestError("missing or empty 'id' field", lineno)
    try:
        gt = int(row["ground_truth"]) if row["ground_truth"] else None
        labels_cell = row.get("labels")
        labels = (
            [int(v) for v in labels_cell.split("|")] if labels_cell else None
        )
    except ValueError as exc:
        raise ManifestError(f"non-integer label field: {exc}", lineno) from exc
    if gt is not None and gt < 0:
        raise ManifestError("field 'ground_truth' must be a non-negative integer", lineno)
    return Sample(
        id=row["id"],
        title=row["title"],
        tags=row["tags"].split("|") if row["tags"] else [],
        description=row["description"],
        alt_text=row["alt_text"],
        ground_truth=gt,
        labels=labels,
    )


def parse_manifest(stream: Iterable[str], format: str = "jsonl") -> Iterator[Sample]:
    """Lazily parse a manifest, yielding samples in input order.

    ``stream`` is any iterable of lines (an open text file qualifies).
    Blank lines are skipped. Malformed lines raise :class:`ManifestError`
    carrying the 1-based line number; a repeated id raises an error naming
    the id.
    """
    if format not in ("jsonl", "tsv"):
        raise ValueError(f"unknown manifest format {format!r}")
    seen: set[str] = set()
    columns: list[str] | None = None
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        if format == "tsv" and columns is None:
            columns = parse_tsv_header(line, lineno)
            continue
        if format == "jsonl":
            sample = parse_jsonl_line(line, lineno)
        else:
            sample = parse_tsv_row(line, columns, lineno)
        if sample.id in seen:
            raise ManifestError(f"duplicate sample id {sample.id!r}", lineno)
        seen.add(sample.id)
        yield sample


def sample_to_obj(sample: Sample) -> dict:
    """Serialize a Sample to a JSON-ready dict, omitting default-valued fields."""
    obj: dict = {"id": sample.id}
    if sample.title:
        obj["title"] = sample.title
    if sample.tags:
        obj["tags"] = sample.tags
    if sample.description:
        obj["description"] = sample.description
    if sample.alt_text:
        obj["alt_text"] = sample.alt_text
    if sample.ground_truth is not None:
        obj["ground_truth"] = sample.ground_truth
    if sample.labels is not None:
        obj["labels"] = sample.labels
    if sample.extra_labels is not None:
        obj["extra_labels"] = sample.extra_labels
    obj.update(sample.extras)
    return obj


def jsonl_line(sample: Sample) -> str:
    return json.dumps(sample_to_obj(sample), ensure_ascii=False)


def _tsv_cell(value: str, name: str) -> str:
    if "\t" in value or "\n" in value:
        raise ManifestError(f"field {name!r} contains a tab or newline; use jsonl")
    return value


def tsv_line(sample: Sample, with_labels: bool = False) -> str:
    for tag in sample.tags:
        if "|" in tag:
            raise ManifestError(f"tag {tag!r} contains '|'; use jsonl")
    cells = [
        _tsv_cell(sample.id, "id"),
        _tsv_cell(sample.title, "title"),
        _tsv_cell("|".join(sample.tags), "tags"),
        _tsv_cell(sample.description, "description"),
        _tsv_cell(sample.alt_text, "alt_text"),
        "" if sample.ground_truth is None else str(sample.ground_truth),
    ]
    if with_labels:
        cells.append("|".join(str(v) for v in sample.labels) if sample.labels else "")
    return "\t".join(cells)


def tsv_header(with_labels: bool = False) -> str:
    cols = list(_TSV_COLUMNS) + (["labels"] if with_labels else [])
    return "\t".join(cols)


def write_manifest(
    samples: Iterable[Sample],
    sink: IO[str],
    format: str = "jsonl",
    with_labels: bool = False,
) -> int:
    """Write samples to ``sink`` in input order; returns the count written.

    JSONL output is round-trip stable for every supported field, unknown
    fields included. TSV carries the fixed columns plus, when
    ``with_labels`` is set, a labels column; extras and extra_labels do
    not fit the TSV schema and are dropped there.
    """
    if format not in ("jsonl", "tsv"):
        raise ValueError(f"unknown manifest format {format!r}")
    count = 0
    if format == "tsv":
        sink.write(tsv_header(with_labels) + "\n")
        for sample in samples:
            sink.write(tsv_line(sample, with_labels) + "\n")
            count += 1
    else:
        for sample in samples:
            sink.write(jsonl_line(sample) + "\n")
            count += 1
    return count
