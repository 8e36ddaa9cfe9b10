"""Parse sandbox behavioral JSON reports into normalized call traces.

Accepts the Cuckoo 2.x report layout (``behavior`` -> ``processes[]`` ->
``calls[]``) with case-insensitive keys and tolerance for extra fields.
Each sample becomes a :class:`BehaviorReport` whose call sequence
concatenates all processes' calls in report order, and can be partitioned
into the four element streams (category / name / arguments / return).
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyTrace, IoFailure, MalformedJson, MissingBehaviorSection
from .labels import ClassLabel

logger = logging.getLogger(__name__)

_NAME_KEYS = ("api", "apiname", "api_name", "name")
_CATEGORY_KEYS = ("category",)
_ARGUMENT_KEYS = ("arguments", "args")
_RETURN_KEYS = ("return", "return_value", "returnvalue")


@dataclass(frozen=True)
class ApiCallRecord:
    """One recorded API invocation."""

    category: str
    name: str
    arguments: tuple[str, ...]
    return_value: str


@dataclass(frozen=True)
class BehaviorReport:
    """One sample's ordered call trace.

    ``process_call_counts`` keeps the per-process segmentation of ``calls``
    (sum equals ``len(calls)``) so downstream n-gram windows can optionally
    stop at process boundaries.
    """

    sample_id: str
    label: ClassLabel
    calls: tuple[ApiCallRecord, ...]
    process_call_counts: tuple[int, ...] = ()

    def process_segments(self) -> list[tuple[ApiCallRecord, ...]]:
        """Split ``calls`` back into per-process runs."""
        if not self.process_call_counts:
            return [self.calls] if self.calls else []
        segments = []
        start = 0
        for count in self.process_call_counts:
            segments.append(self.calls[start:start + count])
            start += count
        return segments


# ---------------------------------------------------------------------------
# Value normalization
# ---------------------------------------------------------------------------

def stringify_value(value) -> str:
    """Canonical string form of a JSON argument/return value.

    Scalars map to decimal / ``true`` / ``false`` / ``na``; nested
    structures fall back to compact sorted-key JSON so the result is
    deterministic.
    """
    if value is None:
        return "na"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def _ci_get(obj: dict, keys: tuple[str, ...]):
    """Case-insensitive lookup of the first matching key; None if absent."""
    lowered = None
    for key, value in obj.items():
        if isinstance(key, str) and key.lower() in keys:
            if lowered is None or keys.index(key.lower()) < keys.index(lowered[0]):
                lowered = (key.lower(), value)
    return lowered[1] if lowered is not None else None


def normalize_arguments(raw) -> tuple[str, ...]:
    """Normalize a report's argument field to an ordered string tuple.

    JSON objects (Cuckoo's named arguments) are flattened to their values
    with keys sorted lexicographically; arrays keep their order. Array
    elements shaped like ``{"name": ..., "value": ...}`` contribute their
    value.
    """
    if raw is None:
        return ()
    if isinstance(raw, dict):
        return tuple(stringify_value(raw[k]) for k in sorted(raw, key=str))
    if isinstance(raw, list):
        out = []
        for element in raw:
            if isinstance(element, dict):
                value = _ci_get(element, ("value",))
                out.append(stringify_value(value if value is not None else element))
            else:
                out.append(stringify_value(element))
        return tuple(out)
    return (stringify_value(raw),)


# ---------------------------------------------------------------------------
# Report parsing
# ---------------------------------------------------------------------------

def _parse_call(obj) -> ApiCallRecord | None:
    if not isinstance(obj, dict):
        return None
    name = _ci_get(obj, _NAME_KEYS)
    if not isinstance(name, str) or not name.strip():
        return None
    category = _ci_get(obj, _CATEGORY_KEYS)
    return_value = _ci_get(obj, _RETURN_KEYS)
    return ApiCallRecord(
        category=stringify_value(category) if category is not None else "",
        name=name.strip(),
        arguments=normalize_arguments(_ci_get(obj, _ARGUMENT_KEYS)),
        return_value=stringify_value(return_value) if return_value is not None else "",
    )


def parse_report(raw: bytes | str, label: ClassLabel, sample_id: str) -> BehaviorReport:
    """Parse one behavioral JSON report into a :class:`BehaviorReport`.

    Raises :class:`MalformedJson` on undecodable input,
    :class:`MissingBehaviorSection` when no per-process call lists exist,
    and :class:`EmptyTrace` (carrying the parsed report) when every call
    list is empty.
    """
    try:
        document = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJson(f"{sample_id}: undecodable report JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise MissingBehaviorSection(f"{sample_id}: report is not a JSON object")

    behavior = _ci_get(document, ("behavior",))
    if not isinstance(behavior, dict):
        raise MissingBehaviorSection(f"{sample_id}: no behavior section")
    processes = _ci_get(behavior, ("processes",))
    if not isinstance(processes, list):
        raise MissingBehaviorSection(f"{sample_id}: behavior has no process call lists")

    calls: list[ApiCallRecord] = []
    counts: list[int] = []
    for process in processes:
        if not isinstance(process, dict):
            continue
        call_list = _ci_get(process, ("calls",))
        if not isinstance(call_list, list):
            continue
        n_before = len(calls)
        for call_obj in call_list:
            record = _parse_call(call_obj)
            if record is not None:
                calls.append(record)
        counts.append(len(calls) - n_before)

    report = BehaviorReport(
        sample_id=sample_id,
        label=label,
        calls=tuple(calls),
        process_call_counts=tuple(counts),
    )
    if not calls:
        raise EmptyTrace(f"{sample_id}: report contains zero API calls", report=report)
    return report


def partition_elements(
    report: BehaviorReport,
) -> tuple[list[str], list[str], list[tuple[str, ...]], list[str]]:
    """Split a report into the four index-aligned element streams."""
    categories = [c.category for c in report.calls]
    names = [c.name for c in report.calls]
    argument_lists = [c.arguments for c in report.calls]
    returns = [c.return_value for c in report.calls]
    return categories, names, argument_lists, returns


# ---------------------------------------------------------------------------
# Normalized JSON round trip
# ---------------------------------------------------------------------------

def report_to_json_bytes(report: BehaviorReport) -> bytes:
    """Serialize to the normalized JSON form.

    The output is itself a valid ``parse_report`` input, so
    parse(serialize(r)) reproduces ``r`` exactly.
    """
    segments = report.process_segments()
    document = {
        "sample_id": report.sample_id,
        "label": report.label.value,
        "behavior": {
            "processes": [
                {
                    "calls": [
                        {
                            "category": call.category,
                            "api": call.name,
                            "arguments": list(call.arguments),
                            "return": call.return_value,
                        }
                        for call in segment
                    ]
                }
                for segment in segments
            ]
        },
    }
    return json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")


def report_from_json_line(line: str) -> BehaviorReport:
    """Re-parse one normalized JSONL line (as written by the ingest stage)."""
    try:
        document = json.loads(line)
        sample_id = document["sample_id"]
        label = ClassLabel.from_name(document["label"])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise MalformedJson(f"bad normalized report line: {exc}") from exc
    try:
        return parse_report(line, label, sample_id)
    except EmptyTrace as exc:
        return exc.report


# ---------------------------------------------------------------------------
# Corpus loading
# ---------------------------------------------------------------------------

def load_manifest(path: str | Path) -> list[tuple[str, ClassLabel, Path]]:
    """Read a corpus manifest CSV (``sample_id,label,path``).

    Relative report paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries: list[tuple[str, ClassLabel, Path]] = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                report_path = Path(row["path"])
                if not report_path.is_absolute():
                    report_path = base / report_path
                entries.append((row["sample_id"], ClassLabel.from_name(row["label"]), report_path))
    except (OSError, KeyError, ValueError) as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    return entries


def write_manifest(path: str | Path, rows: list[tuple[str, str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "label", "path"])
        writer.writerows(rows)


def load_corpus(
    manifest_path: str | Path,
    threads: int = 1,
    keep_empty: bool = False,
) -> list[BehaviorReport]:
    """Parse every report named in the manifest, in manifest order.

    Parsing is pure per file, so files are read in parallel when
    ``threads`` > 1; results are merged back in manifest order. Empty
    traces are dropped (with a warning) unless ``keep_empty`` is set.
    """
    entries = load_manifest(manifest_path)

    def _load(entry: tuple[str, ClassLabel, Path]) -> BehaviorReport | None:
        sample_id, label, report_path = entry
        try:
            raw = report_path.read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read report {report_path}: {exc}") from exc
        try:
            return parse_report(raw, label, sample_id)
        except EmptyTrace as exc:
            logger.warning("sample %s has an empty trace", sample_id)
            return exc.report if keep_empty else None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_load, entries))
    else:
        results = [_load(entry) for entry in entries]
    return [report for report in results if report is not None]


# ---------------------------------------------------------------------------
# Element files (one call per line; argument lists tab-joined)
# ---------------------------------------------------------------------------

def write_element_files(report: BehaviorReport, out_dir: str | Path) -> list[Path]:
    """Write the four per-sample element text files and return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    categories, names, argument_lists, returns = partition_elements(report)
    streams = {
        "category": categories,
        "name": names,
        "argument": ["\t".join(args) for args in argument_lists],
        "return": returns,
    }
    paths = []
    for element, lines in streams.items():
        target = out_dir / f"{report.sample_id}.{element}.txt"
        text = "".join(line + "\n" for line in lines)
        target.write_text(text, encoding="utf-8")
        paths.append(target)
    return paths
