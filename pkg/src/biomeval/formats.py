"""On-disk formats: FTPL binary templates, CSV templates, manifests,
curve CSVs and evaluation reports.

FTPL layout (all integers little-endian)::

    header   magic "FTPL" | version u16 (=1) | dim u32 | count u64     18 bytes
    record   id_len u16 | id utf-8 | subject_len u16 | subject utf-8 | dim x f32

Media ids are not persisted in FTPL.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import (BadMagic, BadValue, DimMismatch, EmptyFile, FormatError, IoFailure,
                     MissingTemplate, NonNumeric, RaggedRow, SchemaMismatch, TruncatedFile,
                     UnsupportedVersion)
from .types import Curve, Template, validate_template

MAGIC = b"FTPL"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
_U16 = struct.Struct("<H")
HEADER_SIZE = _HEADER.size
_F32LE = np.dtype("<f4")


# -- FTPL binary ------------------------------------------------------------

def _encode_id(value, what):
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"{what} longer than 65535 bytes")
    return _U16.pack(len(raw)) + raw


def encode_templates(templates, dim=None) -> bytes:
    templates = list(templates)
    if dim is None:
        if not templates:
            raise ValueError("cannot infer dim from an empty template list")
        dim = templates[0].dim
    parts = [_HEADER.pack(MAGIC, VERSION, dim, len(templates))]
    for n, t in enumerate(templates):
        problems = validate_template(t)
        if problems:
            raise ValueError(f"template {n} ({t.template_id!r}) invalid: {'; '.join(problems)}")
        if t.dim != dim:
            raise DimMismatch(f"template {t.template_id!r} has dim {t.dim}, expected {dim}")
        parts.append(_encode_id(t.template_id, "template id"))
        parts.append(_encode_id(t.subject_id, "subject id"))
        parts.append(t.vector.astype(_F32LE).tobytes())
    return b"".join(parts)


def write_templates(templates, path, dim=None) -> int:
    """Write templates as FTPL and return the number of bytes written."""
    data = encode_templates(templates, dim)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return len(data)


class _Reader:
    def __init__(self, fh):
        self.fh = fh
        self.offset = 0

    def take(self, n):
        data = self.fh.read(n)
        if len(data) != n:
            raise TruncatedFile(self.offset + len(data))
        self.offset += n
        return data


def _read_header(r, expected_dim):
    head = r.fh.read(4)
    if not MAGIC.startswith(head):
        raise BadMagic(f"bad magic {head!r}, expected {MAGIC!r}")
    if len(head) < 4:
        raise TruncatedFile(len(head))
    r.offset = 4
    version, dim, count = struct.unpack("<HIQ", r.take(HEADER_SIZE - 4))
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported FTPL version {version}")
    if dim < 1:
        raise DimMismatch("header dim must be >= 1")
    if expected_dim is not None and dim != expected_dim:
        raise DimMismatch(f"file dim {dim} != expected {expected_dim}")
    return dim, count


def iter_templates(path, dim=None):
    """Stream templates from an FTPL file one record at a time."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoFailure(f"cannot open {path}: {exc}") from exc
    with fh:
        r = _Reader(fh)
        dim, count = _read_header(r, dim)
        for _ in range(count):
            start = r.offset
            (n,) = _U16.unpack(r.take(2))
            tid = r.take(n)
            (n,) = _U16.unpack(r.take(2))
            sid = r.take(n)
            vec = np.frombuffer(r.take(4 * dim), dtype=_F32LE).astype(np.float32)
            try:
                yield Template(tid.decode("utf-8"), sid.decode("utf-8"), vec)
            except UnicodeDecodeError as exc:
                raise FormatError(f"invalid UTF-8 id in record at byte offset {start}") from exc
        if fh.read(1):
            raise FormatError(f"trailing bytes after {count} records at byte offset {r.offset}")


def read_templates(path, dim=None):
    """Read every template of an FTPL file."""
    return list(iter_templates(path, dim))


# -- CSV templates ----------------------------------------------------------

def _open_text(path, mode="r"):
    try:
        return open(path, mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot open {path}: {exc}") from exc


def read_templates_csv(path):
    """Read ``template_id,subject_id,f0,...,f{d-1}`` rows into templates."""
    with _open_text(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if not header:
            raise EmptyFile(f"{path} is empty")
        dim = len(header) - 2
        expected = ["template_id", "subject_id"] + [f"f{k}" for k in range(dim)]
        if dim < 1 or header != expected:
            raise SchemaMismatch(f"{path}: header must be template_id,subject_id,f0,...")
        out = []
        for row in rows:
            line = rows.line_num
            if not row:
                continue
            if len(row) != dim + 2:
                raise RaggedRow(line, f"line {line}: expected {dim + 2} fields, got {len(row)}")
            values = np.empty(dim, dtype=np.float64)
            for k, text in enumerate(row[2:]):
                try:
                    values[k] = float(text)
                except ValueError:
                    raise NonNumeric(line, k + 3, text) from None
                if not math.isfinite(values[k]):
                    raise BadValue(line, k + 3, "feature values must be finite")
            t = Template(row[0], row[1], values)
            problems = validate_template(t)
            if problems:
                raise BadValue(line, 1, "; ".join(problems))
            out.append(t)
    return out


def write_templates_csv(templates, path):
    templates = list(templates)
    if not templates:
        raise ValueError("nothing to write")
    dim = templates[0].dim
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["template_id", "subject_id"] + [f"f{k}" for k in range(dim)])
        for t in templates:
            if t.dim != dim:
                raise DimMismatch(f"template {t.template_id!r} has dim {t.dim}, expected {dim}")
            w.writerow([t.template_id, t.subject_id] + [format(float(v), ".9g") for v in t.vector])


def load_templates(path):
    """Read FTPL or CSV templates depending on the file suffix."""
    if str(path).lower().endswith(".csv"):
        return read_templates_csv(path)
    return read_templates(path)


# -- manifests --------------------------------------------------------------

class PairRecord(NamedTuple):
    fold: int
    template_a: str
    template_b: str
    same: bool


class GalleryRecord(NamedTuple):
    gallery_set: str
    template_id: str
    subject_id: str


class ProbeRecord(NamedTuple):
    template_id: str
    subject_id: str


class MediaRecord(NamedTuple):
    media_template_id: str
    subject_id: str
    fused_template_id: str
    weight: Optional[float] = None


SCHEMAS = {
    "pairs": ("fold", "template_a", "template_b", "same"),
    "gallery": ("gallery_set", "template_id", "subject_id"),
    "probe": ("template_id", "subject_id"),
    "media_map": ("media_template_id", "subject_id", "fused_template_id"),
}
_OPTIONAL = {"media_map": ("weight",)}


def _id(text, line, col):
    if not text or text != text.strip():
        raise BadValue(line, col, "id must be non-empty without surrounding whitespace")
    return text


def _parse_row(schema, row, line, has_weight):
    if schema == "pairs":
        try:
            fold = int(row[0])
        except ValueError:
            raise BadValue(line, 1, "fold must be a non-negative integer") from None
        if fold < 0:
            raise BadValue(line, 1, "fold must be a non-negative integer")
        if row[3] not in ("0", "1"):
            raise BadValue(line, 4, "must be 0 or 1")
        return PairRecord(fold, _id(row[1], line, 2), _id(row[2], line, 3), row[3] == "1")
    if schema == "gallery":
        return GalleryRecord(*(_id(v, line, k + 1) for k, v in enumerate(row)))
    if schema == "probe":
        return ProbeRecord(*(_id(v, line, k + 1) for k, v in enumerate(row)))
    ids = [_id(v, line, k + 1) for k, v in enumerate(row[:3])]
    weight = None
    if has_weight:
        try:
            weight = float(row[3])
        except ValueError:
            raise BadValue(line, 4, "weight must be a number") from None
        if not math.isfinite(weight) or weight < 0:
            raise BadValue(line, 4, "weight must be finite and >= 0")
    return MediaRecord(*ids, weight)


def parse_manifest(path, schema):
    """Parse a manifest CSV with a mandatory header into typed records.

    Only syntax and value ranges are checked here; see :func:`link` for
    referential integrity against a template store.
    """
    if schema not in SCHEMAS:
        raise ValueError(f"unknown manifest schema {schema!r}")
    required = list(SCHEMAS[schema])
    with _open_text(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if not header:
            raise EmptyFile(f"{path} is empty")
        allowed = [required] + [required + [c] for c in _OPTIONAL.get(schema, ())]
        if header not in allowed:
            raise SchemaMismatch(
                f"{path}: header {','.join(header)!r} does not match {schema} schema "
                f"{','.join(required)!r}")
        has_weight = len(header) > len(required)
        records = []
        for row in rows:
            line = rows.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(line, f"line {line}: expected {len(header)} fields, got {len(row)}")
            records.append(_parse_row(schema, row, line, has_weight))
    return records


def write_manifest(path, schema, records):
    header = list(SCHEMAS[schema])
    records = list(records)
    with_weight = schema == "media_map" and any(r.weight is not None for r in records)
    if with_weight:
        header.append("weight")
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            if schema == "pairs":
                w.writerow([r.fold, r.template_a, r.template_b, int(r.same)])
            elif schema == "media_map":
                row = list(r[:3])
                if with_weight:
                    row.append(format(r.weight if r.weight is not None else 1.0, ".9g"))
                w.writerow(row)
            else:
                w.writerow(list(r))


def link(records, store):
    """Check that every template id referenced by ``records`` exists in ``store``."""
    for n, r in enumerate(records):
        for name in ("template_a", "template_b", "template_id", "media_template_id"):
            tid = getattr(r, name, None)
            if tid is not None and tid not in store:
                raise MissingTemplate(tid, n)


# -- curves -----------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".9g")


def format_curve_csv(c: Curve) -> str:
    lines = [f"# kind={c.kind}; x={c.x_axis}; y={c.y_axis}; "
             f"n_folds_aggregated={c.n_folds_aggregated}", "x,y"]
    lines += [f"{_fmt(x)},{_fmt(y)}" for x, y in zip(c.x, c.y)]
    return "\n".join(lines) + "\n"


def write_curve_csv(c: Curve, path):
    try:
        Path(path).write_text(format_curve_csv(c), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_curve_csv(path) -> Curve:
    """Parse a curve CSV written by :func:`write_curve_csv`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    meta = {}
    xs, ys = [], []
    saw_header = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            for item in line[1:].split(";"):
                if "=" in item:
                    k, v = item.split("=", 1)
                    meta[k.strip()] = v.strip()
            continue
        if not saw_header:
            if line.strip() != "x,y":
                raise SchemaMismatch(f"{path}: line {line_no}: expected header 'x,y'")
            saw_header = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise RaggedRow(line_no)
        for col, p in enumerate(parts, start=1):
            try:
                float(p)
            except ValueError:
                raise NonNumeric(line_no, col, p) from None
        xs.append(float(parts[0]))
        ys.append(float(parts[1]))
    if not saw_header:
        raise EmptyFile(f"{path} has no 'x,y' header")
    kind = meta.get("kind")
    if kind is None:
        raise SchemaMismatch(f"{path}: missing '# kind=...' comment")
    return Curve(kind, xs, ys, meta.get("x", ""), meta.get("y", ""),
                 int(meta.get("n_folds_aggregated", 1)))


# -- reports ----------------------------------------------------------------

@dataclass
class EvaluationReport:
    """Self-describing result document.

    ``sources`` holds per-fold or per-gallery-set scalar metrics; ``summary``
    their aggregate. Every metric scalar is a rate in [0, 1] or None when
    undefined. Thresholds live under ``calibration``.
    """

    tool_version: str
    protocol: str
    config: dict
    sources: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        for where, metrics in [("summary", self.summary)] + [
                (f"sources.{k}", v) for k, v in self.sources.items()]:
            for name, value in metrics.items():
                if value is None or isinstance(value, (str, bool)):
                    continue
                if not (0.0 <= value <= 1.0):
                    raise ValueError(f"{where}.{name} = {value} outside [0, 1]")

    def to_dict(self):
        return asdict(self)


def format_report(r: EvaluationReport) -> str:
    return json.dumps(r.to_dict(), indent=2, sort_keys=True) + "\n"


def write_report(r: EvaluationReport, path):
    try:
        Path(path).write_text(format_report(r), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
