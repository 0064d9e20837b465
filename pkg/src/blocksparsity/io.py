"""Signal files and estimate reports.

Text signal files start with a layout header and hold one value per line::

    layout: d=5
    0.316227766
    ...

or ``layout: 2,3,5`` for explicit block lengths.  Blank lines and lines
starting with ``#`` are ignored.

Binary signal files hold a 16-byte header (8-byte magic ``BLKSIG\\x00\\x01``,
little-endian uint32 layout kind, uint32 layout value), then for kind 1 the
``p`` block lengths as uint32, then the values as little-endian float64.
Kind 0 means uniform blocks of length ``value``; kind 1 means ``value``
explicit lengths follow.
"""

from __future__ import annotations

import csv
import io
import struct

import numpy as np

from .blocks import BlockLayout, BlockSignal
from .errors import ParameterError

__all__ = [
    "SignalFormatError",
    "parse_layout",
    "format_layout",
    "read_signal",
    "write_signal",
    "REPORT_FIELDS",
    "format_report",
]

MAGIC = b"BLKSIG\x00\x01"
_HEADER = struct.Struct("<8sII")

REPORT_FIELDS = ("alpha", "n1", "n_alpha", "v1_hat", "va_hat", "k_hat", "theta1", "theta_a",
                 "w_hat", "ci_low", "ci_high", "clamped_flags", "seed")


class SignalFormatError(ParameterError):
    """A signal file or layout descriptor could not be parsed."""


def parse_layout(text: str, n: int = None):
    """Parse ``d=<int>``, a bare ``<int>``, or a comma list of block lengths.

    Returns a :class:`BlockLayout` when the block count is known: always for
    lists, and for uniform ``d`` only when the signal length ``n`` is given.
    Otherwise returns the integer ``d``.
    """
    text = text.strip()
    if text.startswith("d="):
        text = text[2:].strip()
    try:
        parts = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise SignalFormatError(f"cannot parse layout {text!r}") from None
    if not parts:
        raise SignalFormatError("empty layout descriptor")
    if len(parts) > 1 or "," in text:
        return BlockLayout(parts)
    if n is None:
        return parts[0]
    return BlockLayout.uniform(n, parts[0])


def format_layout(layout: BlockLayout) -> str:
    if layout.is_uniform:
        return f"d={layout.block_lengths[0]}"
    return ",".join(str(d) for d in layout.block_lengths)


def _read_text(data: str, layout_override=None) -> BlockSignal:
    lines = [ln.strip() for ln in data.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    header = None
    if lines and lines[0].lower().startswith("layout:"):
        header = lines.pop(0).split(":", 1)[1]
    try:
        values = np.array([float(v) for v in lines])
    except ValueError as exc:
        raise SignalFormatError(f"non-numeric signal value: {exc}") from None
    spec = layout_override if layout_override is not None else header
    if spec is None:
        raise SignalFormatError("signal file has no 'layout:' header and no layout was given")
    layout = spec if isinstance(spec, BlockLayout) else parse_layout(str(spec), values.size)
    return BlockSignal(values, layout)


def _read_binary(data: bytes, layout_override=None) -> BlockSignal:
    if len(data) < _HEADER.size:
        raise SignalFormatError("truncated binary signal header")
    _, kind, value = _HEADER.unpack_from(data)
    pos = _HEADER.size
    if kind == 1:
        end = pos + 4 * value
        lengths = np.frombuffer(data[pos:end], dtype="<u4")
        if lengths.size != value:
            raise SignalFormatError("truncated block-length table")
        pos = end
    elif kind != 0:
        raise SignalFormatError(f"unknown binary layout kind {kind}")
    body = data[pos:]
    if len(body) % 8:
        raise SignalFormatError("binary payload is not a whole number of float64 values")
    values = np.frombuffer(body, dtype="<f8").astype(float)
    if layout_override is not None:
        spec = layout_override
        layout = spec if isinstance(spec, BlockLayout) else parse_layout(str(spec), values.size)
    elif kind == 0:
        layout = BlockLayout.uniform(values.size, value)
    else:
        layout = BlockLayout(lengths.tolist())
    return BlockSignal(values, layout)


def read_signal(path, layout=None) -> BlockSignal:
    """Load a text or binary signal file; ``layout`` overrides the file's header."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(MAGIC):
        return _read_binary(data, layout)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise SignalFormatError(f"{path}: neither a text signal file nor binary magic") from None
    return _read_text(text, layout)


def write_signal(path, x: BlockSignal, binary: bool = False) -> None:
    if binary:
        lay = x.layout
        if lay.is_uniform:
            head = _HEADER.pack(MAGIC, 0, lay.block_lengths[0])
            table = b""
        else:
            head = _HEADER.pack(MAGIC, 1, lay.p)
            table = np.asarray(lay.block_lengths, dtype="<u4").tobytes()
        with open(path, "wb") as fh:
            fh.write(head + table + np.asarray(x.values, dtype="<f8").tobytes())
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"layout: {format_layout(x.layout)}\n")
        for v in x.values:
            fh.write(f"{float(v)!r}\n")


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def format_report(record: dict, style: str = "kv") -> str:
    """Render an estimate record as ``key=value`` lines or a two-line CSV.

    Known fields come first in a fixed order, extras follow in insertion order.
    """
    keys = [k for k in REPORT_FIELDS if k in record] + [k for k in record if k not in REPORT_FIELDS]
    if style == "kv":
        return "".join(f"{k}={_fmt(record[k])}\n" for k in keys)
    if style == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        w.writerow([_fmt(record[k]) for k in keys])
        return buf.getvalue()
    raise ParameterError(f"unknown report style {style!r}")
