"""Text formats for traces, generator configs, calibration results and plot data.

Trace file::

    # format_version=1
    # master_seed=...
    # ...
    # columns=arrival_time_s,size_bytes,source_id
    0.000000000,64,0

Config and calibration files are flat ``key=value`` lines with ``#``
comments. All output uses LF line endings and locale-independent number
formatting, so identical inputs give identical bytes. Paths ending in
``.gz`` are gzip-compressed with a zeroed timestamp.
"""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .aggregator import BETA_ON, GeneratorConfig, Trace
from .analysis import VarianceTimePoint
from .exceptions import TraceFormatError, TraceValidationError
from .sampling import PRNG_NAME
from .source_model import MAX_PACKET_BYTES, MIN_PACKET_BYTES, TAX_BYTES

FORMAT_VERSION = 1
TRACE_COLUMNS = ("arrival_time_s", "size_bytes", "source_id")
VT_COLUMNS = ("log10_m", "log10_var_ratio")
ACF_COLUMNS = ("lag", "acf")


def format_number(v) -> str:
    """Shortest round-trip text for a number; integral floats lose the ``.0``."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    text = repr(float(v))
    if text.endswith(".0"):
        text = text[:-2]
    if text == "-0":
        text = "0"
    return text


def _open_write(destination):
    path = Path(destination)
    if path.suffix == ".gz":
        raw = open(path, "wb")
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
        return io.TextIOWrapper(gz, encoding="ascii", newline="\n"), (gz, raw)
    return open(path, "w", encoding="ascii", newline="\n"), ()


def write_text(destination, text: str) -> None:
    if hasattr(destination, "write"):
        destination.write(text)
        return
    fh, extra = _open_write(destination)
    try:
        fh.write(text)
    finally:
        fh.close()
        for f in extra:
            f.close()


def _read_lines(source) -> list[str]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        path = Path(source)
        if path.suffix == ".gz":
            with gzip.open(path, "rt", encoding="ascii", newline="") as fh:
                text = fh.read()
        else:
            with open(path, "r", encoding="ascii", newline="") as fh:
                text = fh.read()
    return text.split("\n")


# -- headers and configs ---------------------------------------------------

@dataclass(frozen=True)
class TraceFileHeader:
    format_version: int
    master_seed: int
    n_sources: int
    link_rate: float
    alpha_on: float
    alpha_off: float
    beta_on: float
    beta_off: float
    size_policy: str
    target_rate: float | None = None
    size_seed: int | None = None
    phase_offset: bool = False
    tax_bytes: int = TAX_BYTES
    prng: str = PRNG_NAME

    @classmethod
    def from_config(cls, cfg: GeneratorConfig) -> "TraceFileHeader":
        return cls(
            format_version=FORMAT_VERSION, master_seed=cfg.master_seed,
            n_sources=cfg.n_sources, link_rate=cfg.link_rate, alpha_on=cfg.alpha_on,
            alpha_off=cfg.alpha_off, beta_on=BETA_ON, beta_off=cfg.beta_off,
            size_policy=cfg.size_policy, target_rate=cfg.target_rate,
            size_seed=cfg.population_seed, phase_offset=cfg.phase_offset,
        )


_INT_KEYS = {"format_version", "master_seed", "n_sources", "size_seed", "tax_bytes",
             "packet_budget", "iterations", "iteration", "seed"}
_BOOL_KEYS = {"phase_offset"}
_STR_KEYS = {"size_policy", "prng", "columns"}


def _parse_value(key: str, text: str, line=None):
    key = key.rsplit(".", 1)[-1]
    try:
        if key in _STR_KEYS:
            return text
        if key in _BOOL_KEYS:
            if text not in ("true", "false"):
                raise ValueError(text)
            return text == "true"
        if text == "none":
            return None
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError:
        raise TraceFormatError(f"bad value {text!r} for {key}", line) from None


def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, str):
        return v
    return format_number(v)


def _kv_lines(items, prefix: str = "") -> str:
    return "".join(f"{prefix}{k}={format_value(v)}\n" for k, v in items)


def _parse_kv(lines, comment_prefix=False):
    out = {}
    for lineno, line in lines:
        body = line
        if comment_prefix:
            body = line[1:].strip()
        elif not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in body:
            raise TraceFormatError(f"expected key=value, got {line!r}", lineno)
        key, value = body.split("=", 1)
        key = key.strip()
        out[key] = _parse_value(key, value.strip(), lineno)
    return out


_CONFIG_KEYS = [f.name for f in fields(GeneratorConfig)]


def config_items(cfg: GeneratorConfig):
    items = [("prng", PRNG_NAME)]
    for name in _CONFIG_KEYS:
        value = getattr(cfg, name)
        if name == "size_seed":
            value = cfg.population_seed
        items.append((name, value))
    return items


def dump_config(cfg: GeneratorConfig, extra=()) -> str:
    text = "# self-similar traffic generator configuration\n"
    text += _kv_lines(config_items(cfg))
    if extra:
        text += "# calibration summary\n" + _kv_lines(extra, prefix="calibration.")
    return text


def write_config(cfg: GeneratorConfig, destination) -> None:
    write_text(destination, dump_config(cfg))


def _config_from_dict(d: dict, line_hint=None) -> GeneratorConfig:
    missing = [k for k in _CONFIG_KEYS if k not in d and k not in ("size_seed", "phase_offset")]
    if missing:
        raise TraceFormatError(f"config lacks keys: {', '.join(missing)}", line_hint)
    if d.get("prng", PRNG_NAME) != PRNG_NAME:
        raise TraceFormatError(f"unsupported prng {d['prng']!r}")
    kwargs = {k: d[k] for k in _CONFIG_KEYS if k in d}
    return GeneratorConfig(**kwargs)


def read_config(source) -> GeneratorConfig:
    lines = list(enumerate(_read_lines(source), start=1))
    d = _parse_kv(lines)
    return _config_from_dict({k: v for k, v in d.items() if not k.startswith("calibration.")})


def write_calibration_result(result, destination) -> None:
    extra = [
        ("achieved_rate", result.achieved_rate),
        ("relative_error", result.relative_error),
        ("iterations", result.iterations),
    ]
    write_text(destination, dump_config(result.config, extra))


def read_calibration_summary(source) -> tuple[GeneratorConfig, dict]:
    lines = list(enumerate(_read_lines(source), start=1))
    d = _parse_kv(lines)
    summary = {k.split(".", 1)[1]: v for k, v in d.items() if k.startswith("calibration.")}
    cfg = _config_from_dict({k: v for k, v in d.items() if not k.startswith("calibration.")})
    return cfg, summary


HISTORY_COLUMNS = ("iteration", "n_sources", "beta_off", "alpha_on", "alpha_off", "phi",
                   "payload_bytes", "seed", "achieved_rate", "relative_error")


def write_history(history, destination) -> None:
    rows = ["#" + ",".join(HISTORY_COLUMNS) + "\n"]
    for rec in history:
        rows.append(",".join(format_number(getattr(rec, c)) for c in HISTORY_COLUMNS) + "\n")
    write_text(destination, "".join(rows))


def read_history(source) -> list[dict]:
    lines = [ln for ln in _read_lines(source) if ln and not ln.startswith("#")]
    out = []
    for ln in lines:
        vals = ln.split(",")
        out.append({c: _parse_value(c, v) for c, v in zip(HISTORY_COLUMNS, vals)})
    return out


# -- traces -----------------------------------------------------------------

def _header_items(header: TraceFileHeader):
    return [(f.name, getattr(header, f.name)) for f in fields(TraceFileHeader)]


def dump_trace(t: Trace, header: TraceFileHeader) -> str:
    if not t.is_sorted():
        raise TraceValidationError("trace is not sorted by (arrival_time, source_id)")
    parts = [_kv_lines(_header_items(header), prefix="# ")]
    parts.append("# columns=" + ",".join(TRACE_COLUMNS) + "\n")
    rows = [
        f"{tm:.9f},{s},{i}\n"
        for tm, s, i in zip(t.arrival_times.tolist(), t.sizes.tolist(), t.source_ids.tolist())
    ]
    parts.append("".join(rows))
    return "".join(parts)


def write_trace(t: Trace, header: TraceFileHeader, destination) -> None:
    write_text(destination, dump_trace(t, header))


def read_trace(source) -> tuple[Trace, TraceFileHeader]:
    lines = _read_lines(source)
    if lines and lines[-1] == "":
        lines.pop()
    head = []
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        head.append((k + 1, lines[k]))
        k += 1
    meta = _parse_kv(head, comment_prefix=True)
    columns = meta.pop("columns", None)
    if "format_version" not in meta:
        raise TraceFormatError("missing trace header (format_version)", 1)
    if meta["format_version"] != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported format_version {meta['format_version']}", 1)
    if columns is not None and columns != ",".join(TRACE_COLUMNS):
        raise TraceFormatError(f"unexpected columns {columns}")
    try:
        header = TraceFileHeader(**meta)
    except TypeError as exc:
        raise TraceFormatError(f"bad trace header: {exc}") from None

    n = len(lines) - k
    times = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    ids = np.empty(n, dtype=np.int64)
    for j in range(n):
        lineno = k + j + 1
        fields_ = lines[k + j].split(",")
        if len(fields_) != 3:
            raise TraceFormatError(f"expected 3 fields, got {len(fields_)}", lineno)
        try:
            times[j] = float(fields_[0])
            sizes[j] = int(fields_[1])
            ids[j] = int(fields_[2])
        except ValueError:
            raise TraceFormatError(f"malformed row {lines[k + j]!r}", lineno) from None
        if not MIN_PACKET_BYTES <= sizes[j] <= MAX_PACKET_BYTES:
            raise TraceValidationError(
                f"line {lineno}: size {sizes[j]} outside [{MIN_PACKET_BYTES}, {MAX_PACKET_BYTES}]"
            )
    trace = Trace(times, sizes, ids, header.link_rate)
    if not trace.is_sorted():
        dt = np.diff(times)
        bad = int(np.flatnonzero((dt < 0) | ((dt == 0) & (np.diff(ids) <= 0)))[0])
        raise TraceValidationError(f"line {k + bad + 2}: trace is not sorted")
    return trace, header


# -- plot data --------------------------------------------------------------

def dump_plot_data(points) -> str:
    points = list(points)
    if not points:
        raise ValueError("no points to write")
    if isinstance(points[0], VarianceTimePoint):
        head = VT_COLUMNS
        rows = [(p.log_m, p.log_var_ratio) for p in points]
    else:
        head = ACF_COLUMNS
        rows = [(lag, float(v)) for lag, v in enumerate(points)]
    body = "".join(f"{format_number(a)},{format_number(b)}\n" for a, b in rows)
    return "# " + ",".join(head) + "\n" + body


def write_plot_data(points, destination) -> None:
    """Two-column CSV: variance-time points or an ACF sequence (lag from 0)."""
    write_text(destination, dump_plot_data(points))


def read_plot_data(source) -> tuple[tuple[str, str], np.ndarray]:
    lines = _read_lines(source)
    if not lines or not lines[0].startswith("#"):
        raise TraceFormatError("missing plot-data header", 1)
    names = tuple(lines[0][1:].strip().split(","))
    reader = csv.reader(ln for ln in lines[1:] if ln)
    data = np.array([[float(a), float(b)] for a, b in reader])
    return names, data
