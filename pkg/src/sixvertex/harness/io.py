"""Result records and their CSV / JSON-lines serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..core import IoError

COLUMNS = ("experiment", "seed", "N", "statistic", "value", "target", "sigma", "pass",
           "seconds", "config_hash")


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    seed: int
    N: int
    statistic: str
    value: float
    target: float
    sigma: float
    passed: bool
    seconds: float = float("nan")
    config_hash: str = ""


def _num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.9f}"
    return "0.000000000" if s == "-0.000000000" else s


def _fields(r: ResultRecord, timing: bool) -> list[str]:
    return [r.experiment, str(int(r.seed)), str(int(r.N)), r.statistic, _num(r.value),
            _num(r.target), _num(r.sigma), "true" if r.passed else "false",
            _num(r.seconds) if timing else "", r.config_hash]


def format_records(records: Sequence[ResultRecord], fmt: str = "csv", timing: bool = False) -> str:
    """Serialize records with a fixed column order and nine decimals.

    Wall-clock seconds are left empty unless ``timing`` is set, so that a
    fixed configuration always produces identical bytes.
    """
    records = list(records)
    if not records:
        raise IoError("no records to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow(_fields(r, timing))
        return buf.getvalue()
    if fmt == "jsonl":
        lines = []
        for r in records:
            f = _fields(r, timing)
            parts = []
            for col, val in zip(COLUMNS, f):
                if col in ("experiment", "statistic", "config_hash"):
                    parts.append(f"{json.dumps(col)}: {json.dumps(val)}")
                elif col == "pass":
                    parts.append(f'"pass": {val}')
                elif val in ("", "nan", "inf", "-inf"):
                    parts.append(f"{json.dumps(col)}: null" if val in ("", "nan")
                                 else f"{json.dumps(col)}: {json.dumps(val)}")
                else:
                    parts.append(f"{json.dumps(col)}: {val}")
            lines.append("{" + ", ".join(parts) + "}")
        return "\n".join(lines) + "\n"
    raise IoError(f"unknown format {fmt!r}")


def emit(records: Sequence[ResultRecord], path: str | Path, fmt: str = "csv",
         timing: bool = False) -> Path:
    """Write records to ``path``.

    Raises
    ------
    IoError
        If ``records`` is empty, the format is unknown or the file cannot be written.
    """
    text = format_records(records, fmt, timing)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def _float(s) -> float:
    if s is None or s == "":
        return float("nan")
    return float(s)


def _record(d: dict) -> ResultRecord:
    p = d["pass"]
    passed = p if isinstance(p, bool) else str(p).lower() == "true"
    return ResultRecord(str(d["experiment"]), int(d["seed"]), int(d["N"]), str(d["statistic"]),
                        _float(d["value"]), _float(d["target"]), _float(d["sigma"]), passed,
                        _float(d["seconds"]), str(d["config_hash"]))


def parse_records(text: str, fmt: str = "csv") -> list[ResultRecord]:
    try:
        if fmt == "csv":
            rows = list(csv.DictReader(io.StringIO(text)))
            if rows and tuple(rows[0].keys()) != COLUMNS:
                raise IoError("unexpected CSV header")
            return [_record(r) for r in rows]
        if fmt == "jsonl":
            return [_record(json.loads(line)) for line in text.splitlines() if line.strip()]
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        raise IoError(f"malformed {fmt} records: {e}") from e
    raise IoError(f"unknown format {fmt!r}")


def parse(path: str | Path, fmt: str | None = None) -> list[ResultRecord]:
    """Read records written by :func:`emit`; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix in (".jsonl", ".json") else "csv")
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    return parse_records(text, fmt)


def emit_series(series: dict, path: str | Path) -> Path:
    """Raw plot data: one ``series,x,y`` row per point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("series", "x", "y"))
    for name in sorted(series):
        xs, ys = series[name]
        for x, y in zip(xs, ys):
            w.writerow((name, _num(x), _num(y)))
    path = Path(path)
    try:
        path.write_text(buf.getvalue())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def all_passed(records: Iterable[ResultRecord]) -> bool:
    return all(r.passed for r in records)
