"""CSV files with ``#``-prefixed metadata header lines."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence


def fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    if isinstance(x, str):
        return x
    if isinstance(x, (bool,)):
        return str(x).lower()
    return repr(float(x))


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence],
    metadata: Mapping[str, object] | None = None,
) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], list[tuple[int, list[str]]]]:
    """Return (metadata, header, [(line_number, fields), ...])."""
    path = Path(path)
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if ":" in body:
                    k, v = body.split(":", 1)
                    meta[k.strip()] = v.strip()
                continue
            fields = next(csv.reader([stripped]))
            if header is None:
                header = [f.strip() for f in fields]
            else:
                rows.append((lineno, fields))
    if header is None:
        raise ValueError(f"{path}: no header line")
    return meta, header, rows
