"""CSV result tables and the run manifest."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .engine import BerEstimate, SimConfig

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "experiment",
    "topology",
    "detector",
    "pmf_scheme",
    "mode",
    "snr_db",
    "hops",
    "nodes_per_group",
    "quant_bits",
    "trials",
    "errors",
    "ber",
    "ci95",
)
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    config: SimConfig
    estimate: BerEstimate


def _g(x: float) -> str:
    return f"{x:.6g}"


def row_fields(row: ResultRow) -> list:
    c, e = row.config, row.estimate
    return [
        row.experiment,
        c.kind,
        c.detector.value,
        c.pmf_scheme.value if c.pmf_scheme is not None else "none",
        c.mode,
        _g(c.snr_db),
        str(c.hops),
        str(c.nodes_per_group),
        str(c.quant_bits) if c.quant_bits is not None else "none",
        str(e.trials),
        str(e.errors),
        _g(e.ber),
        _g(e.ci95_halfwidth),
    ]


def format_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(row_fields(r))
    return buf.getvalue()


def emit_results(tables: dict, out_dir, *, manifest: dict | None = None) -> list:
    """Write ``<experiment>.csv`` for each entry of ``tables`` plus a manifest.

    ``tables`` maps experiment name to its rows; an empty row list yields a
    header-only file and a warning.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    written = []
    for name, rows in tables.items():
        if not rows:
            log.warning("experiment %r has no sweep points; writing a header-only table", name)
        path = out / f"{name}.csv"
        path.write_text(format_csv(rows))
        written.append(path)
    if manifest is not None:
        doc = {
            **manifest,
            "files": [p.name for p in written],
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        (out / MANIFEST_NAME).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return written


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start
