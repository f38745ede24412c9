"""Per-message outcome records and their aggregation into PDR, latency and goodput."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

CSV_HEADER = ["msg_id", "t_tx_ms", "t_rx_ms", "src", "dst", "rat", "layer", "service", "bytes", "status"]
STATUSES = ("delivered", "erased", "dropped_no_coverage", "dropped_policy", "deferred")
NO_RAT = "none"


@dataclass(frozen=True)
class KpiRecord:
    msg_id: int
    t_tx_ms: float
    t_rx_ms: Optional[float]
    src: str
    dst: str
    rat: str
    layer: str
    service: str
    bytes: int
    status: str

    def validate(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"record {self.msg_id}: unknown status {self.status!r}")
        if self.status == "delivered":
            if self.t_rx_ms is None or self.t_rx_ms < self.t_tx_ms:
                raise ValueError(f"record {self.msg_id}: delivered with t_rx before t_tx")
        elif self.t_rx_ms is not None:
            raise ValueError(f"record {self.msg_id}: t_rx set on a {self.status} record")
        if self.bytes <= 0:
            raise ValueError(f"record {self.msg_id}: non-positive size")

    @property
    def latency_ms(self) -> Optional[float]:
        return None if self.t_rx_ms is None else self.t_rx_ms - self.t_tx_ms


class KpiSink:
    """Append-only record store; one record per message id."""

    def __init__(self) -> None:
        self.records: list[KpiRecord] = []
        self._ids: set[int] = set()

    def __len__(self) -> int:
        return len(self.records)

    def record_outcome(self, record: KpiRecord) -> "KpiSink":
        record.validate()
        if record.msg_id in self._ids:
            raise ValueError(f"duplicate record for message {record.msg_id}")
        self._ids.add(record.msg_id)
        self.records.append(record)
        return self


def nearest_rank(sorted_values: list, pct: float) -> float:
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


def _empty_counts() -> dict:
    return {"sent": 0, "bytes_delivered": 0, **{s: 0 for s in STATUSES}}


def summarize(records: Iterable[KpiRecord], duration_s: float, extra: Optional[dict] = None) -> dict:
    """Group by ``layer:rat``; PDR, nearest-rank latency percentiles, goodput over the run."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    groups: dict = {}
    lats: dict = {}
    totals = _empty_counts()
    for r in records:
        key = f"{r.layer}:{r.rat}"
        g = groups.setdefault(key, _empty_counts())
        for c in (g, totals):
            c["sent"] += 1
            c[r.status] += 1
        if r.status == "delivered":
            g["bytes_delivered"] += r.bytes
            totals["bytes_delivered"] += r.bytes
            lats.setdefault(key, []).append(r.t_rx_ms - r.t_tx_ms)

    out = {}
    for key in sorted(groups):
        g = groups[key]
        vals = sorted(lats.get(key, []))
        entry = {
            "sent": g["sent"],
            **{s: g[s] for s in STATUSES},
            "pdr": round(g["delivered"] / g["sent"], 9),
            "goodput_bps": round(g["bytes_delivered"] * 8 / duration_s, 3),
            "latency_p50_ms": round(nearest_rank(vals, 50), 3) if vals else None,
            "latency_p95_ms": round(nearest_rank(vals, 95), 3) if vals else None,
            "latency_p99_ms": round(nearest_rank(vals, 99), 3) if vals else None,
        }
        out[key] = entry

    run = {
        "duration_s": duration_s,
        "sent": totals["sent"],
        **{s: totals[s] for s in STATUSES},
        "pdr": round(totals["delivered"] / totals["sent"], 9) if totals["sent"] else 0.0,
        "goodput_bps": round(totals["bytes_delivered"] * 8 / duration_s, 3),
    }
    run["conserved"] = run["sent"] == sum(run[s] for s in STATUSES)
    if extra:
        run.update(extra)
    out["run"] = run
    return out


def _fmt_ms(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.3f}"


def records_to_csv(records: Iterable[KpiRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(records, key=lambda r: (r.t_tx_ms, r.msg_id)):
        w.writerow([r.msg_id, _fmt_ms(r.t_tx_ms), _fmt_ms(r.t_rx_ms), r.src, r.dst, r.rat,
                    r.layer, r.service, r.bytes, r.status])
    return buf.getvalue()


def read_messages_csv(path: str | os.PathLike) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [
            KpiRecord(
                msg_id=int(row[0]),
                t_tx_ms=float(row[1]),
                t_rx_ms=float(row[2]) if row[2] else None,
                src=row[3],
                dst=row[4],
                rat=row[5],
                layer=row[6],
                service=row[7],
                bytes=int(row[8]),
                status=row[9],
            )
            for row in reader
        ]


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_outputs(records, summary: dict, out_dir, formats=("csv", "json")) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out / "messages.csv"
        p.write_text(records_to_csv(records), encoding="utf-8")
        written.append(p)
    if "json" in formats:
        p = out / "summary.json"
        p.write_text(dump_json(summary), encoding="utf-8")
        written.append(p)
    return written
