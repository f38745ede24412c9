"""Side-by-side comparison of run summaries."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

RATIO_METRICS = ("pdr", "goodput_bps", "latency_p50_ms", "latency_p95_ms", "latency_p99_ms", "sent", "delivered")


class ReportError(ValueError):
    pass


def load_summary(run_dir) -> dict:
    p = Path(run_dir) / "summary.json"
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ReportError(f"{p}: missing summary") from None
    except json.JSONDecodeError as exc:
        raise ReportError(f"{p}: corrupt summary ({exc})") from None
    if not isinstance(data, dict) or "run" not in data:
        raise ReportError(f"{p}: corrupt summary (no run totals)")
    return data


def _ratio(a, b) -> Optional[float]:
    if a is None or b is None:
        return None
    if a == 0:
        return 1.0 if b == 0 else None
    return round(b / a, 6)


def build_report(run_dirs: list) -> dict:
    """Ratios of every run against the first, per ``layer:rat`` group and for the run totals."""
    if not run_dirs:
        raise ReportError("need at least one run directory")
    summaries = [load_summary(d) for d in run_dirs]
    base = summaries[0]
    comparisons = []
    for d, s in zip(run_dirs, summaries):
        ratios = {}
        for group in sorted(set(base) & set(s)):
            ratios[group] = {m: _ratio(base[group].get(m), s[group].get(m)) for m in RATIO_METRICS if m in base[group]}
        comparisons.append({"run": str(d), "vs": str(run_dirs[0]), "ratios": ratios})
    return {
        "runs": [{"dir": str(d), "summary": s} for d, s in zip(run_dirs, summaries)],
        "comparisons": comparisons,
    }


def write_svgs(report: dict, out_dir) -> list:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "fogv2x"
    import matplotlib.pyplot as plt
    import numpy as np

    out_dir = Path(out_dir)
    written = []
    runs = report["runs"]
    groups = sorted({g for r in runs for g in r["summary"] if g != "run"})
    for metric, fname in (("pdr", "pdr.svg"), ("goodput_bps", "goodput.svg")):
        fig, ax = plt.subplots(figsize=(max(6, len(groups) * 1.2), 4))
        width = 0.8 / max(1, len(runs))
        x = np.arange(len(groups))
        for i, r in enumerate(runs):
            vals = [r["summary"].get(g, {}).get(metric) or 0.0 for g in groups]
            ax.bar(x + i * width, vals, width, label=Path(r["dir"]).name)
        ax.set_xticks(x + width * (len(runs) - 1) / 2)
        ax.set_xticklabels(groups, rotation=30, ha="right")
        ax.set_ylabel(metric)
        ax.legend()
        fig.tight_layout()
        p = out_dir / fname
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(p)
    return written
