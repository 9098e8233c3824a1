"""Structured JSON and flat CSV reports.

The JSON report has three top-level keys: ``header`` (timestamp and
version, the only run-dependent content), ``config`` and ``checks`` plus a
``summary``.  Everything outside ``header`` is a deterministic function of
the configuration and seeds.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
from pathlib import Path
from typing import Union

from .stats import EnsembleStats

REPORT_NAME = "report.json"
SUMMARY_NAME = "summary.csv"

CSV_COLUMNS = ["check", "quantity", "n", "f", "g", "t", "s", "estimate", "se", "replicas", "oracle",
               "oracle_kind", "z", "tolerance", "tolerance_kind", "passed", "anchor"]


def report_dict(config: dict, stats: EnsembleStats, timestamp: str = None) -> dict:
    from .. import __version__

    rows = stats.to_list()
    return {
        "header": {
            "generated": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "version": __version__,
        },
        "config": config,
        "checks": rows,
        "summary": {
            "total": len(rows),
            "passed": sum(1 for r in rows if r["passed"]),
            "failed": sum(1 for r in rows if not r["passed"]),
        },
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def body_bytes(report: dict) -> bytes:
    """Serialized report without the header, for reproducibility comparisons."""
    return dumps({k: v for k, v in report.items() if k != "header"}).encode()


def write_report(directory: Union[str, Path], config: dict, stats: EnsembleStats) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rep = report_dict(config, stats)
    (directory / REPORT_NAME).write_text(dumps(rep))
    write_summary_csv(directory / SUMMARY_NAME, rep["checks"])
    return rep


def write_summary_csv(path: Union[str, Path], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in CSV_COLUMNS})


def load_report(directory: Union[str, Path]) -> dict:
    p = Path(directory)
    if p.is_dir():
        p = p / REPORT_NAME
    return json.loads(p.read_text())


def format_table(rows, failures_only: bool = False) -> str:
    """Fixed-width text table of checks."""
    head = f"{'verdict':7} {'check':22} {'N':>5} {'f':>10} {'t':>6} {'estimate':>13} {'oracle':>13} {'z':>7}  quantity"
    lines = [head, "-" * len(head)]
    for r in rows:
        if failures_only and r["passed"]:
            continue

        def num(v, width, fmt):
            return f"{v:{width}{fmt}}" if isinstance(v, (int, float)) else " " * (width - 1) + "-"

        lines.append(
            f"{'PASS' if r['passed'] else 'FAIL':7} {r['check'][:22]:22} {num(r.get('n'), 5, 'd')} "
            f"{str(r.get('f') or '-')[:10]:>10} {num(r.get('t'), 6, '.3g')} {num(r.get('estimate'), 13, '.6g')} "
            f"{num(r.get('oracle'), 13, '.6g')} {num(r.get('z'), 7, '.2f')}  {r['quantity']}"
        )
    return "\n".join(lines)
