import csv
import json
import os
from typing import Any, Dict, List, Optional

from .experiment import ExperimentTrace, TraceRow

CSV_HEADER = ["t", "b_t", "B_t", "active_slaves", "potential", "restart", "regret_best", "bound", "slack"]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_paths(out_dir: str, name: str) -> Dict[str, str]:
    return {
        "csv": os.path.join(out_dir, f"{name}.csv"),
        "summary": os.path.join(out_dir, f"{name}.summary.json"),
    }


def write_trace_csv(rows: List[TraceRow], path: str) -> None:
    """One row per round; empty cells for fields the learner does not report."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_cell(getattr(row, column)) for column in CSV_HEADER])


def read_trace_csv(path: str) -> List[Dict[str, Optional[str]]]:
    with open(path, "r", newline="") as f:
        return [{key: (value if value != "" else None) for key, value in row.items()} for row in csv.DictReader(f)]


def save_summary(summary: Dict[str, Any], path: str) -> None:
    with open(path, "w") as f:
        json.dump(summary, f, indent=2)


def load_summary(path: str) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def save_trace(trace: ExperimentTrace, out_dir: str) -> Dict[str, str]:
    """Write the CSV and JSON summary of ``trace`` under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = trace_paths(out_dir, trace.config.name)
    write_trace_csv(trace.rows, paths["csv"])
    save_summary(trace.summary, paths["summary"])
    return paths
