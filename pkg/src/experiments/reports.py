"""Report files and the pure suite summarization."""
from pathlib import Path
from typing import Any
import csv
import json
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "name",
    "status",
    "flavor",
    "sweep",
    "lam",
    "value",
    "stderr",
    "oracle",
    "oracle_kind",
    "gap",
    "tolerance",
    "pass",
    "gap_monotone",
    "error",
]


def write_json(path: str | Path, payload: dict[str, Any]) -> Path:
    """Deterministic JSON: sorted keys, fixed indentation, no timestamps."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return target


def write_weights_csv(path: str | Path, weights: np.ndarray) -> Path:
    """One row per particle with the full-precision weight."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([np.arange(weights.shape[0]), weights])
    np.savetxt(target, table, delimiter=",", header="particle,weight", comments="", fmt=["%d", "%.17g"])
    return target


def _primary_oracle(oracle: dict | None) -> tuple[str | None, float | None, float, float]:
    """(kind, value, stderr, epsilon term) of the oracle an estimate is judged against."""
    if not oracle:
        return None, None, 0.0, 0.0
    delay = oracle.get("delay_ode") or {}
    if delay.get("value") is not None:
        return "delay_ode", float(delay["value"]), 0.0, 0.0
    fd = oracle.get("fd") or {}
    if fd.get("value") is not None:
        return "fd", float(fd["value"]), float(fd.get("stderr") or 0.0), float(fd.get("epsilon_term") or 0.0)
    return None, None, 0.0, 0.0


def summary_row(record: dict[str, Any]) -> dict[str, Any]:
    """Flatten one stored experiment record into a summary row."""
    config = record.get("config") or {}
    row = {column: "" for column in SUMMARY_COLUMNS}
    row.update({
        "name": config.get("name", record.get("source", "")),
        "flavor": config.get("flavor", ""),
        "sweep": config.get("sweep") or "",
        "lam": config.get("lam", ""),
    })
    if record.get("error"):
        row.update({"status": "failed", "error": record["error"]})
        return row

    estimate = record["estimate"]
    value, stderr = float(estimate["value"]), float(estimate["stderr"])
    kind, oracle_value, oracle_stderr, eps_term = _primary_oracle(record.get("oracle"))
    row.update({"status": "ok", "value": value, "stderr": stderr})
    if oracle_value is not None:
        gap = abs(value - oracle_value)
        tolerance = 3.0 * math.sqrt(stderr ** 2 + oracle_stderr ** 2) + eps_term
        row.update({
            "oracle": oracle_value,
            "oracle_kind": kind,
            "gap": gap,
            "tolerance": tolerance,
            "pass": gap <= tolerance,
        })
    return row


def summarize_reports(records: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """
    Summary rows in input order, with gap_monotone filled per sweep label
    (True when the gap never grows as lam increases).
    """
    rows = [summary_row(record) for record in records]
    groups: dict[str, list[dict[str, Any]]] = {}
    for row in rows:
        if row["sweep"] and row["status"] == "ok" and row["gap"] != "":
            groups.setdefault(row["sweep"], []).append(row)

    for members in groups.values():
        ordered = sorted(members, key=lambda r: float(r["lam"]))
        gaps = [r["gap"] for r in ordered]
        monotone = all(later <= earlier for earlier, later in zip(gaps, gaps[1:]))
        for row in members:
            row["gap_monotone"] = monotone
    return rows


def write_summary_csv(path: str | Path, rows: list[dict[str, Any]]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    logger.info(f"Wrote summary of {len(rows)} experiments to {target}")
    return target
