"""Readers and writers for counts, estimator tables and training histories.

Tabular files carry a one-line JSON header prefixed with ``# `` followed by
a plain CSV body, so they stay readable by spreadsheet tools that skip
comment lines.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .fock import DistributionTable
from .mitigation import EstimatorOutput
from .noise import ClickPattern, LossyCounts, decode
from .training import HistoryRecord, TrainingHistory


def _write_with_header(path: str | Path, header: dict, columns: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = _io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _read_with_header(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise InputError(f"{path}: missing JSON header line")
    header = json.loads(lines[0][2:])
    reader = csv.reader(lines[1:])
    columns = next(reader)
    return header, columns, [row for row in reader if row]


def _bits(row) -> str:
    return "".join(str(int(v)) for v in row)


def write_counts(path, counts: LossyCounts) -> None:
    header = {"shots": counts.total_shots, "eta": counts.eta, "seed": counts.seed, "m": counts.m}
    rows = [(_bits(r), int(c)) for r, c in zip(decode(counts.codes, counts.m), counts.counts)]
    _write_with_header(path, header, ["pattern", "count"], rows)


def read_counts(path) -> LossyCounts:
    header, columns, rows = _read_with_header(path)
    if columns != ["pattern", "count"]:
        raise InputError(f"{path}: unexpected columns {columns}")
    mapping = {ClickPattern.from_bitstring(p): int(c) for p, c in rows}
    return LossyCounts.from_mapping(
        int(header["m"]), mapping, int(header["shots"]), eta=header.get("eta"), seed=header.get("seed")
    )


def write_estimator(path, est: EstimatorOutput) -> None:
    header = {
        "method": est.method,
        "shots_used": est.shots_used,
        "converged": est.converged,
        "iterations": est.iterations,
    }
    rows = [(_bits(r), repr(float(p))) for r, p in zip(est.table.space, est.probs)]
    _write_with_header(path, header, ["pattern", "probability"], rows)


def read_estimator(path) -> EstimatorOutput:
    header, columns, rows = _read_with_header(path)
    if columns != ["pattern", "probability"]:
        raise InputError(f"{path}: unexpected columns {columns}")
    space = np.array([[int(c) for c in p] for p, _ in rows], dtype=np.int64)
    probs = np.array([float(v) for _, v in rows])
    table = DistributionTable(space, probs, kind="click")
    return EstimatorOutput(table, header["method"], int(header["shots_used"]), header["converged"], header["iterations"])


def history_lines(history: TrainingHistory) -> list[str]:
    out = []
    for rec in history.records:
        doc = {
            "iteration": rec.iteration,
            "loss": rec.loss_value,
            "method": rec.method,
            "shots_spent": rec.shots_spent,
            "params_snapshot_ref": rec.params_snapshot_ref,
            "exact_loss": rec.exact_loss,
            "phases": [float(v) for v in history.snapshots[rec.params_snapshot_ref]],
        }
        out.append(json.dumps(doc, sort_keys=True))
    return out


def write_history(path, history: TrainingHistory) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(history_lines(history)) + "\n")


def read_history(path) -> TrainingHistory:
    history = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        if history is None:
            history = TrainingHistory(doc["method"])
        history.snapshots.append(np.asarray(doc["phases"], dtype=float))
        history.records.append(
            HistoryRecord(
                doc["iteration"], doc["loss"], doc["method"], doc["shots_spent"],
                len(history.snapshots) - 1, doc["exact_loss"],
            )
        )
    if history is None:
        raise InputError(f"{path}: empty history")
    return history


def write_curve(path, history: TrainingHistory) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "loss", "exact_loss"])
    for rec in history.records:
        writer.writerow([rec.iteration, repr(rec.loss_value), "" if rec.exact_loss is None else repr(rec.exact_loss)])
    path.write_text(buf.getvalue())


def read_curve(path) -> list[tuple[int, float, float | None]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            (int(r["iteration"]), float(r["loss"]), float(r["exact_loss"]) if r["exact_loss"] else None)
            for r in reader
        ]


def write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialise {type(obj).__name__}")
