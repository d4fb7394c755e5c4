"""File formats: weight JSON, dataset/history/PSD CSV, metric and perf JSON.

All writers are deterministic (sorted JSON keys, repr-exact floats), so a
command rerun with the same seed produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fxp import FxpFormat
from .gru import DpdModel, FcWeights, GruWeights
from .metrics import PsdEstimate
from .nonlin import LutTable
from .pa import Dataset
from .perf import PerfReport
from .signals import Waveform

SCHEMA_VERSION = 1


def _fmt_to_json(fmt: FxpFormat | None):
    if fmt is None:
        return None
    return {"total_bits": fmt.total_bits, "frac_bits": fmt.frac_bits}


def _fmt_from_json(obj) -> FxpFormat | None:
    if obj is None:
        return None
    return FxpFormat(obj["total_bits"], obj["frac_bits"])


def _lut_to_json(lut: LutTable | None):
    if lut is None:
        return None
    return {"entries": lut.entries.tolist(), "input_min": lut.input_min,
            "input_max": lut.input_max}


def _lut_from_json(obj) -> LutTable | None:
    if obj is None:
        return None
    return LutTable(np.array(obj["entries"], dtype=np.float64),
                    obj["input_min"], obj["input_max"])


def save_model(model: DpdModel, path: str | Path) -> None:
    fixed = model.flavor == "fixed"
    weights = {}
    for name, arr in model.param_arrays().items():
        data = arr.astype(np.int64 if fixed else np.float64)
        weights[name] = {"shape": list(arr.shape), "data": data.ravel().tolist()}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "flavor": model.flavor,
        "gate_activation": model.gate_activation,
        "cand_activation": model.cand_activation,
        "weight_fmt": _fmt_to_json(model.weight_fmt),
        "act_fmt": _fmt_to_json(model.act_fmt),
        "gate_lut": _lut_to_json(model.gate_lut),
        "cand_lut": _lut_to_json(model.cand_lut),
        "weights": weights,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_model(path: str | Path) -> DpdModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema {doc.get('schema_version')!r}")
    fixed = doc["flavor"] == "fixed"
    dtype = np.int64 if fixed else np.float64
    arrs = {}
    for name, w in doc["weights"].items():
        arrs[name] = np.array(w["data"], dtype=dtype).reshape(w["shape"])
    gru = GruWeights(arrs["w_ir"], arrs["w_iz"], arrs["w_in"],
                     arrs["w_hr"], arrs["w_hz"], arrs["w_hn"],
                     arrs["b_ir"], arrs["b_iz"], arrs["b_in"],
                     arrs["b_hr"], arrs["b_hz"], arrs["b_hn"])
    fc = FcWeights(arrs["w_fc"], arrs["b_fc"])
    return DpdModel(
        gru, fc, doc["gate_activation"], doc["cand_activation"],
        flavor=doc["flavor"],
        weight_fmt=_fmt_from_json(doc["weight_fmt"]),
        act_fmt=_fmt_from_json(doc["act_fmt"]),
        gate_lut=_lut_from_json(doc["gate_lut"]),
        cand_lut=_lut_from_json(doc["cand_lut"]),
    )


def save_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """OpenDPD-style paired I/O: header I_in,Q_in,I_out,Q_out."""
    si = dataset.input.samples
    so = dataset.output.samples
    lines = ["I_in,Q_in,I_out,Q_out"]
    for k in range(si.size):
        lines.append(f"{float(si[k].real)!r},{float(si[k].imag)!r},"
                     f"{float(so[k].real)!r},{float(so[k].imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset_csv(path: str | Path, sample_rate_hz: float,
                     scale: float = 1.0) -> Dataset:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != "I_in,Q_in,I_out,Q_out":
        raise ValueError(f"{path}: expected header I_in,Q_in,I_out,Q_out")
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    if rows.ndim != 2 or rows.shape[1] != 4:
        raise ValueError(f"{path}: malformed dataset rows")
    win = Waveform(rows[:, 0] + 1j * rows[:, 1], sample_rate_hz, scale)
    wout = Waveform(rows[:, 2] + 1j * rows[:, 3], sample_rate_hz, scale)
    return Dataset(win, wout)


def save_history_csv(history: list[dict], path: str | Path) -> None:
    lines = ["epoch,train_loss,val_loss,lr"]
    for row in history:
        lines.append(f"{int(row['epoch'])},{float(row['train_loss'])!r},"
                     f"{float(row['val_loss'])!r},{float(row['lr'])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_psd_csv(est: PsdEstimate, path: str | Path, floor_db: float = -300.0) -> None:
    lines = ["freq_hz,power_db"]
    for f, p in zip(est.freqs, est.power):
        db = 10.0 * np.log10(p) if p > 0 else floor_db
        lines.append(f"{float(f)!r},{float(max(db, floor_db))!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def save_schedule_csv(report: PerfReport, path: str | Path) -> None:
    """Trace rows: cycle, pe_group, op, pes (one row per occupied cycle)."""
    lines = ["cycle,pe_group,op,pes"]
    rows = []
    for t in report.tasks:
        for k, u in enumerate(t.usage):
            rows.append((t.start + k, t.group, t.name, u))
    for cycle, group, name, pes in sorted(rows):
        lines.append(f"{cycle},{group},{name},{pes}")
    Path(path).write_text("\n".join(lines) + "\n")
