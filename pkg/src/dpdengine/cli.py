"""Command-line surface: generate / train / quantize / evaluate / perf.

Every command takes --config <json> and --out <dir> (--seed overrides the
config seed), validates the config schema (unknown keys rejected), and writes
deterministic output files.  Exit status 0 on success, 1 on any error with a
machine-readable line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import json

from . import fileio
from .fxp import FxpFormat
from .gru import dpd_forward
from .metrics import acpr, evm, nmse, papr, psd_welch
from .pa import make_dataset, make_default_pa, split_dataset
from .perf import PeArrayConfig, op_breakdown, schedule, verify_schedule
from .quant import QuantConfig, quantize_model
from .signals import OfdmConfig, Waveform, generate_ofdm, ofdm_symbols
from .trainer import TrainConfig, init_model, train

_METRIC_KEYS = {"channel_bw_hz": None, "adjacent_offset_hz": None,
                "psd_segment": 1024}
_MODEL_KEYS = {"gate_activation": "hard", "cand_activation": "hard",
               "lut_entries": 256}
_PATH_KEYS = {"dataset": None, "manifest": None, "model": None}
_QUANT_KEYS = {"weight_bits": 12, "weight_frac": 10,
               "activation_bits": 12, "activation_frac": 10}


class ConfigError(ValueError):
    pass


def _check_keys(section: str, obj: dict, allowed) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"config section {section!r}: unknown key {key!r}")


def _section(cfg: dict, name: str, defaults: dict) -> dict:
    obj = cfg.get(name, {})
    if not isinstance(obj, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    _check_keys(name, obj, defaults)
    merged = dict(defaults)
    merged.update(obj)
    return merged


def load_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _check_keys("<top>", cfg, {"seed", "ofdm", "train", "quant", "perf",
                               "metrics", "model", "paths"})
    return cfg


def _dataclass_section(cfg: dict, name: str, cls, overrides=None):
    allowed = {f.name: f.default for f in fields(cls)}
    obj = _section(cfg, name, allowed)
    if overrides:
        obj.update(overrides)
    try:
        return cls(**obj)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config section {name!r}: {e}") from e


def _quant_config(cfg: dict) -> QuantConfig:
    q = _section(cfg, "quant", _QUANT_KEYS)
    try:
        return QuantConfig(FxpFormat(q["weight_bits"], q["weight_frac"]),
                           FxpFormat(q["activation_bits"], q["activation_frac"]))
    except ValueError as e:
        raise ConfigError(f"config section 'quant': {e}") from e


def _train_config(cfg: dict, seed: int) -> TrainConfig:
    allowed = {f.name: f.default for f in fields(TrainConfig)}
    allowed["qat"] = False  # config uses a boolean; formats come from "quant"
    obj = _section(cfg, "train", allowed)
    qat = _quant_config(cfg) if obj.pop("qat") else None
    obj["seed"] = seed
    try:
        return TrainConfig(qat=qat, **obj)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config section 'train': {e}") from e


def _seed(cfg: dict, args) -> int:
    seed = cfg.get("seed", 1)
    if args.seed is not None:
        seed = args.seed
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return seed


def _paths(cfg: dict) -> dict:
    return _section(cfg, "paths", _PATH_KEYS)


def _require(paths: dict, key: str) -> Path:
    if not paths.get(key):
        raise ConfigError(f"config section 'paths': {key!r} is required")
    p = Path(paths[key])
    if not p.exists():
        raise ConfigError(f"input file not found: {p}")
    return p


def _load_dataset(cfg: dict):
    paths = _paths(cfg)
    csv = _require(paths, "dataset")
    manifest = json.loads(_require(paths, "manifest").read_text())
    return fileio.load_dataset_csv(csv, manifest["sample_rate_hz"],
                                   manifest.get("scale", 1.0)), manifest


def cmd_generate(cfg: dict, out: Path, seed: int) -> None:
    ofdm = _dataclass_section(cfg, "ofdm", OfdmConfig, overrides={"seed": seed})
    wave = generate_ofdm(ofdm)
    pa = make_default_pa()
    dataset = make_dataset(wave, pa)
    fileio.save_dataset_csv(dataset, out / "dataset.csv")
    manifest = {
        "seed": seed,
        "scale": wave.scale,
        "papr_db": papr(wave),
        "sample_rate_hz": wave.sample_rate_hz,
        "num_samples": len(wave),
        "ofdm": {f.name: getattr(ofdm, f.name) for f in fields(OfdmConfig)},
    }
    fileio.save_json(manifest, out / "manifest.json")


def cmd_train(cfg: dict, out: Path, seed: int) -> None:
    dataset, _ = _load_dataset(cfg)
    tcfg = _train_config(cfg, seed)
    mcfg = _section(cfg, "model", _MODEL_KEYS)
    model = init_model(seed=seed, gate_activation=mcfg["gate_activation"],
                       cand_activation=mcfg["cand_activation"],
                       lut_entries=mcfg["lut_entries"])
    train_split, val_split, _ = split_dataset(dataset)
    pa = make_default_pa()
    best, history = train(model, train_split, pa, tcfg, val_dataset=val_split)
    fileio.save_model(best, out / "model.json")
    fileio.save_history_csv(history, out / "history.csv")


def cmd_quantize(cfg: dict, out: Path, seed: int) -> None:
    paths = _paths(cfg)
    model = fileio.load_model(_require(paths, "model"))
    qcfg = _quant_config(cfg)
    fixed, saturated = quantize_model(model, qcfg)
    fileio.save_model(fixed, out / "model_fixed.json")
    fileio.save_json({"saturated_weights": saturated,
                      "weight_fmt": str(qcfg.weight_fmt),
                      "activation_fmt": str(qcfg.activation_fmt)},
                     out / "saturation.json")


def _safe_metrics(wave, ref_wave, bw, offset, segment, evm_args=None):
    """Metric row; degenerate signals (e.g. an untrained all-zero DPD) yield nulls."""
    row: dict = {}
    try:
        left, right = acpr(wave, bw, offset, segment_len=segment)
        row["acpr_left_db"] = left
        row["acpr_right_db"] = right
        row["acpr_worst_db"] = max(left, right)
    except ValueError as e:
        row["acpr_left_db"] = row["acpr_right_db"] = row["acpr_worst_db"] = None
        row["acpr_error"] = str(e)
    try:
        row["nmse_db"] = nmse(wave, ref_wave)
    except ValueError as e:
        row["nmse_db"] = None
        row["nmse_error"] = str(e)
    try:
        row["papr_db"] = papr(wave)
    except ValueError as e:
        row["papr_db"] = None
        row["papr_error"] = str(e)
    row["evm_db"] = None
    if evm_args is not None:
        ofdm_cfg, sym_lo, sym_hi, trim = evm_args
        try:
            aligned = Waveform(wave.samples[trim[0]:trim[1]], wave.sample_rate_hz)
            ref_syms = ofdm_symbols(ofdm_cfg)[sym_lo:sym_hi]
            row["evm_db"] = evm(aligned, ofdm_cfg, ref_syms)
        except ValueError as e:
            row["evm_error"] = str(e)
    return row


def _evm_alignment(manifest: dict, split_start: int, split_len: int):
    """Trim a dataset slice to whole OFDM symbols and find the matching
    reference-symbol rows; None when no whole symbol fits."""
    try:
        ofdm_cfg = OfdmConfig(**manifest["ofdm"])
    except (KeyError, TypeError, ValueError):
        return None
    sps = ofdm_cfg.samples_per_symbol
    sym_lo = -(-split_start // sps)
    sym_hi = (split_start + split_len) // sps
    if sym_hi <= sym_lo:
        return None
    lo = sym_lo * sps - split_start
    hi = sym_hi * sps - split_start
    return ofdm_cfg, sym_lo, sym_hi, (lo, hi)


def cmd_evaluate(cfg: dict, out: Path, seed: int) -> None:
    dataset, manifest = _load_dataset(cfg)
    paths = _paths(cfg)
    model = fileio.load_model(_require(paths, "model"))
    mcfg = _section(cfg, "metrics", _METRIC_KEYS)
    pa = make_default_pa()

    _, _, test = split_dataset(dataset)
    bw = mcfg["channel_bw_hz"] or manifest["ofdm"]["bandwidth_hz"]
    offset = mcfg["adjacent_offset_hz"]
    segment = min(mcfg["psd_segment"], len(test.input))

    ref = Waveform(pa.small_signal_gain * test.input.samples,
                   test.input.sample_rate_hz)
    pa_plain = make_dataset(test.input, pa).output
    dpd_out, _ = dpd_forward(test.input, model)
    pa_dpd = make_dataset(dpd_out, pa).output
    evm_args = _evm_alignment(manifest, len(dataset) - len(test), len(test))

    report = {
        "seed": seed,
        "channel_bw_hz": bw,
        "adjacent_offset_hz": offset or bw,
        "no_dpd": _safe_metrics(pa_plain, ref, bw, offset, segment, evm_args),
        "with_dpd": _safe_metrics(pa_dpd, ref, bw, offset, segment, evm_args),
    }
    fileio.save_json(report, out / "metrics.json")
    fileio.save_psd_csv(psd_welch(pa_plain, segment_len=segment),
                        out / "psd_nodpd.csv")
    try:
        fileio.save_psd_csv(psd_welch(pa_dpd, segment_len=segment),
                            out / "psd_dpd.csv")
    except ValueError:
        pass


def cmd_perf(cfg: dict, out: Path, seed: int) -> None:
    pcfg = _dataclass_section(cfg, "perf", PeArrayConfig)
    report = schedule(None, pcfg)
    verify_schedule(report, pcfg)
    doc = {
        "ops_per_sample": report.ops_per_sample,
        "reference_ops_per_sample": 1026,
        "ops_delta_pct": 100.0 * (report.ops_per_sample - 1026) / 1026,
        "latency_cycles": report.latency_cycles,
        "latency_ns": report.latency_ns,
        "initiation_interval_cycles": report.initiation_interval_cycles,
        "max_sample_rate_msps": report.max_sample_rate_msps,
        "throughput_gops": report.throughput_gops,
        "pe_utilization": report.pe_utilization,
        "fclk_hz": report.fclk_hz,
        "op_breakdown": [
            {"component": c, "operation": o, "count": n}
            for c, o, n in op_breakdown(None)
        ],
    }
    fileio.save_json(doc, out / "perf.json")
    fileio.save_schedule_csv(report, out / "schedule.csv")


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "quantize": cmd_quantize,
    "evaluate": cmd_evaluate,
    "perf": cmd_perf,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpdengine",
        description="GRU DPD engine: dataset generation, training, "
                    "quantization, closed-loop evaluation, performance model.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        seed = _seed(cfg, args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out, seed)
    except Exception as e:  # noqa: BLE001 - single reporting point for the CLI
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
