"""Analytical + cycle-level performance model of the DPD accelerator.

Model (documented in docs/op_breakdown.md):
  * each PE does one multiply-accumulate per cycle,
  * a K-term dot product runs as d parallel sub-chains (d = PEs assigned per
    output) plus one merge cycle that folds the partials, biases and the
    input/hidden join (a short combinational adder tree),
  * elementwise gate/blend work runs on the hidden array; activations run on
    dedicated comparator/shift banks (2*hidden sigmoid lanes, hidden tanh
    lanes) in one cycle per vector,
  * steady-state initiation is bounded by resources and by the loop-carried
    h(t-1) -> h(t) dependency tail (hidden-state buffer forwards per element).

Op-counting convention (MAC = 2 ops, bias/elementwise/activation = 1,
pre-activation joins realized as accumulator carry-ins = 0) reproduces the
1,026 operations per I/Q sample headline figure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gru import DpdModel

__all__ = ["PeArrayConfig", "PerfReport", "ScheduledTask", "count_ops",
           "op_breakdown", "schedule", "verify_schedule", "throughput_report"]


@dataclass(frozen=True)
class PeArrayConfig:
    """PE partition; the default reproduces the 15-cycle latency and 8-cycle
    initiation interval at 2 GHz (156 array PEs + 2 preprocessor PEs)."""

    n_preproc_pe: int = 2
    n_input_pe: int = 60
    n_hidden_pe: int = 86
    n_fc_pe: int = 10
    fclk_hz: float = 2.0e9

    def __post_init__(self) -> None:
        for name in ("n_preproc_pe", "n_input_pe", "n_hidden_pe", "n_fc_pe"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.fclk_hz <= 0:
            raise ValueError("fclk_hz must be positive")

    @property
    def array_total(self) -> int:
        return self.n_input_pe + self.n_hidden_pe + self.n_fc_pe

    @property
    def total_pes(self) -> int:
        return self.array_total + self.n_preproc_pe


@dataclass
class ScheduledTask:
    name: str
    group: str
    start: int                      # first cycle, 1-based
    end: int                        # last cycle, inclusive
    usage: list[int]                # PEs/lanes used in each occupied cycle
    ops: int                        # share of the op census carried
    deps: tuple[str, ...] = ()

    @property
    def pe_cycles(self) -> int:
        return int(sum(self.usage))


@dataclass
class PerfReport:
    ops_per_sample: int
    latency_cycles: int
    latency_ns: float
    initiation_interval_cycles: int
    max_sample_rate_msps: float
    throughput_gops: float
    pe_utilization: float
    fclk_hz: float
    tasks: list[ScheduledTask] = field(default_factory=list, repr=False)
    group_widths: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if abs(self.latency_ns - self.latency_cycles / self.fclk_hz * 1e9) > 1e-9:
            raise ValueError("latency fields inconsistent")
        expect = throughput_report(self.ops_per_sample, self.max_sample_rate_msps)
        if abs(self.throughput_gops - expect) > 1e-12:
            raise ValueError("throughput fields inconsistent")


def throughput_report(ops_per_sample: float, sample_rate_msps: float) -> float:
    """GOPS = ops per sample x sample rate (MSps) / 1000; exact product."""
    if ops_per_sample < 0 or sample_rate_msps < 0:
        raise ValueError("inputs must be non-negative")
    return ops_per_sample * sample_rate_msps / 1000.0


def _dims(model: DpdModel | None) -> tuple[int, int, int]:
    if model is None:
        return 4, 10, 2
    return model.gru.input_dim, model.hidden, model.fc.w_fc.shape[0]


def op_breakdown(model: DpdModel | None = None) -> list[tuple[str, str, int]]:
    """Per-layer operation census rows (component, operation, count)."""
    i, h, o = _dims(model)
    return [
        ("preprocessor", "squares (I^2, Q^2, (.)^2)", 3),
        ("preprocessor", "add (I^2+Q^2)", 1),
        ("input matvec", "multiplies (3 gates x h x i)", 3 * h * i),
        ("input matvec", "accumulate adds", 3 * h * i),
        ("input matvec", "bias adds", 3 * h),
        ("hidden matvec", "multiplies (3 gates x h x h)", 3 * h * h),
        ("hidden matvec", "accumulate adds", 3 * h * h),
        ("hidden matvec", "bias adds", 3 * h),
        ("gate nonlinearities", "hardsigmoid evals", 2 * h),
        ("candidate", "reset-gate multiply", h),
        ("candidate", "hardtanh evals", h),
        ("state blend", "1-z subtract", h),
        ("state blend", "(1-z)*n multiply", h),
        ("state blend", "z*h multiply", h),
        ("state blend", "final add", h),
        ("fc", "multiplies", o * h),
        ("fc", "accumulate adds", o * h),
        ("fc", "bias adds", o),
    ]


def count_ops(model: DpdModel | None = None) -> int:
    """Operations per I/Q sample under the documented convention."""
    return sum(c for _, _, c in op_breakdown(model))


def _dot_stage(name: str, group: str, R: int, K: int, P: int, mac_ops: int,
               bias_ops: int, deps: tuple[str, ...]):
    """Tasks for R independent K-term dots on a P-wide group.

    Returns (tasks, last_name, merge_duration). P >= R splits each dot over
    d = P // R chains plus a merge cycle; P < R serializes in waves.
    """
    if P <= 0:
        raise ValueError(f"group {group} has no PEs but nonzero work")
    tasks = []
    if P >= R:
        d = min(K, P // R)
        mult_dur = -(-K // d)
        usage = [R * d] * mult_dur
        if d > 1:
            tasks.append(ScheduledTask(f"{name}_mac", group, 0, 0, usage,
                                       mac_ops, deps))
            tasks.append(ScheduledTask(f"{name}_merge", group, 0, 0, [R],
                                       bias_ops, (f"{name}_mac",)))
            return tasks, f"{name}_merge", 1
        tasks.append(ScheduledTask(f"{name}_mac", group, 0, 0, usage,
                                   mac_ops + bias_ops, deps))
        return tasks, f"{name}_mac", 0
    waves = -(-R // P)
    usage = []
    for w in range(waves):
        usage.extend([min(P, R - w * P)] * K)
    tasks.append(ScheduledTask(f"{name}_mac", group, 0, 0, usage,
                               mac_ops + bias_ops, deps))
    return tasks, f"{name}_mac", 0


def _ew_task(name: str, group: str, count: int, P: int, ops: int,
             deps: tuple[str, ...]) -> ScheduledTask:
    if P <= 0:
        raise ValueError(f"group {group} has no PEs but nonzero work")
    dur = -(-count // P)
    usage = [P] * (dur - 1) + [count - P * (dur - 1)]
    return ScheduledTask(name, group, 0, 0, usage, ops, deps)


def schedule(model: DpdModel | None, cfg: PeArrayConfig) -> PerfReport:
    """List-schedule one sample's dataflow onto the PE groups and report
    latency, initiation interval, sample rate, GOPS and utilization."""
    i, h, o = _dims(model)
    widths = {
        "preproc": cfg.n_preproc_pe,
        "input": cfg.n_input_pe,
        "hidden": cfg.n_hidden_pe,
        "fc": cfg.n_fc_pe,
        "act_sig": 2 * h,
        "act_tanh": h,
    }

    tasks: list[ScheduledTask] = []
    if widths["preproc"] <= 0:
        raise ValueError("preprocessor group has no PEs but nonzero work")
    tasks.append(_ew_task("pp_sq", "preproc", 2, widths["preproc"], 2, ()))
    tasks.append(_ew_task("pp_add", "preproc", 1, widths["preproc"], 1, ("pp_sq",)))
    tasks.append(_ew_task("pp_sq2", "preproc", 1, widths["preproc"], 1, ("pp_add",)))

    hid_tasks, hid_last, hid_merge_dur = _dot_stage(
        "hid", "hidden", 3 * h, h, widths["hidden"], 2 * 3 * h * h, 3 * h, ())
    tasks.extend(hid_tasks)
    in_tasks, in_last, _ = _dot_stage(
        "in", "input", 3 * h, i, widths["input"], 2 * 3 * h * i, 3 * h,
        ("pp_sq2",))
    tasks.extend(in_tasks)

    # pre-activation joins are accumulator carry-ins: cycles, zero census ops
    tasks.append(_ew_task("join_rz", "hidden", 2 * h, widths["hidden"], 0,
                          (in_last, hid_last)))
    tasks.append(_ew_task("sig_rz", "act_sig", 2 * h, widths["act_sig"], 2 * h,
                          ("join_rz",)))
    tasks.append(_ew_task("rmul", "hidden", h, widths["hidden"], h,
                          ("sig_rz", hid_last)))
    tasks.append(_ew_task("one_minus_z", "hidden", h, widths["hidden"], h,
                          ("sig_rz",)))
    tasks.append(_ew_task("zh", "hidden", h, widths["hidden"], h, ("sig_rz",)))
    # candidate join folds into the tanh unit input
    tasks.append(_ew_task("tanh_n", "act_tanh", h, widths["act_tanh"], h,
                          ("rmul", in_last)))
    tasks.append(_ew_task("blend_mul", "hidden", h, widths["hidden"], h,
                          ("tanh_n", "one_minus_z")))
    tasks.append(_ew_task("blend_add", "hidden", h, widths["hidden"], h,
                          ("blend_mul", "zh")))
    fc_tasks, fc_last, _ = _dot_stage(
        "fc", "fc", o, h, widths["fc"], 2 * o * h, o, ("blend_add",))
    tasks.extend(fc_tasks)

    _place(tasks, widths)

    by_name = {t.name: t for t in tasks}
    latency = max(t.end for t in tasks)

    # steady-state initiation: resource occupancy and the h(t-1)->h(t) loop
    group_work: dict[str, int] = {}
    for t in tasks:
        group_work[t.group] = group_work.get(t.group, 0) + t.pe_cycles
    resource_bound = max(-(-w // widths[g]) for g, w in group_work.items())
    loop_tail = ["join_rz", "sig_rz", "rmul", "tanh_n", "blend_mul", "blend_add"]
    recurrence = 1 + hid_merge_dur + sum(
        len(by_name[n].usage) for n in loop_tail)
    ii = max(resource_bound, recurrence)

    ops = count_ops(model)
    msps = cfg.fclk_hz / ii / 1e6
    pe_work = sum(t.pe_cycles for t in tasks if t.group in
                  ("preproc", "input", "hidden", "fc"))
    util = pe_work / (cfg.total_pes * ii)
    return PerfReport(
        ops_per_sample=ops,
        latency_cycles=latency,
        latency_ns=latency / cfg.fclk_hz * 1e9,
        initiation_interval_cycles=ii,
        max_sample_rate_msps=msps,
        throughput_gops=throughput_report(ops, msps),
        pe_utilization=util,
        fclk_hz=cfg.fclk_hz,
        tasks=tasks,
        group_widths=widths,
    )


def _place(tasks: list[ScheduledTask], widths: dict[str, int]) -> None:
    """ASAP placement with per-cycle group capacity tracking."""
    used: dict[tuple[str, int], int] = {}
    done: dict[str, int] = {}
    for t in tasks:
        ready = 1 + max((done[d] for d in t.deps), default=0)
        cap = widths[t.group]
        start = ready
        while True:
            if all(used.get((t.group, start + k), 0) + u <= cap
                   for k, u in enumerate(t.usage)):
                break
            start += 1
        t.start = start
        t.end = start + len(t.usage) - 1
        for k, u in enumerate(t.usage):
            used[(t.group, start + k)] = used.get((t.group, start + k), 0) + u
        done[t.name] = t.end


def verify_schedule(report: PerfReport, cfg: PeArrayConfig) -> None:
    """Structural legality: dependency order and per-cycle group capacity."""
    widths = dict(report.group_widths)
    if (widths["preproc"] != cfg.n_preproc_pe or widths["input"] != cfg.n_input_pe
            or widths["hidden"] != cfg.n_hidden_pe or widths["fc"] != cfg.n_fc_pe):
        raise AssertionError("schedule was built for a different PE partition")
    by_name = {t.name: t for t in report.tasks}
    used: dict[tuple[str, int], int] = {}
    for t in report.tasks:
        if t.start < 1 or t.end != t.start + len(t.usage) - 1:
            raise AssertionError(f"task {t.name} has inconsistent cycle span")
        for d in t.deps:
            if by_name[d].end >= t.start:
                raise AssertionError(
                    f"task {t.name} starts at {t.start} before dep {d} "
                    f"finishes at {by_name[d].end}")
        for k, u in enumerate(t.usage):
            key = (t.group, t.start + k)
            used[key] = used.get(key, 0) + u
    for (group, cycle), u in used.items():
        if u > widths[group]:
            raise AssertionError(
                f"group {group} oversubscribed at cycle {cycle}: {u} > {widths[group]}")
