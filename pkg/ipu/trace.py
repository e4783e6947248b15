"""
逐周期追踪（walk-through 风格）

记录每个通道的指数、对齐差、每周期服务集合、局部/额外移位、
加法树输出及每次半字节迭代后的累加器状态，输出文本和 JSON 两种形式。
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

from numerics.models import DecomposedOperand, FloatFormat, FP16, format_by_name

from .alignment import AlignmentSchedule, CycleSlot, lane_label
from .config import AccumulatorState, IpuConfig, IterationResult
from .core import Operand, fp_ip_step, normalize_and_round


@dataclass
class CycleRecord:
    i: int
    j: int
    partition: Optional[int]
    served: List[str]
    local_shifts: List[int]
    extra_shift: int
    adder_out: int
    scale: int
    shift: int
    swap: bool
    acc_exp: int
    acc_mag: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": [self.i, self.j],
            "partition": self.partition,
            "served": self.served,
            "local_shifts": self.local_shifts,
            "extra_shift": self.extra_shift,
            "adder_out": self.adder_out,
            "scale": self.scale,
            "acc_shift": self.shift,
            "swap": self.swap,
            "acc_exp": self.acc_exp,
            "acc_mag": self.acc_mag,
        }


@dataclass
class IpuTracer:
    """fp_ip_step 的回调接收者"""
    lanes: List[Dict[str, Any]] = field(default_factory=list)
    schedule: Optional[AlignmentSchedule] = None
    cycles: List[CycleRecord] = field(default_factory=list)

    def on_ehu(self, a: Sequence[DecomposedOperand], b: Sequence[DecomposedOperand],
               schedule: AlignmentSchedule):
        self.schedule = schedule
        self.lanes = []
        for k, (x, y) in enumerate(zip(a, b)):
            self.lanes.append({
                "lane": lane_label(k),
                "a_exp": x.exp_unbiased,
                "b_exp": y.exp_unbiased,
                "prod_exp": x.exp_unbiased + y.exp_unbiased,
                "diff": schedule.diffs[k],
                "masked": schedule.sw_masked[k],
                "zero": bool(schedule.gated[k]) if schedule.gated else False,
            })

    def on_cycle(self, i: int, j: int, slot: Optional[CycleSlot], r: IterationResult,
                 before: AccumulatorState, after: AccumulatorState, shift: int, swap: bool):
        if slot is not None:
            served = list(slot.served_labels)
            locals_ = list(slot.local_shifts)
            partition = slot.partition
        else:
            excluded = self.schedule.excluded
            lanes = [k for k in range(self.schedule.n_lanes) if not excluded[k]]
            served = [lane_label(k) for k in lanes]
            locals_ = [self.schedule.diffs[k] for k in lanes]
            partition = None
        self.cycles.append(CycleRecord(
            i=i, j=j, partition=partition, served=served, local_shifts=locals_,
            extra_shift=r.extra_shift, adder_out=r.adder_out, scale=r.scale,
            shift=shift, swap=swap, acc_exp=after.exp, acc_mag=after.mag,
        ))


@dataclass
class IpuTrace:
    cfg: IpuConfig
    multicycle: bool
    acc_format: str
    tracer: IpuTracer
    result_bits: int

    @property
    def schedule(self) -> AlignmentSchedule:
        return self.tracer.schedule

    def to_dict(self) -> Dict[str, Any]:
        sched = self.schedule
        return {
            "config": {
                "n": self.cfg.n,
                "w": self.cfg.w,
                "sp": self.cfg.sp,
                "sw_precision": self.cfg.sw_precision,
                "multicycle": self.multicycle,
                "acc_format": self.acc_format,
            },
            "ehu": {
                "max_exp": sched.max_exp,
                "lanes": self.tracer.lanes,
                "schedule": [
                    {
                        "cycle": idx,
                        "partition": slot.partition,
                        "served": list(slot.served_labels),
                        "local_shifts": list(slot.local_shifts),
                        "extra_shift": slot.extra_shift,
                    }
                    for idx, slot in enumerate(sched.cycles)
                ],
                "iteration_cycles": sched.iteration_cycles,
            },
            "cycles": [c.to_dict() for c in self.tracer.cycles],
            "result_bits": f"{self.result_bits:#06x}" if self.acc_format == "fp16"
            else f"{self.result_bits:#010x}",
        }

    def render_text(self) -> str:
        sched = self.schedule
        lines = [
            f"IPU(w={self.cfg.w}) n={self.cfg.n} sp={self.cfg.sp} "
            f"sw_precision={self.cfg.sw_precision} {'MC-IPU' if self.multicycle else 'approx'}",
            f"max_exp = {sched.max_exp}",
            "lane  prod_exp  diff  masked",
        ]
        for lane in self.tracer.lanes:
            flag = "zero" if lane["zero"] else ("yes" if lane["masked"] else "no")
            lines.append(f"{lane['lane']:>4}  {lane['prod_exp']:>8}  {lane['diff']:>4}  {flag}")

        lines.append(f"schedule: {sched.iteration_cycles} cycle(s) per nibble iteration")
        for idx, slot in enumerate(sched.cycles):
            locals_ = ",".join(str(s) for s in slot.local_shifts)
            lines.append(
                f"  cycle {idx}: P{slot.partition} {{{','.join(slot.served_labels)}}} "
                f"local=({locals_}) extra_shift={slot.extra_shift}"
            )

        for c in self.tracer.cycles:
            tag = f"P{c.partition}" if c.partition is not None else "--"
            lines.append(
                f"iter ({c.i},{c.j}) {tag:>3} adder_out={c.adder_out} "
                f"shift={c.shift}{' swap' if c.swap else ''} acc=(exp {c.acc_exp}, mag {c.acc_mag})"
            )
        lines.append(f"result = {self.to_dict()['result_bits']} ({self.acc_format})")
        return "\n".join(lines)


def trace_fp_ip(
    a_vec: Sequence[Operand],
    b_vec: Sequence[Operand],
    cfg: IpuConfig,
    acc_format: Union[str, FloatFormat] = FP16,
    multicycle: bool = True,
) -> IpuTrace:
    """追踪一次 FP-IP"""
    fmt = format_by_name(acc_format)
    tracer = IpuTracer()
    acc, _, _ = fp_ip_step(AccumulatorState(), a_vec, b_vec, cfg, multicycle, tracer=tracer)
    return IpuTrace(
        cfg=cfg,
        multicycle=multicycle,
        acc_format=fmt.name,
        tracer=tracer,
        result_bits=normalize_and_round(acc, fmt),
    )
