"""Analytical cost model for decoded architectures.

Genomes are decoded against the module skeletons into concrete layer shapes,
then parameters, MACs, weight memory and structural limits are computed with
closed-form convolution arithmetic and checked against resource budgets and
device profiles. Everything here is pure and cheap enough to run inside the
constraint filter of the evolutionary loop.

Conventions:
- params: standard/pointwise conv ``c_in*c_out*k^2 (+ c_out bias)``,
  depthwise conv ``c*k^2 (+ c bias)``.
- MACs: multiply-accumulates only, ``params_without_bias * h_out * w_out``
  style; activations and comparisons are not counted.
- peak activation memory uses a sequential-liveness model: input plus output
  of a single layer live at a time, both measured at the layer's output
  resolution, one ``bytes_per_weight`` byte per value.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .space import (
    AXIS_ROLES,
    KIND_CONV,
    KIND_INVERTED_BOTTLENECK,
    ROLE_DEPTH,
    ROLE_EXPAND,
    ROLE_KERNEL,
    ROLE_WIDTH,
    Genome,
    ModuleSpace,
    SearchSpace,
    validate_genome,
)

logger = logging.getLogger(__name__)

LAYER_STANDARD = "conv"
LAYER_DEPTHWISE = "depthwise"
LAYER_POINTWISE = "pointwise"


@dataclass(frozen=True)
class LayerShape:
    """One concrete convolution layer of a decoded architecture."""

    kind: str
    c_in: int
    c_out: int
    kernel: int
    h_out: int
    w_out: int
    has_bias: bool = True
    module: str = ""
    stage: int = 0

    def params(self) -> int:
        if self.kind == LAYER_DEPTHWISE:
            p = self.c_in * self.kernel * self.kernel
            return p + (self.c_in if self.has_bias else 0)
        p = self.c_in * self.c_out * self.kernel * self.kernel
        return p + (self.c_out if self.has_bias else 0)

    def macs(self) -> int:
        spatial = self.h_out * self.w_out
        if self.kind == LAYER_DEPTHWISE:
            return self.c_in * self.kernel * self.kernel * spatial
        return self.c_in * self.c_out * self.kernel * self.kernel * spatial


@dataclass(frozen=True)
class ModuleCost:
    params: int
    weight_bytes: int
    macs: int


@dataclass(frozen=True)
class CostReport:
    params: int
    weight_bytes: int
    macs: int
    peak_activation_bytes: int
    layer_count: int
    max_channels: int
    kernels_used: frozenset[int]
    per_module: Mapping[str, ModuleCost]

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "weight_bytes": self.weight_bytes,
            "macs": self.macs,
            "peak_activation_bytes": self.peak_activation_bytes,
            "layer_count": self.layer_count,
            "max_channels": self.max_channels,
            "kernels_used": sorted(self.kernels_used),
            "per_module": {
                m: {"params": c.params, "weight_bytes": c.weight_bytes, "macs": c.macs}
                for m, c in sorted(self.per_module.items())
            },
        }


@dataclass(frozen=True)
class ResourceBudget:
    """Hard constraints a candidate must satisfy to be feasible.

    ``tau_per_module`` may cover only some modules; absent modules are
    unconstrained individually (the total still applies). ``None`` caps are
    unconstrained.
    """

    tau_total: int
    tau_per_module: Mapping[str, int] = field(default_factory=dict)
    max_macs: Optional[int] = None
    max_layers: Optional[int] = None
    max_channels: Optional[int] = None
    max_activation_bytes: Optional[int] = None
    allowed_kernels: Optional[frozenset[int]] = None

    def __post_init__(self):
        if sum(self.tau_per_module.values()) > self.tau_total:
            raise ValueError(
                f"per-module budgets sum to {sum(self.tau_per_module.values())}"
                f" which exceeds tau_total {self.tau_total}"
            )

    def to_dict(self) -> dict:
        return {
            "tau_total": self.tau_total,
            "tau_per_module": dict(sorted(self.tau_per_module.items())),
            "max_macs": self.max_macs,
            "max_layers": self.max_layers,
            "max_channels": self.max_channels,
            "max_activation_bytes": self.max_activation_bytes,
            "allowed_kernels": sorted(self.allowed_kernels) if self.allowed_kernels is not None else None,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ResourceBudget":
        kernels = obj.get("allowed_kernels")
        return cls(
            tau_total=obj["tau_total"],
            tau_per_module=dict(obj.get("tau_per_module") or {}),
            max_macs=obj.get("max_macs"),
            max_layers=obj.get("max_layers"),
            max_channels=obj.get("max_channels"),
            max_activation_bytes=obj.get("max_activation_bytes"),
            allowed_kernels=frozenset(kernels) if kernels is not None else None,
        )


def unbounded_budget() -> ResourceBudget:
    """A budget that never rejects; used for landscape experiments."""
    return ResourceBudget(tau_total=1 << 62)


@dataclass(frozen=True)
class Violation:
    constraint: str
    measured: object
    allowed: object

    def __str__(self) -> str:
        return f"{self.constraint}: measured {self.measured}, allowed {self.allowed}"


@dataclass(frozen=True)
class BudgetVerdict:
    ok: bool
    violations: tuple[Violation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"constraint": v.constraint, "measured": v.measured, "allowed": v.allowed}
                for v in self.violations
            ],
        }


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    weight_mem_bytes: int
    data_mem_bytes: int
    allowed_kernels: frozenset[int]
    max_layers: Optional[int]
    max_channels_per_layer: Optional[int]
    bytes_per_weight: int


# Shipped CNN-accelerator profiles. The MAX78002 channel limit is not
# published, so it is left unconstrained.
DEVICE_PROFILES: dict[str, DeviceProfile] = {
    "max78000": DeviceProfile(
        name="max78000",
        weight_mem_bytes=432 * 1024,
        data_mem_bytes=32 * 1024,
        allowed_kernels=frozenset({1, 3}),
        max_layers=32,
        max_channels_per_layer=1024,
        bytes_per_weight=1,
    ),
    "max78002": DeviceProfile(
        name="max78002",
        weight_mem_bytes=2411724,
        data_mem_bytes=80 * 1024,
        allowed_kernels=frozenset({1, 3}),
        max_layers=128,
        max_channels_per_layer=None,
        bytes_per_weight=1,
    ),
}


def get_profile(name: str) -> DeviceProfile:
    try:
        return DEVICE_PROFILES[name]
    except KeyError:
        raise KeyError(
            f"unknown device profile {name!r}; known: {', '.join(sorted(DEVICE_PROFILES))}"
        ) from None


def load_profiles(path) -> dict[str, DeviceProfile]:
    """Load additional device profiles from a JSON registry file."""
    with open(path, "r", encoding="utf-8") as fh:
        registry = json.load(fh)
    profiles = {}
    for name, obj in registry.items():
        profiles[name] = DeviceProfile(
            name=name,
            weight_mem_bytes=obj["weight_mem_bytes"],
            data_mem_bytes=obj["data_mem_bytes"],
            allowed_kernels=frozenset(obj.get("allowed_kernels", [1, 3])),
            max_layers=obj.get("max_layers"),
            max_channels_per_layer=obj.get("max_channels_per_layer"),
            bytes_per_weight=obj.get("bytes_per_weight", 1),
        )
    return profiles


def device_budget(profile: DeviceProfile | str) -> ResourceBudget:
    """Derive the resource budget a device profile implies.

    The per-module split is a run-level configuration choice; apply
    :func:`with_module_split` once the space's modules are known.
    """
    if isinstance(profile, str):
        profile = get_profile(profile)
    return ResourceBudget(
        tau_total=profile.weight_mem_bytes,
        max_layers=profile.max_layers,
        max_channels=profile.max_channels_per_layer,
        max_activation_bytes=profile.data_mem_bytes,
        allowed_kernels=profile.allowed_kernels,
    )


def with_module_split(
    budget: ResourceBudget,
    modules: Sequence[str],
    fractions: Optional[Mapping[str, float]] = None,
) -> ResourceBudget:
    """Attach a per-module weight budget; default splits the total equally."""
    if fractions is None:
        share = budget.tau_total // len(modules)
        per = {m: share for m in modules}
    else:
        if sum(fractions.values()) > 1.0 + 1e-9:
            raise ValueError(f"module budget fractions sum to {sum(fractions.values())} > 1")
        per = {m: int(budget.tau_total * fractions[m]) for m in modules}
    return ResourceBudget(
        tau_total=budget.tau_total,
        tau_per_module=per,
        max_macs=budget.max_macs,
        max_layers=budget.max_layers,
        max_channels=budget.max_channels,
        max_activation_bytes=budget.max_activation_bytes,
        allowed_kernels=budget.allowed_kernels,
    )


# ---------------------------------------------------------------------------
# Genome decoding
# ---------------------------------------------------------------------------


class DecodeError(ValueError):
    """The space's axis roles cannot be decoded into concrete layers."""


@dataclass(frozen=True)
class _StagePlan:
    stage: int
    hw: tuple[int, int]
    kind: str
    in_link: object
    role_axes: Mapping[str, int]  # role -> axis/gene index


def stage_plans(module_space: ModuleSpace) -> list[_StagePlan]:
    """Group a module's axes by stage and check the roles needed for cost
    decoding: the segment after the final '.' of each axis name must be a
    recognized role, unique within its stage, with width and kernel present
    everywhere and expand exactly on inverted-bottleneck stages. Spaces that
    fail here are still searchable; they just cannot be costed."""
    by_stage: dict[int, dict] = {}
    module_id = module_space.module
    for i, (axis, entry) in enumerate(zip(module_space.axes, module_space.skeleton)):
        role = axis.role
        if role not in AXIS_ROLES:
            raise DecodeError(
                f"module {module_id!r} axis {axis.name!r}: role {role!r} not recognized "
                f"(expected one of {', '.join(AXIS_ROLES)})"
            )
        rec = by_stage.setdefault(entry.stage, {"entry": entry, "roles": {}})
        if role in rec["roles"]:
            raise DecodeError(
                f"module {module_id!r} stage {entry.stage}: duplicate {role!r} axis"
            )
        rec["roles"][role] = i
    for stage, rec in sorted(by_stage.items()):
        roles = rec["roles"]
        where = f"module {module_id!r} stage {stage}"
        if ROLE_WIDTH not in roles:
            raise DecodeError(f"{where}: missing width axis")
        if ROLE_KERNEL not in roles:
            raise DecodeError(f"{where}: missing kernel axis")
        if rec["entry"].kind == KIND_INVERTED_BOTTLENECK:
            if ROLE_EXPAND not in roles:
                raise DecodeError(f"{where}: inverted bottleneck stage needs an expand axis")
        elif ROLE_EXPAND in roles:
            raise DecodeError(f"{where}: expand axis only valid on inverted bottleneck stages")
    return [
        _StagePlan(
            stage=stage,
            hw=rec["entry"].hw,
            kind=rec["entry"].kind,
            in_link=rec["entry"].in_link,
            role_axes=rec["roles"],
        )
        for stage, rec in sorted(by_stage.items())
    ]


def _stage_values(module_space: ModuleSpace, genes: Sequence[int], plan: _StagePlan) -> dict[str, int]:
    values = {}
    for role, axis_idx in plan.role_axes.items():
        values[role] = module_space.axes[axis_idx].choices[genes[axis_idx]]
    values.setdefault(ROLE_DEPTH, 1)
    return values


def _resolve_widths(space: SearchSpace, genome: Genome) -> dict[tuple[str, int], int]:
    widths: dict[tuple[str, int], int] = {}
    for module_id in space.module_order:
        ms = space.modules[module_id]
        genes = genome.assignments[module_id].genes
        for plan in stage_plans(ms):
            widths[(module_id, plan.stage)] = _stage_values(ms, genes, plan)[ROLE_WIDTH]
    return widths


def _input_channels(module_id: str, plan: _StagePlan, widths: Mapping[tuple[str, int], int]) -> int:
    link = plan.in_link
    if isinstance(link, int):
        return widths[(module_id, link)]
    if link.startswith("input:"):
        return int(link.split(":", 1)[1])
    other_module, stage = link.split(":")
    return widths[(other_module, int(stage))]


def instantiate_layers(space: SearchSpace, genome: Genome) -> list[LayerShape]:
    """Decode a genome into the concrete layer list the cost formulas see.

    Stages expand depth-first in canonical module order. A conv stage with
    depth ``d`` yields ``d`` standard convolutions (the first maps the linked
    input to the stage width, the rest are width-to-width). An inverted
    bottleneck stage yields ``d`` (expand, depthwise, project) triples using
    the stage's expansion-ratio gene.
    """
    validate_genome(space, genome)
    widths = _resolve_widths(space, genome)
    layers: list[LayerShape] = []
    for module_id in space.module_order:
        ms = space.modules[module_id]
        genes = genome.assignments[module_id].genes
        for plan in stage_plans(ms):
            values = _stage_values(ms, genes, plan)
            width = values[ROLE_WIDTH]
            kernel = values[ROLE_KERNEL]
            depth = values[ROLE_DEPTH]
            h, w = plan.hw
            c_in = _input_channels(module_id, plan, widths)
            if plan.kind == KIND_CONV:
                for layer_idx in range(depth):
                    layers.append(
                        LayerShape(
                            kind=LAYER_STANDARD,
                            c_in=c_in if layer_idx == 0 else width,
                            c_out=width,
                            kernel=kernel,
                            h_out=h,
                            w_out=w,
                            module=module_id,
                            stage=plan.stage,
                        )
                    )
            else:
                expand = values[ROLE_EXPAND]
                block_in = c_in
                for _ in range(depth):
                    mid = block_in * expand
                    layers.append(
                        LayerShape(
                            kind=LAYER_POINTWISE, c_in=block_in, c_out=mid, kernel=1,
                            h_out=h, w_out=w, module=module_id, stage=plan.stage,
                        )
                    )
                    layers.append(
                        LayerShape(
                            kind=LAYER_DEPTHWISE, c_in=mid, c_out=mid, kernel=kernel,
                            h_out=h, w_out=w, module=module_id, stage=plan.stage,
                        )
                    )
                    layers.append(
                        LayerShape(
                            kind=LAYER_POINTWISE, c_in=mid, c_out=width, kernel=1,
                            h_out=h, w_out=w, module=module_id, stage=plan.stage,
                        )
                    )
                    block_in = width
    return layers


def estimate_layers(layers: Iterable[LayerShape], bytes_per_weight: int = 1) -> CostReport:
    """Aggregate a layer list into a cost report (additive in the layers)."""
    params = 0
    macs = 0
    peak_act = 0
    layer_count = 0
    max_channels = 0
    kernels = set()
    per_module: dict[str, dict[str, int]] = {}
    for layer in layers:
        lp = layer.params()
        lm = layer.macs()
        params += lp
        macs += lm
        layer_count += 1
        max_channels = max(max_channels, layer.c_in, layer.c_out)
        kernels.add(layer.kernel)
        act = (layer.c_in + layer.c_out) * layer.h_out * layer.w_out * bytes_per_weight
        peak_act = max(peak_act, act)
        agg = per_module.setdefault(layer.module, {"params": 0, "macs": 0})
        agg["params"] += lp
        agg["macs"] += lm
    return CostReport(
        params=params,
        weight_bytes=params * bytes_per_weight,
        macs=macs,
        peak_activation_bytes=peak_act,
        layer_count=layer_count,
        max_channels=max_channels,
        kernels_used=frozenset(kernels),
        per_module={
            m: ModuleCost(
                params=agg["params"],
                weight_bytes=agg["params"] * bytes_per_weight,
                macs=agg["macs"],
            )
            for m, agg in per_module.items()
        },
    )


def estimate(space: SearchSpace, genome: Genome, bytes_per_weight: int = 1) -> CostReport:
    """Decode and cost a genome."""
    return estimate_layers(instantiate_layers(space, genome), bytes_per_weight)


def check_budget(report: CostReport, budget: ResourceBudget) -> BudgetVerdict:
    """Check a cost report against a budget; infeasibility is a verdict,
    never an exception."""
    violations: list[Violation] = []
    if report.weight_bytes > budget.tau_total:
        violations.append(Violation("weight_bytes", report.weight_bytes, budget.tau_total))
    for module_id, tau in sorted(budget.tau_per_module.items()):
        module_cost = report.per_module.get(module_id)
        if module_cost is not None and module_cost.weight_bytes > tau:
            violations.append(
                Violation(f"weight_bytes[{module_id}]", module_cost.weight_bytes, tau)
            )
    if budget.max_macs is not None and report.macs > budget.max_macs:
        violations.append(Violation("macs", report.macs, budget.max_macs))
    if budget.max_layers is not None and report.layer_count > budget.max_layers:
        violations.append(Violation("layer_count", report.layer_count, budget.max_layers))
    if budget.max_channels is not None and report.max_channels > budget.max_channels:
        violations.append(Violation("max_channels", report.max_channels, budget.max_channels))
    if (
        budget.max_activation_bytes is not None
        and report.peak_activation_bytes > budget.max_activation_bytes
    ):
        violations.append(
            Violation("peak_activation_bytes", report.peak_activation_bytes, budget.max_activation_bytes)
        )
    if budget.allowed_kernels is not None:
        extra = report.kernels_used - budget.allowed_kernels
        if extra:
            violations.append(
                Violation("kernels", sorted(extra), sorted(budget.allowed_kernels))
            )
    return BudgetVerdict(ok=not violations, violations=tuple(violations))
