"""Single-supply charging of series-chained modules to distinct voltages.

Module 1 sits next to the supply. All modules start paralleled and charge to
the far module's target; the link to the far module is then opened (bypass)
and the remaining group is charged to the next target, and so on until only
module 1 is left on the supply. Setpoints therefore fall step by step, so the
targets must not decrease away from the supply; the regulated supply pulls
the still-connected group down to each new setpoint through its source
resistance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AmpsError, ContractError, InfeasibleError, VoltageArray

SETTLE_TOL = 1e-3
MAX_ITERATIONS = 1_000_000


class LinkState(str, enum.Enum):
    PARALLEL = "P"
    BYPASS = "B"


class InfeasibleOrderError(InfeasibleError):
    def __init__(self, first: int, second: int, v_first: float, v_second: float):
        self.modules = (first, second)
        super().__init__(
            f"module {first} target {v_first:.6g} exceeds module {second} target "
            f"{v_second:.6g}; targets must not decrease away from the supply "
            f"(modules {first} and {second})"
        )


class ChargingTimeoutError(AmpsError):
    pass


@dataclass(frozen=True)
class ChargingStep:
    setpoint: float
    links: tuple[LinkState, ...]

    @property
    def group_size(self) -> int:
        """Modules connected to the supply during this step."""
        n = 1
        for link in self.links:
            if link is not LinkState.PARALLEL:
                break
            n += 1
        return n


@dataclass(frozen=True)
class ChargingPlan:
    steps: tuple[ChargingStep, ...]
    targets: tuple[float, ...]
    supply_inhibit: bool = True

    @property
    def n_modules(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class ChargeSimState:
    module_voltages: tuple[float, ...]
    supply_connected: bool
    time_s: float = 0.0
    step: int = 0

    def __post_init__(self):
        if any(v < 0 for v in self.module_voltages):
            raise ContractError("module voltages must be nonnegative")


def _targets(targets: VoltageArray | Sequence[float]) -> tuple[float, ...]:
    vals = targets.voltages if isinstance(targets, VoltageArray) else targets
    out = tuple(float(x) for x in vals)
    if not out:
        raise ContractError("need at least one module target")
    if any(not math.isfinite(x) or x <= 0 for x in out):
        raise ContractError(f"targets must be positive, got {list(out)}")
    return out


def plan_charging(targets: VoltageArray | Sequence[float], supply_inhibit: bool = True) -> ChargingPlan:
    """Build the bypass sequence for targets listed from the supply end outward.

    Raises
    ------
    InfeasibleOrderError
        If some module's target is above that of its outer neighbour; the
        error names both modules (1-based).
    """
    t = _targets(targets)
    n = len(t)
    for i in range(n - 1):
        if t[i] > t[i + 1]:
            raise InfeasibleOrderError(i + 1, i + 2, t[i], t[i + 1])
    steps = []
    for j in range(n):
        n_parallel = n - 1 - j
        links = (LinkState.PARALLEL,) * n_parallel + (LinkState.BYPASS,) * (n - 1 - n_parallel)
        steps.append(ChargingStep(t[n - 1 - j], links))
    return ChargingPlan(tuple(steps), t, supply_inhibit)


def simulate_charging(
    plan: ChargingPlan,
    initial: ChargeSimState | None = None,
    source_resistance: float = 1.0,
    capacitance: float = 1e-3,
    dt: float = 1e-5,
    max_iterations: int = MAX_ITERATIONS,
) -> list[ChargeSimState]:
    """First-order RC simulation of a charging plan.

    The modules paralleled onto the supply act as one capacitor of ``m * C``
    that relaxes exponentially toward the setpoint through
    ``source_resistance`` (charging or discharging); bypassed modules hold
    their voltage exactly. Each step runs until the group is within 0.1 % of
    its setpoint.
    Returns every intermediate state, starting with ``initial``.
    """
    if not dt > 0 or not source_resistance > 0 or not capacitance > 0:
        raise ContractError("dt, source_resistance and capacitance must be positive")
    n = plan.n_modules
    if initial is None:
        initial = ChargeSimState((0.0,) * n, True)
    if len(initial.module_voltages) != n:
        raise ContractError(f"initial state has {len(initial.module_voltages)} modules, plan has {n}")

    v = np.array(initial.module_voltages, dtype=float)
    t0 = initial.time_s
    ticks = 0
    trace = [ChargeSimState(tuple(v.tolist()), True, t0, 0)]
    for j, step in enumerate(plan.steps, start=1):
        m = step.group_size
        grp = slice(0, m)
        if np.ptp(v[grp]) > 0:
            # equal capacitors share charge the moment they are paralleled
            v[grp] = v[grp].mean()
        sp = step.setpoint
        decay = math.exp(-dt / (source_resistance * capacitance * m))
        it = 0
        while abs(v[0] - sp) > SETTLE_TOL * sp:
            if it >= max_iterations:
                raise ChargingTimeoutError(
                    f"step {j} did not settle to {sp:.6g} within {max_iterations} iterations"
                )
            v[grp] = sp + (v[grp] - sp) * decay
            it += 1
            ticks += 1
            trace.append(ChargeSimState(tuple(v.tolist()), True, t0 + ticks * dt, j))
    if plan.supply_inhibit:
        last = trace[-1]
        trace.append(ChargeSimState(last.module_voltages, False, last.time_s, last.step))
    return trace
