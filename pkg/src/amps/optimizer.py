"""Search for the module voltage asymmetry that minimises NLM distortion.

The objective is piecewise constant in the voltages (level choices change
discretely), so the search is derivative free: a coarse scan over the
normalised voltage simplex, seeded with the symmetric, geometric and ternary
baselines, followed by Nelder-Mead polishing of the best scan points.
Arrays whose spread reaches ``max_gap`` are penalised during the search and
never returned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, InfeasibleError, SampledWaveform, VoltageArray, check_module_count
from .modulation import NlmConfig, nlm_modulate
from .metrics import total_distortion

log = logging.getLogger(__name__)

GRID_RESOLUTION = 40
TOP_CANDIDATES = 10
INFEASIBLE_PENALTY = 10.0
VOLTAGE_FLOOR = 0.02
DEFAULT_BUDGET = 5000


@dataclass(frozen=True)
class OptimizationProblem:
    reference: SampledWaveform
    module_count: int
    max_gap: float | None = None
    nlm_cfg: NlmConfig = field(default_factory=NlmConfig)

    def __post_init__(self):
        if self.module_count < 2:
            raise ContractError(f"optimization needs at least 2 modules, got {self.module_count}")
        check_module_count(self.module_count)
        if self.max_gap is not None and not self.max_gap > 0:
            raise ContractError(f"max_gap must be positive, got {self.max_gap}")

    def feasible(self, v: VoltageArray) -> bool:
        return self.max_gap is None or v.spread < self.max_gap


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    candidate: VoltageArray
    distortion: float


@dataclass(frozen=True)
class OptimizationResult:
    best: VoltageArray
    best_distortion: float
    trace: list[TraceEntry]
    evaluations: int
    baselines: dict[str, float] = field(default_factory=dict)


def geometric_array(n: int, ratio: float) -> VoltageArray:
    """Voltages ``ratio**0 .. ratio**(n-1)``, normalised to sum to one."""
    if n < 1:
        raise ContractError("n must be at least 1")
    if not ratio > 0:
        raise ContractError("ratio must be positive")
    return VoltageArray.normalized(float(ratio) ** np.arange(n))


def ternary_array(n: int) -> VoltageArray:
    return geometric_array(n, 3.0)


def objective(v: VoltageArray, p: OptimizationProblem) -> float:
    if v.n_modules != p.module_count:
        raise ContractError(
            f"voltage array has {v.n_modules} modules, problem expects {p.module_count}"
        )
    out = nlm_modulate(p.reference, v, p.nlm_cfg).output
    return total_distortion(out, p.reference)


def simplex_grid(n: int, resolution: int = GRID_RESOLUTION) -> list[VoltageArray]:
    """Sorted compositions of ``resolution`` into ``n`` positive parts."""
    out: list[VoltageArray] = []

    def rec(prefix: list[int], remaining: int, slots: int, lo: int):
        if slots == 1:
            if remaining >= lo:
                out.append(VoltageArray(np.array(prefix + [remaining]) / resolution))
            return
        for a in range(lo, remaining // slots + 1):
            rec(prefix + [a], remaining - a, slots - 1, a)

    lo = max(1, int(np.ceil(VOLTAGE_FLOOR * resolution)))
    rec([], resolution, n, lo)
    return out


def project_to_simplex(x: np.ndarray, floor: float = VOLTAGE_FLOOR) -> np.ndarray:
    """Euclidean projection onto ``{v : v_i >= floor, sum(v) = 1}``."""
    n = x.size
    mass = 1.0 - n * floor
    y = x - floor
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - mass
    rho = np.nonzero(u - css / np.arange(1, n + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0) + floor


def _to_array(z: np.ndarray) -> VoltageArray:
    full = np.append(z, 1.0 - z.sum())
    v = project_to_simplex(full)
    return VoltageArray(v / v.sum())


class _Evaluator:
    """Budgeted, memoised penalised objective with best-so-far trace."""

    def __init__(self, problem: OptimizationProblem, budget: int):
        self.problem = problem
        self.budget = budget
        self.used = 0
        self.cache: dict[tuple[float, ...], float] = {}
        self.trace: list[TraceEntry] = []
        self.best: tuple[float, tuple[float, ...]] | None = None

    @property
    def exhausted(self) -> bool:
        return self.used >= self.budget

    def __call__(self, v: VoltageArray) -> float:
        key = v.key()
        if key in self.cache:
            return self.cache[key]
        if self.exhausted:
            raise _BudgetExhausted
        self.used += 1
        d = objective(v, self.problem)
        f = d if self.problem.feasible(v) else d + INFEASIBLE_PENALTY
        self.cache[key] = f
        if self.problem.feasible(v) and (self.best is None or (f, key) < self.best):
            self.best = (f, key)
            self.trace.append(TraceEntry(self.used, v, f))
        return f


class _BudgetExhausted(Exception):
    pass


def _nelder_mead(f, x0: np.ndarray, steps: np.ndarray, xtol: float = 1e-7, ftol: float = 1e-12):
    """Minimise ``f`` from ``x0`` until the simplex collapses or ``f`` raises."""
    dim = x0.size
    simplex = [x0.copy()]
    for i in range(dim):
        x = x0.copy()
        x[i] += steps[i]
        simplex.append(x)
    fs = [f(x) for x in simplex]
    while True:
        order = sorted(range(dim + 1), key=lambda i: (fs[i], tuple(simplex[i])))
        simplex = [simplex[i] for i in order]
        fs = [fs[i] for i in order]
        spread = max(np.max(np.abs(s - simplex[0])) for s in simplex[1:])
        if spread < xtol and fs[-1] - fs[0] <= ftol:
            return
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = f(xe)
            simplex[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fs[-2]:
            simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + 0.5 * (xr - centroid)
        else:
            xc = centroid + 0.5 * (simplex[-1] - centroid)
        fc = f(xc)
        if fc < min(fr, fs[-1]):
            simplex[-1], fs[-1] = xc, fc
            continue
        for i in range(1, dim + 1):
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
            fs[i] = f(simplex[i])


def baseline_arrays(n: int) -> dict[str, VoltageArray]:
    return {
        "symmetric": VoltageArray.symmetric(n),
        "geometric-1.5": geometric_array(n, 1.5),
        "ternary": ternary_array(n),
    }


def optimize(p: OptimizationProblem, budget: int = DEFAULT_BUDGET, seed: int = 0) -> OptimizationResult:
    """Two-stage search for the distortion-minimising voltage array.

    The coarse stage evaluates the baseline arrays followed by every point of
    the 1/40 simplex grid (in lexicographic order, as long as the budget
    lasts). The ten best feasible points are then refined with Nelder-Mead,
    splitting the remaining budget evenly. Results depend only on
    ``(p, budget, seed)``.

    Raises
    ------
    InfeasibleError
        If no evaluated array satisfies the gap constraint.
    """
    if budget < 1:
        raise ContractError("budget must be at least 1 evaluation")
    n = p.module_count
    ev = _Evaluator(p, budget)

    baselines: dict[str, float] = {}
    scanned: list[VoltageArray] = []
    try:
        for name, v in baseline_arrays(n).items():
            f = ev(v)
            if p.feasible(v):
                baselines[name] = f
            scanned.append(v)
        for v in simplex_grid(n):
            ev(v)
            scanned.append(v)
    except _BudgetExhausted:
        pass

    feasible = sorted(
        {v.key(): ev.cache[v.key()] for v in scanned if p.feasible(v)}.items(),
        key=lambda kv: (kv[1], kv[0]),
    )
    if not feasible:
        raise InfeasibleError(
            f"no voltage array with spread below max_gap={p.max_gap} was found "
            f"for {n} modules"
        )
    starts = [np.array(k) for k, _ in feasible[:TOP_CANDIDATES]]
    log.debug("coarse scan: %d evaluations, best %.6g", ev.used, feasible[0][1])

    rng = np.random.default_rng(seed)
    base_step = 1.0 / GRID_RESOLUTION
    for i, start in enumerate(starts):
        if ev.exhausted:
            break
        share = (budget - ev.used) // (len(starts) - i)
        stop_at = ev.used + max(share, 1)
        steps = base_step * rng.uniform(0.5, 1.0, size=n - 1)

        def f(z, stop_at=stop_at):
            v = _to_array(z)
            if ev.used >= stop_at and v.key() not in ev.cache:
                raise _BudgetExhausted
            return ev(v)

        try:
            _nelder_mead(f, start[:-1].copy(), steps)
        except _BudgetExhausted:
            pass

    best_f, best_key = ev.best if ev.best is not None else (None, None)
    if best_key is None:
        raise InfeasibleError(f"no feasible voltage array found for max_gap={p.max_gap}")
    best = VoltageArray(np.array(best_key))
    verified = objective(best, p)
    if verified != best_f:
        raise AssertionError(f"re-evaluated distortion {verified} != recorded {best_f}")
    return OptimizationResult(best, verified, ev.trace, ev.used, baselines)
