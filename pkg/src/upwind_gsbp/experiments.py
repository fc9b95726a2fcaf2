"""Experiment harness: stability scans, convergence studies, Burgers demo.

A stability scan finds the largest time step for which the discrete energy
(u, u)_M stays non-increasing over the whole run, reported as the normalized
value tau = a^2 dt_max / c. Scans double geometrically from a stable lower
bound, then bisect; hitting the cap tau = 1e4 while still stable is reported
as UNBOUNDED (the "+" outcome). Convergence studies integrate a closed-form
solution with dt = mu * dx over a cell-doubling sequence and report discrete
L2 errors and experimental orders.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .imex import SolverFailure, Stepper, integrate, tableau_by_name
from .mesh import physical_nodes, uniform_mesh
from .problems import (
    AdvDiffConfig,
    burgers_rhs,
    decay_solution,
    discretize,
    growth_solution,
    initial_condition,
    l2_error,
    make_split_problem,
)
from .ref_element import build_lgl

__all__ = [
    "ScanConfig",
    "StabilityScanResult",
    "ConvergenceRow",
    "BurgersRunResult",
    "is_stable",
    "max_stable_dt",
    "scan_many",
    "run_convergence",
    "run_burgers_demo",
    "stability_csv_lines",
    "convergence_csv_lines",
]

# per-step slack on the squared energy before declaring growth
ENERGY_GROWTH_RTOL = 1e-12
DEFAULT_HORIZON = 100.0
DEFAULT_TAU_LO = 1e-2
DEFAULT_TAU_CAP = 1e4
DEFAULT_RESOLUTION = 1e-3
TAU_FLOOR = 1e-8
# a sourced run is declared unstable once its energy exceeds this multiple
# of the initial energy (the solution itself grows only modestly)
BLOWUP_FACTOR = 1e12

STABLE, UNSTABLE, SOLVER_FAILURE = "stable", "unstable", "solver_failure"


@dataclass(frozen=True)
class ScanConfig:
    """One stability-scan grid point."""

    order: int
    cfg: AdvDiffConfig
    horizon: float = DEFAULT_HORIZON

    @property
    def dt_scale(self) -> float:
        """Time step corresponding to tau = 1."""
        return self.cfg.c / self.cfg.a**2


@dataclass
class StabilityScanResult:
    """Outcome of one maximum-stable-step scan."""

    config: ScanConfig
    dt_max: Optional[float]
    tau: Optional[float]
    unbounded: bool = False
    below_bracket: bool = False
    non_monotone: bool = False
    probes: list[tuple[float, str]] = field(default_factory=list)

    @property
    def tau_label(self) -> str:
        if self.unbounded:
            return "+"
        if self.below_bracket:
            return "below_bracket"
        return f"{self.tau:.6e}"


class _ProbeContext:
    """Shared state for probing one configuration at many time steps."""

    def __init__(self, scan_cfg: ScanConfig):
        self.scan_cfg = scan_cfg
        disc = discretize(scan_cfg.cfg)
        solution = decay_solution(scan_cfg.cfg.a, scan_cfg.cfg.c)
        self.problem = make_split_problem(disc)
        self.u0 = initial_condition(solution, disc.mesh, disc.elem)
        self.tableau = tableau_by_name(scan_cfg.order)

    def probe(self, dt: float) -> str:
        grew = [False]
        prev = [self.problem.energy(self.u0)]

        def observer(k, t, energy):
            if not np.isfinite(energy) or energy > prev[0] * (1.0 + ENERGY_GROWTH_RTOL):
                grew[0] = True
                return True
            prev[0] = energy

        try:
            integrate(
                self.tableau,
                self.problem,
                self.u0,
                dt,
                self.scan_cfg.horizon,
                observer=observer,
            )
        except SolverFailure:
            return SOLVER_FAILURE
        return UNSTABLE if grew[0] else STABLE


def is_stable(scan_cfg: ScanConfig, dt: float) -> bool:
    """True iff the decay-problem energy is non-increasing at every step."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    return _ProbeContext(scan_cfg).probe(dt) == STABLE


def max_stable_dt(
    scan_cfg: ScanConfig,
    bracket: Optional[tuple[float, float]] = None,
    resolution: float = DEFAULT_RESOLUTION,
    extend_lower: Optional[bool] = None,
) -> StabilityScanResult:
    """Scan for the largest stable time step by doubling plus bisection.

    ``bracket`` holds (dt_lo, dt_cap); when omitted, tau in
    [DEFAULT_TAU_LO, DEFAULT_TAU_CAP] is used. With ``extend_lower`` (the
    default for the implicit bracket) an unstable lower bound is pushed down
    by halving before giving up; a strict bracket reports below_bracket
    instead. A stable cap probe yields the UNBOUNDED outcome.
    """
    scale = scan_cfg.dt_scale
    if bracket is None:
        dt_lo, dt_cap = DEFAULT_TAU_LO * scale, DEFAULT_TAU_CAP * scale
    else:
        dt_lo, dt_cap = bracket
    auto_extend = (bracket is None) if extend_lower is None else extend_lower

    ctx = _ProbeContext(scan_cfg)
    probes: list[tuple[float, str]] = []

    def probe(dt: float) -> str:
        status = ctx.probe(dt)
        probes.append((dt, status))
        return status

    result = StabilityScanResult(scan_cfg, None, None, probes=probes)

    while probe(dt_lo) != STABLE:
        if not auto_extend or dt_lo / scale <= TAU_FLOOR:
            result.below_bracket = True
            return result
        dt_lo /= 2.0

    lo = dt_lo
    hi = None
    while hi is None:
        nxt = min(2.0 * lo, dt_cap)
        if probe(nxt) == STABLE:
            if nxt >= dt_cap:
                result.unbounded = True
                result.dt_max = dt_cap
                result.tau = dt_cap / scale
                return result
            lo = nxt
        else:
            hi = nxt

    while hi / lo > 1.0 + resolution:
        mid = math.sqrt(lo * hi)
        if probe(mid) == STABLE:
            lo = mid
        else:
            hi = mid

    result.dt_max = lo
    result.tau = lo / scale
    stable_dts = [dt for dt, s in probes if s == STABLE]
    unstable_dts = [dt for dt, s in probes if s != STABLE]
    if stable_dts and unstable_dts:
        result.non_monotone = max(stable_dts) > min(unstable_dts) * (1.0 + resolution)
    return result


def _scan_job(args) -> StabilityScanResult:
    scan_cfg, bracket, resolution, extend_lower = args
    return max_stable_dt(
        scan_cfg, bracket=bracket, resolution=resolution, extend_lower=extend_lower
    )


def scan_many(
    scan_cfgs: Sequence[ScanConfig],
    bracket: Optional[tuple[float, float]] = None,
    resolution: float = DEFAULT_RESOLUTION,
    workers: int = 1,
    extend_lower: Optional[bool] = None,
    progress=None,
) -> list[StabilityScanResult]:
    """Run independent scans, merging results in input order."""
    jobs = [(cfg, bracket, resolution, extend_lower) for cfg in scan_cfgs]
    results: list[StabilityScanResult] = []
    if workers <= 1:
        for i, job in enumerate(jobs):
            results.append(_scan_job(job))
            if progress is not None:
                progress(i + 1, len(jobs), results[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(_scan_job, jobs)):
                results.append(res)
                if progress is not None:
                    progress(i + 1, len(jobs), res)
    return results


@dataclass
class ConvergenceRow:
    """One refinement level of a convergence study."""

    n_cells: int
    error: Optional[float]
    eoc: Optional[float]
    unstable: bool = False

    def error_label(self) -> str:
        return "-" if self.error is None else f"{self.error:.6e}"

    def eoc_label(self) -> str:
        return "-" if self.eoc is None else f"{self.eoc:.2f}"


def run_convergence(
    base_cfg: AdvDiffConfig,
    order: int,
    mu: float,
    cell_counts: Sequence[int],
    t_final: float = 10.0,
    solution_kind: str = "decay",
) -> list[ConvergenceRow]:
    """Integrate to t_final with dt = mu * dx for each cell count.

    The decay run is marked unstable (dash) on any per-step energy growth
    beyond the roundoff slack; the sourced growth run, whose energy rises
    legitimately, is marked unstable on non-finite values or on energy
    exceeding BLOWUP_FACTOR times the initial energy.
    """
    tableau = tableau_by_name(order)
    if solution_kind == "decay":
        solution = decay_solution(base_cfg.a, base_cfg.c)
        source = None
    elif solution_kind == "growth":
        if base_cfg.a != 1.0:
            raise ValueError("the growth solution is defined for a = 1")
        solution = growth_solution(base_cfg.c)
        source = solution.source
    else:
        raise ValueError(f"unknown solution kind {solution_kind!r}")

    rows: list[ConvergenceRow] = []
    prev_error: Optional[float] = None
    for n_cells in cell_counts:
        cfg = replace(base_cfg, n_cells=n_cells)
        disc = discretize(cfg)
        problem = make_split_problem(disc, source)
        u0 = initial_condition(solution, disc.mesh, disc.elem)
        dt = mu * disc.dx_max
        e0 = problem.energy(u0)
        bad = [False]
        prev = [e0]

        if solution_kind == "decay":

            def observer(k, t, energy):
                if not np.isfinite(energy) or energy > prev[0] * (
                    1.0 + ENERGY_GROWTH_RTOL
                ):
                    bad[0] = True
                    return True
                prev[0] = energy

        else:

            def observer(k, t, energy):
                if not np.isfinite(energy) or energy > BLOWUP_FACTOR * max(e0, 1.0):
                    bad[0] = True
                    return True

        error: Optional[float] = None
        if t_final > 0:
            try:
                u_final, _ = integrate(tableau, problem, u0, dt, t_final, observer=observer)
            except SolverFailure:
                bad[0] = True
        else:
            u_final = u0
        if not bad[0]:
            error = l2_error(u_final, solution, t_final, disc.nodes, disc.m_diag)
            if not np.isfinite(error):
                error = None
                bad[0] = True

        eoc = None
        if error is not None and prev_error is not None and error > 0:
            eoc = math.log2(prev_error / error)
        rows.append(ConvergenceRow(n_cells, error, eoc, unstable=bad[0]))
        prev_error = error
    return rows


@dataclass
class BurgersRunResult:
    """Outcome of one Burgers run: snapshots, energy trace, blow-up time."""

    n_cells: int
    theta_adv: float
    theta_diff: float
    blowup_time: Optional[float]
    final_time: float
    nodes: np.ndarray
    snapshots: dict[float, np.ndarray]
    energy: list[tuple[int, float, float]]

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None


def run_burgers_demo(
    theta_adv: float,
    theta_diff: float,
    cell_counts: Sequence[int],
    dt: float = 0.1,
    t_final: float = 2.0,
    c: float = 0.1,
    degree: int = 2,
    order: int = 2,
    snapshot_times: Optional[Iterable[float]] = None,
    blowup_factor: float = 1e3,
) -> list[BurgersRunResult]:
    """Integrate sin(x) initial data on (-pi, pi) for each cell count.

    Blow-up (energy above ``blowup_factor`` times the initial energy, or
    non-finite values) halts the run and is recorded with its time.
    """
    tableau = tableau_by_name(order)
    wanted = sorted(set(snapshot_times)) if snapshot_times else [t_final]
    results = []
    for n_cells in cell_counts:
        elem = build_lgl(degree)
        msh = uniform_mesh(-math.pi, math.pi, n_cells)
        problem = burgers_rhs(elem, msh, theta_adv, theta_diff, c)
        nodes = physical_nodes(msh, elem)
        u = np.sin(nodes)
        e0 = problem.energy(u)

        stepper = Stepper(tableau, problem)
        snapshots: dict[float, np.ndarray] = {}
        energy_rows = [(0, 0.0, e0)]
        blowup_time = None
        t = 0.0
        k = 0
        pending = list(wanted)
        tol = 1e-12 * max(dt, t_final)
        while t < t_final - tol:
            t_next = min((k + 1) * dt, t_final)
            try:
                u = stepper.advance(u, t_next - t, t)
            except SolverFailure:
                blowup_time = t_next
                break
            k += 1
            t = t_next
            energy = problem.energy(u)
            energy_rows.append((k, t, energy))
            if not np.isfinite(energy) or energy > blowup_factor * e0:
                blowup_time = t
                break
            while pending and t >= pending[0] - tol:
                snapshots[pending.pop(0)] = u.copy()

        results.append(
            BurgersRunResult(
                n_cells=n_cells,
                theta_adv=theta_adv,
                theta_diff=theta_diff,
                blowup_time=blowup_time,
                final_time=t,
                nodes=nodes,
                snapshots=snapshots,
                energy=energy_rows,
            )
        )
    return results


def stability_csv_lines(results: Sequence[StabilityScanResult]) -> list[str]:
    lines = ["order,N,K,a,c,theta_adv,theta_diff,tau_or_plus"]
    for res in results:
        cfg = res.config
        lines.append(
            f"{cfg.order},{cfg.cfg.degree},{cfg.cfg.n_cells},"
            f"{cfg.cfg.a:g},{cfg.cfg.c:g},"
            f"{cfg.cfg.theta_adv:g},{cfg.cfg.theta_diff:g},{res.tau_label}"
        )
    return lines


def convergence_csv_lines(
    rows_by_pair: Sequence[tuple[AdvDiffConfig, float, Sequence[ConvergenceRow]]],
) -> list[str]:
    lines = ["N,K,dt_rule,theta_adv,theta_diff,l2_error,eoc"]
    for cfg, mu, rows in rows_by_pair:
        for row in rows:
            lines.append(
                f"{cfg.degree},{row.n_cells},{mu:g},"
                f"{cfg.theta_adv:g},{cfg.theta_diff:g},"
                f"{row.error_label()},{row.eoc_label()}"
            )
    return lines
