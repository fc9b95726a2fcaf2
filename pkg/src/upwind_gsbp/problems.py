"""Concrete PDE problems: linear advection-diffusion and viscous Burgers.

The linear problem u_t + a u_x = c u_xx on (-pi, pi) with periodic boundary
conditions is semi-discretized as

    du/dt = -a D-(theta_adv) u + c D2(theta_diff) u,

with the advective part explicit and the diffusive part implicit. Two closed
form solutions drive the experiments: a decaying wave exp(-c t) sin(x - a t)
and, with a matching source term, the growing profile exp(c t) sin(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .imex import ImexSplitProblem
from .mesh import Mesh1D, physical_nodes, uniform_mesh
from .operators import (
    GlobalOperatorSet,
    SecondDerivativeOperator,
    assemble_first_derivative,
    second_derivative_from,
)
from .ref_element import ReferenceElement, build_lgl

__all__ = [
    "AdvDiffConfig",
    "ManufacturedSolution",
    "Discretization",
    "decay_solution",
    "growth_solution",
    "discretize",
    "semidiscretize",
    "make_split_problem",
    "initial_condition",
    "l2_error",
    "burgers_rhs",
]


@dataclass(frozen=True)
class AdvDiffConfig:
    """Parameters of a periodic advection-diffusion discretization."""

    a: float
    c: float
    theta_adv: float
    theta_diff: float
    degree: int
    n_cells: int
    x_a: float = -math.pi
    x_b: float = math.pi

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"advective velocity a must be > 0, got {self.a}")
        if self.c <= 0:
            raise ValueError(f"diffusion coefficient c must be > 0, got {self.c}")
        for label, theta in (("theta_adv", self.theta_adv), ("theta_diff", self.theta_diff)):
            if not -0.5 <= theta <= 0.5:
                raise ValueError(f"{label} must lie in [-1/2, 1/2], got {theta}")

    @property
    def compatible(self) -> bool:
        """True iff the advective and diffusive operators share theta."""
        return self.theta_adv == self.theta_diff


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form solution with analytic derivatives and optional source."""

    kind: str
    u: Callable[[np.ndarray, float], np.ndarray]
    u_t: Callable[[np.ndarray, float], np.ndarray]
    u_x: Callable[[np.ndarray, float], np.ndarray]
    u_xx: Callable[[np.ndarray, float], np.ndarray]
    source: Optional[Callable[[np.ndarray, float], np.ndarray]] = None


def decay_solution(a: float, c: float) -> ManufacturedSolution:
    """Decaying wave exp(-c t) sin(x - a t); solves the homogeneous equation."""
    return ManufacturedSolution(
        kind="decay",
        u=lambda x, t: np.exp(-c * t) * np.sin(x - a * t),
        u_t=lambda x, t: np.exp(-c * t) * (-c * np.sin(x - a * t) - a * np.cos(x - a * t)),
        u_x=lambda x, t: np.exp(-c * t) * np.cos(x - a * t),
        u_xx=lambda x, t: -np.exp(-c * t) * np.sin(x - a * t),
    )


def growth_solution(c: float) -> ManufacturedSolution:
    """Growing profile exp(c t) sin(x) for unit advection velocity.

    The source g = exp(c t) (2 c sin x + cos x) balances u_t + u_x - c u_xx.
    """
    return ManufacturedSolution(
        kind="growth",
        u=lambda x, t: np.exp(c * t) * np.sin(x),
        u_t=lambda x, t: c * np.exp(c * t) * np.sin(x),
        u_x=lambda x, t: np.exp(c * t) * np.cos(x),
        u_xx=lambda x, t: -np.exp(c * t) * np.sin(x),
        source=lambda x, t: np.exp(c * t) * (2.0 * c * np.sin(x) + np.cos(x)),
    )


@dataclass(frozen=True)
class Discretization:
    """Assembled spatial machinery for one advection-diffusion config."""

    cfg: AdvDiffConfig
    elem: ReferenceElement
    mesh: Mesh1D
    nodes: np.ndarray
    opset_adv: GlobalOperatorSet
    d2op: SecondDerivativeOperator

    @property
    def m_diag(self) -> np.ndarray:
        return self.opset_adv.m_diag

    @property
    def dx_max(self) -> float:
        return float(np.max(self.mesh.widths))


def discretize(cfg: AdvDiffConfig) -> Discretization:
    """Assemble periodic operators for the advective and diffusive parts."""
    elem = build_lgl(cfg.degree)
    mesh = uniform_mesh(cfg.x_a, cfg.x_b, cfg.n_cells)
    opset_adv = assemble_first_derivative(elem, mesh, cfg.theta_adv, "periodic")
    if cfg.compatible:
        opset_diff = opset_adv
    else:
        opset_diff = assemble_first_derivative(elem, mesh, cfg.theta_diff, "periodic")
    return Discretization(
        cfg=cfg,
        elem=elem,
        mesh=mesh,
        nodes=physical_nodes(mesh, elem),
        opset_adv=opset_adv,
        d2op=second_derivative_from(opset_diff),
    )


def make_split_problem(
    disc: Discretization,
    source: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
) -> ImexSplitProblem:
    """Split problem: explicit -a D- u (+ source at stage times), implicit c D2."""
    cfg = disc.cfg
    d_minus = disc.opset_adv.D_minus
    nodes = disc.nodes

    if source is None:
        f_explicit = lambda t, u: -cfg.a * (d_minus @ u)
    else:
        f_explicit = lambda t, u: -cfg.a * (d_minus @ u) + source(nodes, t)

    return ImexSplitProblem(
        dim=nodes.size,
        f_explicit=f_explicit,
        l_implicit=(cfg.c * disc.d2op.D2).tocsr(),
        m_diag=disc.m_diag,
    )


def semidiscretize(
    cfg: AdvDiffConfig,
    source: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
) -> ImexSplitProblem:
    """Assemble operators and return the IMEX split problem."""
    return make_split_problem(discretize(cfg), source)


def initial_condition(
    solution: ManufacturedSolution, mesh: Mesh1D, elem: ReferenceElement
) -> np.ndarray:
    """Nodal interpolation of the solution at t = 0."""
    return solution.u(physical_nodes(mesh, elem), 0.0)


def l2_error(
    state: np.ndarray,
    solution: ManufacturedSolution,
    t: float,
    nodes: np.ndarray,
    m_diag: np.ndarray,
) -> float:
    """Discrete M-norm of the nodal error against the exact solution."""
    e = state - solution.u(nodes, t)
    return float(np.sqrt(e @ (m_diag * e)))


def burgers_rhs(
    elem: ReferenceElement,
    mesh: Mesh1D,
    theta_adv: float,
    theta_diff: float,
    c: float,
) -> ImexSplitProblem:
    """Viscous Burgers split problem on a periodic mesh.

    Explicit part: -(D+ + D-)/2 applied to the flux u^2/2 plus the interface
    dissipation |u|_inf M^{-1} C u, with the infinity norm recomputed at every
    evaluation; theta_adv = 1/2 makes this the global Lax-Friedrichs variant
    and theta_adv = 0 the central one (C = 0). Implicit part: c D2(theta_diff).
    """
    opset_adv = assemble_first_derivative(elem, mesh, theta_adv, "periodic")
    if theta_diff == theta_adv:
        opset_diff = opset_adv
    else:
        opset_diff = assemble_first_derivative(elem, mesh, theta_diff, "periodic")
    d2op = second_derivative_from(opset_diff)

    d_avg = (0.5 * (opset_adv.D_plus + opset_adv.D_minus)).tocsr()
    c_mat = opset_adv.C
    inv_m = 1.0 / opset_adv.m_diag

    def f_explicit(t: float, u: np.ndarray) -> np.ndarray:
        flux = 0.5 * u * u
        out = -(d_avg @ flux)
        if c_mat.nnz:
            out += float(np.max(np.abs(u))) * (inv_m * (c_mat @ u))
        return out

    return ImexSplitProblem(
        dim=mesh.n_cells * elem.n_nodes,
        f_explicit=f_explicit,
        l_implicit=(c * d2op.D2).tocsr(),
        m_diag=opset_adv.m_diag,
    )
