"""Implicit-explicit Runge-Kutta stepping with a linear implicit part.

Tableaux follow the padded convention: an (s+1)-stage explicit scheme paired
with an s-stage DIRK scheme whose Butcher matrix is padded with a zero first
row and column, so both parts share the abscissae c with c_1 = 0. With
explicit coefficients A1, implicit coefficients A2 and implicit operator L,
stage i >= 2 solves the linear system

    (I - dt A2[i,i] L) u_i = u_n + dt sum_{j<i} (A1[i,j] F(u_j) + A2[i,j] L u_j).

Systems are solved through the M-symmetrized form (M - tau M L), which is
symmetric positive definite when M L is negative semi-definite;
factorizations are cached per stage coefficient and reused across steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "ImexTableau",
    "ImexSplitProblem",
    "EnergyTrace",
    "SolverFailure",
    "Stepper",
    "tableau_imex1",
    "tableau_imex2",
    "tableau_imex3",
    "tableau_by_name",
    "solve_implicit_stage",
    "step",
    "integrate",
]

SOLVE_RTOL = 1e-12


class SolverFailure(RuntimeError):
    """Implicit stage solve failed to reach the residual tolerance."""


@dataclass(frozen=True)
class ImexTableau:
    """Padded explicit/DIRK Butcher pair sharing the abscissae c."""

    name: str
    order: int
    a_explicit: np.ndarray
    a_implicit: np.ndarray
    b_explicit: np.ndarray
    b_implicit: np.ndarray
    c: np.ndarray

    @property
    def n_stages(self) -> int:
        return self.c.size

    def validation_residuals(self) -> dict[str, float]:
        """Structural residuals: row sums vs c, padding, stiff accuracy."""
        row_ex = np.max(np.abs(self.a_explicit.sum(axis=1) - self.c))
        row_im = np.max(np.abs(self.a_implicit.sum(axis=1) - self.c))
        pad = max(
            np.max(np.abs(self.a_implicit[0, :])),
            np.max(np.abs(self.a_implicit[:, 0])),
        )
        lower_ex = np.max(np.abs(np.triu(self.a_explicit)))
        lower_im = np.max(np.abs(np.triu(self.a_implicit, k=1)))
        stiff = np.max(np.abs(self.a_implicit[-1, 1:] - self.b_implicit[1:]))
        return {
            "row_sum_explicit": float(row_ex),
            "row_sum_implicit": float(row_im),
            "implicit_padding": float(pad),
            "explicit_strictly_lower": float(lower_ex),
            "implicit_lower": float(lower_im),
            "stiff_accuracy": float(stiff),
        }


def tableau_imex1() -> ImexTableau:
    """First-order pair: forward Euler explicit, backward Euler implicit."""
    return ImexTableau(
        name="imex1",
        order=1,
        a_explicit=np.array([[0.0, 0.0], [1.0, 0.0]]),
        a_implicit=np.array([[0.0, 0.0], [0.0, 1.0]]),
        b_explicit=np.array([1.0, 0.0]),
        b_implicit=np.array([0.0, 1.0]),
        c=np.array([0.0, 1.0]),
    )


def tableau_imex2() -> ImexTableau:
    """Second-order pair with gamma = 1 - sqrt(2)/2 and gamma - delta = 1."""
    gamma = 1.0 - np.sqrt(2.0) / 2.0
    delta = 1.0 - 1.0 / (2.0 * gamma)
    return ImexTableau(
        name="imex2",
        order=2,
        a_explicit=np.array(
            [
                [0.0, 0.0, 0.0],
                [gamma, 0.0, 0.0],
                [delta, 1.0 - delta, 0.0],
            ]
        ),
        a_implicit=np.array(
            [
                [0.0, 0.0, 0.0],
                [0.0, gamma, 0.0],
                [0.0, 1.0 - gamma, gamma],
            ]
        ),
        b_explicit=np.array([delta, 1.0 - delta, 0.0]),
        b_implicit=np.array([0.0, 1.0 - gamma, gamma]),
        c=np.array([0.0, gamma, 1.0]),
    )


def _dirk3_gamma() -> float:
    """Middle root of 6 x^3 - 18 x^2 + 9 x - 1, refined to working precision."""
    coeffs = np.array([6.0, -18.0, 9.0, -1.0])
    roots = np.sort(np.roots(coeffs).real)
    g = float(roots[1])
    for _ in range(10):
        f = ((6.0 * g - 18.0) * g + 9.0) * g - 1.0
        df = (18.0 * g - 36.0) * g + 9.0
        step_len = f / df
        g -= step_len
        if abs(step_len) <= 1e-16:
            break
    return g


def tableau_imex3() -> ImexTableau:
    """Third-order pair built on the middle root of 6x^3 - 18x^2 + 9x - 1."""
    g = _dirk3_gamma()
    b1 = -1.5 * g**2 + 4.0 * g - 0.25
    b2 = 1.5 * g**2 - 5.0 * g + 1.25
    a1 = -0.35
    a2 = (1.0 / 3.0 - 2.0 * g**2 - 2.0 * b2 * a1 * g) / (g * (1.0 - g))
    c3 = (1.0 + g) / 2.0
    return ImexTableau(
        name="imex3",
        order=3,
        a_explicit=np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [g, 0.0, 0.0, 0.0],
                [c3 - a1, a1, 0.0, 0.0],
                [0.0, 1.0 - a2, a2, 0.0],
            ]
        ),
        a_implicit=np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.0, g, 0.0, 0.0],
                [0.0, (1.0 - g) / 2.0, g, 0.0],
                [0.0, b1, b2, g],
            ]
        ),
        b_explicit=np.array([0.0, b1, b2, g]),
        b_implicit=np.array([0.0, b1, b2, g]),
        c=np.array([0.0, g, c3, 1.0]),
    )


_TABLEAUX = {
    "imex1": tableau_imex1,
    "imex2": tableau_imex2,
    "imex3": tableau_imex3,
    "1": tableau_imex1,
    "2": tableau_imex2,
    "3": tableau_imex3,
}


def tableau_by_name(name: str | int) -> ImexTableau:
    key = str(name).strip().lower()
    if key not in _TABLEAUX:
        raise ValueError(f"unknown tableau {name!r}; choose from imex1, imex2, imex3")
    return _TABLEAUX[key]()


@dataclass
class ImexSplitProblem:
    """Split right-hand side du/dt = F_explicit(t, u) + L_implicit u.

    ``f_explicit`` may be None (pure implicit) and ``l_implicit`` may be None
    (pure explicit). ``m_diag`` is the diagonal of the norm matrix used for
    energy reporting and for symmetrizing the implicit stage systems.
    """

    dim: int
    f_explicit: Optional[Callable[[float, np.ndarray], np.ndarray]]
    l_implicit: Optional[sp.spmatrix | np.ndarray]
    m_diag: np.ndarray

    def energy(self, u: np.ndarray) -> float:
        return float(u @ (self.m_diag * u))


class _StageSolverCache:
    """Per-problem cache of implicit stage factorizations, keyed by tau."""

    def __init__(self, problem: ImexSplitProblem):
        self.problem = problem
        self._solvers: dict[float, Callable[[np.ndarray], np.ndarray]] = {}

    def solve(self, tau: float, rhs: np.ndarray) -> np.ndarray:
        if tau < 0:
            raise ValueError(f"stage coefficient tau must be >= 0, got {tau}")
        lmat = self.problem.l_implicit
        if lmat is None or tau == 0.0:
            return rhs.copy()
        if tau not in self._solvers:
            self._solvers[tau] = _build_stage_solver(lmat, tau, self.problem.m_diag)
        return self._solvers[tau](rhs)


def _build_stage_solver(lmat, tau: float, m_diag: np.ndarray):
    """Factorize the M-symmetrized stage matrix M - tau M L once."""
    dense = isinstance(lmat, np.ndarray)
    if dense:
        system = np.diag(m_diag) - tau * (m_diag[:, None] * lmat)
        row_norm = float(np.max(np.sum(np.abs(lmat), axis=1)))
        try:
            lu = sla.lu_factor(system)
        except Exception as exc:  # singular system: misassembled operator
            raise SolverFailure(f"stage factorization failed: {exc}") from exc

        def base_solve(b: np.ndarray) -> np.ndarray:
            return sla.lu_solve(lu, b)

        apply_l = lambda v: lmat @ v
    else:
        lmat = lmat.tocsr()
        row_norm = float(np.max(np.abs(lmat).sum(axis=1)))
        m_sp = sp.diags(m_diag)
        system = (m_sp - tau * (m_sp @ lmat)).tocsc()
        try:
            factor = spla.splu(system)
            base_solve = factor.solve
        except Exception:
            # fall back to conjugate gradients on the SPD system
            sym = (0.5 * (system + system.T)).tocsr()

            def base_solve(b: np.ndarray) -> np.ndarray:
                x, info = spla.cg(
                    sym, b, rtol=SOLVE_RTOL, atol=0.0, maxiter=10 * b.size
                )
                if info != 0:
                    raise SolverFailure(
                        f"conjugate gradient stage solve did not converge (info={info})"
                    )
                return x

        apply_l = lambda v: lmat @ v

    def tolerance(b_norm: float, x_norm: float) -> float:
        # the residual evaluation itself carries fp noise of order
        # eps * (1 + tau ||L||) * ||x||; below that the target is unmeasurable
        eps = np.finfo(float).eps
        return max(SOLVE_RTOL * b_norm, 64.0 * eps * (1.0 + tau * row_norm) * x_norm)

    def solve(rhs: np.ndarray) -> np.ndarray:
        b_norm = float(np.linalg.norm(rhs))
        x = base_solve(m_diag * rhs)
        if b_norm == 0.0:
            return x
        # iterative refinement against the unsymmetrized system (I - tau L)
        for _ in range(5):
            residual = rhs - (x - tau * apply_l(x))
            if np.linalg.norm(residual) <= tolerance(b_norm, float(np.linalg.norm(x))):
                return x
            x = x + base_solve(m_diag * residual)
        residual = rhs - (x - tau * apply_l(x))
        if np.linalg.norm(residual) <= tolerance(b_norm, float(np.linalg.norm(x))):
            return x
        raise SolverFailure(
            "implicit stage residual stalled at "
            f"{np.linalg.norm(residual) / b_norm:.3e} relative"
        )

    return solve


def solve_implicit_stage(
    lmat, tau: float, rhs: np.ndarray, m_diag: np.ndarray | None = None
) -> np.ndarray:
    """Solve (I - tau L) x = rhs through the M-symmetrized SPD form."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if lmat is None or tau == 0.0:
        return np.asarray(rhs, dtype=float).copy()
    if m_diag is None:
        m_diag = np.ones(rhs.shape[0])
    return _build_stage_solver(lmat, tau, m_diag)(np.asarray(rhs, dtype=float))


def step(
    tableau: ImexTableau,
    problem: ImexSplitProblem,
    u_n: np.ndarray,
    dt: float,
    t_n: float = 0.0,
    cache: _StageSolverCache | None = None,
) -> np.ndarray:
    """Advance one step of size dt from (t_n, u_n)."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if cache is None:
        cache = _StageSolverCache(problem)
    a_ex, a_im, c = tableau.a_explicit, tableau.a_implicit, tableau.c
    s = tableau.n_stages
    lmat = problem.l_implicit

    f_ex = [None] * s
    l_u = [None] * s

    def eval_stage(i: int, u: np.ndarray) -> None:
        if problem.f_explicit is not None:
            f_ex[i] = problem.f_explicit(t_n + c[i] * dt, u)
        if lmat is not None:
            l_u[i] = lmat @ u

    eval_stage(0, u_n)
    for i in range(1, s):
        rhs = u_n.copy()
        for j in range(i):
            if f_ex[j] is not None and a_ex[i, j] != 0.0:
                rhs += dt * a_ex[i, j] * f_ex[j]
            if l_u[j] is not None and a_im[i, j] != 0.0:
                rhs += dt * a_im[i, j] * l_u[j]
        u_i = cache.solve(dt * a_im[i, i], rhs)
        eval_stage(i, u_i)

    u_next = u_n.copy()
    for j in range(s):
        if f_ex[j] is not None and tableau.b_explicit[j] != 0.0:
            u_next += dt * tableau.b_explicit[j] * f_ex[j]
        if l_u[j] is not None and tableau.b_implicit[j] != 0.0:
            u_next += dt * tableau.b_implicit[j] * l_u[j]
    return u_next


class Stepper:
    """Stepping session owning its stage-factorization cache."""

    def __init__(self, tableau: ImexTableau, problem: ImexSplitProblem):
        self.tableau = tableau
        self.problem = problem
        self._cache = _StageSolverCache(problem)

    def advance(self, u: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
        return step(self.tableau, self.problem, u, dt, t_n=t, cache=self._cache)


@dataclass
class EnergyTrace:
    """Per-step record of (step index, time, squared M-norm)."""

    steps: list[tuple[int, float, float]] = field(default_factory=list)

    def append(self, k: int, t: float, energy: float) -> None:
        self.steps.append((k, t, energy))

    def energies(self) -> np.ndarray:
        return np.array([row[2] for row in self.steps])

    def times(self) -> np.ndarray:
        return np.array([row[1] for row in self.steps])

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,t,energy\n")
            for k, t, e in self.steps:
                fh.write(f"{k},{t:.12e},{e:.12e}\n")


def integrate(
    tableau: ImexTableau,
    problem: ImexSplitProblem,
    u0: np.ndarray,
    dt: float,
    t_final: float,
    observer: Optional[Callable[[int, float, float], bool | None]] = None,
) -> tuple[np.ndarray, EnergyTrace]:
    """Integrate from t = 0 to t_final, truncating the last step to land on it.

    The observer is called after every step with (step index, time, squared
    M-norm); returning True halts the integration early.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    u = np.asarray(u0, dtype=float).copy()
    cache = _StageSolverCache(problem)
    trace = EnergyTrace()
    trace.append(0, 0.0, problem.energy(u))
    t = 0.0
    k = 0
    tol = 1e-12 * max(dt, t_final)
    while t < t_final - tol:
        t_next = (k + 1) * dt
        if t_next > t_final - tol:
            t_next = t_final
        u = step(tableau, problem, u, t_next - t, t_n=t, cache=cache)
        k += 1
        t = t_next
        energy = problem.energy(u)
        trace.append(k, t, energy)
        if observer is not None and observer(k, t, energy):
            break
    return u, trace
