"""Small affine LMI feasibility problems solved by uniform-margin maximization.

A problem declares symmetric-matrix and nonnegative-scalar variables plus a
list of constraints. Each constraint is a builder ``build(values, stack)``
that returns a square symmetric expression; it is called once with cvxpy
variables and ``cp.bmat`` to set up the program and again with numpy values
and ``np.block`` to re-evaluate margins, so the certificate never depends on
solver internals.

The program solved is

    maximize t  s.t.  C_i(x) - (offset_i + t) I >= 0,  t <= margin_cap,

with offset 0 for require-psd and eps_strict for require-pd constraints.
Variables are boxed to |x| <= variable_bound so the margin stays bounded.
A negative best margin proves infeasibility only while the box is slack;
when it binds, the problem is re-solved as a plain feasibility program
without the box and that solve decides.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import cvxpy as cp
import numpy as np

from .errors import NumericalError, SpecError
from .symmat import DEFAULT_TOLERANCES, SymMat, Tolerances, min_eig

logger = logging.getLogger(__name__)

# A box constraint counts as binding when a variable reaches this fraction of
# the bound or the constraint carries a dual above BOX_DUAL_TOL.
BOX_REACH = 0.999
BOX_DUAL_TOL = 1e-9


class VariableKind(Enum):
    SYMMETRIC = "symmetric"
    NONNEG_SCALAR = "nonnegative-scalar"


class Requirement(Enum):
    PSD = "psd"
    PD = "pd"


class Objective(Enum):
    FEASIBILITY = "feasibility"
    MAXIMIZE_MARGIN = "maximize-margin"


class LmiStatus(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"


Builder = Callable[[Mapping[str, Any], Callable], Any]


@dataclass(frozen=True)
class LmiVariable:
    name: str
    kind: VariableKind
    size: int = 1


@dataclass(frozen=True)
class LmiConstraint:
    name: str
    build: Builder
    dim: int
    requirement: Requirement = Requirement.PSD


@dataclass(frozen=True)
class AffineLmiProblem:
    variables: Tuple[LmiVariable, ...]
    constraints: Tuple[LmiConstraint, ...]
    objective: Objective = Objective.MAXIMIZE_MARGIN


@dataclass(frozen=True)
class SolveBudget:
    solver: str = "CLARABEL"
    max_iters: int = 500
    time_limit: float = 60.0
    variable_bound: float = 1e5
    margin_cap: float = 1.0


@dataclass
class LmiSolution:
    status: LmiStatus
    assignment: Dict[str, Any] = field(default_factory=dict)
    margins: Dict[str, float] = field(default_factory=dict)
    best_margin: Optional[float] = None
    trace: List[str] = field(default_factory=list)
    duals: Dict[str, np.ndarray] = field(default_factory=dict)

    def value(self, name: str):
        return self.assignment[name]


# ============================================================================
# Problem checks and numpy evaluation
# ============================================================================

def numpy_stack(blocks) -> np.ndarray:
    return np.block([[np.asarray(b, dtype=float) for b in row] for row in blocks])


def zero_assignment(prob: AffineLmiProblem) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for var in prob.variables:
        if var.kind is VariableKind.SYMMETRIC:
            values[var.name] = np.zeros((var.size, var.size))
        else:
            values[var.name] = 0.0
    return values


def evaluate_constraint(con: LmiConstraint, values: Mapping[str, Any]) -> SymMat:
    try:
        expr = np.asarray(con.build(values, numpy_stack), dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError(f"constraint {con.name!r} cannot be evaluated: {exc}") from exc
    expr = np.atleast_2d(expr)
    if expr.shape != (con.dim, con.dim):
        raise SpecError(
            f"constraint {con.name!r} has shape {expr.shape}, declared {con.dim}")
    return SymMat(expr, atol_sym=1e-8)


def check_problem(prob: AffineLmiProblem) -> None:
    names = [v.name for v in prob.variables]
    if len(set(names)) != len(names):
        raise SpecError("duplicate variable names")
    for var in prob.variables:
        if not isinstance(var.kind, VariableKind):
            raise SpecError(f"unknown variable kind for {var.name!r}")
        if var.kind is VariableKind.SYMMETRIC and var.size < 1:
            raise SpecError(f"variable {var.name!r} must have size >= 1")
    if not prob.constraints:
        raise SpecError("problem has no constraints")
    constraint_names = [c.name for c in prob.constraints]
    if len(set(constraint_names)) != len(constraint_names):
        raise SpecError("duplicate constraint names")
    zeros = zero_assignment(prob)
    for con in prob.constraints:
        evaluate_constraint(con, zeros)


def constraint_margins(prob: AffineLmiProblem, values: Mapping[str, Any]) -> Dict[str, float]:
    return {c.name: min_eig(evaluate_constraint(c, values)) for c in prob.constraints}


def _meets(requirement: Requirement, margin: float, tol: Tolerances) -> bool:
    if requirement is Requirement.PD:
        return margin >= tol.eps_strict
    return margin >= -tol.eps_psd


def verify_solution(prob: AffineLmiProblem, sol: LmiSolution,
                    tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Re-evaluate every constraint at the assignment with eigenvalue checks only."""
    for var in prob.variables:
        if var.name not in sol.assignment:
            raise SpecError(f"assignment misses variable {var.name!r}")
        value = np.asarray(sol.assignment[var.name], dtype=float)
        if var.kind is VariableKind.SYMMETRIC:
            if value.shape != (var.size, var.size):
                raise SpecError(
                    f"variable {var.name!r} has shape {value.shape}, expected "
                    f"({var.size}, {var.size})")
        elif value.size != 1 or float(value) < 0:
            return False
    margins = constraint_margins(prob, sol.assignment)
    return all(_meets(c.requirement, margins[c.name], tol) for c in prob.constraints)


# ============================================================================
# Solver
# ============================================================================

def _pick_solver(name: str) -> str:
    installed = cp.installed_solvers()
    if name in installed:
        return name
    for fallback in ("CLARABEL", "SCS", "CVXOPT"):
        if fallback in installed:
            logger.warning("solver %s not installed, using %s", name, fallback)
            return fallback
    raise NumericalError("no SDP-capable solver installed")


def _solver_options(budget: SolveBudget, solver: str) -> Dict[str, Any]:
    if solver == "SCS":
        return {"max_iters": budget.max_iters * 100, "time_limit_secs": budget.time_limit,
                "eps_abs": 1e-9, "eps_rel": 1e-9}
    if solver == "CLARABEL":
        return {"max_iter": budget.max_iters, "time_limit": budget.time_limit}
    return {}


def _symmetric(expr):
    return 0.5 * (expr + expr.T)


@dataclass
class _Program:
    problem: Any
    variables: Dict[str, Any]
    lmis: Dict[str, Any]
    box: List[Any]
    margin: Any


def _build_program(prob: AffineLmiProblem, tol: Tolerances, budget: SolveBudget,
                   maximize: bool, boxed: bool) -> _Program:
    cp_vars: Dict[str, Any] = {}
    box = []
    for var in prob.variables:
        if var.kind is VariableKind.SYMMETRIC:
            x = cp.Variable((var.size, var.size), symmetric=True, name=var.name)
            if boxed:
                eye = np.eye(var.size)
                box += [x << budget.variable_bound * eye, x >> -budget.variable_bound * eye]
        else:
            x = cp.Variable(nonneg=True, name=var.name)
            if boxed:
                box.append(x <= budget.variable_bound)
        cp_vars[var.name] = x

    t = cp.Variable(name="margin") if maximize else 0.0
    lmis = {}
    for con in prob.constraints:
        offset = tol.eps_strict if con.requirement is Requirement.PD else 0.0
        try:
            expr = _symmetric(con.build(cp_vars, cp.bmat))
        except (cp.DCPError, ValueError, TypeError) as exc:
            raise SpecError(f"constraint {con.name!r} is not affine: {exc}") from exc
        lmis[con.name] = expr - (offset + t) * np.eye(con.dim) >> 0
    extra = [t <= budget.margin_cap] if maximize else []
    program = cp.Problem(cp.Maximize(t) if maximize else cp.Minimize(0),
                         list(lmis.values()) + box + extra)
    return _Program(program, cp_vars, lmis, box, t)


def _run(program: _Program, budget: SolveBudget, trace: List[str]) -> Optional[str]:
    solver = _pick_solver(budget.solver)
    try:
        program.problem.solve(solver=solver, **_solver_options(budget, solver))
    except cp.SolverError as exc:
        trace.append(f"solver error: {exc}")
        logger.warning("LMI solver failed: %s", exc)
        return None
    trace.append(f"status={program.problem.status}")
    logger.debug("LMI solve finished with status %s", program.problem.status)
    return program.problem.status


def _extract(prob: AffineLmiProblem, program: _Program) -> Optional[Dict[str, Any]]:
    if any(v.value is None for v in program.variables.values()):
        return None
    assignment: Dict[str, Any] = {}
    for var in prob.variables:
        value = np.asarray(program.variables[var.name].value, dtype=float)
        if var.kind is VariableKind.SYMMETRIC:
            assignment[var.name] = 0.5 * (value + value.T)
        else:
            assignment[var.name] = max(0.0, float(value))
    return assignment


def _box_active(program: _Program, assignment: Mapping[str, Any],
                budget: SolveBudget) -> bool:
    """Whether the variable box binds at the solver's optimum."""
    reach = BOX_REACH * budget.variable_bound
    for value in assignment.values():
        if float(np.max(np.abs(np.linalg.eigvalsh(np.atleast_2d(value))))) >= reach:
            return True
    for con in program.box:
        if con.dual_value is not None and np.max(np.abs(con.dual_value)) > BOX_DUAL_TOL:
            return True
    return False


def _solve_unboxed(prob: AffineLmiProblem, tol: Tolerances, budget: SolveBudget,
                   trace: List[str]) -> LmiSolution:
    """Plain feasibility solve with free variables.

    Only this program's INFEASIBLE status proves infeasibility; a box around
    the variables restricts the problem and cannot.
    """
    program = _build_program(prob, tol, budget, maximize=False, boxed=False)
    status = _run(program, budget, trace)
    if status == cp.INFEASIBLE:
        return LmiSolution(LmiStatus.INFEASIBLE, trace=trace)
    assignment = _extract(prob, program) if status is not None else None
    if assignment is None:
        return LmiSolution(LmiStatus.INCONCLUSIVE, trace=trace)
    try:
        margins = constraint_margins(prob, assignment)
    except NumericalError as exc:
        trace.append(f"margin evaluation failed: {exc}")
        return LmiSolution(LmiStatus.INCONCLUSIVE, assignment=assignment, trace=trace)
    sol = LmiSolution(LmiStatus.INCONCLUSIVE, assignment, margins, None, trace)
    if verify_solution(prob, sol, tol):
        sol.status = LmiStatus.FEASIBLE
    return sol


def solve_feasibility(prob: AffineLmiProblem, tol: Tolerances = DEFAULT_TOLERANCES,
                      budget: SolveBudget = SolveBudget()) -> LmiSolution:
    check_problem(prob)
    trace = [f"solver={_pick_solver(budget.solver)} variables={len(prob.variables)} "
             f"constraints={len(prob.constraints)}"]
    if prob.objective is Objective.FEASIBILITY:
        return _solve_unboxed(prob, tol, budget, trace)

    program = _build_program(prob, tol, budget, maximize=True, boxed=True)
    status = _run(program, budget, trace)
    if status is None:
        return LmiSolution(LmiStatus.INCONCLUSIVE, trace=trace)
    assignment = _extract(prob, program)
    if assignment is None:
        return LmiSolution(LmiStatus.INCONCLUSIVE, trace=trace)
    try:
        margins = constraint_margins(prob, assignment)
    except NumericalError as exc:
        trace.append(f"margin evaluation failed: {exc}")
        return LmiSolution(LmiStatus.INCONCLUSIVE, assignment=assignment, trace=trace)
    best = float(program.margin.value)
    trace.append(f"best_margin={best}")
    sol = LmiSolution(LmiStatus.INCONCLUSIVE, assignment, margins, best, trace)

    if verify_solution(prob, sol, tol):
        sol.status = LmiStatus.FEASIBLE
    elif _box_active(program, assignment, budget):
        trace.append(f"variable box |x| <= {budget.variable_bound:g} binds, "
                     "re-solving without it")
        logger.info("LMI margin limited by the variable box, re-solving unboxed")
        unboxed = _solve_unboxed(prob, tol, budget, trace)
        if unboxed.status is LmiStatus.FEASIBLE:
            return unboxed
        sol.status = unboxed.status
    elif status == cp.OPTIMAL and best < -tol.eps_psd:
        sol.status = LmiStatus.INFEASIBLE
        sol.duals = {name: np.asarray(c.dual_value) for name, c in program.lmis.items()
                     if c.dual_value is not None}
    logger.debug("LMI verdict %s, margins %s", sol.status.value, margins)
    return sol
