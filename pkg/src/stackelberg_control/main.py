"""
Run orchestration: one function per subcommand, each writing its CSVs into a run directory.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .config import ProblemConfig, emit_config
from .errors import ConfigError, SolverError, StackelbergError
from .geometry import check_hypotheses
from .pde.coupling import check_coupling
from .pde.grid import ControlSet
from .pde.solver import solve_forward, trajectory_header, trajectory_rows
from .problem import Problem, build_problem
from .solvers.leader import ControlProblem, solve_semilinear_control, weighted_norm_report
from .solvers.nash import NashResult, estimate_convexity, solve_nash
from .solvers.observability import OBSERVABILITY_HEADER, observability_ratio
from .store.run_store import RunContext, open_run
from .utils.logger import get_logger
from .weights import ORDERING_HEADER, verify_orderings

logger = get_logger(__name__)

COMMANDS = ("check-weights", "simulate", "nash", "control", "observability", "sweep")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

ADJOINT_NAMES = ["p1_1", "p1_2", "p2_1", "p2_2"]


def _key_values(run: RunContext, name: str, values: Dict[str, object]) -> None:
    run.write(name, ["key", "value"], list(values.items()))


def run_check_weights(problem: Problem, run: RunContext) -> Dict[str, object]:
    """
    Structural hypotheses, weight identities and ordering constants on the truncated grid

    Failures are reported in the CSVs and the manifest; they do not stop the run.
    """
    hyp = check_hypotheses(problem.diff, problem.dom)
    f0, max_partial = check_coupling(problem.F)
    report = verify_orderings(problem.rho, problem.weights, problem.weight_times)

    run.write("weights.csv", ORDERING_HEADER, report.rows())
    run.write(
        "constants.csv",
        ["ordering", "C", "log10_C"],
        [(k, report.constants[k], report.log10_constants[k]) for k in report.constants],
    )
    run.write("failures.csv", ["t", "failure"], report.failures)
    summary = {
        "lambda0": problem.params.lam,
        "lambda_scanned": problem.lambda_scanned,
        "s": problem.params.s,
        "alpha_prime": problem.params.alpha_prime,
        "beta_prime": problem.params.beta_prime,
        "psi_max": problem.psi.psi_max,
        "psi_min": problem.psi.psi_min,
        "psi_quadrature_gap": problem.psi.quadrature_gap,
        "degeneracy_violation": hyp.degeneracy_violation,
        "drift_violation": hyp.drift_violation,
        "multiplicativity_residual": hyp.multiplicativity_residual,
        "b_min": hyp.b_min,
        "b_max": hyp.b_max,
        "coupling_at_origin": f0,
        "coupling_max_partial": max_partial,
        "max_identity_residual": report.max_identity_residual,
        "min_margin": report.min_margin,
        "star_bound_excess": report.star_bound_excess,
        "ok": report.ok and hyp.ok,
    }
    _key_values(run, "hypotheses.csv", summary)
    if not summary["ok"]:
        logger.warning("check-weights: %d weight failures, hypotheses ok = %s", len(report.failures), hyp.ok)
    return {"lambda0": problem.params.lam, "min_margin": report.min_margin, "ok": summary["ok"]}


def _write_nash(run: RunContext, problem: Problem, result: NashResult) -> None:
    grid = problem.grid
    run.write("controls.csv", trajectory_header(["v1", "v2"]), trajectory_rows(grid, [result.v1, result.v2]))
    run.write("adjoint.csv", trajectory_header(ADJOINT_NAMES), trajectory_rows(grid, result.adjoints.fields()))


def run_simulate(
    problem: Problem, run: RunContext, physical: bool = False, with_nash: bool = False
) -> Dict[str, object]:
    """
    State trajectory under zero controls, or under the Nash controls for h = 0

    Args:
        physical: Add the moving-domain coordinate x' = x ell(t)
        with_nash: Solve the follower equilibrium first and apply it
    """
    ctx = problem.ctx
    grid = problem.grid
    opts = problem.options
    if with_nash:
        result = solve_nash(None, ctx, opts, problem.y0)
        state = result.state
        _write_nash(run, problem, result)
    else:
        ctrl = ControlSet.zeros(grid, ctx.masks)
        state = solve_forward(
            problem.y0, ctrl, ctx.F, grid, ctx.tc,
            full_newton=opts.full_newton, max_inner=opts.max_inner, tol_newton=opts.tol_newton,
        )
    dom = problem.dom if physical else None
    run.write("trajectory.csv", trajectory_header(["y1", "y2"], physical), trajectory_rows(grid, [state.y1, state.y2], dom))

    norms = [state.slice_norm(n, grid.dx) for n in range(grid.n_t + 1)]
    run.write("norms.csv", ["t", "l2_norm"], zip(grid.t, norms))
    summary = {
        "initial_norm": norms[0],
        "initial_h1a_norm": problem.initial_h1a,
        "terminal_norm": norms[-1],
        "max_abs": state.max_abs(),
        "with_nash": with_nash,
    }
    _key_values(run, "summary.csv", summary)
    return {"terminal_norm": norms[-1], "max_abs": summary["max_abs"]}


def run_nash(problem: Problem, run: RunContext, threads: int = 1) -> Dict[str, object]:
    """Nash quasi-equilibrium for h = 0, its stationarity residuals and convexity estimates"""
    ctx = problem.ctx
    opts = problem.options
    result = solve_nash(None, ctx, opts, problem.y0)
    run.write("trajectory.csv", trajectory_header(["y1", "y2"]),
              trajectory_rows(problem.grid, [result.state.y1, result.state.y2]))
    _write_nash(run, problem, result)
    run.write("nash_history.csv", ["iteration", "relative_update"], enumerate(result.history, start=1))

    rows = []
    for i in (1, 2):
        conv = estimate_convexity(i, result, ctx, opts.n_directions, opts.seed + i, threads)
        rows.extend((i, d, q) for d, q in enumerate(conv.quotients))
        run.note(f"convexity_min_{i}", conv.min_quotient)
        run.note(f"convexity_bound_{i}", conv.lower_bound)
    run.write("convexity.csv", ["follower", "direction", "quotient"], rows)

    summary = {
        "J1": result.J[0],
        "J2": result.J[1],
        "residual_1": result.residuals[0],
        "residual_2": result.residuals[1],
        "iterations": result.iterations,
        "converged": result.converged,
    }
    _key_values(run, "nash_summary.csv", summary)
    if not result.converged:
        raise SolverError(f"Nash iteration did not converge in {result.iterations} iterations",
                          residual=result.history[-1] if result.history else None, history=result.history)
    return summary


def run_control(problem: Problem, run: RunContext) -> Dict[str, object]:
    """Leader null control of the hierarchic system with the semilinear outer loop"""
    ctx = problem.ctx
    grid = problem.grid
    opts = problem.options
    control_problem = ControlProblem(problem.y0, opts.eps_pen, opts)
    result = solve_semilinear_control(ctx, control_problem)
    norms = weighted_norm_report(result, ctx, control_problem)

    run.write("trajectory.csv", trajectory_header(["y1", "y2"]), trajectory_rows(grid, [result.state.y1, result.state.y2]))
    run.write("adjoint.csv", trajectory_header(ADJOINT_NAMES), trajectory_rows(grid, result.adjoints.fields()))
    run.write("controls.csv", trajectory_header(["h", "v1", "v2"]), trajectory_rows(grid, [result.h, result.v1, result.v2]))
    run.write("phi_history.csv", ["iteration", "phi"], enumerate(result.phi_history))
    run.write("outer_history.csv", ["iteration", "relative_update"], enumerate(result.outer_history, start=1))

    initial_norm = float(np.sqrt(grid.dx * (np.sum(problem.y0[0] ** 2) + np.sum(problem.y0[1] ** 2))))
    summary = {
        "initial_norm": initial_norm,
        "initial_h1a_norm": problem.initial_h1a,
        "terminal_norm": result.terminal_norm,
        "control_norm": result.control_norm,
        "cg_iterations": result.cg_iterations,
        "outer_iterations": result.outer_iterations,
        "converged": result.converged,
        "lambda0": problem.params.lam,
    }
    summary.update({f"residual_{k}": v for k, v in result.residuals.items()})
    summary.update(norms.as_dict())
    _key_values(run, "control_summary.csv", summary)
    return {
        "terminal_norm": result.terminal_norm,
        "control_norm": result.control_norm,
        "kappa0_ratio": norms.ratio,
    }


def run_observability(problem: Problem, run: RunContext) -> Dict[str, object]:
    """Ratio of both sides of the observability inequality over random terminal data"""
    opts = problem.options
    report = observability_ratio(
        problem.ctx,
        n_samples=opts.n_samples,
        exponent=problem.config.weights.obs_exponent,
        seed=opts.seed,
    )
    run.write("observability.csv", OBSERVABILITY_HEADER, report.rows())
    summary = {"max_ratio": report.max_ratio, "violations": report.violations, "exponent": report.exponent}
    _key_values(run, "observability_summary.csv", summary)
    return summary


def _dispatch(
    command: str, problem: Problem, run: RunContext, physical: bool, with_nash: bool, threads: int
) -> Dict[str, object]:
    if command == "check-weights":
        return run_check_weights(problem, run)
    if command == "simulate":
        return run_simulate(problem, run, physical=physical, with_nash=with_nash)
    if command == "nash":
        return run_nash(problem, run, threads=threads)
    if command == "control":
        return run_control(problem, run)
    if command == "observability":
        return run_observability(problem, run)
    raise ConfigError([f"unknown command '{command}'"])


def run_single(
    command: str,
    cfg: ProblemConfig,
    out_dir,
    physical: bool = False,
    with_nash: bool = False,
    threads: int = 1,
) -> Dict[str, object]:
    """
    Build the problem and run one subcommand inside a run directory

    The manifest and config echo are written even when the run fails.
    """
    with open_run(out_dir, command, emit_config(cfg), cfg.solver.seed) as run:
        problem = build_problem(cfg)
        summary = _dispatch(command, problem, run, physical, with_nash, threads)
        for key, value in summary.items():
            run.note(key, value)
        return summary


def _member_dir(index: int, value: float) -> str:
    return f"run_{index:03d}_{format(value, 'g')}"


def run_sweep(cfg: ProblemConfig, out_dir, threads: int = 1) -> List[Dict[str, object]]:
    """
    One run directory per sweep value plus aggregate.csv; members run concurrently

    Args:
        cfg: Base configuration; its [sweep] section names the command, parameter and values
        out_dir: Parent directory of the member runs
        threads: Worker count, one member per worker
    """
    sweep = cfg.sweep
    if not sweep.values:
        raise ConfigError(["sweep.values is empty"])
    out = Path(out_dir)
    members = [(i, v, cfg.with_value(sweep.parameter, v)) for i, v in enumerate(sweep.values)]

    def member(job):
        index, value, member_cfg = job
        directory = out / _member_dir(index, value)
        try:
            summary = run_single(sweep.command, member_cfg, directory)
            status = "ok"
        except StackelbergError as e:
            logger.error("sweep member %s = %g failed: %s", sweep.parameter, value, e)
            summary, status = {}, "failed"
        return {"index": index, "value": value, "directory": directory.name, "status": status, **summary}

    with open_run(out, "sweep", emit_config(cfg), cfg.solver.seed) as run:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(member, members))
        else:
            results = [member(job) for job in members]

        keys: List[str] = []
        for r in results:
            keys.extend(k for k in r if k not in keys)
        run.write("aggregate.csv", keys, [[r.get(k, "") for k in keys] for r in results])
        run.note("parameter", sweep.parameter)
        run.note("sweep_command", sweep.command)
        failed = sum(1 for r in results if r["status"] != "ok")
        run.note("failed_members", failed)
        if failed:
            raise SolverError(f"{failed} of {len(results)} sweep members failed")
    return results


def run(
    command: str,
    cfg: ProblemConfig,
    out_dir,
    seed: Optional[int] = None,
    threads: int = 1,
    physical: bool = False,
    with_nash: bool = False,
) -> int:
    """
    Execute a subcommand and map failures to exit codes

    Returns:
        0 on success, 2 for configuration errors, 3 for solver errors
    """
    if seed is not None:
        cfg = replace(cfg, solver=replace(cfg.solver, seed=seed))
    try:
        if command == "sweep":
            run_sweep(cfg, out_dir, threads)
        else:
            run_single(command, cfg, out_dir, physical=physical, with_nash=with_nash, threads=threads)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except SolverError as e:
        logger.error("%s", e)
        return EXIT_SOLVER
    except StackelbergError as e:
        # DomainError while building the problem is a configuration problem
        logger.error("%s", e)
        return EXIT_CONFIG
    return EXIT_OK
