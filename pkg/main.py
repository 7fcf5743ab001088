"""
Moment Bound Calculator
Command-line entry point: worst-case moment bounds, exponential inequalities,
the robust-stability case study and verification suites.
"""

import argparse
import json
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

# Add current directory to Python path
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from config.settings import (DEFAULT_SEED, DEFAULT_THREADS, LOG_FORMAT, LOG_LEVEL,
                             MC_REPS, SCHEMA_VERSION)
from services.chernoff import (CumulantSpec, asymptotic_check, chernoff_at,
                               chernoff_inf, uniform_bound_bernoulli,
                               uniform_bound_bounded_variance,
                               uniform_bound_normal, uniform_bound_poisson)
from services.errors import BoundError, ParameterError, require
from services.expressions import parse, render, variables_used
from services.model import certificate_to_dict, dump_problem, load_problem
from services.routh import build_stability_problem, compare_with_reference
from services.suites import SUITES, run_suite
from services.vector_bounds import (EllipsoidSpec, componentwise_tail,
                                    golden_moment, iid_bounded_bound,
                                    martingale_bound, mgf_vector_bound,
                                    moment_envelope, small_deviation_bound,
                                    variance_proxy_from_diameters,
                                    variance_proxy_from_radii,
                                    variance_range_bound)
from services.worst_case import SolverSettings, solve_problem, sup_probability
from ui import report

logger = logging.getLogger("main")

FAMILIES = (
    "hoeffding-mean", "bounded-variance", "normal", "poisson", "chernoff", "asymptotic",
    "mgf-vector", "iid-bounded", "martingale", "componentwise", "variance-range",
    "small-deviation", "envelope", "golden-moment",
)


@dataclass(frozen=True)
class CliConfig:
    """Global flags shared by every subcommand"""

    command: str
    output: str
    seed: int
    threads: int
    verbose: bool
    input_path: Optional[str] = None

    @classmethod
    def from_args(cls, args):
        require(args.threads >= 1, f"--threads must be at least 1, got {args.threads}")
        require(0 <= args.seed < 2 ** 64, f"--seed must be a 64-bit unsigned integer, got {args.seed}")
        return cls(args.command, args.output, args.seed, args.threads, args.verbose,
                   getattr(args, "problem", None))


def emit(args, document, text):
    """JSON document or human text on stdout"""
    if args.output == "json":
        print(json.dumps({"schema": SCHEMA_VERSION, **document}))
    else:
        print(text)


def _settings(args):
    overrides = {"seed": args.seed, "threads": args.threads}
    for name in ("bnb_tol", "multistarts", "bnb_max_boxes"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return SolverSettings(**overrides)


def _need(args, *names):
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    require(not missing, f"{args.family} needs {', '.join(missing)}")
    return [getattr(args, name) for name in names]


def _json_arg(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as error:
        raise ParameterError(f"{what} must be JSON: {error}") from error


# --------- Modes ---------

def solve_mode(args):
    """Certified bound for a problem document"""
    problem = load_problem(args.problem)
    certificate = solve_problem(problem, _settings(args))
    emit(args, certificate_to_dict(certificate),
         f"{report.banner('WORST-CASE BOUND')}\n{report.format_certificate(certificate)}")
    return 0


def _inequality(args):
    family = args.family
    if family == "hoeffding-mean":
        return uniform_bound_bernoulli(*_need(args, "mu", "theta", "m"))
    if family == "bounded-variance":
        return uniform_bound_bounded_variance(*_need(args, "b", "nu", "eps", "m"))
    if family == "normal":
        return uniform_bound_normal(*_need(args, "mu", "nu", "theta", "m"))
    if family == "poisson":
        return uniform_bound_poisson(*_need(args, "lam", "theta", "m"))
    if family == "chernoff":
        phi, lower, upper, eps = _need(args, "phi", "lower", "upper", "eps")
        cumulant = CumulantSpec.from_text(phi, lower, upper)
        m = args.m if args.m is not None else 1
        if args.at is not None:
            return chernoff_at(cumulant, eps, args.at, m)
        return chernoff_inf(cumulant, eps, m)
    if family == "mgf-vector":
        return mgf_vector_bound(*_need(args, "g", "tau", "eps", "n"))
    if family == "iid-bounded":
        n, eps = _need(args, "n", "eps")
        if args.radii is not None:
            V = variance_proxy_from_radii(args.radii)
        elif args.diameters is not None:
            V = variance_proxy_from_diameters(args.diameters)
        else:
            (V,) = _need(args, "V")
        return iid_bounded_bound(V, n, eps)
    if family == "martingale":
        return martingale_bound(*_need(args, "increments", "eps"))
    if family == "componentwise":
        (eps,) = _need(args, "eps")
        if args.ranges is not None:
            return componentwise_tail(_json_arg(args.ranges, "--ranges"), None, eps)
        return componentwise_tail(*_need(args, "radii", "sigma2"), eps)
    if family == "small-deviation":
        return small_deviation_bound(*_need(args, "c_n", "x"))
    raise ParameterError(f"unknown bound family {family!r}")


def bound_mode(args):
    """Evaluate one inequality"""
    family = args.family
    if family == "variance-range":
        result = variance_range_bound(*_need(args, "sigma", "r", "n", "eps"))
        emit(args, {"family": family, **result.to_dict()}, report.format_variance_range(result))
    elif family == "envelope":
        if args.diameter is not None:
            spec = args.diameter
        else:
            A, b, c, mu = _need(args, "matrix", "offset", "c", "mean")
            spec = EllipsoidSpec(_json_arg(A, "--matrix"), _json_arg(b, "--offset"), c, _json_arg(mu, "--mean"))
        norm_bound, second_moment_bound = moment_envelope(spec)
        emit(args, {"family": family, "norm_bound": norm_bound, "second_moment_bound": second_moment_bound},
             report.format_envelope(norm_bound, second_moment_bound))
    elif family == "golden-moment":
        (k,) = _need(args, "k")
        value = golden_moment(k)
        emit(args, {"family": family, "k": k, "value": value}, f"📐 E[Z^{k}] = {value:.17g}")
    elif family == "asymptotic":
        phi, lower, upper, sigma2, eps_list = _need(args, "phi", "lower", "upper", "sigma2", "eps_list")
        reports = asymptotic_check(CumulantSpec.from_text(phi, lower, upper), sigma2, args.nu or 0.0, eps_list)
        emit(args, {"family": family, "reports": [r.to_dict() for r in reports]}, report.format_asymptotics(reports))
    else:
        result = _inequality(args)
        emit(args, {"family": family, **result.to_dict()}, report.format_inequality(family, result))
    return 0


def stability_mode(args):
    """Worst-case instability probability of the lead-compensated plant"""
    problem = build_stability_problem()
    if args.write_problem:
        dump_problem(problem, args.write_problem)
        logger.info("Wrote stability problem to %s", args.write_problem)
    certificate = sup_probability(problem, _settings(args))
    summary = compare_with_reference(certificate)
    emit(args, {"certificate": certificate_to_dict(certificate), "comparison": summary},
         report.format_stability(certificate, summary))
    return 0


def verify_mode(args):
    """Run a verification suite; exit 1 on any violation"""
    result = run_suite(args.suite, reps=args.reps, seed=args.seed, threads=args.threads)
    emit(args, result, f"{report.banner(f'VERIFY {args.suite.upper()}', '🧪')}\n{report.format_suite(result)}")
    return 1 if result["violations"] else 0


def _infer_dimension(text):
    indices = [int(i) for i in re.findall(r"\bx(\d+)\b", text)]
    return max(indices + [1])


def parse_check_mode(args):
    """Parse an expression and echo its canonical form"""
    dimension = args.dimension or _infer_dimension(args.expression)
    expr = parse(args.expression, dimension)
    used = variables_used(expr)
    emit(args, {"canonical": render(expr), "variables": [f"x{i + 1}" for i in sorted(used)]},
         report.format_parse(expr, used))
    return 0


MODES = {
    "solve": solve_mode,
    "bound": bound_mode,
    "stability": stability_mode,
    "verify": verify_mode,
    "parse-check": parse_check_mode,
}


# --------- Argument parsing ---------

def _add_solver_flags(parser):
    parser.add_argument("--bnb-tol", type=float, help="Absolute gap at which the bracket is certified")
    parser.add_argument("--multistarts", type=int, help="Number of search starts")
    parser.add_argument("--bnb-max-boxes", type=int, help="Branch-and-bound box budget")


def build_parser():
    parser = argparse.ArgumentParser(
        description="Certified worst-case moment bounds and uniform exponential inequalities",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py solve problem.json                            # Certified bound for a problem
  python main.py bound hoeffding-mean --mu 0.5 --theta 0.6 --m 10
  python main.py bound variance-range --sigma 0.5 --r 1 --n 100 --eps 0.1
  python main.py stability --write-problem stability.json      # Robust-stability case study
  python main.py verify golden                                 # Run a verification suite
  python main.py --output json parse-check "min(x1, 2*x2)"
        """
    )
    parser.add_argument("--output", choices=("human", "json"), default="human", help="Output format")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed for every stochastic step")
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="Worker threads")
    parser.add_argument("--verbose", action="store_true", help="Log progress to stderr")
    parser.add_argument("--version", action="version", version=report.version_line())
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Solve a worst-case problem document")
    solve.add_argument("problem", help="Path to a problem JSON document")
    _add_solver_flags(solve)

    bound = commands.add_parser("bound", help="Evaluate an inequality")
    bound.add_argument("family", choices=FAMILIES)
    for name in ("mu", "theta", "b", "nu", "eps", "lam", "lower", "upper", "at", "tau",
                 "V", "sigma", "sigma2", "r", "c-n", "x", "diameter", "c"):
        bound.add_argument(f"--{name}", type=float)
    for name in ("m", "n", "k"):
        bound.add_argument(f"--{name}", type=int)
    bound.add_argument("--phi", help="Cumulant bound as an expression in s")
    bound.add_argument("--g", help="Moment generating function of ||X|| as an expression in s")
    for name in ("radii", "diameters", "increments", "eps-list"):
        bound.add_argument(f"--{name}", type=float, nargs="+")
    bound.add_argument("--ranges", help='Component ranges as JSON, e.g. "[[-1, 1], [-0.5, 2]]"')
    bound.add_argument("--matrix", help="Ellipsoid matrix A as JSON")
    bound.add_argument("--offset", help="Ellipsoid offset b as JSON")
    bound.add_argument("--mean", help="Mean mu as JSON")

    stability = commands.add_parser("stability", help="Robust-stability case study")
    stability.add_argument("--write-problem", metavar="PATH", help="Also write the problem document")
    _add_solver_flags(stability)

    verify = commands.add_parser("verify", help="Run a verification suite")
    verify.add_argument("suite", choices=sorted(SUITES))
    verify.add_argument("--reps", type=int, default=MC_REPS, help="Monte Carlo replicates per cell")

    check = commands.add_parser("parse-check", help="Parse an expression and echo its canonical form")
    check.add_argument("expression")
    check.add_argument("--dimension", type=int, help="Number of variables (inferred by default)")
    return parser


def configure_logging(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, LOG_LEVEL),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )


def run(argv=None):
    """Parse `argv`, run the chosen mode and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return exit_request.code if isinstance(exit_request.code, int) else 2
    configure_logging(args.verbose)
    try:
        config = CliConfig.from_args(args)
        logger.debug("Running %s with %s", config.command, config)
        return MODES[config.command](args)
    except BoundError as error:
        if args.output == "json":
            print(json.dumps(error.to_dict()), file=sys.stderr)
        else:
            print(f"❌ {error.code}: {error}", file=sys.stderr)
        return error.exit_code
    except OSError as error:
        print(json.dumps({"error": "IO_ERROR", "message": str(error)}) if args.output == "json"
              else f"❌ {error}", file=sys.stderr)
        return 1


def main():
    """Main entry point with command line argument parsing"""
    sys.exit(run())


if __name__ == "__main__":
    main()
