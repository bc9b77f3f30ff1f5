"""Command-line front end: problem files in, reports and CSV traces out.

Problem files are JSON documents with the interval model plus optional
``truth``, ``observer``, ``switching`` and ``sim`` blocks (schema in the
README).  Exit codes are a stable contract: 0 success, 1 method-level
failure (conditions, synthesis, bracket), 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import sim as simmod
from . import synth
from .synth import CONTINUOUS, DISCRETE, DesignError, IntervalSystem

__all__ = [
    "Problem",
    "ProblemFileError",
    "fixture_path",
    "load_problem",
    "main",
    "parse_problem",
    "serialize_problem",
]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2

DEFAULT_CONT_TOL = 1e-6
DEFAULT_DISC_TOL = 1e-12

FIXTURES = {"4.1": "continuous_4_1.json", "4.2": "discrete_4_2.json"}

CONDITION_LABELS = {
    CONTINUOUS: {
        "i": "lower observer dynamics Metzler",
        "ii": "lower injection matrices nonnegative",
        "iii": "common copositive vector for upper dynamics",
        "iv": "observer start envelope admissible",
    },
    DISCRETE: {
        "i": "lower observer dynamics nonnegative",
        "ii": "lower injection matrices nonnegative",
        "iii": "common copositive vector for shifted upper dynamics",
        "iv": "observer start envelope admissible",
    },
}


class ProblemFileError(ValueError):
    """The problem document is malformed or violates a model assumption."""


@dataclass(frozen=True)
class Problem:
    """Parsed problem document."""

    system: IntervalSystem
    truth: simmod.TrueSystem | None
    observer_gain: np.ndarray | None
    omega0_lower: np.ndarray | None
    omega0_upper: np.ndarray | None
    switching: dict | None
    sim_settings: dict | None

    def build_observer(self) -> synth.ObserverRealization:
        if self.observer_gain is None:
            raise ProblemFileError("problem file has no observer block")
        return synth.build_observer(
            self.system, self.observer_gain, self.omega0_lower, self.omega0_upper
        )


def _require(doc: dict, key: str):
    if key not in doc:
        raise ProblemFileError(f"missing required key {key!r}")
    return doc[key]


def parse_problem(doc: dict) -> Problem:
    """Build a :class:`Problem` from a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ProblemFileError("problem document must be a JSON object")
    domain = _require(doc, "domain")
    n = int(_require(doc, "n"))
    p = int(_require(doc, "p"))
    nsub = int(_require(doc, "N"))
    a_lower = _require(doc, "A_lower")
    a_upper = _require(doc, "A_upper")
    if len(a_lower) != nsub or len(a_upper) != nsub:
        raise ProblemFileError(f"expected N={nsub} matrices in A_lower and A_upper")
    try:
        system = IntervalSystem(
            domain=domain,
            p=p,
            a_lower=tuple(np.array(m, dtype=float) for m in a_lower),
            a_upper=tuple(np.array(m, dtype=float) for m in a_upper),
            x0_lower=_require(doc, "x0_lower"),
            x0_upper=_require(doc, "x0_upper"),
        )
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc
    if system.n != n:
        raise ProblemFileError(f"declared n={n} but matrices are {system.n}x{system.n}")

    truth = None
    if "truth" in doc:
        block = doc["truth"]
        try:
            truth = simmod.TrueSystem(
                a=tuple(np.array(m, dtype=float) for m in _require(block, "A")),
                x0=_require(block, "x0"),
            )
            simmod.validate_truth(system, truth)
        except ValueError as exc:
            raise ProblemFileError(f"truth block invalid: {exc}") from exc

    gain = om_lo = om_up = None
    if "observer" in doc:
        block = doc["observer"]
        try:
            gain = np.array(_require(block, "L"), dtype=float)
            om_lo = np.array(_require(block, "omega0_lower"), dtype=float)
            om_up = np.array(_require(block, "omega0_upper"), dtype=float)
        except ProblemFileError:
            raise
        except (TypeError, ValueError) as exc:
            raise ProblemFileError(f"observer block invalid: {exc}") from exc

    switching = doc.get("switching")
    if switching is not None and not isinstance(switching, dict):
        raise ProblemFileError("switching block must be an object")
    sim_settings = doc.get("sim")
    if sim_settings is not None and not isinstance(sim_settings, dict):
        raise ProblemFileError("sim block must be an object")
    return Problem(
        system=system,
        truth=truth,
        observer_gain=gain,
        omega0_lower=om_lo,
        omega0_upper=om_up,
        switching=switching,
        sim_settings=sim_settings,
    )


def load_problem(path: str) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path} is not valid JSON: {exc}") from exc
    return parse_problem(doc)


def serialize_problem(problem: Problem, observer: synth.ObserverRealization | None = None) -> dict:
    """Canonical JSON document for a problem (optionally with a full observer)."""
    system = problem.system
    doc = {
        "domain": system.domain,
        "n": system.n,
        "p": system.p,
        "N": system.nsub,
        "A_lower": [m.tolist() for m in system.a_lower],
        "A_upper": [m.tolist() for m in system.a_upper],
        "x0_lower": system.x0_lower.tolist(),
        "x0_upper": system.x0_upper.tolist(),
    }
    if problem.truth is not None:
        doc["truth"] = {
            "A": [m.tolist() for m in problem.truth.a],
            "x0": problem.truth.x0.tolist(),
        }
    if observer is not None:
        doc["observer"] = {
            "L": observer.gain_l.tolist(),
            "omega0_lower": observer.omega0_lower.tolist(),
            "omega0_upper": observer.omega0_upper.tolist(),
            "Ahat_lower": [m.tolist() for m in observer.ahat_lower],
            "Ahat_upper": [m.tolist() for m in observer.ahat_upper],
            "G_lower": [m.tolist() for m in observer.g_lower],
            "G_upper": [m.tolist() for m in observer.g_upper],
            "F": observer.f.tolist(),
            "Chat": observer.chat.tolist(),
            "Dhat": observer.dhat.tolist(),
        }
    elif problem.observer_gain is not None:
        doc["observer"] = {
            "L": problem.observer_gain.tolist(),
            "omega0_lower": problem.omega0_lower.tolist(),
            "omega0_upper": problem.omega0_upper.tolist(),
        }
    if problem.switching is not None:
        doc["switching"] = dict(problem.switching)
    if problem.sim_settings is not None:
        doc["sim"] = dict(problem.sim_settings)
    return doc


def fixture_path(example_id: str):
    """Filesystem path of a bundled example problem ('4.1' or '4.2')."""
    if example_id not in FIXTURES:
        raise KeyError(f"unknown example id {example_id!r}")
    return resources.files("swposobs").joinpath("fixtures", FIXTURES[example_id])


def format_report(report: synth.ConditionReport) -> str:
    labels = CONDITION_LABELS[report.domain]
    lines = []
    for key, ok in report.as_dict().items():
        lines.append(f"condition ({key:>3}) {labels[key]:<48} {'pass' if ok else 'FAIL'}")
    if report.certificate is not None:
        lam = ", ".join(f"{v:.12g}" for v in report.certificate.lam)
        lines.append(f"copositive witness lambda = [{lam}] (margin {report.certificate.margin:.6g})")
    if report.first_violation:
        lines.append(f"first violation: {report.first_violation}")
    for note in report.notes:
        lines.append(f"note: {note}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines)


def format_bracket(report: simmod.BracketReport, samples: int) -> str:
    lines = [
        f"bracket check over {samples} samples at tol {report.tol:g}:",
        f"  violations: nonneg={report.violations_nonneg} "
        f"lower={report.violations_lower} upper={report.violations_upper}",
    ]
    if report.worst_location is not None:
        layer, t, comp = report.worst_location
        lines.append(
            f"  worst violation {report.worst_violation:.6g} on layer {layer} "
            f"at t={t:g}, component {comp + 1}"
        )
    lines.append(
        f"  sup||xi|| = {report.sup_xi_norm:.6g}, ||xi|| start/end = "
        f"{report.xi_norm_start:.6g} -> {report.xi_norm_end:.6g}"
    )
    lines.append(f"  measured components match output exactly: {report.outputs_exact}")
    return "\n".join(lines)


def _check_report(problem: Problem) -> synth.ConditionReport:
    obs = problem.build_observer()
    if problem.system.domain == CONTINUOUS:
        return synth.check_theorem1(problem.system, obs)
    return synth.check_theorem2(problem.system, obs)


def cmd_check(args) -> int:
    try:
        problem = load_problem(args.file)
        report = _check_report(problem)
    except (ProblemFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(format_report(report))
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_synthesize(args) -> int:
    try:
        problem = load_problem(args.file)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    omega = None
    if problem.omega0_lower is not None:
        omega = (problem.omega0_lower, problem.omega0_upper)
    step_logger = logging.getLogger("swposobs.synth")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    step_logger.addHandler(handler)
    previous_level = step_logger.level
    step_logger.setLevel(logging.INFO)
    try:
        observer = synth.run_design_procedure(
            problem.system,
            gain=problem.observer_gain,
            omega=omega,
            budget=args.budget,
            seed=args.seed,
        )
    except synth.GainSearchError as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        print(f"best candidate gain: {exc.best_gain.tolist()}", file=sys.stderr)
        return EXIT_FAILURE
    except DesignError as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        step_logger.removeHandler(handler)
        step_logger.setLevel(previous_level)
    text = json.dumps(serialize_problem(problem, observer), indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _resolve_sim_settings(problem: Problem, args):
    switching = problem.switching or {}
    domain = problem.system.domain
    seed = int(switching.get("seed", 0))
    if domain == CONTINUOUS:
        min_dwell = float(switching.get("min_dwell", 0.2))
        horizon = args.horizon if args.horizon is not None else float(switching.get("horizon", 2.0))
        steps = None
        step = args.step if args.step is not None else float((problem.sim_settings or {}).get("step", 1e-3))
        tol = args.tol if args.tol is not None else DEFAULT_CONT_TOL
    else:
        min_dwell = float(switching.get("min_dwell", 5))
        steps = args.steps if args.steps is not None else int(switching.get("steps", 60))
        horizon = None
        step = None
        tol = args.tol if args.tol is not None else DEFAULT_DISC_TOL
    return seed, min_dwell, horizon, steps, step, tol


def cmd_simulate(args) -> int:
    try:
        problem = load_problem(args.file)
        observer = problem.build_observer()
        if args.sample_truth is not None:
            truth = simmod.sample_truth(problem.system, args.sample_truth)
        elif problem.truth is not None:
            truth = problem.truth
        else:
            raise ProblemFileError(
                "problem file has no truth block (use --sample-truth SEED to draw one)"
            )
        simmod.validate_truth(problem.system, truth)
    except (ProblemFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    system = problem.system
    try:
        seed, min_dwell, horizon, steps, step, tol = _resolve_sim_settings(problem, args)
        if system.domain == CONTINUOUS:
            sig = simmod.make_switching_signal(system.nsub, horizon, min_dwell, seed)
            trace = simmod.simulate_continuous(system, truth, observer, sig,
                                               step=step, horizon=horizon)
        else:
            sig = simmod.make_switching_signal(system.nsub, steps, min_dwell, seed,
                                               domain=DISCRETE)
            trace = simmod.simulate_discrete(system, truth, observer, sig, steps)
    except FloatingPointError as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    report = simmod.verify_bracket(trace, tol)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            simmod.export_csv(trace, fh)
        print(format_bracket(report, trace.times.size))
    else:
        simmod.export_csv(trace, sys.stdout)
        print(format_bracket(report, trace.times.size), file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAILURE


def cmd_reproduce(args) -> int:
    path = fixture_path(args.example_id)
    problem = load_problem(str(path))
    report = _check_report(problem)
    system = problem.system
    observer = problem.build_observer()
    switching = problem.switching or {}
    seed = int(switching.get("seed", 0))
    if system.domain == CONTINUOUS:
        horizon = float(switching.get("horizon", 2.0))
        sig = simmod.make_switching_signal(system.nsub, horizon,
                                           float(switching.get("min_dwell", 0.2)), seed)
        step = float((problem.sim_settings or {}).get("step", 1e-3))
        trace = simmod.simulate_continuous(system, problem.truth, observer, sig,
                                           step=step, horizon=horizon)
        tol = DEFAULT_CONT_TOL
        decay_bound = 1.0
    else:
        steps = int(switching.get("steps", 60))
        sig = simmod.make_switching_signal(system.nsub, steps,
                                           float(switching.get("min_dwell", 5)), seed,
                                           domain=DISCRETE)
        trace = simmod.simulate_discrete(system, problem.truth, observer, sig, steps)
        tol = DEFAULT_DISC_TOL
        decay_bound = 0.05
    bracket = simmod.verify_bracket(trace, tol)
    decay_ok = bracket.xi_norm_end < decay_bound * bracket.xi_norm_start
    full = report.passed and bracket.ok and decay_ok

    print(f"reproduction {args.example_id} ({system.domain} time)")
    print(format_report(report))
    print(format_bracket(bracket, trace.times.size))
    print(f"estimate-gap decay ||xi(end)|| < {decay_bound:g} * ||xi(0)||: "
          f"{'pass' if decay_ok else 'FAIL'}")
    print(f"verdict: {'PASS' if full else 'FAIL'}")
    return EXIT_OK if full else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swposobs",
        description="Interval reduced-order observers for uncertain switched positive systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="evaluate the observer-existence conditions")
    p_check.add_argument("file", help="problem JSON (must contain an observer block)")
    p_check.set_defaults(func=cmd_check)

    p_synth = sub.add_parser("synthesize", help="find or validate an observer gain")
    p_synth.add_argument("file", help="problem JSON")
    p_synth.add_argument("--budget", type=int, default=200, help="gain-search candidates")
    p_synth.add_argument("--seed", type=int, default=0, help="gain-search seed")
    p_synth.add_argument("--out", help="write the solved problem JSON here instead of stdout")
    p_synth.set_defaults(func=cmd_synthesize)

    p_sim = sub.add_parser("simulate", help="co-simulate plant and observers, export CSV")
    p_sim.add_argument("file", help="problem JSON (observer plus truth or --sample-truth)")
    p_sim.add_argument("--out", help="CSV output path (default: stdout)")
    p_sim.add_argument("--sample-truth", type=int, metavar="SEED",
                       help="draw an admissible truth instead of using the file's")
    p_sim.add_argument("--step", type=float, help="RK4 step (continuous time)")
    p_sim.add_argument("--horizon", type=float, help="simulation horizon (continuous time)")
    p_sim.add_argument("--steps", type=int, help="number of steps (discrete time)")
    p_sim.add_argument("--tol", type=float, help="bracket violation tolerance")
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("reproduce", help="re-run a bundled example end to end")
    p_rep.add_argument("example_id", choices=sorted(FIXTURES),
                       help="bundled example id")
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
