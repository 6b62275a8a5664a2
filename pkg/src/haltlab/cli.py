"""Command-line front end.

Every subcommand resolves a configuration (config file, then flags), runs one
oracle or protocol operation, appends one JSON-lines record to the results
file and prints a short summary. ``--check FILE`` re-validates and replays
recorded runs.

Exit codes: 0 success, 1 check mismatch, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from . import __version__
from .machine import decode_program, encode_program, run_bounded
from .oracle import (
    HaltingSurrogate,
    PrefixError,
    RankTable,
    build_surrogate,
    dovetail,
    g_T,
    omega_T,
)
from .protocols import (
    SAMPLERS,
    amplified_votes,
    default_etas,
    estimate_omega,
    extract_bits,
    parity_readout,
    perturbation_sweep,
    protocol_measure_halting,
    verify_candidate_oracle,
)
from .quantum import NumericalError, SeededRng, TruncationError
from .records import (
    ExperimentReport,
    RecordError,
    append_record,
    read_records,
    results_path,
    validate_record,
)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

REQUIRED = object()


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    """Truncation leakage, prefix overrun or numeric breakdown during a run."""

    def __init__(self, cause: Exception):
        super().__init__(str(cause))
        self.cause = cause


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


# key -> (flag parser, help)
PARAMS: dict[str, tuple[Callable[[str], Any], str]] = {
    "x": (int, "program index"),
    "input": (int, "initial value of register 0 (default: the program index)"),
    "T": (int, "step bound of the halting surrogate"),
    "x_max": (int, "largest program index in the prefix"),
    "D": (int, "truncation dimension of the state space"),
    "seed": (int, "64-bit seed"),
    "eps": (float, "per-readout failure probability"),
    "delta": (float, "readout spread"),
    "confidence": (float, "target confidence"),
    "N": (int, "number of shots"),
    "n": (int, "number of binary digits / digit index"),
    "etas": (_float_list, "comma-separated angle offsets"),
    "budget": (int, "dovetailing step budget"),
    "sampler": (str, f"shot sampler, one of {', '.join(SAMPLERS)}"),
    "flip": (_int_list, "comma-separated indices whose candidate bit is flipped"),
    "claim": (_int_list, "comma-separated indices the candidate claims halt"),
}


@dataclass
class RunConfig:
    """All configurable keys; ``None`` means "use the command default"."""

    x: int | None = None
    input: int | None = None
    T: int | None = None
    x_max: int | None = None
    D: int | None = None
    seed: int | None = None
    eps: float | None = None
    delta: float | None = None
    confidence: float | None = None
    N: int | None = None
    n: int | None = None
    etas: list[float] | None = None
    budget: int | None = None
    sampler: str | None = None
    flip: list[int] | None = None
    claim: list[int] | None = None

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - set(PARAMS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def merged(self, overrides: dict[str, Any]) -> "RunConfig":
        values = asdict(self)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(**values)


@dataclass
class Command:
    name: str
    run: Callable[[dict], tuple[dict, str]]
    defaults: dict[str, Any]
    help: str
    figure: bool = False
    extra: dict = field(default_factory=dict)


def _surrogate(params: dict, x_max: int) -> HaltingSurrogate:
    return build_surrogate(x_max, params["T"])


def _rng(params: dict) -> SeededRng:
    return SeededRng(params["seed"])


def _check_dim(x: int, D: int) -> None:
    if D < 1:
        raise UsageError("D must be positive")
    if x < 0:
        raise UsageError("x must be non-negative")


# -- command bodies: params -> (outcome, summary) ---------------------------

def cmd_enumerate(p):
    programs = []
    for x in range(p["x_max"] + 1):
        prog = decode_program(x)
        assert encode_program(prog) == x
        programs.append({"x": x, "program": str(prog), "length": len(prog)})
    lines = [f"{r['x']:>6}  {r['program']}" for r in programs]
    return {"programs": programs}, "\n".join(lines)


def cmd_run_program(p):
    inp = p["x"] if p["input"] is None else p["input"]
    out = run_bounded(p["x"], inp, p["T"])
    summary = f"program {p['x']} {decode_program(p['x'])} on input {inp}: " + (
        f"halted after {out.steps} steps" if out.halted else f"still running after {p['T']} steps"
    )
    return {"halted": out.halted, "steps": out.steps, "program": str(decode_program(p["x"]))}, summary


def cmd_oracle(p):
    if p["budget"] is None:
        s = build_surrogate(p["x_max"], p["T"])
    else:
        s = dovetail(p["x_max"], p["budget"])
    doc = s.to_dict()
    bits = "".join(map(str, s.bits()))
    return {"surrogate": doc, "bits": bits}, f"h_{s.bound} on 0..{s.x_max}: {bits}"


def cmd_omega(p):
    w = omega_T(p["x_max"], p["T"])
    out = {"numerator": w.numerator, "width": w.width, "bits": str(w)[2:], "value": float(w)}
    return out, f"Omega_T = {w.numerator}/2^{w.width} = {w} (~{float(w):.17g})"


def cmd_measure(p):
    _check_dim(p["x"], p["D"])
    s = _surrogate(p, p["x"])
    result = protocol_measure_halting(p["x"], s, p["D"], _rng(p))
    return {"outcome": result, "h_T": s.h(p["x"])}, f"measured h at |{p['x']}>: {result}"


def cmd_amplify(p):
    _check_dim(p["x"], p["D"])
    s = _surrogate(p, p["x"])
    plan, votes = amplified_votes(p["x"], s, p["eps"], p["delta"], p["confidence"], _rng(p), p["D"])
    result = int(2 * sum(votes) > len(votes))
    out = {"k": plan.k, "votes_for_1": sum(votes), "outcome": result, "h_T": s.h(p["x"])}
    return out, f"majority of {plan.k} noisy readouts at |{p['x']}>: {result} ({sum(votes)} votes for 1)"


def cmd_parity(p):
    x_max = p["x_max"] if p["x_max"] is not None else p["x"]
    D = p["D"] if p["D"] is not None else 2 * (x_max + 1)
    _check_dim(p["x"], D)
    s = _surrogate(p, x_max)
    table = RankTable.from_surrogate(s)
    x_prime = parity_readout(p["x"], table, D, _rng(p))
    out = {"x_prime": x_prime, "parity": x_prime % 2, "g": g_T(p["x"], table), "h_T": s.h(p["x"])}
    kind = "odd" if x_prime % 2 else "even"
    return out, f"|{p['x']}> -> readout {x_prime} ({kind}), so h = {x_prime % 2}"


def _omega_true(p):
    return omega_T(p["x_max"], p["T"])


def _estimate_outcome(est, w):
    return {
        "shots": est.shots,
        "successes": est.successes,
        "p_hat": est.p_hat,
        "omega_hat": est.omega_hat,
        "radius": est.radius,
        "covered": est.covers(w),
        "omega_numerator": w.numerator,
        "omega_width": w.width,
    }


def cmd_estimate_omega(p):
    w = _omega_true(p)
    est = estimate_omega(w, p["N"], p["confidence"], _rng(p), p["sampler"])
    out = _estimate_outcome(est, w)
    summary = f"Omega_hat = {est.omega_hat:.10f} +- {est.radius:.3g} (true {float(w):.10f}, covered={out['covered']})"
    return out, summary


def cmd_extract_bits(p):
    w = _omega_true(p)
    est = estimate_omega(w, p["N"], p["confidence"], _rng(p), p["sampler"])
    ext = extract_bits(est, p["n"], w)
    out = _estimate_outcome(est, w)
    out.update(bits=ext.bits, certified=ext.certified, guard=ext.guard, true_bits=ext.true_bits, correct=ext.correct)
    summary = f"bits {ext.bits} certified={ext.certified} (true {ext.true_bits}, guard {ext.guard:.3g})"
    return out, summary


def cmd_perturb(p):
    w = _omega_true(p)
    etas = p["etas"]
    rep = perturbation_sweep(w, p["n"], etas, p["N"], p["confidence"], _rng(p), p["sampler"])
    runs = [
        {"eta": r.eta, "angle": r.angle, "bits": r.bits, "certified": r.certified, "corrupted": list(r.corrupted)}
        for r in rep.runs
    ]
    out = {"true_bits": rep.true_bits, "runs": runs, "smallest_corrupting": rep.smallest_corrupting, "exact": rep.exact}
    summary = f"digits 0..{p['n']} of Omega_T = {rep.true_bits}; smallest corrupting |eta| = {rep.smallest_corrupting}"
    return out, summary


def cmd_verify_oracle(p):
    candidate = build_surrogate(p["x_max"], p["T"]).bits()
    for x in p["flip"]:
        if not 0 <= x <= p["x_max"]:
            raise UsageError(f"flip index {x} outside 0..{p['x_max']}")
        candidate[x] ^= 1
    for x in p["claim"]:
        if not 0 <= x <= p["x_max"]:
            raise UsageError(f"claim index {x} outside 0..{p['x_max']}")
        candidate[x] = 1
    rep = verify_candidate_oracle(candidate, p["x_max"], p["budget"])
    out = {
        "candidate": "".join(map(str, candidate)),
        "refutations": [{"x": r.x, "program": r.program, "steps": r.steps} for r in rep.refutations],
        "pending": list(rep.pending),
        "consistent": rep.consistent,
        "examined": rep.examined,
        "budget_used": rep.budget_used,
        "bound": rep.bound,
    }
    summary = (
        f"{len(rep.refutations)} refutation(s), {len(rep.pending)} pending, "
        f"{rep.consistent} consistent; {rep.budget_used} steps, bound {rep.bound}"
    )
    return out, summary


_TD = 10_000

COMMANDS: dict[str, Command] = {
    c.name: c
    for c in [
        Command("enumerate", cmd_enumerate, {"x_max": 15}, "list programs by index"),
        Command("run-program", cmd_run_program, {"x": REQUIRED, "input": None, "T": _TD}, "run one program"),
        Command("oracle", cmd_oracle, {"x_max": 31, "T": _TD, "budget": None}, "build a halting surrogate table"),
        Command("omega", cmd_omega, {"x_max": 12, "T": _TD}, "exact dyadic Omega_T"),
        Command("measure", cmd_measure, {"x": REQUIRED, "T": _TD, "D": 64, "seed": 0}, "measure the halting observable"),
        Command(
            "amplify",
            cmd_amplify,
            {"x": REQUIRED, "T": _TD, "D": 64, "eps": 0.1, "delta": 0.2, "confidence": 0.99, "seed": 0},
            "majority vote over noisy halting readouts",
        ),
        Command(
            "parity",
            cmd_parity,
            {"x": REQUIRED, "T": _TD, "x_max": None, "D": None, "seed": 0},
            "decode h from the parity after the rank permutation",
        ),
        Command(
            "estimate-omega",
            cmd_estimate_omega,
            {"x_max": 12, "T": _TD, "N": 10_000, "confidence": 0.95, "seed": 0, "sampler": "shots"},
            "estimate Omega_T from sigma_z statistics",
            figure=True,
        ),
        Command(
            "extract-bits",
            cmd_extract_bits,
            {"x_max": 12, "T": _TD, "N": 10_000, "confidence": 0.95, "n": 8, "seed": 0, "sampler": "shots"},
            "certified binary digits of the estimate",
            figure=True,
        ),
        Command(
            "perturb",
            cmd_perturb,
            {"x_max": 12, "T": _TD, "n": 8, "etas": None, "N": None, "confidence": 0.95, "seed": 0, "sampler": "shots"},
            "digit corruption under rotation-angle offsets",
            figure=True,
        ),
        Command(
            "verify-oracle",
            cmd_verify_oracle,
            {"x_max": 31, "T": _TD, "budget": 1_000_000, "flip": [], "claim": []},
            "inductively test a candidate halting table",
        ),
    ]
}


def resolve_params(command: Command, cfg: RunConfig) -> dict:
    values = asdict(cfg)
    params = {}
    for key, default in command.defaults.items():
        v = values.get(key)
        if v is None:
            if default is REQUIRED:
                raise UsageError(f"{command.name}: --{key.replace('_', '-')} is required")
            v = default
        params[key] = v
    if command.name == "perturb" and params["etas"] is None:
        params["etas"] = default_etas(omega_T(params["x_max"], params["T"]))
    for key in ("T", "x_max", "D", "N", "n", "budget", "input", "x"):
        if params.get(key) is not None and params[key] < 0:
            raise UsageError(f"{key} must be non-negative")
    if "seed" in params and not 0 <= params["seed"] < 1 << 64:
        raise UsageError("seed must fit in 64 unsigned bits")
    if "sampler" in params and params["sampler"] not in SAMPLERS:
        raise UsageError(f"sampler must be one of {SAMPLERS}")
    return params


def execute(name: str, params: dict) -> tuple[dict, str]:
    """Run a command on fully resolved params, mapping errors to their kind."""
    try:
        return COMMANDS[name].run(params)
    except (TruncationError, PrefixError, NumericalError, OverflowError) as exc:
        raise RuntimeFailure(exc) from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _figure(name: str, params: dict, outcome: dict, path: str) -> str:
    from . import plotting
    from .protocols import OmegaEstimate, PerturbationReport, PerturbedRun

    w = float(omega_T(params["x_max"], params["T"]))
    if name == "perturb":
        runs = tuple(
            PerturbedRun(r["eta"], r["angle"], r["bits"], r["certified"], tuple(r["corrupted"])) for r in outcome["runs"]
        )
        report = PerturbationReport(params["n"], outcome["true_bits"], runs, outcome["exact"])
        return str(plotting.plot_perturbation(report, path))
    est = OmegaEstimate(
        outcome["shots"], outcome["successes"], outcome["p_hat"], outcome["omega_hat"], outcome["radius"], params["confidence"]
    )
    return str(plotting.plot_estimate(est, w, params.get("n", 8), path))


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="haltlab", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"haltlab {__version__}")
    parser.add_argument("--check", metavar="FILE", help="validate and replay every record in FILE")
    parser.add_argument("--no-replay", action="store_true", help="with --check: validate only")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for cmd in COMMANDS.values():
        sp = sub.add_parser(cmd.name, help=cmd.help, description=cmd.help, allow_abbrev=False)
        for key in cmd.defaults:
            conv, text = PARAMS[key]
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key, type=conv, default=None, help=text)
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--results", help="results file (default: $HALTLAB_RESULTS or ./haltlab-results.jsonl)")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary")
        if cmd.figure:
            sp.add_argument("--figure", help="also render a figure to this path")
        if cmd.name == "oracle":
            sp.add_argument("--output", help="write the surrogate JSON document here")
    return parser


def _error(kind: str, exc: Exception) -> None:
    cause = getattr(exc, "cause", exc)
    obj = {"error": {"kind": kind, "type": type(cause).__name__, "message": str(exc)}}
    print(json.dumps(obj, sort_keys=True), file=sys.stderr)


def run_check(path: str, replay: bool = True) -> int:
    bad = 0
    total = 0
    try:
        lines = list(read_records(path))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    for lineno, rec in lines:
        total += 1
        try:
            validate_record(rec)
            if rec["protocol"] not in COMMANDS:
                raise RecordError(f"unknown protocol {rec['protocol']!r}")
            if replay:
                outcome, _ = execute(rec["protocol"], rec["params"])
                fresh = ExperimentReport(rec["protocol"], rec["params"], outcome, timestamp=rec["timestamp"])
                if json.loads(fresh.to_line()) != rec:
                    raise RecordError("replay does not reproduce the recorded outcome")
        except (RecordError, UsageError, RuntimeFailure, KeyError) as exc:
            bad += 1
            print(f"line {lineno}: FAIL {exc}")
        else:
            print(f"line {lineno}: ok {rec['protocol']}")
    print(f"{total - bad}/{total} records ok")
    return EXIT_OK if bad == 0 else EXIT_CHECK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.check:
            return run_check(args.check, replay=not args.no_replay)
        if args.command is None:
            raise UsageError("a command or --check is required")
        cmd = COMMANDS[args.command]
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        cfg = cfg.merged({k: getattr(args, k) for k in cmd.defaults})
        params = resolve_params(cmd, cfg)
        outcome, summary = execute(cmd.name, params)
        report = ExperimentReport(cmd.name, params, outcome)
        append_record(results_path(args.results), report)
        if cmd.name == "oracle" and args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(outcome["surrogate"], sort_keys=True, indent=1) + "\n")
        if not args.quiet:
            print(summary)
        if getattr(args, "figure", None):
            where = _figure(cmd.name, params, outcome, args.figure)
            if not args.quiet:
                print(f"figure written to {where}")
    except UsageError as exc:
        _error("usage", exc)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        _error("runtime", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
