"""Command-line front end.

Exit status: 0 when the check passes, 1 when it fails (the report carries a
witness), 2 on malformed input or exhausted resource limits.
"""

from __future__ import annotations

import argparse
import math
import sys
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path

from . import formats
from .closure import closure
from .composition import ReplacementSpec, implements_check, replace_transition
from .errors import EnumerationLimitExceeded, StateLimitExceeded, UnknownActionError, UnknownStateError
from .mechanisms import (
    CoinSource,
    TruncatedGeomParams,
    check_function_dp,
    count_function,
    insertion_pairs,
    multisets,
    noise_p_from_epsilon,
    sum_function,
    tg_distribution,
    tg_sample_counted,
)
from .model import Automaton, validate_plts
from .pinq import Ex1Params, build_all_families, build_mex1_model, verify_mex1
from .relations import CheckFailure, is_all_covered, is_unwind_fam, lifting_bijection
from .semantics import dni_check_bruteforce

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    return str(value)


class Report:
    """Ordered ``key: value`` lines; identical inputs render identical text."""

    def __init__(self):
        self.rows: list[tuple[str, str]] = []

    def add(self, key: str, value) -> None:
        self.rows.append((key, _fmt(value)))

    def add_distribution(self, key: str, nu) -> None:
        for state in sorted(nu):
            self.add(f"{key}[{state}]", nu[state])

    def add_failure(self, failure: CheckFailure) -> None:
        self.add("failure.reason", failure.reason)
        for name in ("level", "pair", "action", "state", "detail"):
            value = getattr(failure, name)
            if value not in (None, ""):
                self.add(f"failure.{name}", value)
        if failure.nu1 is not None:
            self.add_distribution("failure.nu1", failure.nu1)
        if failure.nu2 is not None:
            self.add_distribution("failure.nu2", failure.nu2)

    def render(self) -> str:
        return "".join(f"{k}: {v}\n" for k, v in self.rows)


def _read(path: str) -> tuple[str, str]:
    try:
        return Path(path).read_text(encoding="utf-8"), path
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _load_automaton(path: str, *, require_valid: bool = True) -> Automaton:
    aut = formats.parse_automaton(*_read(path))
    if require_valid:
        report = validate_plts(aut.plts)
        if not report.ok:
            first = report.violations[0]
            raise InputError(f"{path}: automaton violates {first.axiom} at state "
                             f"{first.state} ({', '.join(first.actions)})")
    return aut


def _rational(text: str) -> Fraction:
    if not formats._RATIONAL.match(text.strip()):
        raise argparse.ArgumentTypeError(f"expected an exact rational like 1/2, got {text!r}")
    return Fraction(text)


def _domain(text: str) -> tuple:
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise argparse.ArgumentTypeError("empty domain element")
        values.append(int(item) if item.lstrip("-").isdigit() else item)
    return tuple(values)


def _noise_p(args, sensitivity: int) -> Fraction:
    if args.p is not None:
        return args.p
    if args.epsilon is None:
        raise InputError("give --p or --epsilon")
    return noise_p_from_epsilon(args.epsilon, sensitivity)


def _mechanism(args, capacity: int):
    if args.mech == "count":
        return count_function(capacity, _noise_p(args, 1))
    if any(not isinstance(x, int) for x in args.domain):
        raise InputError("sum needs an integer domain")
    return sum_function(capacity, _noise_p(args, 100))


def cmd_validate(args, out: Report) -> int:
    aut = _load_automaton(args.file, require_valid=False)
    report = validate_plts(aut.plts)
    out.add("ok", report.ok)
    out.add("states", len(aut.plts.states))
    out.add("transitions", len(aut.plts.transitions))
    for i, v in enumerate(report.violations):
        out.add(f"violation[{i}]", f"{v.axiom} state={v.state} actions={','.join(v.actions)}"
                + (f" ({v.detail})" if v.detail else ""))
    return EXIT_PASS if report.ok else EXIT_FAIL


def cmd_closure(args, out: Report) -> int:
    aut = _load_automaton(args.file)
    nu = closure(aut.plts, args.state, args.action)
    out.add("state", args.state)
    out.add("action", args.action)
    out.add("enabled", nu is not None)
    if nu is not None:
        out.add_distribution("nu", nu.states())
        out.add("bottomMass", nu.bottom)
    return EXIT_PASS


def cmd_check_lift(args, out: Report) -> int:
    query = formats.parse_lift_query(*_read(args.file))
    out.add("rho", query.rho)
    out.add("support1", len(query.nu1))
    out.add("support2", len(query.nu2))
    if len(query.nu1) != len(query.nu2):
        out.add("ok", False)
        out.add("reason", "no bijection: support sizes differ")
        return EXIT_FAIL
    matching = lifting_bijection(query.relation, query.rho, query.nu1, query.nu2)
    out.add("ok", matching is not None)
    if matching is None:
        out.add("reason", "no perfect matching in the lifting graph")
        return EXIT_FAIL
    for x in sorted(matching):
        out.add(f"match[{x}]", matching[x])
    return EXIT_PASS


def cmd_check_unwind(args, out: Report) -> int:
    aut = _load_automaton(args.automaton)
    fam = formats.parse_relation_family(*_read(args.family))
    report = is_unwind_fam(aut.plts, fam)
    out.add("ok", report.ok)
    out.add("t", fam.t)
    out.add("stepRho", fam.step_rho)
    if report.failure:
        out.add_failure(report.failure)
    return EXIT_PASS if report.ok else EXIT_FAIL


def cmd_check_covered(args, out: Report) -> int:
    aut = _load_automaton(args.automaton)
    family_set = formats.parse_family_set(*_read(args.families))
    report = is_all_covered(aut, family_set.families, family_set.step_rho, family_set.t)
    out.add("ok", report.ok)
    out.add("families", len(family_set.families))
    if report.ok:
        out.add("certifiedRho", report.certified_rho)
    else:
        for key, value in sorted(report.details.items()):
            out.add(key, value)
        out.add_failure(report.failure)
    return EXIT_PASS if report.ok else EXIT_FAIL


def cmd_check_dni(args, out: Report) -> int:
    aut = _load_automaton(args.file)
    report = dni_check_bruteforce(aut, args.rho, args.max_input_len, args.max_obs_len,
                                  args.max_evaluations)
    out.add("pass", report.passed)
    out.add("rho", args.rho)
    out.add("maxRatio", report.max_ratio)
    out.add("evaluations", report.evaluations)
    if report.witness is not None:
        w = report.witness
        out.add("witness.inputs1", list(w.inputs_a))
        out.add("witness.inputs2", list(w.inputs_b))
        out.add("witness.obs", list(w.obs))
        out.add("witness.prob1", w.prob_a)
        out.add("witness.prob2", w.prob_b)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_check_fn_dp(args, out: Report) -> int:
    mech = _mechanism(args, args.capacity)
    databases = multisets(args.domain, args.capacity)
    pairs = insertion_pairs(databases, args.domain)
    rho = args.rho if args.rho is not None else mech.rho
    report = check_function_dp(mech.distribution, databases, pairs, rho)
    out.add("ok", report.ok)
    out.add("rho", rho)
    out.add("databases", len(databases))
    out.add("neighborPairs", len(pairs))
    out.add("worstRatio", report.worst_ratio)
    if report.witness is not None:
        db1, db2, r, a, b = report.witness
        out.add("witness.db1", list(db1))
        out.add("witness.db2", list(db2))
        out.add("witness.output", r)
        out.add("witness.prob1", a)
        out.add("witness.prob2", b)
    return EXIT_PASS if report.ok else EXIT_FAIL


def cmd_sample_mech(args, out: Report) -> int:
    try:
        params = TruncatedGeomParams(args.m, args.center, args.p)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    coins = CoinSource(args.seed)
    counts: dict[int, int] = {}
    flips = 0
    for _ in range(args.count):
        n, used = tg_sample_counted(params, coins)
        counts[n] = counts.get(n, 0) + 1
        flips += used
    pmf = tg_distribution(params)
    support = sorted(set(counts) | set(pmf))
    tv = sum(abs(Fraction(counts.get(n, 0), args.count) - pmf.get(n, 0)) for n in support) / 2
    out.add("m", args.m)
    out.add("center", args.center)
    out.add("p", args.p)
    out.add("seed", args.seed)
    out.add("count", args.count)
    for n in support:
        out.add(f"freq[{n}]", counts.get(n, 0))
    out.add("totalVariation", f"{float(tv):.6f}")
    out.add("meanFlips", f"{flips / args.count:.6f}")
    return EXIT_PASS


def _example_params(args) -> Ex1Params:
    mech = _mechanism(args, args.t * args.v)
    return Ex1Params(args.t, args.v, args.domain, {args.mech: mech})


def cmd_gen_example(args, out: Report) -> int:
    params = _example_params(args)
    model = build_mex1_model(params)
    families = build_all_families(model)
    target = Path(args.out)
    target.mkdir(parents=True, exist_ok=True)
    aut_path = target / "automaton.txt"
    fam_path = target / "families.txt"
    aut_path.write_text(formats.emit_automaton(model.automaton), encoding="utf-8")
    fam_path.write_text(formats.emit_family_set(formats.FamilySet(
        params.t, params.rho_q ** 2, families)), encoding="utf-8")
    out.add("states", model.declared_state_count)
    out.add("families", len(families))
    out.add("stepRho", params.rho_q ** 2)
    out.add("automaton", aut_path)
    out.add("familyFile", fam_path)
    return EXIT_PASS


def cmd_verify_example(args, out: Report) -> int:
    params = _example_params(args)
    cert = verify_mex1(params)
    out.add("ok", cert.ok)
    out.add("t", params.t)
    out.add("v", params.v)
    out.add("domain", list(params.domain))
    out.add("mechanism", args.mech)
    out.add("rhoQuery", params.rho_q)
    out.add("stepRho", params.rho_q ** 2)
    out.add("claimedRho", cert.claimed_rho)
    out.add("states", cert.state_count)
    out.add("families", cert.family_count)
    if not cert.ok:
        for key, value in sorted(cert.report.details.items()):
            out.add(key, value)
        out.add_failure(cert.report.failure)
    return EXIT_PASS if cert.ok else EXIT_FAIL


def cmd_compose(args, out: Report) -> int:
    host = _load_automaton(args.host)
    sub = _load_automaton(args.subroutine)
    spec_file = formats.parse_replacement(*_read(args.spec))
    spec = ReplacementSpec(spec_file.host_state, spec_file.host_action, sub, spec_file.iota,
                           prefix=spec_file.prefix)
    step = host.plts.transitions.get((spec.host_state, spec.host_action))
    if step is None:
        raise InputError(f"{spec.host_state} has no {spec.host_action} transition")
    report = implements_check(spec, step)
    out.add("implements", report.ok)
    for i, problem in enumerate(report.problems):
        out.add(f"problem[{i}]", problem)
    if not report.ok and not args.no_check:
        return EXIT_FAIL
    try:
        composed = replace_transition(host, spec, check=not args.no_check)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    text = formats.emit_automaton(composed)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        out.add("output", args.out)
    out.add("states", len(composed.plts.states))
    if not args.out:
        out.rows.append(("automaton", "\n" + text.rstrip("\n")))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnicheck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the structural axioms of an automaton file")
    p.add_argument("file")
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("closure", help="extended transition of one state and action")
    p.add_argument("file")
    p.add_argument("--state", required=True)
    p.add_argument("--action", required=True)
    p.set_defaults(run=cmd_closure)

    p = sub.add_parser("check-lift", help="approximate lifting of a relation to two distributions")
    p.add_argument("file")
    p.set_defaults(run=cmd_check_lift)

    p = sub.add_parser("check-unwind", help="check one relation family")
    p.add_argument("automaton")
    p.add_argument("family")
    p.set_defaults(run=cmd_check_unwind)

    p = sub.add_parser("check-covered", help="covering check over a family set")
    p.add_argument("automaton")
    p.add_argument("families")
    p.set_defaults(run=cmd_check_covered)

    p = sub.add_parser("check-dni", help="brute-force noninterference oracle")
    p.add_argument("file")
    p.add_argument("--rho", type=_rational, required=True)
    p.add_argument("--max-input-len", type=int, default=4)
    p.add_argument("--max-obs-len", type=int, default=4)
    p.add_argument("--max-evaluations", type=int, default=None,
                   help="enumeration cap (default from DNICHECK_MAX_EVALUATIONS or 1000000)")
    p.set_defaults(run=cmd_check_dni)

    def mechanism_args(p, capacity: bool):
        p.add_argument("--mech", choices=("count", "sum"), default="count")
        p.add_argument("--domain", type=_domain, required=True)
        group = p.add_mutually_exclusive_group()
        group.add_argument("--p", type=_rational)
        group.add_argument("--epsilon", type=_rational_or_decimal)
        if capacity:
            p.add_argument("--capacity", type=int, required=True)

    p = sub.add_parser("check-fn-dp", help="function-level DP check over all small databases")
    mechanism_args(p, capacity=True)
    p.add_argument("--rho", type=_rational, default=None)
    p.set_defaults(run=cmd_check_fn_dp)

    p = sub.add_parser("sample-mech", help="draw from the truncated geometric sampler")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--center", type=int, default=0)
    p.add_argument("--p", type=_rational, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10000)
    p.set_defaults(run=cmd_sample_mech)

    for name, run, help_text in (
        ("gen-example", cmd_gen_example, "write the windowed server and its families"),
        ("verify-example", cmd_verify_example, "verify the windowed server end to end"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--t", type=int, required=True)
        p.add_argument("--v", type=int, required=True)
        mechanism_args(p, capacity=False)
        if name == "gen-example":
            p.add_argument("--out", required=True)
        p.set_defaults(run=run)

    p = sub.add_parser("compose", help="replace a hidden transition by a subroutine")
    p.add_argument("host")
    p.add_argument("spec")
    p.add_argument("subroutine")
    p.add_argument("--out")
    p.add_argument("--no-check", action="store_true",
                   help="build even when the subroutine does not implement the step")
    p.set_defaults(run=cmd_compose)
    return parser


def _rational_or_decimal(text: str) -> Fraction:
    # epsilon is a privacy parameter, not a probability, so decimals are fine
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad number {text!r}") from exc


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    out = Report()
    try:
        code = args.run(args, out)
    except (formats.FormatError, InputError, UnknownStateError, UnknownActionError,
            EnumerationLimitExceeded, StateLimitExceeded) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(out.render())
    return code


if __name__ == "__main__":
    sys.exit(main())
