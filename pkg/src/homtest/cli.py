"""Command-line front end: ``homtest <command> [flags] [files]``."""
from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from . import harness, reductions
from .algebra import Tier, classify
from .errors import (FarUnreachable, NoSublinearTester, OracleBudgetExceeded, SchemaError,
                     SizeGuardExceeded, Unsatisfiable)
from .minimality import run_minimality
from .solver import count_list_homs, distance_to_property, find_list_hom
from .structures import AssignmentOracle, load_assignment, load_graph, load_instance
from .testers import TESTER_IDS, TesterConfig, test

EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_BUDGET = 69
TIER_EXIT = {Tier.CONSTANT: 0, Tier.SUBLINEAR: 1, Tier.LINEAR: 2}
REDUCE_CASES = ("1", "2", "3", "4", "5", "6", "subalgebra", "quotient", "power")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc


def _epsilon(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("epsilon must lie in (0, 1)")
    return value


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list: {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    common.add_argument("--output", default=argparse.SUPPRESS, help="write results to this file")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress diagnostics on stderr")
    parser = _Parser(prog="homtest", parents=[common],
                     description="Property testing for list H-homomorphism.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", parents=[common], help="tier of H; exit 0/1/2 = constant/sublinear/linear")
    p.add_argument("graph", help="H as a graph document or an instance document")

    p = sub.add_parser("solve", parents=[common], help="count homs, give a witness and a distance")
    p.add_argument("instance")
    p.add_argument("--assignment", help="assignment document; adds its exact distance")
    p.add_argument("--budget", type=int, default=10**7, help="search node budget")

    p = sub.add_parser("propagate", parents=[common], help="run (k,l)-Minimality and report the sets")
    p.add_argument("instance")
    p.add_argument("-k", type=int, default=2)
    p.add_argument("-l", type=int, default=3)
    p.add_argument("--full", action="store_true", help="list the sets, not just their sizes")

    p = sub.add_parser("test", parents=[common], help="run a tester; exit 0 = accept, 1 = reject")
    p.add_argument("instance")
    p.add_argument("assignment")
    p.add_argument("--epsilon", type=_epsilon, required=True)
    p.add_argument("--tester", choices=TESTER_IDS, default="auto")
    p.add_argument("--c-scalar", type=float, default=None)
    p.add_argument("--c-pair", type=float, default=None)
    p.add_argument("--trials", type=int, default=1)

    p = sub.add_parser("plant", parents=[common], help="generate an instance around a random hom")
    p.add_argument("graph", help="H")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-m", type=int, required=True, help="number of edges of G")
    p.add_argument("--density", type=float, default=0.5, help="list density")
    p.add_argument("--connected", action="store_true")
    p.add_argument("--hom-output", help="also write the planted hom here")

    p = sub.add_parser("perturb", parents=[common], help="push a hom to a certified far assignment")
    p.add_argument("instance")
    p.add_argument("assignment", help="a list-homomorphism to start from")
    p.add_argument("--epsilon", type=float, required=True)

    p = sub.add_parser("bench", parents=[common], help="query profile as CSV")
    p.add_argument("graph", help="H")
    p.add_argument("--epsilon", type=_epsilon, required=True)
    p.add_argument("--sizes", type=_sizes, required=True, help="comma-separated n values")
    p.add_argument("--tester", choices=TESTER_IDS, default="auto")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--c-pair", type=float, default=None)

    for name, text in (("reduce", "apply a reduction"), ("verify-reduction", "check a reduction's contract")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("input", help="document with template, structure, weights and assignment")
        p.add_argument("--case", choices=REDUCE_CASES, required=True)
        p.add_argument("--spec", help="case parameters as a JSON file")
        p.add_argument("--epsilon", type=_epsilon, default=None)
        if name == "verify-reduction":
            p.add_argument("--trials", type=int, default=200)
    return parser


def _config_kwargs(args) -> dict:
    out = {}
    if getattr(args, "c_scalar", None) is not None:
        out["c_scalar"] = args.c_scalar
    if getattr(args, "c_pair", None) is not None:
        out["c_pair"] = args.c_pair
    return out


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_classify(args) -> tuple[str, int]:
    H = load_graph(_read_json(args.graph))
    verdict = classify(H)
    return _dump(verdict.to_doc(H)), TIER_EXIT[verdict.tier]


def cmd_solve(args) -> tuple[str, int]:
    instance = load_instance(_read_json(args.instance))
    witness = find_list_hom(instance, budget=args.budget)
    doc = {"count": count_list_homs(instance, budget=args.budget),
           "witness": None if witness is None else instance.names(witness)}
    if args.assignment:
        f = load_assignment(instance, _read_json(args.assignment))
        try:
            dist, nearest = distance_to_property(instance, f, budget=args.budget)
            doc["distance"] = dist
            doc["nearest"] = instance.names(nearest)
        except Unsatisfiable:
            doc["distance"] = None
            doc["nearest"] = None
    return _dump(doc), 0


def cmd_propagate(args) -> tuple[str, int]:
    instance = load_instance(_read_json(args.instance))
    family = run_minimality(instance, args.k, args.l)
    if family is None:
        return _dump({"satisfiable": False}), 0
    Gv, Hv = instance.graph.vertices, instance.target.vertices
    singles = {Gv[v]: sorted(Hv[x] for x in family.singleton(v)) for v in range(instance.n)}
    doc: dict = {"satisfiable": True, "k": args.k, "l": args.l}
    if args.full:
        doc["singletons"] = singles
    else:
        doc["singleton_sizes"] = {v: len(xs) for v, xs in singles.items()}
    if args.l >= 2:
        pairs = {}
        for v in range(instance.n):
            for u in range(v + 1, instance.n):
                rel = family.pair(v, u)
                key = f"{Gv[v]},{Gv[u]}"
                pairs[key] = sorted([Hv[x], Hv[y]] for x, y in rel) if args.full else len(rel)
        doc["pairs" if args.full else "pair_sizes"] = pairs
    return _dump(doc), 0


def cmd_test(args) -> tuple[str, int]:
    instance = load_instance(_read_json(args.instance))
    f = load_assignment(instance, _read_json(args.assignment))
    config = TesterConfig(epsilon=args.epsilon, seed=args.seed, trials=args.trials, **_config_kwargs(args))
    verdict = test(instance, AssignmentOracle(f), config, args.tester)
    return _dump(verdict.to_doc()), 0 if verdict.accepted else 1


def cmd_plant(args) -> tuple[str, int]:
    H = load_graph(_read_json(args.graph))
    planted = harness.plant_instance(H, args.n, args.m, args.density, args.seed, args.connected)
    if args.hom_output:
        with open(args.hom_output, "w", encoding="utf-8") as fh:
            fh.write(_dump({"f": planted.instance.names(planted.planted)}))
    return _dump(planted.instance.to_doc()), 0


def cmd_perturb(args) -> tuple[str, int]:
    instance = load_instance(_read_json(args.instance))
    f = load_assignment(instance, _read_json(args.assignment))
    if not instance.is_list_hom(f):
        raise SchemaError("perturb needs a list-homomorphism to start from", key="f")
    far = harness.perturb_to_far(harness.PlantedInstance(instance, f), args.epsilon, args.seed)
    doc = {"f": instance.names(far.assignment), "distance": far.distance,
           "nearest": instance.names(far.witness)}
    return _dump(doc), 0


def cmd_bench(args) -> tuple[str, int]:
    H = load_graph(_read_json(args.graph))
    rows = harness.query_profile(args.tester, H, args.sizes, args.epsilon, args.seed,
                                 trials=args.trials, **_config_kwargs(args))
    return harness.profile_csv(rows), 0


def _reduction_input(doc) -> tuple[reductions.RelationalStructure, reductions.ReductionInput]:
    for key in ("template", "structure", "assignment"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}", key=key)
    template = reductions.structure_from_doc(doc["template"])
    J = reductions.structure_from_doc(doc["structure"])
    f, w = doc["assignment"], doc.get("weights")
    if isinstance(f, dict):
        f = [f[str(x)] if str(x) in f else None for x in J.universe]
    if any(x is None for x in f):
        raise SchemaError("assignment does not cover the universe", key="assignment")
    if isinstance(w, dict):
        w = [w[str(x)] for x in J.universe]
    f = [reductions._hashable(x) for x in f]
    return template, reductions.ReductionInput.create(J, f, w)


def _reducer(case: str, spec: dict, template, epsilon: float | None):
    """Return (source template, reduce(inp, rng)) for ``case``."""
    if case in ("1", "2", "3", "4", "6"):
        source = reductions.derive_simple_template(int(case), spec, template)
        return source, lambda inp, rng: reductions.transform_simple(int(case), spec, template, inp)
    if case == "5":
        name = spec.get("relation", reductions.EQUALITY)
        eps = epsilon if epsilon is not None else spec.get("epsilon", 0.2)
        source = reductions.equality_template(template, name)
        return source, lambda inp, rng: reductions.equality_contraction(template, inp, eps, rng, name)
    if case == "subalgebra":
        kind = reductions.Subalgebra(tuple(reductions._hashable(x) for x in spec["universe"]),
                                     spec.get("name", "sub"))
    elif case == "quotient":
        kind = reductions.Quotient(tuple(reductions._hashable(x) for x in spec["universe"]),
                                   {reductions._hashable(a): reductions._hashable(b)
                                    for a, b in spec["mapping"].items()})
    else:
        kind = reductions.Power(int(spec["k"]))
    return template, lambda inp, rng: reductions.variety_reduction(kind, template, inp)


def cmd_reduce(args) -> tuple[str, int]:
    template, inp = _reduction_input(_read_json(args.input))
    spec = _read_json(args.spec) if args.spec else {}
    try:
        source, reduce = _reducer(args.case, spec, template, args.epsilon)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed spec: {exc}") from exc
    out = reduce(inp, np.random.default_rng(args.seed))
    if isinstance(out, reductions.PrecheckReject):
        doc = {"precheck": "reject", "witness": list(out.witness), "queries": out.queries}
        return _dump(doc), 1
    return _dump(out.to_doc()), 0


def cmd_verify_reduction(args) -> tuple[str, int]:
    template, inp = _reduction_input(_read_json(args.input))
    spec = _read_json(args.spec) if args.spec else {}
    try:
        source, reduce = _reducer(args.case, spec, template, args.epsilon)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed spec: {exc}") from exc
    far = None if reductions.is_homomorphism(inp.structure, source, inp.assignment) else inp.assignment
    trials = args.trials if args.case == "5" else 1
    report = reductions.verify_reduction(reduce, inp.structure, inp.weights, source, far=far,
                                         epsilon=args.epsilon, trials=trials, seed=args.seed)
    return _dump(report.to_doc()), 0 if report.passed else 1


COMMANDS = {
    "classify": cmd_classify, "solve": cmd_solve, "propagate": cmd_propagate, "test": cmd_test,
    "plant": cmd_plant, "perturb": cmd_perturb, "bench": cmd_bench, "reduce": cmd_reduce,
    "verify-reduction": cmd_verify_reduction,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    quiet = False

    def say(message: str):
        if not quiet:
            print(message, file=sys.stderr)

    try:
        args = parser.parse_args(argv)
        args.seed = getattr(args, "seed", 0)
        quiet = getattr(args, "quiet", False)
        text, code = COMMANDS[args.command](args)
    except UsageError as exc:
        say(parser.format_usage().rstrip())
        say(str(exc))
        return EXIT_USAGE
    except NoSublinearTester as exc:
        say(f"no sublinear tester: {exc}")
        return 2
    except (OSError, SchemaError) as exc:
        say(f"error: {exc}")
        return EXIT_DATA
    except (OracleBudgetExceeded, SizeGuardExceeded) as exc:
        say(f"budget exceeded: {exc}")
        return EXIT_BUDGET
    except (ValueError, FarUnreachable) as exc:
        say(f"error: {exc}")
        return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_DATA
    output = getattr(args, "output", None)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
