"""Command-line front end.

Subcommands: solve, sample, relax, marginals, gradcheck, verify,
enumerate.  Inputs are JSON files; results go to stdout (or --out) as
JSON by default or CSV with --format csv.  Exit codes: 0 success,
1 invalid input, 2 solver failure, 3 verification failure.

Determinism: --seed S feeds ``numpy.random.default_rng(S)`` (PCG64
behind ``SeedSequence(S)``); identical inputs and seeds produce
byte-identical output.  The enumeration guard for oracle paths
defaults to 10000 vertices and can be overridden with SST_MAX_ENUM.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import verify as verify_mod
from .argmax import solve_map
from .errors import InputError, SolverError, SstError
from .grad import FDConfig, gradcheck
from .relax import RelaxationSpec, Regularizer, expfam_marginals, relax
from .structures import (
    StructureSpec,
    default_enum_limit,
    embedding_dim,
    enumerate_vertices,
    spec_from_dict,
)
from .utilities import draw, utility_from_dict
from .verify import SUITE_NAMES, gibbs_marginals_bruteforce, mc_frequencies

EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_SOLVER_FAILURE = 2
EXIT_VERIFICATION_FAILURE = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; remap to 1 so that
    # exit code 2 stays reserved for solver failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INVALID_INPUT)


def _uint64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _load_spec(path: str) -> StructureSpec:
    return spec_from_dict(_load_json(path))


def _load_vector(path: str, dim: int) -> np.ndarray:
    raw = _load_json(path)
    if isinstance(raw, dict) and "u" in raw:
        raw = raw["u"]
    vec = np.asarray(raw, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != dim:
        raise InputError(f"{path}: expected a vector of length {dim}")
    if not np.isfinite(vec).all():
        raise InputError(f"{path}: utilities must be finite")
    return vec


def _to_jsonable(value):
    if isinstance(value, np.ndarray):
        return [_to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _to_jsonable(v) for k, v in value.items()}
    return value


def _csv_lines(payload) -> list:
    if isinstance(payload, list):
        lines = []
        for i, row in enumerate(payload):
            if isinstance(row, dict):
                if i == 0:
                    lines.append(",".join(row))
                lines.append(",".join(json.dumps(v) for v in row.values()))
            else:
                lines.append(f"{i},{json.dumps(row)}")
        return lines
    if isinstance(payload, dict):
        return [f"{k},{json.dumps(v)}" for k, v in payload.items()]
    return [json.dumps(payload)]


def _emit(payload, args) -> None:
    payload = _to_jsonable(payload)
    if args.format == "csv":
        text = "\n".join(_csv_lines(payload)) + "\n"
    else:
        text = json.dumps(payload, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_io_flags(sub):
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--out", default=None, help="write output here instead of stdout")


_REGULARIZER_ALIASES = {"expfam": Regularizer.EXPFAM_ENTROPY}
_REGULARIZER_CHOICES = [r.value for r in Regularizer] + sorted(_REGULARIZER_ALIASES)


def _relaxation_from_args(args) -> RelaxationSpec:
    try:
        reg = _REGULARIZER_ALIASES.get(args.regularizer) or Regularizer(args.regularizer)
    except ValueError as exc:
        raise InputError(f"unknown regularizer {args.regularizer!r}") from exc
    return RelaxationSpec(
        regularizer=reg,
        temperature=args.temperature,
        tol=args.tol,
        max_iter=args.max_iter,
        clip_range=args.clip_range,
    )


def _cmd_solve(args) -> int:
    spec = _load_spec(args.spec)
    u = _load_vector(args.utilities, embedding_dim(spec))
    sol = solve_map(spec, u)
    _emit(
        {
            "vertex": sol.vertex,
            "objective": sol.objective,
            "tie_broken": sol.tie_broken,
        },
        args,
    )
    return EXIT_OK


def _cmd_sample(args) -> int:
    spec = _load_spec(args.spec)
    uspec = utility_from_dict(_load_json(args.noise))
    if uspec.dim != embedding_dim(spec):
        raise InputError(
            f"noise dimension {uspec.dim} != embedding dimension {embedding_dim(spec)}"
        )
    if args.raw:
        rng = np.random.default_rng(args.seed)
        draws = [
            solve_map(spec, draw(uspec, rng).u).vertex for _ in range(args.draws)
        ]
        _emit({"draws": [list(map(int, v)) for v in draws]}, args)
    else:
        table = mc_frequencies(
            lambda rng: solve_map(spec, draw(uspec, rng).u).vertex,
            args.draws,
            args.seed,
        )
        _emit(table.to_dict(), args)
    return EXIT_OK


def _cmd_relax(args) -> int:
    spec = _load_spec(args.spec)
    u = _load_vector(args.utilities, embedding_dim(spec))
    rspec = _relaxation_from_args(args)
    point = relax(spec, rspec, u)
    _emit(
        {
            "x": point.x,
            "dual": point.dual,
            "residual": point.residual,
            "condition_estimate": point.condition_estimate,
        },
        args,
    )
    return EXIT_OK


def _cmd_marginals(args) -> int:
    spec = _load_spec(args.spec)
    u = _load_vector(args.utilities, embedding_dim(spec))
    if args.bruteforce:
        mu = gibbs_marginals_bruteforce(spec, u, args.temperature)
        _emit({"marginals": mu, "method": "enumeration"}, args)
    else:
        point = expfam_marginals(spec, u, args.temperature, clip_range=args.clip_range)
        _emit({"marginals": point.x, "method": "structured"}, args)
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    spec = _load_spec(args.spec)
    if args.utilities:
        u = _load_vector(args.utilities, embedding_dim(spec))
    else:
        u = np.random.default_rng(args.seed).normal(size=embedding_dim(spec))
    rspec = _relaxation_from_args(args)
    report = gradcheck(
        spec, rspec, u, tolerance=args.tolerance, fd=FDConfig(epsilon=args.epsilon)
    )
    _emit(report.to_dict(), args)
    return EXIT_OK if report.passed else EXIT_VERIFICATION_FAILURE


def _cmd_verify(args) -> int:
    reports = verify_mod.run_suite(args.suite, args.seed)
    _emit(reports, args)
    failed = [r for r in reports if not r["passed"]]
    return EXIT_VERIFICATION_FAILURE if failed else EXIT_OK


def _cmd_enumerate(args) -> int:
    spec = _load_spec(args.spec)
    limit = args.limit if args.limit is not None else default_enum_limit()
    verts = enumerate_vertices(spec, limit)
    _emit({"count": len(verts), "vertices": [list(map(int, v)) for v in verts]}, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sst", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("solve", help="maximize utilities over the vertex set")
    p.add_argument("--spec", required=True)
    p.add_argument("--utilities", required=True)
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_solve)

    p = subs.add_parser("sample", help="draw argmax solutions under random utilities")
    p.add_argument("--spec", required=True)
    p.add_argument("--noise", required=True, help="utility distribution JSON")
    p.add_argument("--seed", type=_uint64, required=True)
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--raw", action="store_true", help="emit raw draws instead of a frequency table")
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_sample)

    p = subs.add_parser("relax", help="solve the regularized program at a temperature")
    p.add_argument("--spec", required=True)
    p.add_argument("--utilities", required=True)
    p.add_argument("--regularizer", required=True, choices=_REGULARIZER_CHOICES)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    p.add_argument("--clip-range", type=float, default=None, dest="clip_range")
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_relax)

    p = subs.add_parser("marginals", help="exponential-family marginals")
    p.add_argument("--spec", required=True)
    p.add_argument("--utilities", required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--clip-range", type=float, default=None, dest="clip_range")
    p.add_argument("--bruteforce", action="store_true",
                   help="use the enumeration oracle instead of the structured solver")
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_marginals)

    p = subs.add_parser("gradcheck", help="finite-difference Jacobian validation")
    p.add_argument("--spec", required=True)
    p.add_argument("--utilities", default=None)
    p.add_argument("--regularizer", required=True, choices=_REGULARIZER_CHOICES)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=20_000, dest="max_iter")
    p.add_argument("--clip-range", type=float, default=None, dest="clip_range")
    p.add_argument("--seed", type=_uint64, default=0)
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_gradcheck)

    p = subs.add_parser("verify", help="run a named verification suite")
    p.add_argument("--suite", required=True, choices=list(SUITE_NAMES))
    p.add_argument("--seed", type=_uint64, required=True)
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_verify)

    p = subs.add_parser("enumerate", help="list every vertex of a small instance")
    p.add_argument("--spec", required=True)
    p.add_argument("--limit", type=int, default=None)
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_enumerate)

    return parser


def _fail(code: str, exc: Exception, exit_code: int) -> int:
    sys.stderr.write(
        json.dumps(
            {"error": {"code": code, "type": type(exc).__name__, "message": str(exc)}},
            sort_keys=True,
        )
        + "\n"
    )
    return exit_code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        return _fail("invalid_input", exc, EXIT_INVALID_INPUT)
    except SolverError as exc:
        return _fail("solver_failure", exc, EXIT_SOLVER_FAILURE)
    except SstError as exc:  # pragma: no cover
        return _fail("invalid_input", exc, EXIT_INVALID_INPUT)


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
