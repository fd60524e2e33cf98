"""Command-line front end.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from .capacity import (
    SWEEP_COLUMNS,
    DimensionCapError,
    blahut_arimoto,
    erasure_classical_capacity,
    erasure_classical_matrix,
    induced_classical_channel,
    protocol_from_json,
    simulate_protocol,
    theorem_sweep,
)
from .channels import channel_from_json, erasure_channel
from .operators import DEFAULT_TOL, matrix_from_json
from .process import (
    AB,
    BA,
    check_causal_order,
    decomposition_from_json,
    process_from_json,
    validate_process,
)
from .reduction import run_pipeline

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
COMMANDS = ("validate", "contract", "theorem-sweep", "protocol-sim", "classical-cap")


class InputError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None
    output: str | None
    dim: int
    p_grid: tuple[float, ...]
    restarts: int
    tol: float
    seed: int | None
    direction: str

    def __post_init__(self):
        if self.tol <= 0:
            raise InputError("--tol must be positive")
        if any(not 0.0 <= p <= 1.0 for p in self.p_grid):
            raise InputError("--p-grid values must lie in [0, 1]")
        if self.command == "theorem-sweep" and self.seed is None:
            raise InputError("theorem-sweep is stochastic and needs --seed")
        if self.restarts < 1:
            raise InputError("--restarts must be >= 1")


def parse_grid(text: str) -> tuple[float, ...]:
    """``a:b:step`` inclusive of ``b``; values rounded to 12 decimals."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise InputError(f"--p-grid must look like a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise InputError(f"--p-grid needs step > 0 and a <= b, got {text!r}")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return tuple(round(a + i * step, 12) for i in range(n))


def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == 0.0:
        x = 0.0  # drop the sign of -0.0
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row[c]) for c in columns])
    return buf.getvalue()


def _load_json(path: str | None):
    if path is None:
        raise InputError("--input is required for this command")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno} "
            f"(char {exc.pos}): {exc.msg}"
        ) from None


def _emit(text: str, output: str | None):
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_validate(cfg: RunConfig) -> int:
    data = _load_json(cfg.input)
    if "w_ab" in data:
        dec = decomposition_from_json(data)
        mixture = validate_process(dec.process())
        parts = {
            "mixture": mixture.residuals(),
            "w_ab": {**validate_process(dec.w_ab).residuals(),
                     "causal_order_ab": check_causal_order(dec.w_ab, AB)},
            "w_ba": {**validate_process(dec.w_ba).residuals(),
                     "causal_order_ba": check_causal_order(dec.w_ba, BA)},
        }
        failures = [f"{part}.{name}" for part, res in parts.items()
                    for name, v in res.items() if v > cfg.tol]
        report = {"kind": "decomposition", "p": dec.p, "tol": cfg.tol,
                  "residuals": parts, "failures": failures, "passed": not failures}
    else:
        W = process_from_json(data)
        res = validate_process(W)
        failures = res.failures(cfg.tol)
        report = {
            "kind": "process", "tol": cfg.tol, "dims": W.dims,
            "residuals": res.residuals(),
            "causal_order": {AB: check_causal_order(W, AB), BA: check_causal_order(W, BA)},
            "failures": failures, "passed": not failures,
        }
    _emit(_dump(report), cfg.output)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_contract(cfg: RunConfig) -> int:
    data = _load_json(cfg.input)
    dec = decomposition_from_json(data)
    alice = channel_from_json(data["alice"]) if data.get("alice") else None
    report, _, _ = run_pipeline(dec, alice, tol=cfg.tol)
    out = report.to_json()
    out["passed"] = report.passed(cfg.tol)
    _emit(_dump(out), cfg.output)
    return EXIT_OK if out["passed"] else EXIT_FAIL


def cmd_theorem_sweep(cfg: RunConfig) -> int:
    rows = theorem_sweep(cfg.dim, cfg.p_grid, cfg.restarts, cfg.seed, cfg.direction, cfg.tol)
    _emit(rows_to_csv(rows, SWEEP_COLUMNS), cfg.output)
    ok = all(r["erasure_residual"] <= cfg.tol for r in rows)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_protocol_sim(cfg: RunConfig) -> int:
    data = _load_json(cfg.input)
    spec = protocol_from_json(data)
    if spec.n not in (1, 2):
        raise InputError(f"protocol-sim supports n = 1 or 2, got {spec.n}")
    _, F = simulate_protocol(spec)
    threshold = 1.0 - spec.epsilon
    report = {"n": spec.n, "p": spec.dec.p, "fidelity": F, "epsilon": spec.epsilon,
              "threshold": threshold, "passed": F >= threshold - cfg.tol}
    _emit(_dump(report), cfg.output)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_classical_cap(cfg: RunConfig) -> int:
    if cfg.input is None:
        rows = []
        for p in cfg.p_grid:
            C = erasure_channel(p, cfg.dim, in_name="A_I'", out_name="B_I")
            cap = blahut_arimoto(erasure_classical_matrix(C, cfg.dim), tol=cfg.tol)
            rows.append({"p": p, "classical_cap": cap,
                         "closed_form": erasure_classical_capacity(p, cfg.dim)})
        _emit(rows_to_csv(rows, ("p", "classical_cap", "closed_form")), cfg.output)
        return EXIT_OK
    data = _load_json(cfg.input)
    if "matrix" in data:
        P = np.real(matrix_from_json(data["matrix"]))
    else:
        C = channel_from_json(data["channel"])
        inputs = [channel_from_json(s) for s in data["inputs"]]
        povm = [matrix_from_json(E) for E in data["povm"]]
        P = induced_classical_channel(C, inputs, povm, tol=cfg.tol)
    cap = blahut_arimoto(P, tol=cfg.tol)
    _emit(_dump({"capacity": cap, "matrix": P.tolist()}), cfg.output)
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "contract": cmd_contract,
    "theorem-sweep": cmd_theorem_sweep,
    "protocol-sim": cmd_protocol_sim,
    "classical-cap": cmd_classical_cap,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalcap",
        description="Process matrices, causal-order reduction and capacity estimates.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", help="JSON input file")
    parser.add_argument("--output", help="output file (default: stdout)")
    parser.add_argument("--dim", type=int, default=2, help="sender dimension d (default 2)")
    parser.add_argument("--p-grid", default="0:1:0.1", help="a:b:step, inclusive (default 0:1:0.1)")
    parser.add_argument("--restarts", type=int, default=32)
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--direction", choices=("ab", "ba", "both"), default="both")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = RunConfig(
            command=args.command, input=args.input, output=args.output, dim=args.dim,
            p_grid=parse_grid(args.p_grid), restarts=args.restarts, tol=args.tol,
            seed=args.seed, direction=args.direction,
        )
        return HANDLERS[cfg.command](cfg)
    except (InputError, DimensionCapError, KeyError, TypeError, ValueError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"causalcap {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
