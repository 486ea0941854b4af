"""Command-line entry point: ``resonant-breathing <subcommand> [options]``.

Machine-readable results go to files or stdout; a one-line human summary goes to
stderr.  Exit codes: 0 success, 1 domain error, 2 usage error.

Every option can also come from ``--config FILE`` (flat ``key = value`` lines,
``#`` comments); options given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import ansatz as ans
from . import couplings as cp
from . import evolution as ev
from . import nlsbench as nb
from .errors import (FormatError, NoConsistentG, NoReturnFound, ConstantObservable, ResonantError,
                     ZeroBreathing)
from .polyspace import dumps, loads, poisson_bracket
from .reduction import FrequencyLadder, as_rational, reduce_with_census

HELP_WIDTH = 88


class UsageError(Exception):
    """Invalid invocation; mapped to exit code 2."""


# argument types ---------------------------------------------------------------------

def rational(text: str) -> Fraction:
    try:
        return as_rational(text)
    except ResonantError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def existing_file(text: str) -> Path:
    p = Path(text)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return p


def nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def cplx(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r} (use e.g. 1+0.4j)") from None


# parser -------------------------------------------------------------------------------

class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Shows defaults, except where the help text already states a machine-dependent one."""

    def _get_help_string(self, action):
        if action.dest == "threads":
            return action.help
        return super()._get_help_string(action)


def _formatter(prog):
    return _HelpFormatter(prog, width=HELP_WIDTH)


REQUIRED: dict[str, list[str]] = {
    "gen-couplings": ["system", "n_max", "out"],
    "audit": ["couplings"],
    "reduce": ["poly", "omega0", "n_max", "out", "census"],
    "bracket": ["f", "g"],
    "evolve": ["couplings", "init", "tau_end", "out"],
    "ansatz-run": ["couplings", "b", "a", "p", "lam", "tau_end", "out"],
    "pde-validate": ["g", "horizon", "n_max", "init", "out"],
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=existing_file, default=None,
                        help="flat 'key = value' file supplying any option below")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (default: available cores; results do not depend "
                             "on it)")

    parser = argparse.ArgumentParser(prog="resonant-breathing", formatter_class=_formatter,
                                     description="Breathing-mode analysis of resonant systems.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_,
                              formatter_class=_formatter)

    p = add("gen-couplings", "generate a resonant coupling tensor")
    p.add_argument("--system", choices=["nls1d", "conformal"], default=None, help="(required)")
    p.add_argument("--n-max", type=nonneg_int, default=None, help="(required) highest mode")
    p.add_argument("--out", default=None, help="(required) tensor file to write")

    p = add("audit", "check the C-beta identity of a tensor, fitting G if --lambda is absent")
    p.add_argument("--couplings", type=existing_file, default=None, help="(required) tensor file")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="1/G to test")
    p.add_argument("--tol", type=float, default=1e-8,
                   help="accepted identity residual relative to max|C|")

    p = add("reduce", "time-average a polynomial on the ladder omega_n = omega0 + n")
    p.add_argument("--poly", type=existing_file, default=None, help="(required) polynomial file")
    p.add_argument("--omega0", type=rational, default=None, help="(required) ladder offset p/q")
    p.add_argument("--n-max", type=nonneg_int, default=None, help="(required) highest mode")
    p.add_argument("--out", default=None, help="(required) resonant polynomial file to write")
    p.add_argument("--census", default=None, help="(required) channel-census JSON to write")

    p = add("bracket", "Poisson bracket {F, G} of two polynomial files")
    p.add_argument("--f", type=existing_file, default=None, help="(required) polynomial F")
    p.add_argument("--g", type=existing_file, default=None, help="(required) polynomial G")
    p.add_argument("--out", default=None, help="output file (stdout if omitted)")

    p = add("evolve", "integrate the resonant system")
    p.add_argument("--couplings", type=existing_file, default=None, help="(required) tensor file")
    p.add_argument("--init", type=existing_file, default=None,
                   help="(required) initial amplitudes, one 're im' line per mode")
    p.add_argument("--tau-end", type=float, default=None, help="(required) final slow time")
    p.add_argument("--tol", type=float, default=1e-10, help="integrator tolerance")
    p.add_argument("--samples", type=int, default=101, help="output samples")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="1/G for the B0 monitor (fitted from the tensor if absent)")
    p.add_argument("--out", default=None, help="(required) trajectory CSV; report goes to OUT.json")

    p = add("ansatz-run", "evolve an ansatz state and track its fit and spectrum")
    p.add_argument("--couplings", type=existing_file, default=None, help="(required) tensor file")
    p.add_argument("--b", type=cplx, default=None, help="(required) complex b")
    p.add_argument("--a", type=cplx, default=None, help="(required) complex a")
    p.add_argument("--p", type=cplx, default=None, help="(required) complex p, |p| < 1")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="(required) 1/G")
    p.add_argument("--tau-end", type=float, default=None, help="(required) final slow time")
    p.add_argument("--tol", type=float, default=1e-10, help="integrator tolerance")
    p.add_argument("--samples", type=int, default=2001, help="output samples")
    p.add_argument("--out", default=None, help="(required) per-sample CSV; summary goes to OUT.json")

    p = add("pde-validate", "run the 1D trapped NLS against its resonant system")
    p.add_argument("--g", type=float, default=None, help="(required) coupling g >= 0")
    p.add_argument("--horizon", type=float, default=None, help="(required) slow-time horizon")
    p.add_argument("--n-max", type=nonneg_int, default=None, help="(required) highest mode")
    p.add_argument("--init", default=None,
                   help="(required) 'shifted-gaussian:d=X' or 'modes:0=X,1=Y,...'")
    p.add_argument("--tol", type=float, default=1e-11, help="integrator tolerance")
    p.add_argument("--samples", type=int, default=101, help="comparison samples")
    p.add_argument("--phase-time", type=float, default=20.0,
                   help="fast-time window of the breathing phase test")
    p.add_argument("--out", default=None, help="(required) JSON report")
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path: Path, sub: argparse.ArgumentParser) -> list[str]:
    """Turn a ``key = value`` file into option tokens for ``sub``."""
    known = {s for a in sub._actions for s in a.option_strings if s.startswith("--")}
    tokens = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        opt = "--" + key.strip().replace("_", "-")
        if opt == "--lam":
            opt = "--lambda"
        if opt not in known or opt in ("--config", "--help"):
            raise UsageError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        tokens += [opt, val.strip()]
    return tokens


def parse_config(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        sub = _subparser(parser, args.command)
        try:
            extra = read_config(args.config, sub)
        except UsageError as exc:
            sub.error(str(exc))
        i = argv.index(args.command)
        args = parser.parse_args(argv[: i + 1] + extra + argv[i + 1:])
    missing = [d for d in REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if d == "lam" else d.replace("_", "-")) for d in missing)
        _subparser(parser, args.command).error(f"missing required option(s): {flags}")
    if getattr(args, "tol", None) is not None and args.command in ("evolve", "ansatz-run"):
        if not 1e-13 <= args.tol <= 1e-6:
            _subparser(parser, args.command).error("--tol must lie in [1e-13, 1e-6]")
    if args.command == "pde-validate" and args.g < 0:
        _subparser(parser, args.command).error("--g must be >= 0")
    return args


# helpers ------------------------------------------------------------------------------

def _summary(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sidecar(out) -> Path:
    return Path(str(out) + ".json")


def _fnum(x: float) -> str:
    return repr(float(x))


def read_amplitudes(path: Path) -> np.ndarray:
    vals = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise FormatError(f"expected 're im', got {raw!r}", lineno)
        try:
            vals.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
    if not vals:
        raise FormatError("no amplitudes found", 1)
    return np.array(vals)


def parse_init(spec: str, n_max: int) -> nb.FieldState:
    kind, _, rest = spec.partition(":")
    if kind == "shifted-gaussian":
        key, _, val = rest.partition("=")
        if key.strip() != "d":
            raise UsageError("shifted-gaussian expects 'd=X'")
        return nb.shifted_gaussian(float(val), n_max)
    if kind == "modes":
        weights = {}
        for item in filter(None, rest.split(",")):
            k, _, v = item.partition("=")
            n = int(k)
            if not 0 <= n <= n_max:
                raise UsageError(f"mode {n} outside [0, {n_max}]")
            weights[n] = complex(v)
        if not weights:
            raise UsageError("modes: needs at least one 'n=value'")
        return nb.mode_mixture(weights, n_max)
    raise UsageError(f"unknown --init {spec!r}; use shifted-gaussian:d=X or modes:0=X,...")


# subcommands --------------------------------------------------------------------------

def cmd_gen_couplings(args) -> int:
    C = cp.gen_nls1d(args.n_max) if args.system == "nls1d" else cp.gen_conformal(args.n_max)
    cp.save(C, args.out)
    _summary(f"gen-couplings: {args.system} n_max={args.n_max} entries={len(C.entries)} "
             f"max|C|={C.max_abs():.6g} -> {args.out}")
    return 0


def cmd_audit(args) -> int:
    C = cp.load(args.couplings)
    scale = max(C.max_abs(), 1e-300)
    if args.lam is not None:
        bv = cp.BreathingVector(args.lam)
        r = cp.check_C_identity(C, bv)
        ok = r <= args.tol * scale
        _write_json(None, {"lambda": args.lam, "G": _g_json(bv.G), "residual": r, "passed": ok})
        _summary(f"audit: lambda={args.lam:.10g} residual={r:.3e} ({'pass' if ok else 'FAIL'})")
        return 0 if ok else 1
    try:
        fit = cp.find_G(C, threshold=args.tol * scale)
    except NoConsistentG as exc:
        _write_json(None, {"lambda": exc.lam, "residual": exc.residual, "passed": False})
        _summary(f"audit: NoConsistentG: {exc}")
        return 1
    _write_json(None, {"lambda": fit.lam, "G": _g_json(fit.G), "residual": fit.residual,
                       "passed": True})
    _summary(f"audit: lambda={fit.lam:.10g} G={fit.G:.10g} residual={fit.residual:.3e}")
    return 0


def _g_json(G: float):
    return None if math.isinf(G) else G


def cmd_reduce(args) -> int:
    p = loads(Path(args.poly).read_text(), max_mode=args.n_max)
    ladder = FrequencyLadder(args.omega0, args.n_max)
    res, census = reduce_with_census(p, ladder)
    Path(args.out).write_text(dumps(res))
    _write_json(args.census, census.as_dict())
    _summary(f"reduce: omega0={args.omega0} kept={len(res)} {census.as_dict()} -> {args.out}")
    return 0


def cmd_bracket(args) -> int:
    f = loads(Path(args.f).read_text())
    g = loads(Path(args.g).read_text())
    top = max(f.max_mode, g.max_mode)
    r = poisson_bracket(f.with_max_mode(top), g.with_max_mode(top))
    text = dumps(r)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    _summary(f"bracket: {len(r)} terms")
    return 0


def _breathing_vector(C, lam):
    if lam is not None:
        return cp.BreathingVector(lam)
    try:
        return cp.BreathingVector(cp.find_G(C).lam)
    except NoConsistentG:
        return None


def _write_csv(path, header: list[str], rows: np.ndarray) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fnum(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_evolve(args) -> int:
    C = cp.load(args.couplings)
    a0 = read_amplitudes(args.init)
    if a0.shape[0] != C.n_max + 1:
        raise FormatError(f"init has {a0.shape[0]} modes, couplings have {C.n_max + 1}")
    traj = ev.evolve(C, ev.ModeState(a0), args.tau_end, tol=args.tol, samples=args.samples)
    K = C.n_max
    header = ["tau"] + [f"{part}_a{n}" for n in range(K + 1) for part in ("re", "im")]
    body = np.empty((len(traj.tau), 1 + 2 * (K + 1)))
    body[:, 0] = traj.tau
    body[:, 1::2] = traj.amps.real
    body[:, 2::2] = traj.amps.imag
    _write_csv(args.out, header, body)
    bv = _breathing_vector(C, args.lam)
    rep = ev.conserved_report(traj, C, bv if bv is not None else cp.BreathingVector(0.0))
    payload = rep.summary()
    payload.update(n_steps=traj.n_steps, n_rejected=traj.n_rejected,
                   lam=None if bv is None else bv.lam)
    if bv is None:
        for key in ("B0", "B0_abs"):
            payload["drifts"][key] = None
        payload["B0_0"] = None
    _write_json(_sidecar(args.out), payload)
    d = rep.drifts
    _summary(f"evolve: tau_end={args.tau_end} steps={traj.n_steps} drift N={d['N']:.2e} "
             f"E={d['E']:.2e} H={d['H_res']:.2e} -> {args.out}")
    return 0


def cmd_ansatz_run(args) -> int:
    C = cp.load(args.couplings)
    K = C.n_max
    params = ans.AnsatzParams(args.b, args.a, args.p, args.lam)
    s0 = ans.ansatz_state(params, K)
    traj = ev.evolve(C, s0, args.tau_end, tol=args.tol, samples=args.samples)
    fits = ans.track_ansatz(traj.amps, args.lam, p0=args.p)
    spec = ans.spectrum(traj.amps)
    body = np.column_stack([traj.tau, [f.residual for f in fits],
                            [abs(f.params.p) for f in fits], spec])
    header = ["tau", "fit_residual", "abs_p_fit"] + [f"s{n}" for n in range(K + 1)]
    _write_csv(args.out, header, body)
    payload = {"tail_fraction": ans.tail_fraction(params, K),
               "max_fit_residual": float(max(f.residual for f in fits)),
               "period": None, "return_residual": None, "period_error": None}
    try:
        per = ans.detect_period(traj.tau, spec)
        payload.update(period=per.period, return_residual=per.return_residual)
        msg = f"period={per.period:.8g} return={per.return_residual:.2e}"
    except (NoReturnFound, ConstantObservable, ValueError) as exc:
        payload["period_error"] = f"{type(exc).__name__}: {exc}"
        msg = f"no period ({type(exc).__name__})"
    _write_json(_sidecar(args.out), payload)
    _summary(f"ansatz-run: max fit residual={payload['max_fit_residual']:.2e} {msg} -> {args.out}")
    return 0


def cmd_pde_validate(args) -> int:
    f0 = parse_init(args.init, args.n_max)
    cmp = nb.compare_resonant(f0, args.g, args.horizon, tol=args.tol, samples=args.samples)
    B_quad = nb.measure_breathing(f0, "quadrature")
    B_bil = nb.measure_breathing(f0, "bilinear")
    payload = {"g": args.g, "horizon": args.horizon, "n_max": args.n_max, "init": args.init,
               "metric": cmp.metric, "drift_N": cmp.drift_N, "drift_E": cmp.drift_E,
               "B0": [B_bil.real, B_bil.imag], "B_quadrature_vs_bilinear": abs(B_quad - B_bil)}
    try:
        tr = nb.nls_evolve(f0, args.g, args.phase_time, tol=args.tol,
                           samples=max(2, int(20 * args.phase_time) + 1))
        rep = nb.breathing_phase_test(tr)
        payload["phase_test"] = {"max_modulus_drift": rep.max_modulus_drift,
                                 "phase_slope": rep.phase_slope,
                                 "phase_fit_residual": rep.phase_fit_residual}
        phase_msg = f"slope={rep.phase_slope:.10f} drift={rep.max_modulus_drift:.2e}"
    except ZeroBreathing as exc:
        payload["phase_test"] = None
        phase_msg = f"phase test skipped ({exc})"
    _write_json(args.out, payload)
    _summary(f"pde-validate: g={args.g} metric={cmp.metric:.4e} {phase_msg} -> {args.out}")
    return 0


COMMANDS = {
    "gen-couplings": cmd_gen_couplings,
    "audit": cmd_audit,
    "reduce": cmd_reduce,
    "bracket": cmd_bracket,
    "evolve": cmd_evolve,
    "ansatz-run": cmd_ansatz_run,
    "pde-validate": cmd_pde_validate,
}


def dispatch(args: argparse.Namespace) -> int:
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _summary(f"usage error: {exc}")
        return 2
    except ResonantError as exc:
        _summary(f"{args.command}: {type(exc).__name__}: {exc}")
        return 1
    except OSError as exc:
        _summary(f"{args.command}: {exc}")
        return 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
