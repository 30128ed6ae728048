"""Command-line front end.

Every command reads a spec file and writes a CSV table (stdout or ``-o``)
whose ``#`` header records the fully resolved configuration.  Exit status:
0 on success, 1 on usage or input errors, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from itertools import product

import numpy as np

from . import __version__
from .errors import NumericalError, QVolterraError, SpecParseError
from .kernels import KernelSignature, kernel_series, kernel_table
from .model import ModelSpec, as_bilinear, kerr_cavity
from .network import evaluate_network
from .oracle import lindblad_integrate, semiclassical_response
from .response import DriveSignal, ResponseResult, output_spectrum, rms_difference, volterra_response
from .spectra import susceptibility_set
from .specfile import parse_spec
from .tables import fmt, write_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
DEFAULT_DT = 0.01
DEFAULT_TMAX = 20 * 2 * np.pi


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# flag parsing helpers


def grid(text: str) -> np.ndarray:
    """``start:stop:step`` with ``stop`` included when it lands on the grid."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid {text!r} must be start:stop:step") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"grid {text!r} needs step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    if count > 100000:
        raise argparse.ArgumentTypeError(f"grid {text!r} has {count} points (max 100000)")
    return start + step * np.arange(count)


def drive_pair(text: str):
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return float(parts[0]), None
        if len(parts) == 2:
            return float(parts[0]), float(parts[1])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"drive {text!r} must be eps or eps,omega_d")


def segment(text: str):
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"segment {text!r} must be start:stop") from None
    return a, b


def signature(text: str) -> KernelSignature:
    try:
        return KernelSignature.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return v


# ---------------------------------------------------------------------------


def _load(args):
    try:
        with open(args.spec, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from None
    return parse_spec(text)


def _component(spec_file, name):
    try:
        return spec_file.component(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _resolve_signature(args, ports):
    sig = args.signature
    if sig is None:
        if args.order not in (None, 1):
            raise UsageError("--signature is required for order > 1")
        sig = KernelSignature(0, "-", ((0, "-"),))
    if args.order is not None and sig.order != args.order:
        raise UsageError(f"--order {args.order} disagrees with signature {sig} of order {sig.order}")
    if max(sig.ports()) >= ports:
        raise UsageError(f"signature {sig} references a port beyond {ports - 1}")
    args.order = sig.order
    return sig


def _header(args, **extra):
    h = {"command": args.command, "spec": args.spec}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "spec", "output", "func"):
            continue
        h[key] = _show(value)
    for key, value in extra.items():
        h[key] = _show(value)
    h["version"] = __version__
    return h


def _show(value):
    if isinstance(value, np.ndarray):
        if len(value) > 1:
            return f"{fmt(value[0])}..{fmt(value[-1])} ({len(value)} points)"
        return fmt(value[0])
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, tuple):
        return ",".join("none" if v is None else _show(v) for v in value)
    return str(value)


def _suscept_table(cset, sig, omegas):
    grids = np.array(list(product(omegas, repeat=sig.order)), dtype=float).reshape(-1, sig.order)
    values = cset(sig, *grids.T) if len(grids) else np.zeros(0, complex)
    values = np.broadcast_to(np.asarray(values, dtype=complex), (len(grids),))
    cols = [f"omega{k + 1}" for k in range(sig.order)] + ["re_chi", "im_chi"]
    data = [grids[:, k] for k in range(sig.order)] + [values.real, values.imag]
    return cols, data


def _inventory(cset):
    return [f"signature {s}" for s in cset.signatures()]


# ---------------------------------------------------------------------------
# commands


def cmd_kernel(args, out):
    spec_file = _load(args)
    comp = _component(spec_file, args.model)
    sys_ = as_bilinear(comp.component)
    sig = _resolve_signature(args, sys_.ports)
    points, values = kernel_table(sys_, sig, args.tau_grid)
    cols = [f"tau{k + 1}" for k in range(sig.order)] + ["re_k", "im_k"]
    data = [points[:, k] for k in range(sig.order)] + [values.real, values.imag]
    write_csv(out, cols, data, _header(args, model=comp.name, signature=sig))


def cmd_suscept(args, out):
    spec_file = _load(args)
    comp = _component(spec_file, args.model)
    cset = susceptibility_set(as_bilinear(comp.component), args.max_order)
    sig = _resolve_signature(args, cset.ports)
    cols, data = _suscept_table(cset, sig, args.omega_grid)
    write_csv(out, cols, data, _header(args, model=comp.name, signature=sig))


def cmd_compose(args, out):
    spec_file = _load(args)
    comps = {name: c.component for name, c in spec_file.components.items()}
    cset = evaluate_network(spec_file.network, comps, args.max_order)
    sig = _resolve_signature(args, cset.ports)
    cols, data = _suscept_table(cset, sig, args.omega_grid)
    write_csv(out, cols, data, _header(args, signature=sig), comments=_inventory(cset))


def _oracle_spec(comp) -> ModelSpec:
    c = comp.component
    if isinstance(c, ModelSpec):
        return c
    if comp.type == "linear_cavity":
        p = comp.params
        return kerr_cavity(p["omega"], 0.0, p["gamma"], truncation_degree=1)
    raise UsageError(f"component type {comp.type} has no Fock-space model")


def _drive(args, comp):
    eps, omega_d = args.drive
    if omega_d is None:
        omega_d = comp.params.get("omega_a", comp.params.get("omega"))
        if omega_d is None:
            raise UsageError(f"{comp.type} has no natural frequency; give --drive eps,omega_d")
    n = int(round(args.tmax / args.dt)) + 1
    if n < 2:
        raise UsageError("--tmax must cover at least one step")
    return DriveSignal.rotating(eps, omega_d, args.dt, n), omega_d


def _respond(args, comp, drive, method):
    """Return ``(t, b_out, ResponseResult | None)``."""
    if method == "volterra":
        sys_ = as_bilinear(comp.component)
        kernels = kernel_series(sys_, args.order, out_port=0, out_sign="-")
        res = volterra_response(kernels, drive, args.order, feedthrough=sys_.S[0])
        return res.t, res.total, res
    spec = _oracle_spec(comp)
    if method == "semiclassical":
        res = semiclassical_response(spec, drive)
    else:
        res = lindblad_integrate(spec, drive, args.N, check_leak=not args.allow_leak)
    return res.t, res.b_out[:, 0], None


def cmd_respond(args, out):
    spec_file = _load(args)
    comp = _component(spec_file, args.model)
    drive, omega_d = _drive(args, comp)
    t, b, res = _respond(args, comp, drive, args.method)
    header = _header(args, model=comp.name, omega_d=omega_d, samples=len(t))
    if res is not None:
        res.to_csv(out, header)
    else:
        ResponseResult(t, b).to_csv(out, header)


def cmd_spectrum(args, out):
    spec_file = _load(args)
    comp = _component(spec_file, args.model)
    drive, omega_d = _drive(args, comp)
    t, b, _ = _respond(args, comp, drive, args.method)
    start, stop = args.segment if args.segment else (t[-1] / 2, t[-1] + args.dt)
    omega, logmag = output_spectrum(ResponseResult(t, b), start, stop)
    header = _header(args, model=comp.name, omega_d=omega_d, segment_start=start, segment_stop=stop)
    write_csv(out, ["omega", "log10_abs_x"], [omega, logmag], header)


def cmd_compare(args, out):
    spec_file = _load(args)
    comp = _component(spec_file, args.model)
    drive, omega_d = _drive(args, comp)
    spec = _oracle_spec(comp)
    t, b_v, _ = _respond(args, comp, drive, "volterra")
    b_s = semiclassical_response(spec, drive).b_out[:, 0]
    b_o = lindblad_integrate(spec, drive, args.N).b_out[:, 0]
    b_f = lindblad_integrate(spec, drive, args.baseline_N, check_leak=False).b_out[:, 0]
    x = {k: np.sqrt(2) * v.real for k, v in
         (("volterra", b_v), ("semiclassical", b_s), ("oracle", b_o), ("fock_baseline", b_f))}
    rms = {k: rms_difference(x[k], x["oracle"]) for k in ("volterra", "semiclassical", "fock_baseline")}
    best = min(rms, key=rms.get)
    comments = [f"rms_{k}_vs_oracle = {fmt(v)}" for k, v in rms.items()]
    comments.append(f"closest_to_oracle = {best}")
    comments.append(
        "volterra_beats_both = "
        + str(rms["volterra"] < rms["semiclassical"] and rms["volterra"] < rms["fock_baseline"]).lower()
    )
    header = _header(args, model=comp.name, omega_d=omega_d, samples=len(t))
    cols = ["t", "x_volterra", "x_semiclassical", "x_oracle", "x_fock_baseline"]
    write_csv(out, cols, [t] + [x[k] for k in ("volterra", "semiclassical", "oracle", "fock_baseline")],
              header, comments)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qvolterra", description="Volterra-series analysis of weakly nonlinear quantum optical networks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("spec", help="network spec file")
        p.add_argument("-o", "--output", help="write CSV here instead of stdout")

    def sig_flags(p):
        p.add_argument("--order", type=int, default=None, help="kernel order (checked against --signature)")
        p.add_argument("--signature", type=signature, default=None,
                       help="e.g. 0-:0-,0+,0- ('-' is b, '+' is b+); default 0-:0- at order 1")

    def drive_flags(p):
        p.add_argument("--model", default=None, help="component name (default: the only component)")
        p.add_argument("--drive", type=drive_pair, required=True,
                       help="eps[,omega_d] for beta(t) = eps exp(-i omega_d t); omega_d defaults to the component frequency")
        p.add_argument("--tmax", type=positive, default=DEFAULT_TMAX)
        p.add_argument("--dt", type=positive, default=DEFAULT_DT)
        p.add_argument("--order", type=int, default=3, help="Volterra truncation order")
        p.add_argument("--N", type=int, default=40, help="Fock truncation of the oracle")

    p = sub.add_parser("kernel", help="time-domain kernel on a lag grid")
    common(p)
    p.add_argument("--model", default=None)
    sig_flags(p)
    p.add_argument("--tau-grid", type=grid, required=True, help="start:stop:step")
    p.set_defaults(func=cmd_kernel)

    for name, func, helptext in (("suscept", cmd_suscept, "susceptibility of one component"),
                                 ("compose", cmd_compose, "susceptibility of the network")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name == "suscept":
            p.add_argument("--model", default=None)
        sig_flags(p)
        p.add_argument("--omega-grid", type=grid, required=True, help="start:stop:step")
        p.add_argument("--max-order", type=int, default=3)
        p.set_defaults(func=func)

    p = sub.add_parser("respond", help="output trajectory under a rotating drive")
    common(p)
    drive_flags(p)
    p.add_argument("--method", choices=("volterra", "oracle", "semiclassical"), default="volterra")
    p.add_argument("--allow-leak", action="store_true", help="do not stop when the oracle truncation leaks")
    p.set_defaults(func=cmd_respond)

    p = sub.add_parser("spectrum", help="log-magnitude spectrum of x_out")
    common(p)
    drive_flags(p)
    p.add_argument("--method", choices=("volterra", "oracle", "semiclassical"), default="volterra")
    p.add_argument("--allow-leak", action="store_true")
    p.add_argument("--segment", type=segment, default=None, help="start:stop (default: second half)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("compare", help="volterra vs semiclassical vs Fock baseline against the oracle")
    common(p)
    drive_flags(p)
    p.add_argument("--baseline-N", type=int, default=5, help="truncation of the low-photon baseline")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    args.func(args, fh)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                args.func(args, sys.stdout)
    except NumericalError as exc:
        print(f"qvolterra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, SpecParseError, QVolterraError, OSError) as exc:
        print(f"qvolterra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
