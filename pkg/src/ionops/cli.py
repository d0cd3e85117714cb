"""Command-line front end.

Every subcommand parses its flags, calls one library function and writes a
CSV table with a header row. Numbers are formatted with ``%.6e``. Exit
status is 0 on success, 1 on a domain error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import protocols as P
from . import spectra as S
from .exceptions import IonopsError
from .fields import eigenstates, find_clock_point
from .registry import (
    default_dataset_path,
    lifetime,
    lifetime_uncertainty,
    load_dataset,
    transition_rate,
    transition_rate_uncertainty,
    wavelength_nm,
)

DATASET_ENV = "IONOPS_DATASET"


class UsageError(Exception):
    """Malformed flag values detected after argument parsing."""


@dataclass
class RunConfig:
    dataset: str
    command: str
    params: dict = field(default_factory=dict)
    output: str | None = None
    workers: int = 1
    seed: int | None = None


# ------------------------------------------------------------------ formatting


def fmt(v) -> str:
    """``%.6e`` for numbers, ``str`` otherwise; ``None`` is an empty cell."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, float, Fraction, np.integer, np.floating)):
        return "%.6e" % float(v)
    return str(v)


def emit(header: Sequence[str], rows, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:num`` (inclusive, evenly spaced)."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None


def parse_label(text: str) -> tuple[float, float]:
    """``F,M`` with fractions allowed, e.g. ``3/2,-1/2``."""
    try:
        F, M = text.split(",")
        return float(Fraction(F)), float(Fraction(M))
    except ValueError:
        raise UsageError(f"bad state label {text!r}; expected F,M") from None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


# ------------------------------------------------------------------ commands

BUDGET_HEADER = ("coherent", "se", "total", "leakage", "required_power_mW")


def _budget_row(b: P.ErrorBudget):
    return [b.coherent_error, b.spontaneous_emission_error, b.total, b.leakage, b.required_power * 1e3]


def cmd_levels(reg, a, out):
    rows = []
    for lid, lv in reg.levels.items():
        rows.append([lid, lv.label, lv.j, lv.E_exp, lv.A_hfs, lv.g_J, lifetime(lv, reg), lifetime_uncertainty(lv, reg)])
    emit(("id", "label", "J", "energy_cm1", "A_MHz", "g_J", "lifetime_s", "lifetime_err_s"), rows, out)
    if a.branching:
        out.write("\n")
        br = reg.branching(a.branching)
        emit(("upper", "lower", "fraction"), [[a.branching, k, v] for k, v in br.items()], out)


def cmd_rate(reg, a, out):
    me = reg.me(a.upper, a.lower, a.multipole)
    lam = wavelength_nm(reg[a.upper], reg[a.lower])
    emit(("upper", "lower", "multipole", "wavelength_nm", "reduced_me", "rate_s", "rate_err_s"),
         [[me.upper, me.lower, me.multipole, lam, me.reduced_me, transition_rate(me, reg),
           transition_rate_uncertainty(me, reg)]], out)


def cmd_zeeman(reg, a, out):
    lv = reg[a.level]
    rows = []
    for B in parse_grid(a.B):
        for s in eigenstates(lv, reg.nucleus, B, A=a.A):
            rows.append([B, s.F, s.M, s.energy, s.Iz_expect])
    emit(("B_G", "F", "M", "energy_MHz", "Iz"), rows, out)


def cmd_clock_point(reg, a, out):
    pair = (parse_label(a.a), parse_label(a.b))
    lo, hi = parse_grid(a.range)[0], parse_grid(a.range)[-1]
    B, fq, curv = find_clock_point(reg[a.level], reg.nucleus, pair, B_range=(lo, hi), A=a.A)
    emit(("B_G", "f_q_MHz", "curvature_kHz_per_G2"), [[B, fq, curv]], out)


def cmd_shelve_sweep(reg, a, out):
    grid = {"B": parse_grid(a.B)}
    if a.wavelength is not None:
        grid["wavelength_nm"] = parse_grid(a.wavelength)
    kind = a.kind

    def fn(B, wavelength_nm=None):
        return P.shelving_error(P.build_shelving(kind, B, wavelength_nm, registry=reg), reg)

    P.write_sweep_csv(P.sweep(fn, grid, workers=a.workers), out)


def cmd_sq_gate(reg, a, out):
    b = P.sq_gate_error(a.qubit, a.wavelength, a.power, a.waist, a.time, a.ramp, registry=reg)
    emit(("qubit", "wavelength_nm") + BUDGET_HEADER, [[a.qubit, a.wavelength] + _budget_row(b)], out)


def cmd_ls_gate(reg, a, out):
    b = P.ls_gate_error(a.wavelength, a.B, a.loops, a.loop_time, a.ramp, a.eta, a.waist, a.mode_frequency,
                        registry=reg)
    emit(("wavelength_nm",) + BUDGET_HEADER + ("single_ion_error", "attainable"),
         [[a.wavelength] + _budget_row(b) + [b.metadata.get("single_ion_error"), b.metadata["attainable"]]], out)


def cmd_grad_gate(reg, a, out):
    g = P.gradient_gate_requirement(a.mode, a.T, a.y0, a.B, registry=reg)
    emit(("mode", "T_s", "y0_m", "gradient_T_per_m"), [[a.mode, a.T, a.y0, g]], out)


def cmd_mag_pulse(reg, a, out):
    labels = (parse_label(a.a), parse_label(a.b))
    m = P.magnetic_pi_pulse(a.level, labels, a.B, a.T, registry=reg)
    emit(("amplitude_G", "frequency_Hz", "moment_mu_B"), [[m.amplitude_gauss, m.frequency_hz, m.moment_mu_b]], out)


def cmd_measure(reg, a, out):
    m = P.measurement_budget(a.transition, a.excited_fraction, a.detection_eff, a.T, a.repump_population,
                             a.accounting, a.leak_budget, registry=reg)
    emit(("transition", "counts", "leakage", "per_scatter_leak", "linewidth_s", "supported_time_s"),
         [[a.transition, m.counts, m.leakage, m.per_scatter_leak, m.linewidth, m.supported_time]], out)


def cmd_synth_spectrum(reg, a, out):
    lines = S.hyperfine_lines(reg[a.upper], reg[a.lower], reg.nucleus, a.A_upper, a.A_lower, center=a.center)
    lam = a.wavelength if a.wavelength is not None else wavelength_nm(reg[a.upper], reg[a.lower])
    mass = a.mass if a.mass is not None else reg.nucleus.mass
    if a.grid is None:
        c = [l.center for l in lines]
        grid = np.linspace(min(c) - 2.0, max(c) + 2.0, 600)
    else:
        grid = np.array(parse_grid(a.grid))
    y = S.synth_spectrum(lines, a.T, lam, mass, a.gamma, grid, scale=a.scale)
    if a.noise:
        rng = np.random.default_rng(a.seed)
        y = y + rng.normal(scale=a.noise * y.max(), size=y.size)
    S.write_spectrum_csv(out, grid, y)


def cmd_fit_spectrum(reg, a, out):
    x, y = S.read_spectrum_csv(a.input)
    if x.size == 0:
        raise UsageError(f"no samples in {a.input}")
    centers = parse_floats(a.init)
    n = len(centers)
    amps = parse_floats(a.amplitudes) if a.amplitudes else [S.area(x, y) / n] * n
    if len(amps) != n:
        raise UsageError("--amplitudes needs one value per --init centre")
    init = [S.VoigtComponent(c, a.sigma, a.gamma, am) for c, am in zip(centers, amps)]
    fit = S.fit_spectrum(x, y, n, init, shared_widths=not a.independent_widths, max_iter=a.max_iter)
    S.write_fit_report(out, fit)
    out.write("\n")
    emit(("splitting", "value_MHz", "err_MHz"),
         [[f"{k}-{k + 1}", s, e] for k, (s, e) in enumerate(zip(fit.splittings, fit.splitting_errors))], out)
    if a.report:
        with open(a.report, "w", encoding="utf-8") as fh:
            fh.write(S.format_fit_report(fit) + "\n")
    if a.monte_carlo:
        mc = S.splitting_monte_carlo(fit.components, x, a.monte_carlo, a.noise, a.seed or 0, workers=a.workers)
        out.write("\n")
        header = ("trial",) + tuple(f"pull_{k}" for k in range(mc.pulls.shape[1])) + ("converged",)
        emit(header, [[str(k), *p, c] for k, (p, c) in enumerate(zip(mc.pulls, mc.converged))], out)
    if not fit.converged:
        print(f"fit did not converge in {fit.iterations} iterations", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------------ parser


def _common(parser, defaults: bool) -> None:
    kw = (lambda v: {"default": v}) if defaults else (lambda v: {"default": argparse.SUPPRESS})
    parser.add_argument("--dataset", help=f"iondata file (default ${DATASET_ENV} or shipped)", **kw(None))
    parser.add_argument("-o", "--output", help="output CSV path (default stdout)", **kw(None))
    parser.add_argument("--workers", type=int, help="parallelism hint for sweeps", **kw(1))
    parser.add_argument("--seed", type=int, help="RNG seed for spectrum noise and Monte Carlo", **kw(None))


def build_parser() -> argparse.ArgumentParser:
    """Global flags are accepted before or after the subcommand."""
    p = argparse.ArgumentParser(prog="ionops", description="Trapped-ion operation analyzers.")
    _common(p, True)
    common = argparse.ArgumentParser(add_help=False)
    _common(common, False)
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=argparse.ArgumentParser)
    sub.required = True
    _add = sub.add_parser
    sub.add_parser = lambda *args, **kw: _add(*args, parents=[common], **kw)

    s = sub.add_parser("levels", help="levels with lifetimes")
    s.add_argument("--branching", metavar="LEVEL", help="also list branching fractions of LEVEL")
    s.set_defaults(func=cmd_levels)

    s = sub.add_parser("rate", help="one transition rate")
    s.add_argument("--upper", required=True)
    s.add_argument("--lower", required=True)
    s.add_argument("--multipole", required=True, choices=("E1", "M1", "E2"))
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("zeeman", help="dressed-state energies over a field grid")
    s.add_argument("--level", required=True)
    s.add_argument("--B", required=True, help="field grid in G: a,b,c or start:stop:num")
    s.add_argument("--A", type=float, default=None, help="hyperfine constant override (MHz)")
    s.set_defaults(func=cmd_zeeman)

    s = sub.add_parser("clock-point", help="first-order field-insensitive point of a pair")
    s.add_argument("--level", default=P.META)
    s.add_argument("--a", default="3/2,1/2", help="first state F,M")
    s.add_argument("--b", default="1/2,1/2", help="second state F,M")
    s.add_argument("--range", default="1,1000", help="field search range in G")
    s.add_argument("--A", type=float, default=P.REFERENCE_A[P.META])
    s.set_defaults(func=cmd_clock_point)

    s = sub.add_parser("shelve-sweep", help="shelving error over field and wavelength grids")
    s.add_argument("--kind", required=True, choices=P.SHELVING_KINDS)
    s.add_argument("--B", required=True, help="field grid in G")
    s.add_argument("--wavelength", default=None, help="wavelength grid in nm (default per kind)")
    s.set_defaults(func=cmd_shelve_sweep)

    s = sub.add_parser("sq-gate", help="laser single-qubit gate")
    s.add_argument("--qubit", default="clock_168G", choices=P.SQ_QUBITS)
    s.add_argument("--wavelength", type=float, default=445.0)
    s.add_argument("--power", type=float, default=None, help="total power in W (default: solve)")
    s.add_argument("--waist", type=float, default=P.DEFAULT_WAIST)
    s.add_argument("--time", type=float, default=10e-6)
    s.add_argument("--ramp", type=float, default=1e-6)
    s.set_defaults(func=cmd_sq_gate)

    s = sub.add_parser("ls-gate", help="light-shift two-qubit gate")
    s.add_argument("--wavelength", type=float, default=450.0)
    s.add_argument("--B", type=float, default=400.0)
    s.add_argument("--loops", type=int, default=2)
    s.add_argument("--loop-time", type=float, default=25e-6)
    s.add_argument("--ramp", type=float, default=4e-6)
    s.add_argument("--eta", type=float, default=0.108)
    s.add_argument("--waist", type=float, default=P.DEFAULT_WAIST)
    s.add_argument("--mode-frequency", type=float, default=1.73e6)
    s.set_defaults(func=cmd_ls_gate)

    s = sub.add_parser("grad-gate", help="magnetic-gradient two-qubit gate requirement")
    s.add_argument("--mode", required=True, choices=("zz_stretched", "ms_clock"))
    s.add_argument("--T", type=float, required=True, help="gate time in s")
    s.add_argument("--y0", type=float, required=True, help="ground-state wavepacket size in m")
    s.add_argument("--B", type=float, default=None)
    s.set_defaults(func=cmd_grad_gate)

    s = sub.add_parser("mag-pulse", help="oscillating-field pi pulse between dressed states")
    s.add_argument("--level", default=P.META)
    s.add_argument("--a", default="3/2,1/2")
    s.add_argument("--b", default="1/2,1/2")
    s.add_argument("--B", type=float, default=168.0)
    s.add_argument("--T", type=float, default=10e-6)
    s.set_defaults(func=cmd_mag_pulse)

    s = sub.add_parser("measure", help="fluorescence measurement budget")
    s.add_argument("--transition", default="3P0", choices=("3P0", "3F4"))
    s.add_argument("--excited-fraction", type=float, default=0.25)
    s.add_argument("--detection-eff", type=float, default=0.03)
    s.add_argument("--T", type=float, default=50e-6)
    s.add_argument("--repump-population", type=float, default=0.1)
    s.add_argument("--accounting", default="full", choices=("full", "excited"))
    s.add_argument("--leak-budget", type=float, default=1e-4)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("synth-spectrum", help="Doppler-broadened hyperfine spectrum")
    s.add_argument("--upper", required=True)
    s.add_argument("--lower", required=True)
    s.add_argument("--A-upper", type=float, required=True)
    s.add_argument("--A-lower", type=float, required=True)
    s.add_argument("--T", type=float, default=50.0, help="temperature in K")
    s.add_argument("--gamma", type=float, default=0.0, help="Lorentzian HWHM in MHz")
    s.add_argument("--center", type=float, default=None, help="line-pattern centre in GHz")
    s.add_argument("--wavelength", type=float, default=None, help="nm (default from level energies)")
    s.add_argument("--mass", type=float, default=None, help="u (default nuclear mass)")
    s.add_argument("--grid", default=None, help="frequency grid in GHz")
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--noise", type=float, default=0.0, help="Gaussian noise relative to the peak")
    s.set_defaults(func=cmd_synth_spectrum)

    s = sub.add_parser("fit-spectrum", help="multi-component Voigt fit of a spectrum CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--init", required=True, help="initial centres in GHz, comma separated")
    s.add_argument("--amplitudes", default=None, help="initial line areas (default: equal share of the data area)")
    s.add_argument("--sigma", type=float, default=S.fwhm_to_sigma(516.0), help="initial Gaussian sigma (MHz)")
    s.add_argument("--gamma", type=float, default=10.0, help="initial Lorentzian HWHM (MHz)")
    s.add_argument("--independent-widths", action="store_true")
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--report", default=None, help="write a text report here")
    s.add_argument("--monte-carlo", type=int, default=0, metavar="N",
                   help="refit N noisy copies of the fitted model and print splitting pulls")
    s.add_argument("--noise", type=float, default=0.01, help="Monte Carlo noise relative to the peak")
    s.set_defaults(func=cmd_fit_spectrum)
    return p


def resolve_dataset(path: str | None) -> str:
    return path or os.environ.get(DATASET_ENV) or str(default_dataset_path())


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = RunConfig(resolve_dataset(a.dataset), a.command, vars(a), a.output, a.workers, a.seed)
    if cfg.workers < 1:
        print("ionops: --workers must be at least 1", file=sys.stderr)
        return 2
    buf = io.StringIO()
    try:
        reg = load_dataset(cfg.dataset)
        status = a.func(reg, a, buf) or 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ionops: {exc}", file=sys.stderr)
        return 2
    except (IonopsError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"ionops: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = buf.getvalue()
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
