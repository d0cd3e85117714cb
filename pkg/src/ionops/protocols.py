"""Protocol analyzers for the 89Y+ qubit operations.

Shelving of the ground-state nuclear spin qubit, laser-driven single-qubit
gates, the light-shift two-qubit gate, magnetic gates and gradient gates,
measurement budgets and parameter sweeps. Every analyzer builds on the
``fields``, ``coupling`` and ``dynamics`` layers and returns plain data.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import constants as sc
from scipy import integrate, optimize

from .coupling import (
    LaserTone,
    Z_AXIS,
    beam_power,
    level_angular_frequency,
    rabi_matrix,
    raman_effective,
    state_angular_frequencies,
)
from .dynamics import (
    DEFAULT_CUTOFF,
    ChannelReport,
    DriveProfile,
    PulseSchedule,
    channel_fidelity,
    channel_report_from_images,
    propagate_operators,
    propagator,
    raman_drive,
    raman_scatter_coeffs,
    single_photon_drive,
)
from .exceptions import AmbiguousTarget, ForbiddenM1, LoopClosureFailure, NoResonance
from .fields import eigenstates, find_clock_point, find_state, moment_matrix, nuclear_purity, sensitivity
from .registry import lifetime, load_default, out_of_cycle_table, transition_rate

# measured or reference hyperfine constants (MHz) used in place of the calculated ones
REFERENCE_A = {"4d5s.3D1": 232.2, "5s5p.3P1": -532.0, "4d5s.3D2": -222.9}

GROUND = "5s2.1S0"
META = "4d5s.3D1"
CLOCK_PAIR = ((1.5, 0.5), (0.5, 0.5))
X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
DEFAULT_WAIST = 10e-6
# Bohr-magneton moment to rad/s per tesla
_MU_B_SI = sc.physical_constants["Bohr magneton"][0]

SHELVING_KINDS = ("circular_pm_half", "stretched_pm_3half", "optical_E2")


def dressed(registry, level_id: str, B: float):
    """Dressed states of a level with the reference hyperfine constant."""
    return eigenstates(registry[level_id], registry.nucleus, B, A=REFERENCE_A.get(level_id))


def e1_partners(registry, level_ids: Sequence[str]) -> list[str]:
    """Levels with an E1 element to any of ``level_ids`` (sorted by energy)."""
    out = {t.upper for t in registry.transitions if t.multipole == "E1" and t.lower in level_ids}
    out |= {t.lower for t in registry.transitions if t.multipole == "E1" and t.upper in level_ids}
    out -= set(level_ids)
    return sorted(out, key=lambda lid: registry[lid].E_exp)


def angular_frequency_nm(wavelength_nm: float) -> float:
    return 2 * np.pi * sc.c / (wavelength_nm * 1e-9)


# ------------------------------------------------------------------ knobs


def _rotate(v, axis, angle):
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    v = np.asarray(v)
    return v * np.cos(angle) + np.cross(axis, v) * np.sin(angle) + axis * np.dot(axis, v) * (1 - np.cos(angle))


def apply_knobs(tone: LaserTone, pointing_deg: float = 0.0, polarization_frac: float = 0.0,
                quant_axis=Z_AXIS) -> LaserTone:
    """Tilt and depolarize a tone.

    The beam is tilted by ``pointing_deg`` within the plane containing ``k`` and
    the quantization axis (the x-z plane when they are parallel). The orthogonal
    Jones vector ``k x conj(eps)`` is admixed with amplitude ``polarization_frac``.
    """
    k, eps = tone.k_dir, tone.polarization
    if pointing_deg:
        n = np.cross(k, quant_axis)
        if np.linalg.norm(n) < 1e-12:
            n = Y_AXIS.copy()
        ang = np.deg2rad(pointing_deg)
        k, eps = _rotate(k, n, ang), _rotate(eps, n, ang)
    if polarization_frac:
        perp = np.cross(k, eps.conj())
        eps = (eps + polarization_frac * perp) / np.sqrt(1 + polarization_frac ** 2)
    return replace(tone, k_dir=k, polarization=eps)


# ------------------------------------------------------------------ types


@dataclass(frozen=True)
class ErrorBudget:
    """Gate or mapping errors; leakage is part of the spontaneous-emission error."""

    coherent_error: float
    spontaneous_emission_error: float
    total: float
    leakage: float
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for name in ("coherent_error", "spontaneous_emission_error", "total", "leakage"):
            v = getattr(self, name)
            if not (-1e-12 <= v <= 1 + 1e-12):
                raise ValueError(f"{name} = {v} outside [0, 1]")

    @property
    def required_power(self) -> float:
        """Total optical power (W) used by the protocol, or nan."""
        return float(self.metadata.get("required_power_W", math.nan))


def _budget(coh: ChannelReport | None, mas: ChannelReport | None, **meta) -> ErrorBudget:
    ce = min(1.0, max(0.0, 1 - coh.fidelity)) if coh is not None else 0.0
    if mas is None:
        return ErrorBudget(ce, 0.0, ce, coh.leakage if coh is not None else 0.0, meta)
    total = min(1.0, max(ce, 1 - mas.fidelity))
    se = max(0.0, total - ce)
    return ErrorBudget(ce, se, total, min(1.0, max(0.0, mas.leakage)), meta)


@dataclass(frozen=True)
class ProtocolSpec:
    """A fully specified pulse acting on a set of dressed states.

    ``states`` are the simulated low-energy states; ``qubit[a]`` and
    ``targets[a]`` index the input and output computational states.
    ``pattern`` is the ideal 2x2 map up to calibrated phases. ``excited`` are
    the intermediate states for Raman driving; empty for direct driving.
    """

    name: str
    B: float
    states: tuple
    qubit: tuple
    targets: tuple
    tones: tuple
    schedule: PulseSchedule
    chirps: tuple
    pattern: np.ndarray
    excited: tuple = ()
    pointing_deg: float = 0.0
    polarization_frac: float = 0.0
    quant_axis: np.ndarray = field(default_factory=lambda: Z_AXIS.copy())
    cutoff: float = DEFAULT_CUTOFF
    h_cutoff: float | None = DEFAULT_CUTOFF
    multipole: str = "E1"
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.qubit)) != len(self.qubit) or len(set(self.targets)) != len(self.targets):
            raise ValueError("qubit map must be injective")
        if len(self.chirps) != len(self.tones):
            raise ValueError("one chirp per tone")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def is_raman(self) -> bool:
        return len(self.excited) > 0


# ------------------------------------------------------------------ engine


def _raman(spec: ProtocolSpec, registry):
    return raman_effective(list(spec.states), list(spec.excited), list(spec.tones), registry,
                           quant_axis=spec.quant_axis)


def scattering_coefficients(spec: ProtocolSpec, registry=None, result=None):
    """Two-photon scattering coefficients of a Raman spec at unit envelope."""
    registry = load_default() if registry is None else registry
    result = _raman(spec, registry) if result is None else result
    return raman_scatter_coeffs(result=result, registry=registry, cutoff=spec.cutoff)


def _hamiltonian_terms(spec: ProtocolSpec, registry, result=None):
    if spec.is_raman:
        result = _raman(spec, registry) if result is None else result
        return raman_drive(result, n=spec.n, cutoff=spec.h_cutoff), result
    lows = [i for i, s in enumerate(spec.states) if s.level == GROUND]
    ups = [i for i, s in enumerate(spec.states) if s.level != GROUND]
    up_level = spec.states[ups[0]].level
    me = registry.me(up_level, GROUND, spec.multipole)
    terms = single_photon_drive([spec.states[i] for i in ups], [spec.states[i] for i in lows], list(spec.tones), me,
                                registry, ups, lows, spec.n, cutoff=spec.h_cutoff, quant_axis=spec.quant_axis)
    return terms, None


def _inputs(qubit, n):
    E = np.zeros((n, len(qubit)), complex)
    E[list(qubit), np.arange(len(qubit))] = 1
    from .dynamics import _PAULI

    return np.array([E @ p @ E.conj().T for p in _PAULI])


def _calibrated_target(U, spec: ProtocolSpec):
    block = U[np.ix_(spec.targets, spec.qubit)]
    mask = np.asarray(spec.pattern) != 0
    ph = np.exp(1j * np.angle(block))
    return np.where(mask, ph, 0.0)


def run_protocol(spec: ProtocolSpec, registry=None, dissipation: bool = True, rtol: float = 1e-8,
                 atol: float = 1e-10) -> ErrorBudget:
    """Coherent and spontaneous-emission errors of a protocol.

    The coherent error comes from the wavefunction propagator and a target
    whose phases are calibrated on the realized map. The spontaneous-emission
    error is the additional infidelity of the master-equation channel with the
    two-photon dissipator, measured against the same target.
    """
    registry = load_default() if registry is None else registry
    terms, result = _hamiltonian_terms(spec, registry)
    profile = DriveProfile(spec.schedule, list(spec.chirps), len(spec.tones))
    n = spec.n
    H = terms.padded(n).hamiltonian(profile)
    U = propagator(H, n, spec.schedule, rtol=min(rtol, 1e-10), atol=min(atol, 1e-12))
    target = _calibrated_target(U, spec)
    ins = _inputs(spec.qubit, n)
    coh = channel_report_from_images(np.array([U @ x @ U.conj().T for x in ins]), target, list(spec.targets), n)
    meta = dict(spec.metadata)
    meta.setdefault("B", spec.B)
    if not (dissipation and spec.is_raman):
        return _budget(coh, None, **meta)
    D = scattering_coefficients(spec, registry, result).to_dissipator(n).bind(profile)
    Hd = terms.padded(D.n).hamiltonian(profile)
    big = np.zeros((len(ins), D.n, D.n), complex)
    big[:, :n, :n] = ins
    imgs = propagate_operators(Hd, D, big, spec.schedule, rtol=rtol, atol=atol)
    mas = channel_report_from_images(imgs, target, list(spec.targets), D.n)
    return _budget(coh, mas, **meta)


# ------------------------------------------------------------------ shelving


def circular_targets(meta_states) -> tuple:
    """Shelving targets with <I_z> closest to -1/2 (M = -1/2) and +1/2 (M = +1/2)."""
    out = []
    for M, sign in ((-0.5, -1), (0.5, 1)):
        cands = [s for s in meta_states if float(s.M) == M]
        vals = np.array([sign * nuclear_purity(s) for s in cands])
        order = np.argsort(vals)[::-1]
        if len(cands) > 1 and vals[order[0]] - vals[order[1]] < 1e-9:
            raise AmbiguousTarget(f"nuclear spin expectations tie for M = {M}")
        out.append(cands[order[0]])
    return tuple(out)


def _index(states, s):
    for i, t in enumerate(states):
        if t.level == s.level and t.F == s.F and t.M == s.M:
            return i
    raise KeyError(s)


def _equalize_fields(k_pairs, area):
    """Pump field and partner fields with ``E_p E_i k_i area = pi / 2`` (a pi pulse)."""
    prods = np.array([np.pi / (2 * area * k) for k in k_pairs])
    Ep = float(np.prod(prods) ** (1 / (2 * len(prods))))
    return Ep, prods / Ep


def _raman_calibrate(low, exc, tones, registry, pairs, area, quant_axis, absorbed_field=True):
    """Scale tone fields to pi areas and chirp emitted tones against light shifts.

    ``pairs`` lists ``(absorbed_tone, emitted_tone, final, initial)``.
    """
    unit = [t.with_field(1.0) for t in tones]
    res = raman_effective(low, exc, unit, registry, quant_axis=quant_axis)
    K = res.couplings
    ks = []
    for a, b, f, i in pairs:
        k = abs(K[b, a, f, i])
        if k == 0:
            raise NoResonance(f"tone pair ({a}, {b}) does not couple states {i} -> {f}")
        ks.append(k)
    fields = np.ones(len(tones))
    absorbed = {a for a, _, _, _ in pairs}
    if len(absorbed) == 1 and absorbed_field:
        a0 = next(iter(absorbed))
        Ep, Es = _equalize_fields(ks, area)
        fields[a0] = Ep
        for (a, b, f, i), e in zip(pairs, Es):
            fields[b] = e
    else:
        for (a, b, f, i), k in zip(pairs, ks):
            e = np.sqrt(np.pi / (2 * area * k))
            fields[a] = fields[b] = e
    tuned = [t.with_field(e) for t, e in zip(tones, fields)]
    res = raman_effective(low, exc, tuned, registry, quant_axis=quant_axis)
    ls = res.light_shifts.sum(axis=1)
    chirps = np.zeros(len(tones))
    for a, b, f, i in pairs:
        chirps[b] = -(ls[f] - ls[i])
    return tuned, chirps, res


def build_shelving(kind: str, B: float, wavelength_nm: float | None = None, *, registry=None,
                   total_time: float | None = None, ramp_time: float | None = None,
                   pointing_deg: float = 1.0, polarization_frac: float = 0.01,
                   optical_level: str = "4d5s.1D2", target_M: float = 2.5, waist: float = DEFAULT_WAIST,
                   h_cutoff: float | None | str = "auto", cutoff: float = DEFAULT_CUTOFF,
                   intermediates: Sequence[str] | None = None) -> ProtocolSpec:
    """Simultaneous shelving of both ground-state nuclear spin qubit states.

    ``circular_pm_half``: sigma+ pump on 1S0 -> 3P1 and two sigma+ Stokes tones
    into the 3D1 M = -1/2 / +1/2 states of extreme nuclear spin, all along B.
    ``stretched_pm_3half``: pi pump and two Stokes tones polarized normal to
    B into 3D1 F = 3/2, M = -3/2 / +3/2; the beam propagates normal to B.
    ``optical_E2``: one E2 tone per qubit state into ``optical_level``, with
    ``target_M`` = 5/2 (Delta M = 2) or 3/2 (Delta M = 1).
    ``intermediates`` restricts the Raman excited levels (default: every E1
    partner of 1S0 and 3D1).

    Raises
    ------
    NoResonance
        If a required coupling vanishes.
    AmbiguousTarget
        If the nuclear-spin target choice is degenerate.
    """
    if kind not in SHELVING_KINDS:
        raise ValueError(f"unknown shelving kind {kind!r}")
    if B <= 0:
        raise NoResonance("shelving needs a bias field to resolve the qubit transitions")
    registry = load_default() if registry is None else registry
    z = Z_AXIS
    ground = dressed(registry, GROUND, B)
    qd, qu = find_state(ground, 0.5, -0.5), find_state(ground, 0.5, 0.5)
    if kind == "optical_E2":
        return _build_optical(B, registry, ground, qd, qu, optical_level, target_M, pointing_deg,
                              polarization_frac, total_time or 10e-6, 1e-6 if ramp_time is None else ramp_time,
                              None if h_cutoff == "auto" else h_cutoff, waist)
    wavelength_nm = 419.0 if wavelength_nm is None else wavelength_nm
    total_time = 20e-6 if total_time is None else total_time
    ramp_time = total_time / 2 if ramp_time is None else ramp_time
    meta_states = dressed(registry, META, B)
    if kind == "circular_pm_half":
        td, tu = circular_targets(meta_states)
        k = z.copy()
        sp = -(X_AXIS + 1j * Y_AXIS) / np.sqrt(2)
        pols = (sp, sp, sp)
    else:
        td, tu = find_state(meta_states, 1.5, -1.5), find_state(meta_states, 1.5, 1.5)
        k = X_AXIS.copy()
        pols = (z, Y_AXIS, Y_AXIS)
    low = list(ground) + list(meta_states)
    levels = e1_partners(registry, [GROUND, META]) if intermediates is None else list(intermediates)
    exc = [s for lid in levels for s in dressed(registry, lid, B)]
    w = state_angular_frequencies(low, registry)
    iqd, iqu, itd, itu = (_index(low, s) for s in (qd, qu, td, tu))
    wp = angular_frequency_nm(wavelength_nm)
    freqs = (wp, wp - (w[itd] - w[iqd]), wp - (w[itu] - w[iqu]))
    names = ("pump", "stokes_down", "stokes_up")
    tones = [apply_knobs(LaserTone(f, p, k, 1.0, name=nm), pointing_deg, polarization_frac)
             for f, p, nm in zip(freqs, pols, names)]
    sched = PulseSchedule.ramped(total_time, ramp_time)
    pairs = [(0, 1, itd, iqd), (0, 2, itu, iqu)]
    tones, chirps, _ = _raman_calibrate(low, exc, tones, registry, pairs, sched.area_sq(), z)
    power = sum(beam_power(t.peak_field, waist) for t in tones)
    meta = {"kind": kind, "wavelength_nm": wavelength_nm, "required_power_W": power,
            "targets": ((td.F, td.M), (tu.F, tu.M))}
    return ProtocolSpec(kind, B, tuple(low), (iqd, iqu), (itd, itu), tuple(tones), sched, tuple(chirps),
                        np.eye(2), tuple(exc), pointing_deg, polarization_frac, z, cutoff,
                        DEFAULT_CUTOFF if h_cutoff == "auto" else h_cutoff, "E1", meta)


def _build_optical(B, registry, ground, qd, qu, level_id, target_M, pointing_deg, polarization_frac,
                   total_time, ramp_time, h_cutoff, waist):
    if not registry.find(level_id, GROUND, "E2"):
        raise NoResonance(f"no E2 element {level_id} -> {GROUND}")
    upper = dressed(registry, level_id, B)
    if abs(target_M) == 2.5:
        td = next(s for s in upper if float(s.M) == -2.5)
        tu = next(s for s in upper if float(s.M) == 2.5)
        k, eps = X_AXIS.copy(), Y_AXIS.copy()
    elif abs(target_M) in (0.5, 1.5):
        M = abs(target_M)
        cd = [s for s in upper if float(s.M) == -M]
        cu = [s for s in upper if float(s.M) == M]
        td = min(cd, key=nuclear_purity)
        tu = max(cu, key=nuclear_purity)
        if M == 0.5:
            k, eps = (X_AXIS + Z_AXIS) / np.sqrt(2), Y_AXIS.copy()
        else:
            k, eps = X_AXIS.copy(), Z_AXIS.copy()
    else:
        raise NoResonance(f"no E2 shelving target with M = {target_M}")
    states = list(ground) + list(upper)
    w = state_angular_frequencies(states, registry)
    iqd, iqu, itd, itu = (_index(states, s) for s in (qd, qu, td, tu))
    tones = [apply_knobs(LaserTone(w[t] - w[q], eps, k, 1.0, name=nm), pointing_deg, polarization_frac)
             for t, q, nm in ((itd, iqd, "down"), (itu, iqu, "up"))]
    me = registry.me(level_id, GROUND, "E2")
    sched = PulseSchedule.ramped(total_time, ramp_time)
    fields = []
    for tone, (t, q) in zip(tones, ((itd, iqd), (itu, iqu))):
        Om = rabi_matrix(upper, ground, tone, me, registry).matrix
        rabi = abs(Om[t - len(ground), q])
        if rabi == 0:
            raise NoResonance(f"tone {tone.name} does not couple the shelving transition")
        fields.append(np.pi / (sched.area() * rabi))
    tones = [t.with_field(e) for t, e in zip(tones, fields)]
    power = sum(beam_power(t.peak_field, waist) for t in tones)
    meta = {"kind": "optical_E2", "level": level_id, "target_M": abs(target_M), "required_power_W": power,
            "targets": ((td.F, td.M), (tu.F, tu.M))}
    return ProtocolSpec("optical_E2", B, tuple(states), (iqd, iqu), (itd, itu), tuple(tones), sched, (0.0, 0.0),
                        np.eye(2), (), pointing_deg, polarization_frac, Z_AXIS.copy(), DEFAULT_CUTOFF, h_cutoff,
                        "E2", meta)


def spurious_terms(spec: ProtocolSpec, registry=None) -> dict:
    """Unintended off-diagonal Raman couplings of a spec.

    Returns ``{(absorbed, emitted, row, col): (coupling, detuning)}`` for every
    term other than the qubit-to-target transfers, regardless of cutoff.
    """
    registry = load_default() if registry is None else registry
    res = _raman(spec, registry)
    terms = raman_drive(res, n=spec.n, cutoff=None)
    wanted = set(zip(spec.targets, spec.qubit)) | set(zip(spec.qubit, spec.targets))
    out = {}
    for r, c, k, nu, a, b in zip(terms.rows, terms.cols, terms.coef, terms.nu, terms.tone_a, terms.tone_b):
        if r != c and (r, c) not in wanted and r < c:
            out[(int(a), int(b), int(r), int(c))] = (complex(k), float(nu))
    return out


def accidental_resonance(kind: str, B_lo: float, B_hi: float, n_grid: int = 41, registry=None, **kw) -> float:
    """Bias field in ``[B_lo, B_hi]`` where the strongest spurious Raman term is resonant.

    Raises
    ------
    NoResonance
        If no unintended term crosses zero detuning in the interval.
    """
    registry = load_default() if registry is None else registry
    build = lambda B: spurious_terms(build_shelving(kind, B, registry=registry, **kw), registry)
    grid = np.linspace(B_lo, B_hi, n_grid)
    scans = [build(B) for B in grid]
    best = None
    for key in scans[0]:
        nus = np.array([sc_.get(key, (0, np.nan))[1] for sc_ in scans])
        flips = np.nonzero(np.sign(nus[:-1]) * np.sign(nus[1:]) < 0)[0]
        for i in flips:
            B0 = optimize.brentq(lambda B: build(B)[key][1], grid[i], grid[i + 1], xtol=1e-9)
            strength = abs(build(B0)[key][0])
            if best is None or strength > best[0]:
                best = (strength, B0)
    if best is None:
        raise NoResonance(f"no accidental resonance between {B_lo} and {B_hi} G")
    return float(best[1])


def shelving_error(spec: ProtocolSpec, registry=None, **kw) -> ErrorBudget:
    """Error budget of a shelving pulse (see :func:`run_protocol`)."""
    return run_protocol(spec, registry, **kw)


# ------------------------------------------------------------------ single-qubit gates

SQ_QUBITS = ("clock_168G", "inner_pm_half_400G")


def _sq_states(qubit, registry, B=None):
    if qubit == "clock_168G":
        if B is None:
            B = find_clock_point(registry[META], registry.nucleus, CLOCK_PAIR, A=REFERENCE_A[META])[0]
        st = dressed(registry, META, B)
        lo, hi = find_state(st, *CLOCK_PAIR[1]), find_state(st, *CLOCK_PAIR[0])
        return B, st, lo, hi, np.array([0.0, 0.0, 1.0]), X_AXIS.copy()
    if qubit == "inner_pm_half_400G":
        B = 400.0 if B is None else B
        st = dressed(registry, META, B)
        d, u = circular_targets(st)
        lo, hi = sorted((d, u), key=lambda s: s.energy)
        return B, st, lo, hi, (X_AXIS + Z_AXIS) / np.sqrt(2), Y_AXIS.copy()
    raise ValueError(f"unknown qubit {qubit!r}")


def build_sq_gate(qubit: str = "clock_168G", wavelength_nm: float = 445.0, power: float | None = None,
                  waist: float = DEFAULT_WAIST, total_time: float = 10e-6, ramp_time: float = 1e-6,
                  B: float | None = None, registry=None, cutoff: float = DEFAULT_CUTOFF) -> ProtocolSpec:
    """Two co-propagating tones in one beam driving a Raman pi rotation in 3D1.

    With ``power`` unset the tone fields are solved for a pi rotation in the
    given schedule; otherwise the stated total power is split equally.
    """
    registry = load_default() if registry is None else registry
    B, low, lo, hi, eps, k = _sq_states(qubit, registry, B)
    exc = [s for lid in e1_partners(registry, [META]) for s in dressed(registry, lid, B)]
    w = state_angular_frequencies(low, registry)
    i0, i1 = _index(low, lo), _index(low, hi)
    wa = angular_frequency_nm(wavelength_nm)
    tones = [LaserTone(wa, eps, k, 1.0, name="a"), LaserTone(wa - (w[i1] - w[i0]), eps, k, 1.0, name="b")]
    sched = PulseSchedule.ramped(total_time, ramp_time)
    tones, chirps, res = _raman_calibrate(low, exc, tones, registry, [(0, 1, i1, i0)], sched.area_sq(), Z_AXIS)
    required = sum(beam_power(t.peak_field, waist) for t in tones)
    if power is not None:
        scale = np.sqrt(power / required)
        tones = [t.with_field(t.peak_field * scale) for t in tones]
        res = raman_effective(low, exc, tones, registry)
        ls = res.light_shifts.sum(axis=1)
        chirps = np.array([0.0, -(ls[i1] - ls[i0])])
    meta = {"qubit": qubit, "wavelength_nm": wavelength_nm, "required_power_W": required, "waist": waist}
    pattern = np.array([[0, 1], [1, 0]])
    return ProtocolSpec(qubit, B, tuple(low), (i0, i1), (i0, i1), tuple(tones), sched, tuple(chirps), pattern,
                        tuple(exc), 0.0, 0.0, Z_AXIS.copy(), cutoff, DEFAULT_CUTOFF, "E1", meta)


def sq_gate_error(qubit: str = "clock_168G", wavelength_nm: float = 445.0, power: float | None = None,
                  waist: float = DEFAULT_WAIST, total_time: float = 10e-6, ramp_time: float = 1e-6,
                  registry=None, **kw) -> ErrorBudget:
    """Error budget and required power of a laser-driven single-qubit pi rotation."""
    spec = build_sq_gate(qubit, wavelength_nm, power, waist, total_time, ramp_time, registry=registry, **kw)
    return run_protocol(spec, registry)


# ------------------------------------------------------------------ light-shift gate


_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _quad(fn, edges):
    """Gauss-Legendre quadrature per smooth segment."""
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        h = (b - a) / 2
        total = total + h * np.dot(_GL_W, fn(a + h * (_GL_X + 1)))
    return total


def loop_closure(envelope: Callable[[np.ndarray], np.ndarray], T: float, breakpoints: Sequence[float] = ()):
    """Detuning closing the phase-space loop of a symmetric envelope.

    Returns ``(delta, residual, phase_integral)`` where the phase integral is
    ``int_0^T dt int_0^t dt' f(t) f(t') sin(delta (t - t'))``. ``breakpoints``
    mark kinks of the envelope for the quadrature.

    Raises
    ------
    LoopClosureFailure
        If no closing detuning is bracketed near ``2 pi / T``.
    """
    edges = np.unique(np.concatenate([[0.0, T], [b for b in breakpoints if 0 < b < T]]))

    def closure(d):
        return _quad(lambda t: envelope(t) * np.cos(d * (t - T / 2)), edges)

    lo, hi = 1.5 * np.pi / T, 3.5 * np.pi / T
    if np.sign(closure(lo)) == np.sign(closure(hi)):
        raise LoopClosureFailure("no loop-closing detuning near 2 pi / T")
    d = optimize.brentq(closure, lo, hi, xtol=1e-14 / T, rtol=1e-14)
    resid = abs(_quad(lambda t: envelope(t) * np.exp(1j * d * t), edges))
    norm = _quad(envelope, edges)
    if resid > 1e-8 * norm:
        raise LoopClosureFailure(f"loop residual {resid / norm:.2e}")

    def rhs(t, y):
        f = envelope(t)
        return [f * np.cos(d * t), f * np.sin(d * t), f * (np.sin(d * t) * y[0] - np.cos(d * t) * y[1])]

    phi = 0.0
    y = np.zeros(3)
    for a, b in zip(edges[:-1], edges[1:]):
        sol = integrate.solve_ivp(rhs, (a, b), y, method="DOP853", rtol=1e-11, atol=1e-14 * T * T)
        y = sol.y[:, -1]
    return d, resid, float(y[2])


def _two_qubit_channel(sub_images):
    """Product of two identical single-qubit maps given by their 2x2 Pauli images."""
    from .dynamics import _PAULI

    # S[i, j, k, l]: image entry (i, j) per input entry (k, l)
    S = sum(np.einsum("ij,kl->ijkl", sub_images[a], _PAULI[a].conj()) for a in range(4)) / 2

    def channel(X):
        X = np.asarray(X).reshape(2, 2, 2, 2)
        return np.einsum("abij,cdkl,ikjl->acbd", S, S, X).reshape(4, 4)

    return channel


def ls_gate_spec(wavelength_nm: float = 450.0, B: float = 400.0, loops: int = 2, loop_time: float = 25e-6,
                 ramp_time: float = 4e-6, eta: float = 0.108, waist: float = DEFAULT_WAIST,
                 mode_frequency: float = 1.73e6, registry=None, cutoff: float = DEFAULT_CUTOFF) -> ProtocolSpec:
    """Single-ion view of the pi-polarized light-shift gate.

    Counter-propagating pi-polarized beams along the trap axis (normal to B)
    produce a spin-dependent force on S(M=-1/2) and the lower 3D1 M = +1/2
    state. The loop-closing detuning is solved for the shaped envelope and
    the beam field is set for a total differential geometric phase of pi/2.
    The metadata carry ``required_power_W`` (inf when ``eta`` or the force
    vanishes, in which case the tones keep unit field).

    Raises
    ------
    LoopClosureFailure
        If the loop cannot be closed.
    """
    registry = load_default() if registry is None else registry
    ground, meta_st = dressed(registry, GROUND, B), dressed(registry, META, B)
    sq = find_state(ground, 0.5, -0.5)
    sd = min((s for s in meta_st if float(s.M) == 0.5), key=lambda s: s.energy)
    low = list(ground) + list(meta_st)
    exc = [s for lid in e1_partners(registry, [GROUND, META]) for s in dressed(registry, lid, B)]
    iq, idd = _index(low, sq), _index(low, sd)
    loop = PulseSchedule.ramped(loop_time, ramp_time)
    f = lambda t: np.asarray(loop.envelope(t)) ** 2
    delta, _, phi = loop_closure(f, loop_time, loop.edges)
    wa = angular_frequency_nm(wavelength_nm)
    wb = 2 * np.pi * mode_frequency + delta
    tones = [LaserTone(wa, Z_AXIS, X_AXIS, 1.0, name="fwd"), LaserTone(wa - wb, Z_AXIS, -X_AXIS, 1.0, name="back")]
    K = raman_effective(low, exc, tones, registry).couplings
    dK = abs(K[1, 0, idd, idd] - K[1, 0, iq, iq])
    meta = {"wavelength_nm": wavelength_nm, "B": B, "eta": eta, "delta": delta, "loops": loops,
            "phase_integral": phi, "force_coupling": dK}
    if eta <= 0 or dK == 0:
        meta["required_power_W"] = math.inf
    else:
        E = (np.pi / (4 * loops * eta ** 2 * dK ** 2 * phi)) ** 0.25
        meta["required_power_W"] = 2 * beam_power(E, waist)
        tones = [t.with_field(E) for t in tones]
    sched = PulseSchedule(list(loop.segments) * loops)
    return ProtocolSpec("ls_gate", B, tuple(low), (iq, idd), (iq, idd), tuple(tones), sched, (0.0, 0.0),
                        np.eye(2), tuple(exc), 0.0, 0.0, Z_AXIS.copy(), cutoff, DEFAULT_CUTOFF, "E1", meta)


def ls_gate_error(wavelength_nm: float = 450.0, B: float = 400.0, loops: int = 2, loop_time: float = 25e-6,
                  ramp_time: float = 4e-6, eta: float = 0.108, waist: float = DEFAULT_WAIST,
                  mode_frequency: float = 1.73e6, power_cap: float = 100.0, registry=None,
                  cutoff: float = DEFAULT_CUTOFF) -> ErrorBudget:
    """Spontaneous-emission error and power of the pi-polarized light-shift gate.

    Scattering is evaluated per ion with the two-photon dissipator alone and
    combined as a product channel on the two-qubit operator basis; recoil is
    excluded. Beyond ``power_cap`` (W) the gate is reported unattainable with
    unit error.

    Raises
    ------
    LoopClosureFailure
        If the loop cannot be closed.
    """
    registry = load_default() if registry is None else registry
    spec = ls_gate_spec(wavelength_nm, B, loops, loop_time, ramp_time, eta, waist, mode_frequency, registry, cutoff)
    meta = dict(spec.metadata)
    if not meta["required_power_W"] <= power_cap:
        meta["attainable"] = False
        return ErrorBudget(0.0, 1.0, 1.0, 0.0, meta)
    meta["attainable"] = True
    iq, idd = spec.qubit
    prof = DriveProfile(spec.schedule, n_tones=2)
    D = scattering_coefficients(spec, registry).to_dissipator(spec.n).bind(prof)
    ins = _inputs((iq, idd), D.n)
    imgs = propagate_operators(None, D, ins, spec.schedule)
    Eq = np.zeros((D.n, 2))
    Eq[[iq, idd], [0, 1]] = 1
    sub = np.array([Eq.T @ m @ Eq for m in imgs])
    single = channel_report_from_images(imgs, np.eye(2), [iq, idd], D.n)
    two = channel_fidelity(_two_qubit_channel(sub), np.eye(4), list(range(4)), n=4)
    meta["single_ion_error"] = 1 - single.fidelity
    se = min(1.0, max(0.0, 1 - two.fidelity))
    return ErrorBudget(0.0, se, se, min(1.0, max(0.0, two.leakage)), meta)


# ------------------------------------------------------------------ magnetic gates


def _mu_transition(level, nucleus, a, b):
    """Transition moment (J/T) for a field along z (Delta M = 0) or x (|Delta M| = 1)."""
    dM = float(a.M - b.M)
    if abs(dM) > 1:
        raise ForbiddenM1(f"Delta M = {dM} is not M1 allowed")
    if dM == 0:
        mu = moment_matrix(level, nucleus, [a], [b], 0)[0, 0]
    else:
        q = int(round(dM))
        # x = (e_-1 - e_+1)/sqrt2, so mu_x picks one spherical component
        mu = moment_matrix(level, nucleus, [a], [b], q)[0, 0] / np.sqrt(2)
    if abs(mu) < 1e-14:
        raise ForbiddenM1("vanishing M1 element")
    return abs(mu) * _MU_B_SI


@dataclass(frozen=True)
class MagneticPulse:
    amplitude_gauss: float
    frequency_hz: float
    moment_mu_b: float


def magnetic_pi_pulse(level_id: str, labels, B: float, T: float, registry=None) -> MagneticPulse:
    """Oscillating-field amplitude for a pi rotation between two dressed states.

    ``amplitude = pi hbar / (mu T)`` and the drive frequency is the transition
    frequency at ``B``.

    Raises
    ------
    ForbiddenM1
        If the M1 element between the states vanishes.
    """
    registry = load_default() if registry is None else registry
    st = dressed(registry, level_id, B)
    a, b = find_state(st, *labels[0]), find_state(st, *labels[1])
    mu = _mu_transition(registry[level_id], registry.nucleus, a, b)
    amp_T = np.pi * sc.hbar / (mu * T)
    return MagneticPulse(amp_T * 1e4, abs(a.energy - b.energy) * 1e6, mu / _MU_B_SI)


def gradient_gate_requirement(mode: str, T: float, y0: float, B: float | None = None, registry=None) -> float:
    """Field gradient (T/m) for a single-loop magnetic-gradient gate.

    ``zz_stretched``: ``2 sqrt2 pi / (T y0 d omega_q / dB)`` with the 3D1
    stretched-pair sensitivity. ``ms_clock``: ``sqrt2 pi / (T y0 mu / hbar)``
    with the clock-pair M1 element.
    """
    if T <= 0 or y0 <= 0:
        raise ValueError("T and y0 must be positive")
    registry = load_default() if registry is None else registry
    lv, nuc = registry[META], registry.nucleus
    if mode == "zz_stretched":
        B = 50.0 if B is None else B
        s = sensitivity(lv, nuc, (1.5, 1.5), (1.5, -1.5), B, A=REFERENCE_A[META])
        dwdB = 2 * np.pi * abs(s.first_order) * 1e4
        return 2 * np.sqrt(2) * np.pi / (T * y0 * dwdB)
    if mode == "ms_clock":
        if B is None:
            B = find_clock_point(lv, nuc, CLOCK_PAIR, A=REFERENCE_A[META])[0]
        st = dressed(registry, META, B)
        mu = _mu_transition(lv, nuc, find_state(st, *CLOCK_PAIR[0]), find_state(st, *CLOCK_PAIR[1]))
        return np.sqrt(2) * np.pi / (T * y0 * mu / sc.hbar)
    raise ValueError(f"unknown gradient gate mode {mode!r}")


# ------------------------------------------------------------------ measurement


@dataclass(frozen=True)
class MeasurementBudget:
    counts: float
    leakage: float
    per_scatter_leak: float
    linewidth: float
    supported_time: float


def measurement_budget(transition: str = "3P0", excited_fraction: float = 0.25, detection_eff: float = 0.03,
                       T: float = 50e-6, repump_population: float = 0.1, photon_accounting: str = "full",
                       leak_budget: float = 1e-4, registry=None) -> MeasurementBudget:
    """Detected counts and leakage of a fluorescence measurement.

    ``3P0`` cycles 3D1 <-> 5s5p 3P0; out-of-cycle branching adds the tabulated
    non-dipole and quenching decays to the repump-state decay weighted by its
    population. Leakage is the scattered photon number times that fraction;
    ``photon_accounting='full'`` counts ``Gamma T`` photons, ``'excited'``
    counts ``Gamma f T``. ``3F4`` cycles 3D3 <-> 4d5p 3F4 and reports the
    measurement time supported by ``leak_budget`` with the 4d2 1G4 repump state.
    """
    registry = load_default() if registry is None else registry
    if transition == "3P0":
        gamma = transition_rate(registry.me("5s5p.3P0", META, "E1"), registry)
        table = sum(r.final for r in out_of_cycle_table())
        rp = registry["4d2.3P1"]
        out = sum(transition_rate(t, registry) for t in registry.decays_from(rp.id) if t.lower != META)
        per = (table + repump_population * out) / gamma
        repump_rate = repump_population * out
    elif transition == "3F4":
        gamma = 1 / lifetime(registry["4d5p.3F4"], registry)
        repump_rate = repump_population / lifetime(registry["4d2.1G4"], registry)
        per = repump_rate / gamma
    else:
        raise ValueError(f"unknown measurement transition {transition!r}")
    counts = gamma * excited_fraction * detection_eff * T
    photons = gamma * T if photon_accounting == "full" else gamma * excited_fraction * T
    supported = leak_budget / repump_rate
    return MeasurementBudget(counts, photons * per, per, gamma, supported)


# ------------------------------------------------------------------ sweeps

CSV_COLUMNS = ("param1", "param2", "coherent", "se", "total", "leakage", "required_power_mW")


@dataclass(frozen=True)
class SweepRow:
    params: tuple
    budget: ErrorBudget | None
    error: str = ""


def sweep(fn: Callable[..., ErrorBudget], grid: Mapping[str, Sequence], workers: int = 1) -> list[SweepRow]:
    """Evaluate ``fn(**point)`` over the Cartesian grid in grid order.

    Errors are recorded per row; the sweep continues.
    """
    names = list(grid)
    if not names or any(len(grid[k]) == 0 for k in names):
        raise ValueError("empty sweep grid")
    points = [dict(zip(names, vals)) for vals in product(*(grid[k] for k in names))]

    def one(p):
        try:
            return SweepRow(tuple(p.values()), fn(**p))
        except Exception as exc:  # recorded in-row by contract
            return SweepRow(tuple(p.values()), None, f"{type(exc).__name__}: {exc}")

    if workers <= 1:
        return [one(p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, points))


def _fmt(v) -> str:
    return "" if v is None else "%.6e" % v


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    """CSV with columns ``param1,param2,coherent,se,total,leakage,required_power_mW``.

    ``path`` may be a filename or an open text stream.
    """
    if hasattr(path, "write"):
        _write_sweep(rows, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_sweep(rows, fh)


def _write_sweep(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS + ("error",))
    for r in rows:
        p = list(r.params) + [None] * (2 - len(r.params))
        b = r.budget
        vals = [None] * 5 if b is None else [b.coherent_error, b.spontaneous_emission_error, b.total, b.leakage,
                                             b.required_power * 1e3]
        w.writerow([_fmt(p[0]), _fmt(p[1])] + [_fmt(v) for v in vals] + [r.error])
