"""Time evolution, dissipators and leakage-aware channel fidelity.

All evolutions run in the interaction picture with respect to the static
dressed-state energies, so every Hamiltonian and jump-operator term carries an
explicit phase ``exp(-i nu t)``. Terms are stored as flat arrays
``(row, col, coef, nu, tone)`` and assembled on demand, which keeps 10 to 50
level problems cheap without forming a dense Liouvillian.

Tone envelopes and laser phases enter through a :class:`DriveProfile`: a
term driven by tones ``a`` (absorbed) and ``b`` (emitted) is scaled by
``s_a(t) s_b(t)`` and rotated by ``exp(-i (phi_a(t) - phi_b(t)))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import constants as sc
from scipy.integrate import DOP853

from .coupling import (
    UNIT_SI,
    RamanSystem,
    level_angular_frequency,
    raman_effective,
    state_angular_frequencies,
    sublevel_operator,
    tone_amplitudes,
)
from .exceptions import MissingChannel, NonLinearChannel, NonPhysicalState, ToleranceNotMet
from .registry import RANK, RATE_PREFACTOR, WAVELENGTH_POWER

__all__ = [
    "DEFAULT_CUTOFF",
    "Segment",
    "PulseSchedule",
    "DriveProfile",
    "DriveTerms",
    "DecayCoefficients",
    "Dissipator",
    "ChannelReport",
    "raman_drive",
    "single_photon_drive",
    "single_photon_dissipator",
    "raman_scatter_coeffs",
    "raman_golden_rule",
    "evolve_master",
    "evolve_coherent",
    "propagate_operators",
    "propagator",
    "channel_fidelity",
    "channel_report_from_images",
    "write_trajectory_csv",
]

DEFAULT_CUTOFF = 2 * np.pi * 20e6
# terms closer than this (rad/s) count as degenerate even with a zero cutoff;
# absolute optical frequencies carry about 0.1 rad/s of rounding
DEGENERATE = 10.0
_SHAPES = ("constant", "linear", "sin2")


# ------------------------------------------------------------- schedules


@dataclass(frozen=True)
class Segment:
    """One envelope segment rising (or falling) from ``start`` to ``end``.

    ``sin2`` follows ``start + (end - start) sin^2(pi u / 2d)``; ``linear``
    interpolates linearly; ``constant`` requires ``start == end``.
    ``tone_scale`` optionally multiplies the envelope per tone.
    """

    shape: str
    duration: float
    start: float = 1.0
    end: float | None = None
    tone_scale: tuple | None = None

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown envelope shape {self.shape!r}")
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        end = self.start if self.end is None else self.end
        object.__setattr__(self, "end", float(end))
        if self.start < 0 or end < 0:
            raise ValueError("envelope amplitudes must be non-negative")
        if self.shape == "constant" and end != self.start:
            raise ValueError("constant segment needs start == end")
        if self.tone_scale is not None:
            ts = tuple(float(x) for x in self.tone_scale)
            if min(ts) < 0:
                raise ValueError("tone scales must be non-negative")
            object.__setattr__(self, "tone_scale", ts)

    def value(self, u):
        u = np.clip(u, 0.0, self.duration)
        d = self.end - self.start
        if self.shape == "constant":
            return np.full_like(u, self.start, dtype=float)
        if self.shape == "linear":
            return self.start + d * u / self.duration
        return self.start + d * np.sin(np.pi * u / (2 * self.duration)) ** 2

    def integral(self, u):
        """``int_0^u s`` and ``int_0^u s^2``."""
        u = np.clip(u, 0.0, self.duration)
        a, d, T = self.start, self.end - self.start, self.duration
        if self.shape == "constant":
            return a * u, a * a * u
        if self.shape == "linear":
            return a * u + d * u ** 2 / (2 * T), a * a * u + a * d * u ** 2 / T + d * d * u ** 3 / (3 * T * T)
        i1 = u / 2 - T / (2 * np.pi) * np.sin(np.pi * u / T)
        i2 = 3 * u / 8 - T / (2 * np.pi) * np.sin(np.pi * u / T) + T / (16 * np.pi) * np.sin(2 * np.pi * u / T)
        return a * u + d * i1, a * a * u + 2 * a * d * i1 + d * d * i2


class PulseSchedule:
    """Piecewise pulse envelope (field amplitude, dimensionless).

    Parameters
    ----------
    segments : sequence of Segment
    total_time : float, optional
        Checked against the summed durations if given.
    """

    def __init__(self, segments: Sequence[Segment], total_time: float | None = None):
        segments = list(segments)
        if not segments:
            raise ValueError("schedule needs at least one segment")
        self.segments = segments
        self.edges = np.concatenate([[0.0], np.cumsum([s.duration for s in segments])])
        self.total_time = float(self.edges[-1])
        if total_time is not None and not np.isclose(total_time, self.total_time, rtol=1e-12, atol=0):
            raise ValueError(f"segment durations sum to {self.total_time}, not {total_time}")
        for a, b in zip(segments[:-1], segments[1:]):
            sa = np.asarray(a.tone_scale or (1.0,)) * a.end
            sb = np.asarray(b.tone_scale or (1.0,)) * b.start
            if sa.shape != sb.shape and (a.tone_scale is None) != (b.tone_scale is None):
                n = max(sa.size, sb.size)
                sa, sb = np.broadcast_to(sa, n), np.broadcast_to(sb, n)
            if not np.allclose(sa, sb, rtol=1e-12, atol=1e-12):
                raise ValueError("envelope is discontinuous at a segment boundary")
        nscale = {len(s.tone_scale) for s in segments if s.tone_scale is not None}
        if len(nscale) > 1:
            raise ValueError("tone_scale lengths differ between segments")
        self._n_scale = nscale.pop() if nscale else 0
        self._cum1 = np.zeros(len(segments) + 1)
        self._cum2 = np.zeros(len(segments) + 1)
        for n, s in enumerate(segments):
            i1, i2 = s.integral(s.duration)
            self._cum1[n + 1] = self._cum1[n] + i1
            self._cum2[n + 1] = self._cum2[n] + i2

    @classmethod
    def constant(cls, duration: float, amplitude: float = 1.0) -> "PulseSchedule":
        return cls([Segment("constant", duration, amplitude)])

    @classmethod
    def ramped(cls, total: float, ramp: float, amplitude: float = 1.0) -> "PulseSchedule":
        """sin^2 turn-on, flat top, sin^2 turn-off."""
        if 2 * ramp > total:
            raise ValueError("ramps longer than the pulse")
        segs = [Segment("sin2", ramp, 0.0, amplitude)]
        if total - 2 * ramp > 0:
            segs.append(Segment("constant", total - 2 * ramp, amplitude))
        segs.append(Segment("sin2", ramp, amplitude, 0.0))
        return cls(segs, total)

    def scaled(self, factor: float) -> "PulseSchedule":
        return PulseSchedule(
            [Segment(s.shape, s.duration, s.start * factor, s.end * factor, s.tone_scale) for s in self.segments]
        )

    def stretched(self, factor: float) -> "PulseSchedule":
        return PulseSchedule(
            [Segment(s.shape, s.duration * factor, s.start, s.end, s.tone_scale) for s in self.segments]
        )

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.segments) - 1)
        return t, idx

    def envelope(self, t):
        t, idx = self._locate(t)
        out = np.empty(t.shape)
        for n, s in enumerate(self.segments):
            m = idx == n
            if np.any(m):
                out[m] = s.value(t[m] - self.edges[n])
        return out if out.ndim else float(out)

    def tone_envelopes(self, t: float, n_tones: int) -> np.ndarray:
        t = float(t)
        n = int(np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.segments) - 1))
        seg = self.segments[n]
        base = float(seg.value(t - self.edges[n]))
        scale = np.ones(n_tones) if seg.tone_scale is None else np.asarray(seg.tone_scale)[:n_tones]
        return base * scale

    def area(self, t=None):
        """``int_0^t s(t') dt'``."""
        return self._integral(t, 0)

    def area_sq(self, t=None):
        """``int_0^t s(t')^2 dt'``."""
        return self._integral(t, 1)

    def _integral(self, t, which):
        if t is None:
            t = self.total_time
        t, idx = self._locate(t)
        cum = self._cum1 if which == 0 else self._cum2
        out = np.empty(t.shape)
        for n, s in enumerate(self.segments):
            m = idx == n
            if np.any(m):
                out[m] = cum[n] + s.integral(t[m] - self.edges[n])[which]
        return out if out.ndim else float(out)


@dataclass
class DriveProfile:
    """Envelope and laser-phase bookkeeping shared by Hamiltonian and dissipator.

    ``chirps[l]`` is a frequency offset applied as ``chirps[l] s(t)^2``.
    """

    schedule: PulseSchedule
    chirps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_tones: int = 0

    def __post_init__(self):
        self.chirps = np.asarray(self.chirps, dtype=float)
        if self.n_tones == 0:
            self.n_tones = len(self.chirps)
        if len(self.chirps) < self.n_tones:
            self.chirps = np.concatenate([self.chirps, np.zeros(self.n_tones - len(self.chirps))])

    def at(self, t: float):
        """Envelopes and phases with a trailing entry for 'no tone' (1 and 0)."""
        env = np.ones(self.n_tones + 1)
        env[:-1] = self.schedule.tone_envelopes(t, self.n_tones)
        ph = np.zeros(self.n_tones + 1)
        if self.n_tones:
            ph[:-1] = self.chirps * self.schedule.area_sq(t)
        return env, ph


# ------------------------------------------------------------- Hamiltonians


@dataclass
class DriveTerms:
    """Hermitian drive ``sum coef s_a s_b exp(-i(nu t + phi_a - phi_b)) |row><col|``.

    The term list is Hermitian by construction: every term appears with its
    conjugate partner. ``tone_a`` / ``tone_b`` equal ``-1`` for no tone.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    coef: np.ndarray
    nu: np.ndarray
    tone_a: np.ndarray
    tone_b: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=int)
        self.cols = np.asarray(self.cols, dtype=int)
        self.coef = np.asarray(self.coef, dtype=complex)
        self.nu = np.asarray(self.nu, dtype=float)
        self.tone_a = np.asarray(self.tone_a, dtype=int)
        self.tone_b = np.asarray(self.tone_b, dtype=int)

    def __len__(self):
        return len(self.coef)

    def select(self, cutoff: float | None) -> "DriveTerms":
        """Keep terms rotating slower than ``cutoff`` (rad/s)."""
        if cutoff is None:
            return self
        keep = np.abs(self.nu) <= max(cutoff, DEGENERATE)
        return DriveTerms(self.n, self.rows[keep], self.cols[keep], self.coef[keep], self.nu[keep],
                          self.tone_a[keep], self.tone_b[keep])

    def __add__(self, other: "DriveTerms") -> "DriveTerms":
        n = max(self.n, other.n)
        cat = lambda a, b: np.concatenate([a, b])
        return DriveTerms(n, cat(self.rows, other.rows), cat(self.cols, other.cols), cat(self.coef, other.coef),
                          cat(self.nu, other.nu), cat(self.tone_a, other.tone_a), cat(self.tone_b, other.tone_b))

    def padded(self, n: int) -> "DriveTerms":
        if n < self.n:
            raise ValueError("cannot shrink the state space")
        return DriveTerms(n, self.rows, self.cols, self.coef, self.nu, self.tone_a, self.tone_b)

    def scaled(self, factor: float) -> "DriveTerms":
        return DriveTerms(self.n, self.rows, self.cols, self.coef * factor, self.nu, self.tone_a, self.tone_b)

    def hamiltonian(self, profile: DriveProfile | None = None) -> Callable[[float], np.ndarray]:
        """Return ``t -> H(t)`` (rad/s)."""
        n = self.n
        flat = self.rows * n + self.cols
        nt = profile.n_tones if profile is not None else 0
        if profile is None and (np.any(self.tone_a >= 0) or np.any(self.tone_b >= 0)):
            raise ValueError("tone-driven terms need a DriveProfile")
        ta = np.where(self.tone_a < 0, nt, self.tone_a)
        tb = np.where(self.tone_b < 0, nt, self.tone_b)
        coef, nu = self.coef, self.nu

        def H(t):
            if profile is None:
                env, ph = np.ones(1), np.zeros(1)
            else:
                env, ph = profile.at(t)
            vals = coef * env[ta] * env[tb] * np.exp(-1j * (nu * t + ph[ta] - ph[tb]))
            out = np.bincount(flat, weights=vals.real, minlength=n * n) + 1j * np.bincount(
                flat, weights=vals.imag, minlength=n * n
            )
            return out.reshape(n, n)

        return H


def raman_drive(result, index: Sequence[int] | None = None, n: int | None = None, cutoff: float | None = DEFAULT_CUTOFF) -> DriveTerms:
    """Drive terms from an eliminated Raman interaction.

    ``index[i]`` places low state ``i`` in the simulated space of size ``n``.
    """
    K, nu = result.couplings, result.tags
    nt, _, nl, _ = K.shape
    index = np.arange(nl) if index is None else np.asarray(index)
    n = int(index.max() + 1) if n is None else n
    lp, l, i, j = np.nonzero(K)
    return DriveTerms(
        n, index[i], index[j], K[lp, l, i, j], nu[lp, l, i, j], l, lp
    ).select(cutoff)


def single_photon_drive(upper, lower, tones, me, registry, upper_index, lower_index, n, cutoff=None,
                        quant_axis=(0.0, 0.0, 1.0), ref_dir=None) -> DriveTerms:
    """Direct (non-eliminated) coupling of ``lower`` to ``upper`` by each tone.

    The absorption term ``(Omega/2) |k><j| exp(-i(w_l - w_kj) t)`` and its
    conjugate are emitted for every tone.
    """
    from .coupling import rabi_matrix

    wu = state_angular_frequencies(upper, registry)
    wl = state_angular_frequencies(lower, registry)
    ui, li = np.asarray(upper_index), np.asarray(lower_index)
    rows, cols, coef, nus, ta, tb = [], [], [], [], [], []
    for n_t, tone in enumerate(tones):
        Om = rabi_matrix(upper, lower, tone, me, registry, np.asarray(quant_axis, float), ref_dir).matrix
        k, j = np.nonzero(Om)
        nu = tone.angular_frequency - (wu[k] - wl[j])
        c = 0.5 * Om[k, j]
        rows += [ui[k], li[j]]
        cols += [li[j], ui[k]]
        coef += [c, c.conj()]
        nus += [nu, -nu]
        ta += [np.full(k.size, n_t), np.full(k.size, -1)]
        tb += [np.full(k.size, -1), np.full(k.size, n_t)]
    cat = lambda x: np.concatenate(x) if x else np.zeros(0)
    return DriveTerms(n, cat(rows), cat(cols), cat(coef), cat(nus), cat(ta), cat(tb)).select(cutoff)


# ------------------------------------------------------------- dissipation


def _clusters(nu: np.ndarray, cutoff: float) -> np.ndarray:
    """Single-linkage groups of frequencies with gaps above ``cutoff``."""
    if nu.size == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(nu)
    gaps = np.diff(nu[order]) > max(cutoff, DEGENERATE)
    lab = np.concatenate([[0], np.cumsum(gaps)])
    out = np.empty(nu.size, dtype=int)
    out[order] = lab
    return out


@dataclass
class DecayCoefficients:
    """Decay amplitudes ``a`` with coefficients ``gamma = conj(a_p) a_q``.

    Each term ``p`` describes a transfer ``col[p] -> row[p]`` emitting a photon
    of frequency ``nu[p]`` in channel ``channel[p]`` (multipole and spherical
    component); tone ``-1`` marks a laser-independent decay. Rows equal to
    ``-1`` are final states outside the simulated space, identified by
    ``final[p]``. ``gamma`` between two terms is kept only for equal channel
    and equal frequency cluster.
    """

    rows: np.ndarray
    cols: np.ndarray
    amp: np.ndarray
    nu: np.ndarray
    channel: np.ndarray
    tone: np.ndarray
    final: np.ndarray
    cutoff: float = DEFAULT_CUTOFF
    cluster: np.ndarray = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=int)
        self.cols = np.asarray(self.cols, dtype=int)
        self.amp = np.asarray(self.amp, dtype=complex)
        self.nu = np.asarray(self.nu, dtype=float)
        self.channel = np.asarray(self.channel, dtype=int)
        self.tone = np.asarray(self.tone, dtype=int)
        self.final = np.asarray(self.final, dtype=int)
        if self.cluster is None:
            self.cluster = np.zeros(len(self.amp), dtype=int)
            for ch in np.unique(self.channel):
                m = self.channel == ch
                self.cluster[m] = _clusters(self.nu[m], self.cutoff)

    def __len__(self):
        return len(self.amp)

    def matrix(self) -> np.ndarray:
        """Coefficient matrix ``gamma[p, q]`` over terms (s^-1)."""
        same = (self.channel[:, None] == self.channel[None, :]) & (self.cluster[:, None] == self.cluster[None, :])
        return np.where(same, np.conj(self.amp)[:, None] * self.amp[None, :], 0.0)

    def with_cutoff(self, cutoff: float) -> "DecayCoefficients":
        return DecayCoefficients(self.rows, self.cols, self.amp, self.nu, self.channel, self.tone, self.final, cutoff)

    def to_dissipator(self, n: int, sink: int | None = None) -> "Dissipator":
        """Jump operators on an ``n``-dimensional space.

        Out-of-space terms are routed to ``sink`` (appended as index ``n`` if
        not given), one jump per final sublevel.
        """
        leaks = self.rows < 0
        if leaks.any() and sink is None:
            sink = n
            n = n + 1
        rows = np.where(leaks, -1 if sink is None else sink, self.rows)
        key = np.stack([self.channel, self.cluster, np.where(leaks, self.final, -1)], axis=1)
        uniq, jump = np.unique(key, axis=0, return_inverse=True) if len(key) else (np.zeros((0, 3)), np.zeros(0, int))
        jump = np.asarray(jump).reshape(-1)
        dnu = np.zeros(len(self.amp))
        for jj in range(len(uniq)):
            m = jump == jj
            dnu[m] = self.nu[m] - self.nu[m].mean()
        return Dissipator(n, jump, rows, self.cols, self.amp, dnu, self.tone, len(uniq), sink=sink, coefficients=self)

    @staticmethod
    def concat(parts: Sequence["DecayCoefficients"]) -> "DecayCoefficients":
        """Join coefficient sets; channels of different parts never interfere."""
        parts = [p for p in parts if len(p)]
        if not parts:
            z = np.zeros(0)
            return DecayCoefficients(z, z, z, z, z, z, z)
        off, fin_off = 0, 0
        chans, finals, clusters = [], [], []
        for p in parts:
            chans.append(p.channel + off)
            clusters.append(p.cluster)
            finals.append(np.where(p.final >= 0, p.final + fin_off, p.final))
            off += int(p.channel.max()) + 1
            fin_off += int(p.final.max()) + 1 if (p.final >= 0).any() else 0
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        out = DecayCoefficients(cat("rows"), cat("cols"), cat("amp"), cat("nu"), np.concatenate(chans),
                                cat("tone"), np.concatenate(finals), parts[0].cutoff, np.concatenate(clusters))
        return out


@dataclass
class Dissipator:
    """Lindblad dissipator ``sum_j L_j rho L_j^+ - {L_j^+ L_j, rho}/2``.

    ``L_j(t) = sum_p coef_p s_tone(t) exp(-i(dnu_p t + phi_tone(t))) |row_p><col_p|``.
    """

    n: int
    jump: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    coef: np.ndarray
    dnu: np.ndarray
    tone: np.ndarray
    n_jumps: int
    sink: int | None = None
    coefficients: DecayCoefficients | None = None
    profile: DriveProfile | None = None

    def bind(self, profile: DriveProfile | None) -> "Dissipator":
        return Dissipator(self.n, self.jump, self.rows, self.cols, self.coef, self.dnu, self.tone, self.n_jumps,
                          self.sink, self.coefficients, profile)

    def padded(self, n: int) -> "Dissipator":
        if n < self.n:
            raise ValueError("cannot shrink the state space")
        return Dissipator(n, self.jump, self.rows, self.cols, self.coef, self.dnu, self.tone, self.n_jumps,
                          self.sink, self.coefficients, self.profile)

    @property
    def is_static(self) -> bool:
        return bool(np.all(self.tone < 0) and np.allclose(self.dnu, 0))

    def operators(self, t: float = 0.0) -> np.ndarray:
        n = self.n
        if self.profile is not None:
            env, ph = self.profile.at(t)
            nt = self.profile.n_tones
        else:
            if np.any(self.tone >= 0):
                raise ValueError("laser-driven dissipator needs a DriveProfile")
            env, ph, nt = np.ones(1), np.zeros(1), 0
        tt = np.where(self.tone < 0, nt, self.tone)
        vals = self.coef * env[tt] * np.exp(-1j * (self.dnu * t + ph[tt]))
        L = np.zeros((self.n_jumps, n, n), dtype=complex)
        np.add.at(L, (self.jump, self.rows, self.cols), vals)
        return L

    def _sink_jumps(self) -> np.ndarray:
        """Mask of jumps whose every term lands in the sink state."""
        if self.sink is None:
            return np.zeros(self.n_jumps, bool)
        into = np.ones(self.n_jumps, bool)
        into[self.jump[self.rows != self.sink]] = False
        return into

    def apply(self, rho: np.ndarray, t: float = 0.0, L: np.ndarray | None = None) -> np.ndarray:
        """``D(rho)``; ``rho`` may carry leading batch dimensions.

        Jumps into the sink, ``|s><v_j|``, are summed exactly through
        ``M = sum_j |v_j><v_j|``: they contribute ``tr(M rho) |s><s|`` and the
        anticommutator with ``M``.
        """
        if self.n_jumps == 0:
            return np.zeros_like(rho)
        if L is None:
            L = self.operators(t)
        rho = np.asarray(rho)
        into = self._sink_jumps()
        Lin = L[~into]
        M = np.zeros((self.n, self.n), dtype=complex)
        out = np.zeros(np.broadcast_shapes(rho.shape, (self.n, self.n)), dtype=complex)
        if into.any():
            C = L[into, self.sink, :]
            M += C.conj().T @ C
            out[..., self.sink, self.sink] += np.einsum("...ab,ba->...", rho, M)
        if len(Lin):
            Ld = np.conj(np.swapaxes(Lin, -1, -2))
            M += np.einsum("jab,jbc->ac", Ld, Lin)
            r = rho[..., None, :, :]
            out += np.sum(Lin @ r @ Ld, axis=-3)
        return out - 0.5 * (M @ rho + rho @ M)

    def liouvillian(self, t: float = 0.0) -> np.ndarray:
        """Dense superoperator on row-major ``vec(rho)``; intended for n <= 8."""
        n = self.n
        basis = np.eye(n * n).reshape(n * n, n, n)
        return self.apply(basis, t).reshape(n * n, n * n).T

    def rate(self, m: int, k: int, t: float = 0.0) -> float:
        """Transfer rate ``<k| D(|m><m|) |k>``."""
        rho = np.zeros((self.n, self.n), dtype=complex)
        rho[m, m] = 1.0
        return float(self.apply(rho, t)[k, k].real)

    def total_rate(self, m: int, t: float = 0.0) -> float:
        """Total decay rate ``<m| sum_j L_j^+ L_j |m>``."""
        L = self.operators(t)
        return float(np.sum(np.abs(L[:, :, m]) ** 2))


def _rate_factor(multipole: str, nu: np.ndarray) -> np.ndarray:
    lam_nm = 2 * np.pi * sc.c / nu * 1e9
    return RATE_PREFACTOR[multipole] / lam_nm ** WAVELENGTH_POWER[multipole]


@dataclass(frozen=True)
class _BasisState:
    level: str
    amplitudes: np.ndarray


def _product_states(level, twoI):
    dim = (level.twoJ + 1) * (twoI + 1)
    return [_BasisState(level.id, np.eye(dim)[a]) for a in range(dim)]


def _op_between(bra, ket, bra_level, ket_level, me, twoI, q):
    if (me.upper, me.lower) == (bra_level.id, ket_level.id):
        red = me.reduced_me
    else:
        red = me.reduced_me * (-1) ** (((bra_level.twoJ - ket_level.twoJ) // 2) % 2)
    op = sublevel_operator(bra_level.twoJ, ket_level.twoJ, twoI, RANK[me.multipole], q, red)
    Vb = np.array([s.amplitudes for s in bra])
    Vk = np.array([s.amplitudes for s in ket])
    return Vb.conj() @ op @ Vk.T


def _levels_of(states):
    out: dict[str, list[int]] = {}
    for n, s in enumerate(states):
        out.setdefault(s.level, []).append(n)
    return out


def single_photon_dissipator(
    states,
    registry,
    cutoff: float = DEFAULT_CUTOFF,
    multipoles: Sequence[str] = ("E1", "M1", "E2"),
    channels: Sequence[tuple[str, str]] | None = None,
    strict: bool = False,
    index: Sequence[int] | None = None,
    n: int | None = None,
) -> DecayCoefficients:
    """Spontaneous decay among (and out of) the supplied dressed states.

    Each channel ``K`` contributes ``L_q = sum sqrt(G_K(nu)) <l|T_q|k>* |l><k|``
    with ``G_K(nu) = P_K / lambda(nu)^n`` over elements in atomic units, so a
    single two-level channel decays at the registry rate. Decays into levels
    outside ``states`` are emitted as out-of-space terms (see
    :meth:`DecayCoefficients.to_dissipator`).

    Parameters
    ----------
    channels : sequence of (upper, lower), optional
        Restrict to these level pairs. A pair without a registry element
        raises ``MissingChannel``.
    strict : bool
        Raise ``MissingChannel`` instead of emitting out-of-space decays.
    """
    states = list(states)
    index = np.arange(len(states)) if index is None else np.asarray(index)
    groups = _levels_of(states)
    twoI = registry.nucleus.I.twice_value
    omega = state_angular_frequencies(states, registry)
    if channels is not None:
        for up, lo in channels:
            if not [t for t in registry.find(up, lo) if t.multipole in multipoles]:
                raise MissingChannel(f"no decay element {up} -> {lo}")
    rows, cols, amp, nus, chans, finals = [], [], [], [], [], []
    chan_id: dict[tuple, int] = {}
    final_id = 0
    for up, uidx in groups.items():
        ulev = registry[up]
        for me in registry.decays_from(up):
            if me.multipole not in multipoles or me.reduced_me == 0:
                continue
            if channels is not None and (up, me.lower) not in set(map(tuple, channels)):
                continue
            llev = registry[me.lower]
            inside = me.lower in groups
            if not inside and strict:
                raise MissingChannel(f"{up} decays to {me.lower}, which is not simulated")
            ustates = [states[i] for i in uidx]
            if inside:
                lidx = groups[me.lower]
                lstates = [states[i] for i in lidx]
                wl = omega[lidx]
            else:
                lstates = _product_states(llev, twoI)
                wl = np.full(len(lstates), level_angular_frequency(llev))
            wu = omega[uidx]
            nu = wu[:, None] - wl[None, :]
            if np.any(nu <= 0):
                raise MissingChannel(f"{up} -> {me.lower} has non-positive frequency")
            G = _rate_factor(me.multipole, nu)
            rk = RANK[me.multipole]
            for q in range(-rk, rk + 1):
                key = (me.multipole, q)
                chan_id.setdefault(key, len(chan_id))
                # <l|T_q|k>^* |l><k|: bra lower, ket upper
                T = _op_between(lstates, ustates, llev, ulev, me, twoI, q)
                a = np.sqrt(G.T) * np.conj(T)
                li, ki = np.nonzero(np.abs(a) > 0)
                if li.size == 0:
                    continue
                rows.append(index[np.asarray(lidx)[li]] if inside else np.full(li.size, -1))
                finals.append(np.full(li.size, -1) if inside else final_id + li)
                cols.append(index[np.asarray(uidx)[ki]])
                amp.append(a[li, ki])
                nus.append(nu.T[li, ki])
                chans.append(np.full(li.size, chan_id[key]))
            if not inside:
                final_id += len(lstates)
    cat = lambda x, dt=float: np.concatenate(x) if x else np.zeros(0, dtype=dt)
    tone = np.full(sum(len(a) for a in amp), -1)
    return DecayCoefficients(cat(rows, int), cat(cols, int), cat(amp, complex), cat(nus), cat(chans, int), tone,
                             cat(finals, int), cutoff)


def _raman_finals(system: RamanSystem, registry, include_leakage: bool):
    """Final states for scattering: the low states plus product bases of other decay targets."""
    low_levels = set(_levels_of(system.low))
    finals = list(system.low)
    omega = list(system.omega_low)
    inside = [True] * len(finals)
    if include_leakage:
        seen = set()
        twoI = registry.nucleus.I.twice_value
        for elev in _levels_of(system.excited):
            for me in registry.decays_from(elev):
                if me.multipole != "E1" or me.lower in low_levels or me.lower in seen:
                    continue
                seen.add(me.lower)
                lv = registry[me.lower]
                ps = _product_states(lv, twoI)
                finals += ps
                omega += [level_angular_frequency(lv)] * len(ps)
                inside += [False] * len(ps)
    return finals, np.array(omega), np.array(inside)


def _scatter_blocks(system: RamanSystem, registry, finals, omega_f):
    """Dipoles ``<k|d_q|f>`` and counter-rotating couplings ``V_fk`` for every final state."""
    twoI = registry.nucleus.I.twice_value
    ne, nf, nt = len(system.excited), len(finals), len(system.tones)
    D = np.zeros((3, ne, nf), dtype=complex)
    Dd = np.zeros((3, nf, ne), dtype=complex)
    ge, gf = _levels_of(system.excited), _levels_of(finals)
    for elev, eidx in ge.items():
        for flev, fidx in gf.items():
            found = registry.find(elev, flev, "E1")
            if not found:
                continue
            me = found[0]
            es = [system.excited[i] for i in eidx]
            fs = [finals[i] for i in fidx]
            for q in (-1, 0, 1):
                D[q + 1][np.ix_(eidx, fidx)] = UNIT_SI["E1"] * _op_between(es, fs, registry[elev], registry[flev], me, twoI, q)
                Dd[q + 1][np.ix_(fidx, eidx)] = UNIT_SI["E1"] * _op_between(fs, es, registry[flev], registry[elev], me, twoI, q)
    dn = np.zeros((nt, nf, ne), dtype=complex)
    for n, tone in enumerate(system.tones):
        a = tone_amplitudes(tone, "E1", system.quant_axis, system.ref_dir)
        dn[n] = 0.5 * tone.peak_field / sc.hbar * sum(a[q] * Dd[q + 1] for q in (-1, 0, 1))
    return D, Dd, dn


def _amplitudes_X(system: RamanSystem, D, Dd, dn, omega_f, counter_rotating=True):
    """``X[l, q, f, j]`` scattering amplitudes from low ``j`` to final ``f``."""
    wl = system.tone_omegas
    det = wl[:, None, None] - (system.omega_exc[None, :, None] - system.omega_low[None, None, :])
    Vup = system.up / det  # (nt, ne, nl)
    # Y_q = D_q^+ Vup
    Y = np.einsum("qkf,lkj->lqfj", np.conj(D), Vup)
    if not counter_rotating:
        return Y
    det2 = wl[:, None, None] + (system.omega_exc[None, None, :] - omega_f[None, :, None])
    Vdn = dn / det2  # (nt, nf, ne)
    # Z_q[f, j] = sum_k Vdn[f, k] conj(Dd_q[j, k]) over the low rows of Dd
    Ddl = Dd[:, : len(system.low), :]
    Z = np.einsum("lfk,qjk->lqfj", Vdn, np.conj(Ddl))
    return Y - Z


def raman_scatter_coeffs(
    tones=None,
    low_states=None,
    excited_states=None,
    registry=None,
    cutoff: float = DEFAULT_CUTOFF,
    include_leakage: bool = True,
    counter_rotating: bool = True,
    result=None,
    index: Sequence[int] | None = None,
    **kw,
) -> DecayCoefficients:
    """Two-photon (Raman and Rayleigh) scattering coefficients.

    Amplitudes are ``sqrt(G(nu)) X_q[f, j]`` with
    ``X_q = D_q^+ V_up / (w_l - w_kj) - V_dn / (w_l - w_fk) D_q^*`` and
    ``G(nu) = nu^3 / (3 pi hbar eps0 c^3)`` at the scattered frequency
    ``nu = w_l - w_fj``. Amplitudes are at unit envelope; the bound
    :class:`DriveProfile` scales them by ``s_l(t)``.

    Raises
    ------
    DetuningTooSmall
        Through :func:`ionops.coupling.raman_effective`.
    """
    if result is None:
        result = raman_effective(low_states, excited_states, tones, registry, counter_rotating=counter_rotating, **kw)
    system = result.system
    nl = len(system.low)
    index = np.arange(nl) if index is None else np.asarray(index)
    finals, omega_f, inside = _raman_finals(system, registry, include_leakage)
    D, Dd, dn = _scatter_blocks(system, registry, finals, omega_f)
    X = _amplitudes_X(system, D, Dd, dn, omega_f, counter_rotating)
    wl = system.tone_omegas
    nu = wl[:, None, None] - (omega_f[None, :, None] - system.omega_low[None, None, :])
    G = nu ** 3 / (3 * np.pi * sc.hbar * sc.epsilon_0 * sc.c ** 3)
    A = np.sqrt(np.clip(G, 0, None))[:, None] * X
    scale = np.abs(A).max() if A.size else 0.0
    l, q, f, j = np.nonzero(np.abs(A) > 1e-14 * scale) if scale > 0 else (np.zeros(0, int),) * 4
    rows = np.where(inside[f], index[np.minimum(f, nl - 1)], -1)
    final = np.where(inside[f], -1, f)
    return DecayCoefficients(rows, index[j], A[l, q, f, j], nu[l, f, j], q, l, final, cutoff)


def raman_golden_rule(result, n: int, m: int, counter_rotating: bool = True) -> float:
    """Golden-rule Raman rate ``m -> n`` between low states (explicit sums).

    ``Gamma = sum_l sum_q G(nu) |sum_k <k|d_q|n>* V_km / (w_l - w_km)
    - V_nk <m|d_q|k>* / (w_l - w_nk)|^2``.
    """
    s = result.system
    wl = s.tone_omegas
    total = 0.0
    for l in range(len(wl)):
        nu = wl[l] - (s.omega_low[n] - s.omega_low[m])
        G = nu ** 3 / (3 * np.pi * sc.hbar * sc.epsilon_0 * sc.c ** 3)
        for q in range(3):
            amp = 0j
            for k in range(len(s.excited)):
                amp += np.conj(s.dip[q, k, n]) * s.up[l, k, m] / (wl[l] - (s.omega_exc[k] - s.omega_low[m]))
                if counter_rotating:
                    amp -= s.down[l, n, k] * np.conj(s.dip_down[q, m, k]) / (wl[l] - (s.omega_low[n] - s.omega_exc[k]))
            total += G * abs(amp) ** 2
    return float(total)


# ------------------------------------------------------------- integration


def _segments(schedule: PulseSchedule | float | None, t_span=None):
    if t_span is not None:
        return np.asarray(t_span, dtype=float)
    if isinstance(schedule, PulseSchedule):
        return schedule.edges
    return np.array([0.0, float(schedule)])


def _integrate(rhs, y0, edges, rtol, atol, hermitize_shape=None, sample_times=None, max_step=np.inf):
    y = np.asarray(y0, dtype=complex).ravel()
    samples = []
    sample_times = np.asarray([] if sample_times is None else sample_times, dtype=float)
    si = 0
    while si < len(sample_times) and sample_times[si] <= edges[0]:
        samples.append(y.copy())
        si += 1
    nsteps = 0
    for t0, t1 in zip(edges[:-1], edges[1:]):
        if t1 <= t0:
            continue
        solver = DOP853(rhs, t0, y, t1, rtol=rtol, atol=atol, max_step=max_step)
        while solver.status == "running":
            msg = solver.step()
            nsteps += 1
            if solver.status == "failed":
                raise ToleranceNotMet(f"integrator failed near t = {solver.t:.3e} s: {msg}")
            if si < len(sample_times) and sample_times[si] <= solver.t:
                dense = solver.dense_output()
                while si < len(sample_times) and sample_times[si] <= solver.t:
                    samples.append(dense(sample_times[si]))
                    si += 1
            if hermitize_shape is not None:
                r = solver.y.reshape(hermitize_shape)
                solver.y[:] = (0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))).ravel()
        y = solver.y.copy()
    while si < len(sample_times):
        samples.append(y.copy())
        si += 1
    return y, samples, nsteps


@dataclass
class MasterResult:
    rho: np.ndarray
    times: np.ndarray
    samples: np.ndarray
    steps: int


def _check_state(rho0):
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim != 2 or rho0.shape[0] != rho0.shape[1]:
        raise ValueError("rho0 must be a square matrix")
    if not np.allclose(rho0, rho0.conj().T, atol=1e-12):
        raise NonPhysicalState("rho0 is not Hermitian")
    if abs(np.trace(rho0) - 1) > 1e-9:
        raise NonPhysicalState("rho0 does not have unit trace")
    if np.linalg.eigvalsh(rho0).min() < -1e-9:
        raise NonPhysicalState("rho0 is not positive semidefinite")
    return rho0


def _master_rhs(hamiltonian_fn, dissipator, shape):
    n = shape[-1]

    def rhs(t, y):
        r = y.reshape(shape)
        H = hamiltonian_fn(t) if hamiltonian_fn is not None else None
        out = np.zeros_like(r)
        if H is not None:
            out += -1j * (H @ r - r @ H)
        if dissipator is not None and dissipator.n_jumps:
            out += dissipator.apply(r, t)
        return out.ravel()

    return rhs


def propagate_operators(hamiltonian_fn, dissipator, ops, schedule, rtol: float = 1e-8, atol: float = 1e-10,
                        t_span=None) -> np.ndarray:
    """Evolve a batch of operators ``ops[b]`` under the master equation."""
    ops = np.asarray(ops, dtype=complex)
    edges = _segments(schedule, t_span)
    herm = np.allclose(ops, np.conj(np.swapaxes(ops, -1, -2)), atol=1e-14)
    y, _, _ = _integrate(_master_rhs(hamiltonian_fn, dissipator, ops.shape), ops, edges, rtol, atol,
                         ops.shape if herm else None)
    out = y.reshape(ops.shape)
    tr0 = np.trace(ops, axis1=-2, axis2=-1)
    tr1 = np.trace(out, axis1=-2, axis2=-1)
    if np.max(np.abs(tr1 - tr0)) > 1e-7 * max(1.0, np.max(np.abs(tr0))):
        raise ToleranceNotMet(f"trace drift {np.max(np.abs(tr1 - tr0)):.2e}")
    return out


def evolve_master(hamiltonian_fn, dissipator, rho0, schedule, rtol: float = 1e-8, atol: float = 1e-10,
                  n_samples: int = 0, t_span=None) -> MasterResult:
    """Integrate ``d rho/dt = -i[H, rho] + D(rho)`` with an order-8 Runge-Kutta pair.

    Parameters
    ----------
    hamiltonian_fn : callable ``t -> H`` (rad/s) or None
    dissipator : Dissipator or None
    rho0 : ndarray
    schedule : PulseSchedule or float
        Segment edges are used as integration breakpoints; a float is a
        total time.

    Raises
    ------
    ToleranceNotMet
        If the solver fails or the trace drifts by more than 1e-7.
    NonPhysicalState
        If the input, or the final state, has an eigenvalue below -1e-6.
    """
    rho0 = _check_state(rho0)
    edges = _segments(schedule, t_span)
    times = np.linspace(edges[0], edges[-1], n_samples) if n_samples else np.zeros(0)
    y, samples, steps = _integrate(_master_rhs(hamiltonian_fn, dissipator, rho0.shape), rho0, edges, rtol, atol,
                                   rho0.shape, times)
    rho = y.reshape(rho0.shape)
    if abs(np.trace(rho) - 1) > 1e-7:
        raise ToleranceNotMet(f"trace drift {abs(np.trace(rho) - 1):.2e}")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-6:
        raise NonPhysicalState("negative eigenvalue in the final state")
    samples = np.array([s.reshape(rho0.shape) for s in samples]) if samples else np.zeros((0,) + rho0.shape)
    return MasterResult(rho, times, samples, steps)


def propagator(hamiltonian_fn, n: int, schedule, rtol: float = 1e-10, atol: float = 1e-12, t_span=None) -> np.ndarray:
    """Unitary ``U(T)`` of ``i dU/dt = H U``."""
    edges = _segments(schedule, t_span)

    def rhs(t, y):
        return (-1j * hamiltonian_fn(t) @ y.reshape(n, n)).ravel()

    y, _, _ = _integrate(rhs, np.eye(n, dtype=complex), edges, rtol, atol)
    U = y.reshape(n, n)
    err = np.abs(U.conj().T @ U - np.eye(n)).max()
    if err > 1e-6:
        raise ToleranceNotMet(f"propagator unitarity error {err:.2e}")
    return U


def evolve_coherent(hamiltonian_fn, psi0, schedule, rtol: float = 1e-10, atol: float = 1e-12, t_span=None) -> np.ndarray:
    """Integrate ``i d psi/dt = H psi``; ``psi0`` may hold states in columns."""
    psi0 = np.asarray(psi0, dtype=complex)
    shape = psi0.shape
    n = shape[0]
    edges = _segments(schedule, t_span)

    def rhs(t, y):
        return (-1j * hamiltonian_fn(t) @ y.reshape(shape)).ravel()

    y, _, _ = _integrate(rhs, psi0, edges, rtol, atol)
    psi = y.reshape(shape)
    drift = np.abs(np.linalg.norm(psi, axis=0) - np.linalg.norm(psi0, axis=0)).max()
    if drift > 1e-6:
        raise ToleranceNotMet(f"norm drift {drift:.2e}")
    return psi


def write_trajectory_csv(result: MasterResult, path, labels: Sequence[str] | None = None) -> None:
    """Samples as ``t, populations..., coherence_norm``."""
    n = result.rho.shape[-1]
    labels = list(labels) if labels is not None else [f"p{i}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + labels + ["coherence_norm"])
        for t, r in zip(result.times, result.samples):
            pops = np.real(np.diag(r))
            coh = np.linalg.norm(r - np.diag(np.diag(r)))
            w.writerow(["%.6e" % t] + ["%.6e" % p for p in pops] + ["%.6e" % coh])


# ------------------------------------------------------------- fidelity


@dataclass
class ChannelReport:
    """Images of the input Pauli basis and the derived figures of merit."""

    images: np.ndarray  # (4, n, n): images of 1, X, Y, Z
    fidelity: float
    leakage: float
    dephasing_error: float
    pauli_errors: np.ndarray

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity


_PAULI = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def _embedding(subspace, n):
    sub = np.asarray(subspace)
    if sub.ndim == 1:
        E = np.zeros((n, len(sub)), dtype=complex)
        E[sub, np.arange(len(sub))] = 1.0
        return E
    return sub.astype(complex)


def _pauli_basis(d):
    if d == 2:
        return _PAULI
    # generalised Pauli (clock and shift) operators
    w = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d), 1, axis=0)
    Zm = np.diag(w ** np.arange(d))
    return np.array([np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Zm, b) for a in range(d) for b in range(d)])


def channel_report_from_images(images, target_unitary, out_subspace, n: int, in_dim: int = 2) -> ChannelReport:
    """Figures of merit from images ``M(P_a)`` of the input Pauli basis."""
    images = np.asarray(images, dtype=complex)
    d = in_dim
    P = _pauli_basis(d)
    Eo = _embedding(out_subspace, n)
    U = np.asarray(target_unitary, dtype=complex)
    proj = lambda X: Eo.conj().T @ X @ Eo
    trs = np.array([np.trace(U @ P[a].conj().T @ U.conj().T @ proj(images[a])) for a in range(len(P))])
    tr1 = np.real(np.trace(proj(images[0])))
    F = float(np.real(d * tr1 + np.sum(trs)) / (d * d * (d + 1)))
    leak = float(1 - tr1 / d)
    errs = np.array([1 - 0.5 * np.real(trs[a]) for a in range(1, len(P))]) if d == 2 else np.zeros(0)
    deph = float(max(0.0, (errs[0] + errs[1]) / 6 - errs[2] / 3)) if d == 2 else 0.0
    return ChannelReport(images, F, leak, deph, errs)


def channel_fidelity(channel, target_unitary, qubit_subspace, out_subspace=None, n: int | None = None,
                     check_linearity: bool = True, seed: int = 0) -> ChannelReport:
    """Leakage-aware average fidelity of ``channel`` against ``target_unitary``.

    ``<F> = [d tr_C M(1) + sum_a tr_C(U P_a^+ U^+ M(P_a))] / (d^2 (d+1))``,
    which for a qubit is ``(1/4) tr_C(M(1) + (1/3) sum_j U s_j U^+ M(s_j))``.

    Parameters
    ----------
    channel : callable
        Maps an ``n x n`` operator (or a batch) to its image.
    qubit_subspace : sequence of int or (n, d) array
        Embedding of the computational input states.
    out_subspace : optional
        Embedding of the target states, if different from the input.

    Raises
    ------
    NonLinearChannel
        If a random linear combination is not mapped linearly.
    """
    Ei = np.asarray(qubit_subspace)
    if n is None:
        n = Ei.shape[0] if Ei.ndim == 2 else int(Ei.max()) + 1
    Ei = _embedding(qubit_subspace, n)
    d = Ei.shape[1]
    out_subspace = qubit_subspace if out_subspace is None else out_subspace
    P = _pauli_basis(d)
    inputs = np.array([Ei @ p @ Ei.conj().T for p in P])
    images = np.array([channel(x) for x in inputs])
    if check_linearity:
        rng = np.random.default_rng(seed)
        c = rng.normal(size=len(P)) + 1j * rng.normal(size=len(P))
        lhs = channel(np.tensordot(c, inputs, axes=1))
        rhs = np.tensordot(c, images, axes=1)
        if np.abs(lhs - rhs).max() > 1e-6 * max(1.0, np.abs(rhs).max()):
            raise NonLinearChannel(f"linearity violated by {np.abs(lhs - rhs).max():.2e}")
    return channel_report_from_images(images, target_unitary, out_subspace, n, d)
