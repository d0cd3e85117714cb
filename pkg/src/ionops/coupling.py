"""Laser tones and their matrix elements between dressed states.

Conventions
-----------
* A tone with peak field ``E0`` couples ``|j> -> |k>`` with Rabi angular
  frequency ``Omega_kj = E0 <k| d.eps |j> / hbar``; the rotating-frame
  Hamiltonian carries ``Omega / 2`` off the diagonal.
* ``d.eps = sum_q a_q d_q`` with ``a_q = e_q* . eps`` so that ``a_{+1}``
  multiplies the component raising ``M``.
* M1 couples the magnetic amplitude ``E0 / c`` along ``b = k x eps``.
* E2 uses the plane-wave gradient: ``Omega = (E0 k / 2 hbar) <k| sum_q c_q Q_q |j>``
  with ``c_q = sqrt(2/3) (-1)^q [k (x) eps]^(2)_{-q}`` and ``Q_q = e r^2 C^(2)_q``.
  This is the operator normalisation behind the E2 rate prefactor in
  :mod:`ionops.registry`; the golden-rule integral over emission directions
  recovers that rate (see ``tests/test_coupling.py``).

Reduced elements are tabulated as ``<upper||T||lower>``; the reversed element
is ``(-1)^(J_u - J_l)`` times it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import constants as sc

from .angular import clebsch_gordan, spherical_basis, wigner_eckart
from .exceptions import DetuningTooSmall, FieldMismatch, MultipoleMismatch, NonTransversePolarization
from .registry import RANK

__all__ = [
    "UNIT_SI",
    "LaserTone",
    "CouplingMatrix",
    "RamanSystem",
    "RamanResult",
    "beam_peak_field",
    "level_angular_frequency",
    "state_angular_frequencies",
    "tone_amplitudes",
    "sublevel_operator",
    "multipole_matrix",
    "rabi_matrix",
    "build_raman_system",
    "effective_couplings",
    "raman_effective",
]

A0 = sc.physical_constants["Bohr radius"][0]
MU_B = sc.physical_constants["Bohr magneton"][0]
UNIT_SI = {"E1": sc.e * A0, "M1": MU_B, "E2": sc.e * A0 ** 2}
Z_AXIS = np.array([0.0, 0.0, 1.0])


def beam_peak_field(power: float, waist: float) -> float:
    """Peak electric field (V/m) at the centre of a Gaussian beam.

    ``I0 = 2 P / (pi w0^2)`` and ``E0 = sqrt(2 I0 / (c eps0))``.
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    if waist <= 0:
        raise ValueError("waist must be positive")
    I0 = 2.0 * power / (np.pi * waist ** 2)
    return float(np.sqrt(2.0 * I0 / (sc.c * sc.epsilon_0)))


def beam_power(peak_field: float, waist: float) -> float:
    """Inverse of :func:`beam_peak_field`."""
    I0 = 0.5 * sc.c * sc.epsilon_0 * peak_field ** 2
    return float(I0 * np.pi * waist ** 2 / 2.0)


@dataclass(frozen=True)
class LaserTone:
    """One monochromatic laser field.

    Parameters
    ----------
    angular_frequency : float
        Absolute angular frequency (rad/s).
    polarization : complex array_like, shape (3,)
        Jones vector; normalised on construction.
    k_dir : array_like, shape (3,)
        Propagation direction; normalised on construction.
    peak_field : float
        Peak electric field amplitude (V/m).
    chirp : float
        Frequency offset (rad/s) applied in proportion to the squared pulse
        envelope, used for light-shift compensation.
    """

    angular_frequency: float
    polarization: np.ndarray
    k_dir: np.ndarray
    peak_field: float = 0.0
    envelope_id: str | None = None
    chirp: float = 0.0
    name: str = ""

    def __post_init__(self):
        k = np.asarray(self.k_dir, dtype=float)
        eps = np.asarray(self.polarization, dtype=complex)
        if np.linalg.norm(k) == 0 or np.linalg.norm(eps) == 0:
            raise ValueError("k_dir and polarization must be non-zero")
        k = k / np.linalg.norm(k)
        eps = eps / np.linalg.norm(eps)
        if abs(np.dot(eps, k)) > 1e-9:
            raise NonTransversePolarization(f"|eps.k| = {abs(np.dot(eps, k)):.3e}")
        if self.peak_field < 0:
            raise ValueError("peak_field must be non-negative")
        object.__setattr__(self, "k_dir", k)
        object.__setattr__(self, "polarization", eps)

    @classmethod
    def from_power(cls, angular_frequency, polarization, k_dir, power, waist, **kw) -> "LaserTone":
        return cls(angular_frequency, polarization, k_dir, beam_peak_field(power, waist), **kw)

    @property
    def wavelength_nm(self) -> float:
        return 2 * np.pi * sc.c / self.angular_frequency * 1e9

    @property
    def wavenumber(self) -> float:
        return self.angular_frequency / sc.c

    def with_field(self, peak_field: float) -> "LaserTone":
        return replace(self, peak_field=float(peak_field))


def level_angular_frequency(level) -> float:
    """Angular frequency of a level's fine-structure energy (rad/s)."""
    return 2 * np.pi * sc.c * 100.0 * level.E_exp


def state_angular_frequencies(states, registry) -> np.ndarray:
    """Absolute angular frequencies of dressed states (rad/s)."""
    return np.array([
        level_angular_frequency(registry[s.level]) + 2 * np.pi * 1e6 * s.energy for s in states
    ])


def _spherical_components(vec, basis) -> dict[int, complex]:
    # u_q = e_q . u
    em, e0, ep = basis
    return {-1: complex(np.dot(em, vec)), 0: complex(np.dot(e0, vec)), 1: complex(np.dot(ep, vec))}


def tone_amplitudes(tone: LaserTone, multipole: str, quant_axis=Z_AXIS, ref_dir=None) -> dict[int, complex]:
    """Coefficients ``c_q`` with ``coupling operator = sum_q c_q T_q``.

    ``ref_dir`` fixes the transverse axis of the spherical basis; tones that
    interfere must share it.
    """
    basis = spherical_basis(quant_axis, tone.k_dir if ref_dir is None else ref_dir)
    eps, k = tone.polarization, tone.k_dir
    if multipole == "E1":
        return {q: complex(np.vdot(e, eps)) for q, e in zip((-1, 0, 1), basis)}
    if multipole == "M1":
        b = np.cross(k, eps)
        return {q: complex(np.vdot(e, b)) for q, e in zip((-1, 0, 1), basis)}
    if multipole == "E2":
        ku = _spherical_components(k, basis)
        eu = _spherical_components(eps, basis)
        out = {}
        for q in range(-2, 3):
            p = -q
            t = 0j
            for q1 in (-1, 0, 1):
                q2 = p - q1
                if abs(q2) <= 1:
                    t += clebsch_gordan(1, q1, 1, q2, 2, p) * ku[q1] * eu[q2]
            out[q] = np.sqrt(2 / 3) * (-1) ** (q % 2) * t
        return out
    raise MultipoleMismatch(f"unsupported multipole {multipole!r}")


def sublevel_operator(bra_twoJ: int, ket_twoJ: int, twoI: int, rank: int, q: int, reduced: float) -> np.ndarray:
    """``<J' M_J' M_I| T^k_q |J M_J M_I>`` on the product bases (descending order)."""
    mjb = np.arange(bra_twoJ, -bra_twoJ - 1, -2)
    mjk = np.arange(ket_twoJ, -ket_twoJ - 1, -2)
    block = np.zeros((len(mjb), len(mjk)))
    for a, tmb in enumerate(mjb):
        for b, tmk in enumerate(mjk):
            if tmb - tmk == 2 * q:
                block[a, b] = wigner_eckart(bra_twoJ / 2, tmb / 2, rank, q, ket_twoJ / 2, tmk / 2)
    return reduced * np.kron(block, np.eye(twoI + 1))


def _check_field(*groups):
    Bs = {round(s.B, 12) for g in groups for s in g}
    if len(Bs) > 1:
        raise FieldMismatch(f"dressed states evaluated at different fields {sorted(Bs)}")


def _reduced_between(me, bra_level, ket_level) -> float:
    if (me.upper, me.lower) == (bra_level.id, ket_level.id):
        return me.reduced_me
    if (me.lower, me.upper) == (bra_level.id, ket_level.id):
        ph = (bra_level.twoJ - ket_level.twoJ) // 2
        return me.reduced_me * (-1) ** (ph % 2)
    raise MultipoleMismatch(f"element {me.upper}->{me.lower} does not connect {bra_level.id}, {ket_level.id}")


def multipole_matrix(bra, ket, me, registry, q: int) -> np.ndarray:
    """Spherical component ``q`` of the multipole operator (SI units) between dressed states."""
    bl, kl = registry[bra[0].level], registry[ket[0].level]
    rank = RANK[me.multipole]
    twoI = registry.nucleus.I.twice_value
    op = sublevel_operator(bl.twoJ, kl.twoJ, twoI, rank, q, _reduced_between(me, bl, kl))
    Vb = np.array([s.amplitudes for s in bra])
    Vk = np.array([s.amplitudes for s in ket])
    return UNIT_SI[me.multipole] * (Vb.conj() @ op @ Vk.T)


def _field_factor(tone: LaserTone, multipole: str) -> float:
    E0 = tone.peak_field
    if multipole == "E1":
        return E0
    if multipole == "M1":
        return E0 / sc.c
    return 0.5 * E0 * tone.wavenumber


def _drive_matrix(bra, ket, tone, me, registry, quant_axis, ref_dir) -> np.ndarray:
    amps = tone_amplitudes(tone, me.multipole, quant_axis, ref_dir)
    rank = RANK[me.multipole]
    out = np.zeros((len(bra), len(ket)), dtype=complex)
    for q in range(-rank, rank + 1):
        if amps[q] != 0:
            out += amps[q] * multipole_matrix(bra, ket, me, registry, q)
    return _field_factor(tone, me.multipole) * out / sc.hbar


@dataclass(frozen=True)
class CouplingMatrix:
    """Rabi angular frequencies ``Omega[k, j]`` (rad/s) from ``ket[j]`` to ``bra[k]``."""

    bra: tuple
    ket: tuple
    matrix: np.ndarray
    tone: str = ""
    multipole: str = "E1"

    def __getitem__(self, idx):
        return self.matrix[idx]


def rabi_matrix(upper, lower, tone: LaserTone, me, registry, quant_axis=Z_AXIS, ref_dir=None) -> CouplingMatrix:
    """Rabi couplings for absorption from ``lower`` dressed states to ``upper``.

    Raises
    ------
    MultipoleMismatch
        If ``me`` does not connect the two levels.
    FieldMismatch
        If the dressed states were evaluated at different fields.
    """
    upper, lower = list(upper), list(lower)
    _check_field(upper, lower)
    if me.multipole not in RANK:
        raise MultipoleMismatch(f"unsupported multipole {me.multipole!r}")
    if {s.level for s in upper} != {me.upper} or {s.level for s in lower} != {me.lower}:
        raise MultipoleMismatch(f"element {me.upper}->{me.lower} does not match the supplied manifolds")
    mat = _drive_matrix(upper, lower, tone, me, registry, quant_axis, ref_dir)
    return CouplingMatrix(tuple(upper), tuple(lower), mat, tone.name, me.multipole)


# ---------------------------------------------------------------- Raman


@dataclass
class RamanSystem:
    """Single-photon ingredients for adiabatic elimination.

    ``up[l, k, j]`` is ``V^(l)_kj / hbar = E0 <k|d.eps|j> / (2 hbar)`` for
    excited ``k`` and low ``j``; ``down[l, i, k]`` is the counter-rotating
    ``E0 <i|d.eps|k> / (2 hbar)``. ``dip[q+1, k, i] = <k|d_q|i>`` and
    ``dip_down[q+1, i, k] = <i|d_q|k>`` are in C m.
    """

    low: list
    excited: list
    tones: list
    omega_low: np.ndarray
    omega_exc: np.ndarray
    up: np.ndarray
    down: np.ndarray
    dip: np.ndarray
    dip_down: np.ndarray
    excited_levels: list = field(default_factory=list)
    quant_axis: np.ndarray = field(default_factory=lambda: Z_AXIS.copy())
    ref_dir: np.ndarray | None = None

    @property
    def tone_omegas(self) -> np.ndarray:
        return np.array([t.angular_frequency for t in self.tones])


def _group(states):
    groups: dict[str, list[int]] = {}
    for n, s in enumerate(states):
        groups.setdefault(s.level, []).append(n)
    return groups


def build_raman_system(low, excited, tones, registry, quant_axis=Z_AXIS, ref_dir=None) -> RamanSystem:
    """Assemble E1 couplings between low and excited dressed states for every tone."""
    low, excited, tones = list(low), list(excited), list(tones)
    _check_field(low, excited)
    if ref_dir is None:
        ref_dir = tones[0].k_dir if tones else np.array([1.0, 0.0, 0.0])
    nl, ne, nt = len(low), len(excited), len(tones)
    up = np.zeros((nt, ne, nl), dtype=complex)
    down = np.zeros((nt, nl, ne), dtype=complex)
    dip = np.zeros((3, ne, nl), dtype=complex)
    dip_down = np.zeros((3, nl, ne), dtype=complex)
    gl, ge = _group(low), _group(excited)
    for elev, eidx in ge.items():
        for llev, lidx in gl.items():
            found = registry.find(elev, llev, "E1")
            if not found or found[0].reduced_me == 0:
                continue
            me = found[0]
            es = [excited[i] for i in eidx]
            ls = [low[i] for i in lidx]
            for q in (-1, 0, 1):
                dip[q + 1][np.ix_(eidx, lidx)] = multipole_matrix(es, ls, me, registry, q)
                dip_down[q + 1][np.ix_(lidx, eidx)] = multipole_matrix(ls, es, me, registry, q)
            for n, tone in enumerate(tones):
                amps = tone_amplitudes(tone, "E1", quant_axis, ref_dir)
                f = 0.5 * tone.peak_field / sc.hbar
                u = sum(amps[q] * dip[q + 1][np.ix_(eidx, lidx)] for q in (-1, 0, 1))
                d = sum(amps[q] * dip_down[q + 1][np.ix_(lidx, eidx)] for q in (-1, 0, 1))
                up[n][np.ix_(eidx, lidx)] = f * u
                down[n][np.ix_(lidx, eidx)] = f * d
    return RamanSystem(
        low, excited, tones,
        state_angular_frequencies(low, registry), state_angular_frequencies(excited, registry),
        up, down, dip, dip_down, list(ge), np.asarray(quant_axis, float), ref_dir,
    )


def effective_couplings(omega_low, omega_exc, tone_omegas, up, down=None, counter_rotating: bool = True):
    """Adiabatically eliminated two-photon couplings.

    Parameters
    ----------
    omega_low, omega_exc : ndarray
        Absolute angular frequencies of low and excited states.
    tone_omegas : ndarray
        Tone angular frequencies.
    up : ndarray, shape (n_tone, n_exc, n_low)
        ``V^(l)_kj / hbar`` for absorption ``j -> k``.
    down : ndarray, shape (n_tone, n_low, n_exc), optional
        ``V^(l)_ik / hbar`` (counter-rotating elements).

    Returns
    -------
    K : ndarray, shape (n_tone, n_tone, n_low, n_low)
        ``K[l', l, i, j]`` multiplies ``|i><j| exp(-i nu t)``; Hermitian in the
        sense ``K[l, l', j, i] = conj(K[l', l, i, j])``.
    nu : ndarray, same shape
        Tag ``(w_l - w_l') - w_ij``.
    """
    wl = np.asarray(tone_omegas, float)
    wlow = np.asarray(omega_low, float)
    wexc = np.asarray(omega_exc, float)
    up = np.asarray(up, complex)
    nt, ne, nl = up.shape
    # detuning of tone l from k <- j, shape (nt, ne, nl)
    det = wl[:, None, None] - (wexc[None, :, None] - wlow[None, None, :])
    A = up / det
    # C[l', l, i, j] = sum_k conj(up[l', k, i]) up[l, k, j] / det[l, k, j]
    C = np.einsum("aki,bkj->abij", up.conj(), A)
    if counter_rotating and down is not None:
        down = np.asarray(down, complex)
        # w_l - w_ik = w_l + w_k - w_i, shape (nt, nl, ne)
        det2 = wl[:, None, None] + (wexc[None, None, :] - wlow[None, :, None])
        Bm = down / det2
        # second term: sum_k down[l, i, k] conj(down[l', j, k]) / det2[l, i, k]
        C = C - np.einsum("bik,ajk->abij", Bm, down.conj())
    # symmetrise so the generator is Hermitian
    K = 0.5 * (C + np.conj(np.transpose(C, (1, 0, 3, 2))))
    wij = wlow[:, None] - wlow[None, :]
    nu = (wl[None, :, None, None] - wl[:, None, None, None]) - wij[None, None]
    return K, nu


class RamanResult(NamedTuple):
    couplings: np.ndarray
    tags: np.ndarray
    light_shifts: np.ndarray
    system: RamanSystem


def _validity(system: RamanSystem, factor: float):
    wl = system.tone_omegas
    groups = _group(system.excited)
    scale = np.abs(system.up).max() if system.up.size else 0.0
    if scale == 0:
        return
    for lev, idx in groups.items():
        spread = np.ptp(system.omega_exc[idx]) if len(idx) > 1 else 0.0
        for n in range(len(wl)):
            blk = np.abs(system.up[n][idx])
            mask = blk > 1e-9 * scale
            if not mask.any():
                continue
            det = wl[n] - (system.omega_exc[idx][:, None] - system.omega_low[None, :])
            worst = np.abs(det[mask]).min()
            if worst < factor * spread:
                raise DetuningTooSmall(
                    f"tone {n} is {worst / (2 * np.pi * 1e6):.1f} MHz from {lev}, "
                    f"below {factor} x spread {spread / (2 * np.pi * 1e6):.1f} MHz"
                )


def raman_effective(
    low_states,
    excited_states,
    tones,
    registry,
    counter_rotating: bool = True,
    validity_factor: float = 10.0,
    quant_axis=Z_AXIS,
    ref_dir=None,
) -> RamanResult:
    """Effective two-photon interaction in the low-energy space.

    Returns the symmetrised couplings ``K[l', l, i, j]`` (rad/s, entering the
    Hamiltonian as ``K |i><j| exp(-i nu t)``), their rotating frequencies
    ``nu = (w_l - w_l') - w_ij``, the static AC Stark shifts
    ``light_shifts[i, l] = K[l, l, i, i]`` and the underlying system.

    Raises
    ------
    DetuningTooSmall
        If any coupled tone lies closer to an excited manifold than
        ``validity_factor`` times that manifold's spread.
    """
    system = build_raman_system(low_states, excited_states, tones, registry, quant_axis, ref_dir)
    _validity(system, validity_factor)
    K, nu = effective_couplings(
        system.omega_low, system.omega_exc, system.tone_omegas, system.up, system.down, counter_rotating
    )
    nt = len(system.tones)
    ls = np.real(np.array([np.diag(K[n, n]) for n in range(nt)])).T if nt else np.zeros((len(system.low), 0))
    return RamanResult(K, nu, ls, system)
