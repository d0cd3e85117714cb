"""Hyperfine and Zeeman structure of a single fine-structure level.

The Hamiltonian in the product basis ``|M_J, M_I>`` (entries in MHz, field in
Gauss) is

    H = A I.J + g_J mu_B B J_z - (mu_I / I) mu_N B I_z

Eigenstates carry adiabatic ``(F, M)`` labels obtained by following each
eigenvector from near-zero field along a logarithmic ramp. Total ``M`` is
conserved at every field, so each ``M`` block is diagonalised separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import constants as sc
from scipy.optimize import linear_sum_assignment

from .angular import twice
from .exceptions import LabelCrossing, MissingHyperfineConstant, NoSignChange

__all__ = [
    "MU_B_MHZ_PER_G",
    "MU_N_MHZ_PER_G",
    "ManifoldHamiltonian",
    "DressedState",
    "Sensitivity",
    "product_basis",
    "angular_operators",
    "hamiltonian",
    "eigenstates",
    "find_state",
    "sensitivity",
    "find_clock_point",
    "nuclear_purity",
    "moment_matrix",
]

MU_B_MHZ_PER_G = sc.physical_constants["Bohr magneton in Hz/T"][0] * 1e-4 * 1e-6
MU_N_MHZ_PER_G = sc.physical_constants["nuclear magneton in MHz/T"][0] * 1e-4

RAMP_STEPS = 400
MIN_OVERLAP = 0.9


def product_basis(twoJ: int, twoI: int) -> list[tuple[Fraction, Fraction]]:
    """Basis labels ``(M_J, M_I)`` with both projections descending."""
    return [
        (Fraction(mj, 2), Fraction(mi, 2))
        for mj in range(twoJ, -twoJ - 1, -2)
        for mi in range(twoI, -twoI - 1, -2)
    ]


def _spin_ops(two_j: int):
    j = two_j / 2
    m = np.arange(two_j, -two_j - 1, -2) / 2
    jz = np.diag(m)
    jp = np.zeros((two_j + 1, two_j + 1))
    for k in range(1, two_j + 1):
        # <m+1|J+|m> with m = m[k]
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return jz, jp, jp.T.copy()


def angular_operators(twoJ: int, twoI: int) -> dict[str, np.ndarray]:
    """Spin matrices on the product space: Jz, J+, J-, Iz, I+, I-."""
    jz, jp, jm = _spin_ops(twoJ)
    iz, ip, im = _spin_ops(twoI)
    eJ, eI = np.eye(twoJ + 1), np.eye(twoI + 1)
    return {
        "Jz": np.kron(jz, eI), "Jp": np.kron(jp, eI), "Jm": np.kron(jm, eI),
        "Iz": np.kron(eJ, iz), "Ip": np.kron(eJ, ip), "Im": np.kron(eJ, im),
    }


@dataclass(frozen=True)
class ManifoldHamiltonian:
    level: str
    B: float
    matrix: np.ndarray
    basis: tuple


@dataclass(frozen=True)
class DressedState:
    """Field-dependent eigenstate with its adiabatic ``(F, M)`` label."""

    level: str
    B: float
    energy: float
    amplitudes: np.ndarray
    label: tuple[Fraction, Fraction]
    Iz_expect: float
    twoJ: int = 0
    twoI: int = 1

    @property
    def F(self) -> Fraction:
        return self.label[0]

    @property
    def M(self) -> Fraction:
        return self.label[1]

    def __repr__(self):
        return (
            f"DressedState({self.level}, B={self.B:g} G, F={self.F}, M={self.M}, "
            f"E={self.energy:.6f} MHz)"
        )


def _resolve(level, A, g_J, nucleus):
    if A is None:
        A = level.A_hfs
    if A is None:
        if level.twoJ == 0 or nucleus.I.twice_value == 0:
            A = 0.0
        else:
            raise MissingHyperfineConstant(level.id)
    if g_J is None:
        g_J = level.g_J
    return float(A), float(g_J)


def _parts(twoJ, twoI, A, g_J, mu_I, I):
    ops = angular_operators(twoJ, twoI)
    IJ = ops["Iz"] @ ops["Jz"] + 0.5 * (ops["Ip"] @ ops["Jm"] + ops["Im"] @ ops["Jp"])
    H0 = A * IJ
    zee = g_J * MU_B_MHZ_PER_G * ops["Jz"]
    if I > 0:
        zee = zee - (mu_I / I) * MU_N_MHZ_PER_G * ops["Iz"]
    return H0, zee, ops


def hamiltonian(level, nucleus, B: float, A: float | None = None, g_J: float | None = None) -> ManifoldHamiltonian:
    """Hyperfine plus Zeeman Hamiltonian in MHz."""
    A, g_J = _resolve(level, A, g_J, nucleus)
    H0, zee, _ = _parts(level.twoJ, nucleus.I.twice_value, A, g_J, nucleus.mu_I, nucleus.i)
    basis = tuple(product_basis(level.twoJ, nucleus.I.twice_value))
    return ManifoldHamiltonian(level.id, float(B), H0 + B * zee, basis)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # largest component real and positive; v has states in columns
    idx = np.argmax(np.abs(v), axis=-2)
    ph = np.take_along_axis(v, idx[..., None, :], axis=-2)
    return v * (np.abs(ph) / ph)


def _block_ramp(H0b, Zb, fields):
    """Diagonalise one M block along a field ramp with overlap continuation."""
    n = H0b.shape[0]
    fields = np.asarray(fields, dtype=float)
    Hs = H0b[None] + fields[:, None, None] * Zb[None]
    w, v = np.linalg.eigh(Hs)
    v = _fix_phase(v)
    # fast path: eigh ordering already continuous along the whole ramp
    ov_all = np.abs(np.einsum("kij,kil->kjl", v[:-1].conj(), v[1:]))
    diag = np.diagonal(ov_all, axis1=1, axis2=2)
    off = ov_all - np.einsum("kj,jl->kjl", diag, np.eye(n))
    if diag.min() >= MIN_OVERLAP and (n == 1 or (diag[:, :, None] - off).min() > 1e-9):
        return w[-1], v[-1]
    prev = v[0]
    refined = 0
    k = 1
    while k < len(fields):
        cur_w, cur_v = w[k], v[k]
        ov = np.abs(prev.conj().T @ cur_v)
        r, c = linear_sum_assignment(-ov)
        if ov[r, c].min() < MIN_OVERLAP:
            if refined > 20:
                raise LabelCrossing(f"overlap {ov[r, c].min():.3f} near B = {fields[k]:g} G")
            refined += 1
            mid = np.sqrt(max(fields[k - 1], 1e-12) * fields[k])
            fields = np.insert(fields, k, mid)
            Hm = H0b + mid * Zb
            wm, vm = np.linalg.eigh(Hm)
            vm = _fix_phase(vm)
            w = np.insert(w, k, wm, axis=0)
            v = np.insert(v, k, vm, axis=0)
            continue
        srt = np.sort(ov, axis=1)
        if n > 1 and np.any(srt[:, -1] - srt[:, -2] < 1e-9):
            raise LabelCrossing(f"degenerate continuation near B = {fields[k]:g} G")
        perm = np.empty(n, dtype=int)
        perm[r] = c
        # column j of the new frame continues column j of the previous frame
        cur_v = cur_v[:, perm]
        cur_w = cur_w[perm]
        phase = np.sum(prev.conj() * cur_v, axis=0)
        cur_v = cur_v * (np.abs(phase) / np.where(phase == 0, 1, phase))
        w[k], v[k] = cur_w, cur_v
        prev = cur_v
        k += 1
    return w[-1], v[-1]


def _initial_labels(H0b, Zb, b0, Fsq_b):
    w, v = np.linalg.eigh(H0b + b0 * Zb)
    v = _fix_phase(v)
    f2 = np.real(np.einsum("ij,ik,kj->j", v.conj(), Fsq_b, v))
    return w, v, f2


def eigenstates(
    level,
    nucleus,
    B: float,
    A: float | None = None,
    g_J: float | None = None,
    steps: int = RAMP_STEPS,
) -> list[DressedState]:
    """All dressed states of ``level`` at field ``B`` (Gauss), sorted by energy.

    Parameters
    ----------
    level : Level
        Fine-structure level; its ``A_hfs`` and ``g_J`` are used unless
        overridden through ``A`` (MHz) or ``g_J``.
    nucleus : NucleusSpec
    B : float
        Bias field in Gauss, ``B >= 0``.

    Raises
    ------
    MissingHyperfineConstant
        If the level has ``J > 0`` and no hyperfine constant is available.
    """
    if B < 0:
        raise ValueError("B must be non-negative")
    A, g_J = _resolve(level, A, g_J, nucleus)
    twoJ, twoI = level.twoJ, nucleus.I.twice_value
    H0, zee, ops = _parts(twoJ, twoI, A, g_J, nucleus.mu_I, nucleus.i)
    basis = product_basis(twoJ, twoI)
    Fz = ops["Jz"] + ops["Iz"]
    Fp = ops["Jp"] + ops["Ip"]
    Fsq = Fz @ Fz + 0.5 * (Fp @ Fp.T + Fp.T @ Fp)
    Mtot = np.array([float(mj + mi) for mj, mi in basis])
    dim = len(basis)
    b_start = max(B / 1e4, 1e-3)
    out = []
    for M in sorted(set(Mtot), reverse=True):
        idx = np.flatnonzero(Mtot == M)
        H0b, Zb = H0[np.ix_(idx, idx)], zee[np.ix_(idx, idx)]
        Fsq_b = Fsq[np.ix_(idx, idx)]
        # adiabatic labels fixed at the start of the ramp
        w0, v0, f2 = _initial_labels(H0b, Zb, 0.0 if B == 0 else b_start, Fsq_b)
        allowed = sorted(
            {Fraction(f, 2) for f in range(abs(twoJ - twoI), twoJ + twoI + 1, 2) if f >= abs(2 * M)}
        )
        rank = np.argsort(f2)
        Fs = [None] * len(idx)
        for r, col in enumerate(rank):
            Fs[col] = allowed[r]
        if B == 0 or B <= b_start:
            wB, vB = np.linalg.eigh(H0b + B * Zb)
            vB = _fix_phase(vB)
            if B == 0:
                wB, vB = w0, v0
        else:
            fields = np.concatenate([[b_start], np.geomspace(b_start, B, steps)[1:]])
            wB, vB = _block_ramp(H0b, Zb, fields)
        for j in range(len(idx)):
            amp = np.zeros(dim, dtype=complex)
            amp[idx] = vB[:, j]
            iz = float(np.real(amp.conj() @ ops["Iz"] @ amp))
            out.append(
                DressedState(
                    level=level.id,
                    B=float(B),
                    energy=float(wB[j]),
                    amplitudes=amp,
                    label=(Fs[j], Fraction(M).limit_denominator(2)),
                    Iz_expect=iz,
                    twoJ=twoJ,
                    twoI=twoI,
                )
            )
    out.sort(key=lambda s: (s.energy, -s.M))
    return out


def find_state(states: Sequence[DressedState], F, M) -> DressedState:
    """Return the state with adiabatic label ``(F, M)``."""
    tF, tM = twice(F), twice(M)
    for s in states:
        if twice(s.F) == tF and twice(s.M) == tM:
            return s
    raise KeyError(f"no state with F={F}, M={M}")


def _splitting(level, nucleus, a, b, B, **kw) -> float:
    st = eigenstates(level, nucleus, B, **kw)
    return find_state(st, *a).energy - find_state(st, *b).energy


class Sensitivity(tuple):
    """``(first_order Hz/G, second_order Hz/G^2)`` with the steps used."""

    def __new__(cls, first, second, h1, h2):
        obj = super().__new__(cls, (first, second))
        obj.step_first = h1
        obj.step_second = h2
        return obj

    @property
    def first_order(self):
        return self[0]

    @property
    def second_order(self):
        return self[1]

    def report(self) -> str:
        return (
            f"first order {self[0]:.6e} Hz/G (central step {self.step_first:g} G); "
            f"second order {self[1]:.6e} Hz/G^2 (central step {self.step_second:g} G)"
        )


def _steps(B):
    return max(0.01, 1e-4 * B), max(0.1, 1e-3 * B)


def sensitivity(level, nucleus, state_a_label, state_b_label, B: float, **kw) -> Sensitivity:
    """Field sensitivity of the transition frequency ``E_a - E_b``.

    Central differences with steps ``max(0.01 G, 1e-4 B)`` (first order) and
    ``max(0.1 G, 1e-3 B)`` (second order). Near ``B = 0`` the stencil is shifted
    to stay at non-negative fields.

    Raises
    ------
    LabelCrossing
        If the adiabatic continuation is ambiguous at any stencil point.
    """
    h1, h2 = _steps(B)
    f = lambda b: _splitting(level, nucleus, state_a_label, state_b_label, b, **kw)
    c1 = max(B, h1)
    c2 = max(B, h2)
    d1 = (f(c1 + h1) - f(c1 - h1)) / (2 * h1)
    f0 = f(c2)
    d2 = (f(c2 + h2) - 2 * f0 + f(c2 - h2)) / h2 ** 2
    return Sensitivity(d1 * 1e6, d2 * 1e6, h1, h2)


def _first_order(level, nucleus, a, b, B, **kw):
    h1, _ = _steps(B)
    c = max(B, h1)
    f = lambda x: _splitting(level, nucleus, a, b, x, **kw)
    return (f(c + h1) - f(c - h1)) / (2 * h1)


def find_clock_point(level, nucleus, pair, B_range=(1.0, 1000.0), tol: float = 0.01, n_scan: int = 64, **kw):
    """Field where the first-order sensitivity of ``pair`` vanishes.

    Returns
    -------
    (B_star, f_q, curvature)
        Field in Gauss, transition frequency in MHz and the curvature ``c`` in
        kHz/G^2 of ``f(B) = f_q + c (B - B_star)^2``.

    Raises
    ------
    NoSignChange
        If the first-order sensitivity keeps its sign over ``B_range``.
    """
    a, b = pair
    lo, hi = map(float, B_range)
    grid = np.geomspace(max(lo, 1e-3), hi, n_scan) if lo > 0 else np.linspace(lo, hi, n_scan)
    d = np.array([_first_order(level, nucleus, a, b, x, **kw) for x in grid])
    sign_change = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)
    if len(sign_change) == 0:
        raise NoSignChange(f"df/dB keeps sign on [{lo:g}, {hi:g}] G")
    i = sign_change[0]
    x0, x1, d0 = grid[i], grid[i + 1], d[i]
    while x1 - x0 > tol:
        xm = 0.5 * (x0 + x1)
        dm = _first_order(level, nucleus, a, b, xm, **kw)
        if np.sign(dm) == np.sign(d0) and dm != 0:
            x0, d0 = xm, dm
        else:
            x1 = xm
    Bs = 0.5 * (x0 + x1)
    fq = _splitting(level, nucleus, a, b, Bs, **kw)
    sens = sensitivity(level, nucleus, a, b, Bs, **kw)
    # quadratic coefficient of f(B) about the turning point
    return float(Bs), float(abs(fq)), float(0.5 * sens.second_order * 1e-3 * np.sign(fq))


def nuclear_purity(state: DressedState) -> float:
    """Expectation value of ``I_z`` in the dressed state."""
    return state.Iz_expect


def moment_matrix(level, nucleus, bra: Sequence[DressedState], ket: Sequence[DressedState], q: int, g_J: float | None = None) -> np.ndarray:
    """Spherical component ``q`` of the magnetic moment, in Bohr magnetons.

    ``mu = -g_J mu_B J + (mu_I / I) mu_N I`` evaluated between dressed states
    of one level.
    """
    if g_J is None:
        g_J = level.g_J
    ops = angular_operators(level.twoJ, nucleus.I.twice_value)
    ratio = MU_N_MHZ_PER_G / MU_B_MHZ_PER_G
    gi = (nucleus.mu_I / nucleus.i) * ratio if nucleus.i > 0 else 0.0
    if q == 0:
        Jq, Iq = ops["Jz"], ops["Iz"]
    elif q == 1:
        Jq, Iq = -ops["Jp"] / np.sqrt(2), -ops["Ip"] / np.sqrt(2)
    elif q == -1:
        Jq, Iq = ops["Jm"] / np.sqrt(2), ops["Im"] / np.sqrt(2)
    else:
        raise ValueError("q must be -1, 0 or 1")
    mu = -g_J * Jq + gi * Iq
    Vb = np.array([s.amplitudes for s in bra])
    Vk = np.array([s.amplitudes for s in ket])
    return Vb.conj() @ mu @ Vk.T
