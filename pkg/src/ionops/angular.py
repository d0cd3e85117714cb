"""Angular-momentum algebra with exact rational arithmetic.

All quantum numbers are handled internally as doubled integers so that
half-integer values are exact. Wigner symbols are evaluated with the Racah
sums over Python integers and only the final square root is taken in floating
point. Phases follow the Condon-Shortley convention; reduced matrix elements
follow the Wigner-Eckart convention

    <j m | T^k_q | j' m'> = (-1)**(j - m) * (j k j'; -m q m') * <j || T^k || j'>
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from numbers import Rational

import numpy as np

from .exceptions import NonTransversePolarization

__all__ = [
    "HalfInt",
    "SphericalAmplitudes",
    "half",
    "twice",
    "wigner3j",
    "wigner6j",
    "clebsch_gordan",
    "wigner_eckart",
    "spherical_basis",
    "decompose_polarization",
    "rotation_matrix",
]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer stored as twice its value."""

    twice_value: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        return cls(twice(value))

    @property
    def value(self) -> float:
        return self.twice_value / 2

    def __float__(self):
        return self.twice_value / 2

    def __neg__(self):
        return HalfInt(-self.twice_value)

    def __add__(self, other):
        return HalfInt(self.twice_value + twice(other))

    def __sub__(self, other):
        return HalfInt(self.twice_value - twice(other))

    def as_fraction(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    def __str__(self):
        if self.twice_value % 2 == 0:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"


def twice(x) -> int:
    """Return ``2*x`` as an exact integer, rejecting non half-integers."""
    if isinstance(x, HalfInt):
        return x.twice_value
    if isinstance(x, (int, np.integer)):
        return 2 * int(x)
    if isinstance(x, Rational):
        t = 2 * Fraction(x)
        if t.denominator != 1:
            raise ValueError(f"{x} is not a half-integer")
        return int(t)
    t = 2.0 * float(x)
    r = round(t)
    if abs(t - r) > 1e-9:
        raise ValueError(f"{x} is not a half-integer")
    return int(r)


def half(twice_value: int) -> Fraction:
    """Inverse of :func:`twice`."""
    return Fraction(twice_value, 2)


@lru_cache(maxsize=4096)
def _fact(n: int) -> int:
    return factorial(n)


def _triangle(a: int, b: int, c: int) -> bool:
    # doubled arguments
    return (
        a >= 0 and b >= 0 and c >= 0
        and (a + b + c) % 2 == 0
        and abs(a - b) <= c <= a + b
    )


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    # triangle coefficient Delta(abc) as an exact rational, doubled arguments
    return Fraction(
        _fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
        _fact((a + b + c) // 2 + 1),
    )


def _signed_sqrt(s: Fraction, r: Fraction) -> float:
    """Evaluate ``s * sqrt(r)`` with one rounding of the exact square."""
    if s == 0 or r == 0:
        return 0.0
    mag = sqrt(float(s * s * r))
    return mag if s > 0 else -mag


def _3j_exact(t1, t2, t3, u1, u2, u3):
    """Return (sum, radicand) such that the symbol is sum*sqrt(radicand)."""
    if u1 + u2 + u3 != 0:
        return Fraction(0), Fraction(0)
    if not _triangle(t1, t2, t3):
        return Fraction(0), Fraction(0)
    for t, u in ((t1, u1), (t2, u2), (t3, u3)):
        if abs(u) > t or (t - u) % 2:
            return Fraction(0), Fraction(0)
    j1m1p, j1m1m = (t1 + u1) // 2, (t1 - u1) // 2
    j2m2p, j2m2m = (t2 + u2) // 2, (t2 - u2) // 2
    j3m3p, j3m3m = (t3 + u3) // 2, (t3 - u3) // 2
    a = (t3 - t2 + u1) // 2
    b = (t3 - t1 - u2) // 2
    c = (t1 + t2 - t3) // 2
    kmin = max(0, -a, -b)
    kmax = min(c, j1m1m, j2m2p)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k) * _fact(a + k) * _fact(b + k) * _fact(c - k)
            * _fact(j1m1m - k) * _fact(j2m2p - k)
        )
        s += Fraction(-1 if k % 2 else 1, den)
    phase = (t1 - t2 - u3) // 2
    if phase % 2:
        s = -s
    r = _delta_sq(t1, t2, t3) * (
        _fact(j1m1p) * _fact(j1m1m) * _fact(j2m2p) * _fact(j2m2m)
        * _fact(j3m3p) * _fact(j3m3m)
    )
    return s, r


@lru_cache(maxsize=65536)
def _3j_cached(t1, t2, t3, u1, u2, u3) -> float:
    s, r = _3j_exact(t1, t2, t3, u1, u2, u3)
    return _signed_sqrt(s, r)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3-j symbol ``(j1 j2 j3; m1 m2 m3)``.

    Arguments may be ints, floats, :class:`fractions.Fraction` or
    :class:`HalfInt`. Selection-rule violations give 0.
    """
    return _3j_cached(twice(j1), twice(j2), twice(j3), twice(m1), twice(m2), twice(m3))


def _6j_exact(t1, t2, t3, t4, t5, t6):
    triads = ((t1, t2, t3), (t1, t5, t6), (t4, t2, t6), (t4, t5, t3))
    if not all(_triangle(*tr) for tr in triads):
        return Fraction(0), Fraction(0)
    a = [sum(tr) // 2 for tr in triads]
    b = [(t1 + t2 + t4 + t5) // 2, (t2 + t3 + t5 + t6) // 2, (t3 + t1 + t6 + t4) // 2]
    s = Fraction(0)
    for t in range(max(a), min(b) + 1):
        den = 1
        for ai in a:
            den *= _fact(t - ai)
        for bi in b:
            den *= _fact(bi - t)
        s += Fraction((-1 if t % 2 else 1) * _fact(t + 1), den)
    r = Fraction(1)
    for tr in triads:
        r *= _delta_sq(*tr)
    return s, r


@lru_cache(maxsize=65536)
def _6j_cached(t1, t2, t3, t4, t5, t6) -> float:
    s, r = _6j_exact(t1, t2, t3, t4, t5, t6)
    return _signed_sqrt(s, r)


def wigner6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6-j symbol ``{j1 j2 j3; j4 j5 j6}``; 0 if any triad fails."""
    return _6j_cached(twice(j1), twice(j2), twice(j3), twice(j4), twice(j5), twice(j6))


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | J M>``."""
    t1, t2, tJ, tM = twice(j1), twice(j2), twice(J), twice(M)
    ph = (t1 - t2 + tM) // 2
    if (t1 - t2 + tM) % 2:
        return 0.0
    v = sqrt(tJ + 1) * _3j_cached(t1, t2, tJ, twice(m1), twice(m2), -tM)
    return -v if ph % 2 else v


def wigner_eckart(j, m, k, q, jp, mp) -> float:
    """Geometric factor ``(-1)**(j-m) (j k j'; -m q m')``."""
    tj, tm = twice(j), twice(m)
    v = _3j_cached(tj, twice(k), twice(jp), -tm, twice(q), twice(mp))
    return -v if ((tj - tm) // 2) % 2 else v


@dataclass(frozen=True)
class SphericalAmplitudes:
    """Polarization amplitudes on the ``sigma-``, ``pi``, ``sigma+`` components.

    The coupling operator is ``d . eps = sum_q a_q d_q`` so that ``a_plus``
    multiplies the component that raises ``M`` by one.
    """

    a_minus: complex
    a_zero: complex
    a_plus: complex

    def __getitem__(self, q: int) -> complex:
        return {-1: self.a_minus, 0: self.a_zero, 1: self.a_plus}[q]

    def as_array(self) -> np.ndarray:
        """Amplitudes ordered ``q = -1, 0, +1``."""
        return np.array([self.a_minus, self.a_zero, self.a_plus], dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def _frame(quant_axis, k_dir):
    z = np.asarray(quant_axis, dtype=float)
    z = z / np.linalg.norm(z)
    k = np.asarray(k_dir, dtype=float)
    xk = k - np.dot(k, z) * z
    if np.linalg.norm(xk) < 1e-9:
        # k along the axis: pick any fixed perpendicular
        trial = np.eye(3)[np.argmin(np.abs(z))]
        xk = trial - np.dot(trial, z) * z
    # second projection removes the roundoff left when k is nearly along z
    xk = xk - np.dot(xk, z) * z
    x = xk / np.linalg.norm(xk)
    y = np.cross(z, x)
    return x, y, z


def spherical_basis(quant_axis, k_dir=None):
    """Spherical unit vectors ``e_{-1}, e_0, e_{+1}`` in the lab frame.

    The transverse reference axis is the component of ``k_dir`` normal to the
    quantization axis, which makes the decomposition covariant under joint
    rotations.
    """
    x, y, z = _frame(quant_axis, k_dir if k_dir is not None else np.eye(3)[0])
    ep = -(x + 1j * y) / np.sqrt(2)
    em = (x - 1j * y) / np.sqrt(2)
    return em, z.astype(complex), ep


def decompose_polarization(jones, k_dir, quant_axis, tol: float = 1e-9) -> SphericalAmplitudes:
    """Project a Jones vector onto spherical components about ``quant_axis``.

    Parameters
    ----------
    jones : complex array_like, shape (3,)
        Polarization vector in the lab frame, unit norm.
    k_dir : array_like, shape (3,)
        Propagation direction, unit norm.
    quant_axis : array_like, shape (3,)
        Quantization axis.

    Raises
    ------
    NonTransversePolarization
        If ``|jones . k_dir|`` exceeds ``tol``.
    """
    eps = np.asarray(jones, dtype=complex)
    k = np.asarray(k_dir, dtype=float)
    if abs(np.dot(eps, k)) > tol * max(1.0, np.linalg.norm(eps)):
        raise NonTransversePolarization(f"|eps.k| = {abs(np.dot(eps, k)):.3e}")
    em, e0, ep = spherical_basis(quant_axis, k)
    return SphericalAmplitudes(
        a_minus=complex(np.vdot(em, eps)),
        a_zero=complex(np.vdot(e0, eps)),
        a_plus=complex(np.vdot(ep, eps)),
    )


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about ``axis`` by ``angle`` radians."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
