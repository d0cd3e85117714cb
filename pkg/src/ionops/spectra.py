"""Doppler-broadened, hyperfine-resolved fluorescence spectra.

Voigt profiles from a hand-written Faddeeva function, hyperfine line
patterns from 6-j statistical factors, spectrum synthesis, and a damped
Gauss-Newton multi-component fit with a linear baseline.

Frequencies are in GHz, widths in MHz. A Voigt component is normalised so
that its integral over frequency in GHz equals its amplitude.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import constants as sc
from scipy.integrate import trapezoid

from .angular import HalfInt, wigner6j
from .exceptions import ForbiddenTransition, NoConvergence, SingularNormalMatrix

_TWO_OVER_SQRT_PI = 2 / math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2 * math.pi)
_MHZ_PER_GHZ = 1e3


# ------------------------------------------------------------------ Faddeeva


def _faddeeva_upper(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """w(z) for x >= 0, y >= 0 (Gautschi's scheme with Poppe-Wijers constants)."""
    xs, ys = x / 6.3, y / 4.4
    qrho = xs * xs + ys * ys
    xquad = x * x - y * y
    yquad = 2 * x * y
    out = np.empty(x.shape, complex)

    # power series near the origin
    near = qrho < 0.085264
    if np.any(near):
        xn, yn, xq, yq = x[near], y[near], xquad[near], yquad[near]
        q = (1 - 0.85 * ys[near]) * np.sqrt(qrho[near])
        n = np.rint(6 + 72 * q).astype(int)
        xsum = 1.0 / (2 * n + 1)
        ysum = np.zeros_like(xsum)
        for i in range(int(n.max()), 0, -1):
            act = i <= n
            j = 2 * i - 1
            xaux = (xsum * xq - ysum * yq) / i
            ysum_new = (xsum * yq + ysum * xq) / i
            xsum = np.where(act, xaux + 1.0 / j, xsum)
            ysum = np.where(act, ysum_new, ysum)
        u1 = 1 - _TWO_OVER_SQRT_PI * (xsum * yn + ysum * xn)
        v1 = _TWO_OVER_SQRT_PI * (xsum * xn - ysum * yn)
        e = np.exp(-xq)
        u2, v2 = e * np.cos(yq), -e * np.sin(yq)
        out[near] = (u1 * u2 - v1 * v2) + 1j * (u1 * v2 + v1 * u2)

    # continued fraction, with a Taylor shift inside the unit ellipse
    far = ~near
    if np.any(far):
        xf, yf, qf, ysf = x[far], y[far], qrho[far], ys[far]
        outside = qf > 1
        r = np.where(outside, np.sqrt(qf), (1 - ysf) * np.sqrt(np.clip(1 - qf, 0, None)))
        h = np.where(outside, 0.0, 1.88 * r)
        h2 = 2 * h
        kapn = np.where(outside, 0, np.rint(7 + 34 * r)).astype(int)
        nu = np.where(outside, (3 + 1442 / (26 * r + 77)).astype(int), np.rint(16 + 26 * r)).astype(int)
        shift = h > 0
        with np.errstate(divide="ignore"):
            qlam = np.where(shift, h2 ** kapn, 0.0)
        rx = np.zeros_like(xf)
        ry = np.zeros_like(xf)
        sx = np.zeros_like(xf)
        sy = np.zeros_like(xf)
        for n in range(int(nu.max()), -1, -1):
            act = n <= nu
            np1 = n + 1
            tx = yf + h + np1 * rx
            ty = xf - np1 * ry
            c = 0.5 / (tx * tx + ty * ty)
            rx = np.where(act, c * tx, rx)
            ry = np.where(act, c * ty, ry)
            tay = act & shift & (n <= kapn)
            tx2 = qlam + sx
            sx_new = rx * tx2 - ry * sy
            sy_new = ry * tx2 + rx * sy
            sx = np.where(tay, sx_new, sx)
            sy = np.where(tay, sy_new, sy)
            qlam = np.where(tay, qlam / np.where(h2 > 0, h2, 1.0), qlam)
        re = np.where(shift, _TWO_OVER_SQRT_PI * sx, _TWO_OVER_SQRT_PI * rx)
        im = np.where(shift, _TWO_OVER_SQRT_PI * sy, _TWO_OVER_SQRT_PI * ry)
        re = np.where(yf == 0, np.exp(-xf * xf), re)
        out[far] = re + 1j * im
    return out


def faddeeva(z) -> np.ndarray:
    """Faddeeva function ``w(z) = exp(-z^2) erfc(-i z)``.

    Region-switched: a power series near the origin, the Laplace continued
    fraction in the wings and a continued-fraction-seeded Taylor shift in
    between. Relative accuracy is about 1e-13 in the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    x, y = z.real, z.imag
    lower = y < 0
    # reflect to the upper half plane: w(-z) = 2 exp(-z^2) - w(z)
    xa = np.where(lower, -x, x)
    ya = np.abs(y)
    w = _faddeeva_upper(np.abs(xa), ya)
    w = np.where(xa < 0, np.conj(w), w)
    w[lower] = 2 * np.exp(-z[lower] ** 2) - w[lower]
    return w.reshape(shape)


# ------------------------------------------------------------------ profiles


@dataclass(frozen=True)
class VoigtComponent:
    """One Voigt line: centre (GHz), Gaussian sigma and Lorentzian HWHM (MHz)."""

    center: float
    gaussian_sigma: float
    lorentzian_gamma: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.gaussian_sigma > 0 and self.lorentzian_gamma >= 0):
            raise ValueError("Voigt needs sigma > 0 and gamma >= 0")


def _voigt_raw(x, center, sigma, gamma, amplitude):
    z = ((np.asarray(x, float) - center) * _MHZ_PER_GHZ + 1j * gamma) / (sigma * math.sqrt(2))
    w = faddeeva(z)
    norm = amplitude * _MHZ_PER_GHZ / (sigma * _SQRT_2PI)
    return norm * w.real, z, w, norm


def voigt(x, c: VoigtComponent) -> np.ndarray:
    """Voigt profile of unit area (in GHz) times ``c.amplitude``."""
    return _voigt_raw(x, c.center, c.gaussian_sigma, c.lorentzian_gamma, c.amplitude)[0]


def voigt_fwhm_olivero(sigma: float, gamma: float) -> float:
    """Olivero-Longbothum approximation to the Voigt FWHM (same units as the widths)."""
    fg = 2 * sigma * math.sqrt(2 * math.log(2))
    fl = 2 * gamma
    return 0.5346 * fl + math.sqrt(0.2166 * fl * fl + fg * fg)


# ------------------------------------------------------------------ line patterns


@dataclass(frozen=True)
class SpectralLine:
    """A hyperfine component: centre (GHz), relative strength, ``(F_upper, F_lower)``."""

    center: float
    strength: float
    label: tuple

    def __post_init__(self):
        if not self.strength >= 0:
            raise ValueError("line strength must be non-negative")
        if not math.isfinite(self.center):
            raise ValueError("line centre must be finite")


def _hf_shift(A: float, twoF: int, twoJ: int, twoI: int) -> float:
    K = (twoF * (twoF + 2) - twoJ * (twoJ + 2) - twoI * (twoI + 2)) / 4
    return A * K / 2


def _F_values(twoJ: int, twoI: int) -> list[int]:
    return list(range(abs(twoJ - twoI), twoJ + twoI + 1, 2))


def _e1_connected(upper, lower) -> bool:
    dJ = abs(upper.twoJ - lower.twoJ)
    return upper.parity != lower.parity and dJ <= 2 and not (upper.twoJ == 0 and lower.twoJ == 0)


def transition_frequency_ghz(upper, lower) -> float:
    """Fine-structure transition frequency from the level energies (GHz)."""
    return (upper.E_exp - lower.E_exp) * 100 * sc.c / 1e9


def hyperfine_lines(upper, lower, nucleus, A_upper: float, A_lower: float,
                    center: float | None = None) -> list[SpectralLine]:
    """E1 hyperfine components between two fine-structure levels.

    Centres are ``center + dE_upper(F') - dE_lower(F'')`` with B = 0 hyperfine
    shifts from the A constants (MHz). Strengths are
    ``(2F'+1)(2F''+1) {J' F' I; F'' J'' 1}^2``. ``center`` defaults to the
    level-energy difference.

    Raises
    ------
    ForbiddenTransition
        If the levels are not E1 connected.
    """
    if not _e1_connected(upper, lower):
        raise ForbiddenTransition(f"{upper.id} -> {lower.id} is not an E1 transition")
    twoI = nucleus.I.twice_value
    nu0 = transition_frequency_ghz(upper, lower) if center is None else center
    out = []
    for tFu in _F_values(upper.twoJ, twoI):
        for tFl in _F_values(lower.twoJ, twoI):
            if abs(tFu - tFl) > 2 or (tFu == 0 and tFl == 0):
                continue
            sixj = wigner6j(HalfInt(upper.twoJ), HalfInt(tFu), HalfInt(twoI),
                            HalfInt(tFl), HalfInt(lower.twoJ), HalfInt(2))
            s = (tFu + 1) * (tFl + 1) * sixj ** 2
            if s < 1e-15:
                continue
            shift = _hf_shift(A_upper, tFu, upper.twoJ, twoI) - _hf_shift(A_lower, tFl, lower.twoJ, twoI)
            out.append(SpectralLine(nu0 + shift / _MHZ_PER_GHZ, float(s), (Fraction(tFu, 2), Fraction(tFl, 2))))
    return sorted(out, key=lambda l: l.center)


def extract_hyperfine_constants(centers: Sequence[float], labels: Sequence[tuple], J_upper: float,
                                J_lower: float, I: float, sigmas=None):
    """Least-squares ``(nu0 [GHz], A_upper [MHz], A_lower [MHz])`` from line centres.

    Returns the estimate and its covariance. With ``sigmas`` (GHz) the fit is
    weighted and the covariance absolute; otherwise it is residual scaled and
    is NaN when there are no spare degrees of freedom. A level with J = 0
    has no hyperfine constant and its entry is returned as zero.
    """
    tJu, tJl, tI = round(2 * J_upper), round(2 * J_lower), round(2 * I)
    rows = []
    for Fu, Fl in labels:
        rows.append([1.0, _hf_shift(1.0, round(2 * Fu), tJu, tI) / _MHZ_PER_GHZ,
                     -_hf_shift(1.0, round(2 * Fl), tJl, tI) / _MHZ_PER_GHZ])
    M = np.array(rows)
    y = np.asarray(centers, float)
    ref = y.mean()
    w = np.ones(len(y)) if sigmas is None else 1 / np.asarray(sigmas, float)
    cols = np.abs(M).max(axis=0) > 0
    Mw = M[:, cols] * w[:, None]
    if np.linalg.matrix_rank(Mw) < cols.sum():
        raise ValueError("line labels do not determine the hyperfine constants")
    p, *_ = np.linalg.lstsq(Mw, (y - ref) * w, rcond=None)
    N = Mw.T @ Mw
    cov = np.linalg.inv(N)
    if sigmas is None:
        dof = len(y) - cols.sum()
        resid = (y - ref) - M[:, cols] @ p
        cov = cov * (resid @ resid / dof if dof > 0 else np.nan)
    est = np.zeros(3)
    est[cols] = p
    est[0] += ref
    full = np.zeros((3, 3))
    full[np.ix_(cols, cols)] = cov
    return est, full


# ------------------------------------------------------------------ synthesis


def doppler_fwhm_mhz(temperature: float, wavelength_nm: float, mass_u: float) -> float:
    """Gaussian FWHM ``nu0 sqrt(8 k T ln 2 / (m c^2))`` in MHz."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    nu0 = sc.c / (wavelength_nm * 1e-9)
    m = mass_u * sc.atomic_mass
    return nu0 * math.sqrt(8 * sc.k * temperature * math.log(2) / (m * sc.c ** 2)) / 1e6


def fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / (2 * math.sqrt(2 * math.log(2)))


def synth_spectrum(lines: Sequence[SpectralLine], temperature: float, wavelength_nm: float, mass_u: float,
                   lorentz_gamma: float, grid, scale: float = 1.0, baseline=(0.0, 0.0)) -> np.ndarray:
    """Sum of Doppler-broadened Voigt lines sampled on ``grid`` (GHz).

    Each line contributes a Voigt of area ``scale * strength``;
    ``baseline = (offset, slope per GHz)`` is added about the grid centre.
    """
    if lorentz_gamma < 0:
        raise ValueError("Lorentzian width must be non-negative")
    sigma = fwhm_to_sigma(doppler_fwhm_mhz(temperature, wavelength_nm, mass_u))
    gamma = float(lorentz_gamma)
    grid = np.asarray(grid, float)
    out = np.zeros_like(grid)
    for line in lines:
        out += voigt(grid, VoigtComponent(line.center, sigma, gamma, scale * line.strength))
    x0 = 0.5 * (grid.min() + grid.max())
    return out + baseline[0] + baseline[1] * (grid - x0)


def area(freq_ghz, counts) -> float:
    """Trapezoidal area of a sampled spectrum (counts x GHz)."""
    return float(trapezoid(np.asarray(counts, float), np.asarray(freq_ghz, float)))


# ------------------------------------------------------------------ fitting


@dataclass(frozen=True)
class FitResult:
    """Multi-component Voigt fit.

    ``components`` are sorted by centre. ``errors`` holds the standard errors
    of each component's ``(center, sigma, gamma, amplitude)`` and
    ``baseline_errors`` those of ``(offset, slope)``. ``splittings`` are
    adjacent centre differences (MHz) with standard errors.
    """

    components: tuple
    baseline: tuple
    errors: np.ndarray
    baseline_errors: tuple
    covariance: np.ndarray
    splittings: np.ndarray
    splitting_errors: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)


class _Model:
    """Parameter vector: centres (MHz offsets), amplitudes, widths, baseline."""

    def __init__(self, x, n, shared, x0):
        self.x, self.n, self.shared, self.x0 = np.asarray(x, float), n, shared, x0
        self.dmhz = (self.x - x0) * _MHZ_PER_GHZ
        self.nw = 1 if shared else n

    def unpack(self, p):
        n, nw = self.n, self.nw
        c, a = p[:n], p[n:2 * n]
        s, g = p[2 * n:2 * n + nw], p[2 * n + nw:2 * n + 2 * nw]
        if self.shared:
            s, g = np.repeat(s, n), np.repeat(g, n)
        return c, a, s, g, p[-2], p[-1]

    def valid(self, p):
        _, _, s, g, _, _ = self.unpack(p)
        return np.all(s > 0) and np.all(g >= 0)

    def evaluate(self, p, jac=False):
        c, a, s, g, b0, b1 = self.unpack(p)
        n, nw = self.n, self.nw
        y = b0 + b1 * self.dmhz / _MHZ_PER_GHZ
        J = np.zeros((len(self.x), len(p))) if jac else None
        for k in range(n):
            rt2s = math.sqrt(2) * s[k]
            z = (self.dmhz - c[k] + 1j * g[k]) / rt2s
            w = faddeeva(z)
            norm = _MHZ_PER_GHZ / (s[k] * _SQRT_2PI)
            prof = norm * w.real
            y = y + a[k] * prof
            if jac:
                dw = -2 * z * w + 2j / math.sqrt(math.pi)
                kw = k if not self.shared else 0
                J[:, k] = a[k] * norm * (dw * (-1 / rt2s)).real
                J[:, n + k] = prof
                J[:, 2 * n + kw] += a[k] * (norm * (dw * (-z / s[k])).real - prof / s[k])
                J[:, 2 * n + nw + kw] += a[k] * norm * (dw * (1j / rt2s)).real
        if jac:
            J[:, -2] = 1.0
            J[:, -1] = self.dmhz / _MHZ_PER_GHZ
        return y, J


def fit_spectrum(x, y, n_components: int, init: Sequence[VoigtComponent], baseline=(0.0, 0.0),
                 shared_widths: bool = True, max_iter: int = 500, xtol: float = 1e-10,
                 raise_on_failure: bool = False) -> FitResult:
    """Damped Gauss-Newton fit of ``n_components`` Voigt lines plus a linear baseline.

    The damping is Levenberg-Marquardt: each trial solves
    ``(N + mu diag N) dp = J^T r`` and is accepted only if the residual does
    not increase, so the residual sequence is monotone. Lorentzian widths
    are projected onto ``gamma >= 0`` and a width pinned at zero is frozen
    while the gradient pushes it outward, so a Gaussian-limited line ends
    on the boundary instead of stalling the fit. Convergence is declared
    when the relative step falls below ``xtol``. With ``shared_widths`` all
    components share one Gaussian and one Lorentzian width (common Doppler
    temperature).

    Raises
    ------
    SingularNormalMatrix
        If the normal matrix cannot be inverted.
    NoConvergence
        When ``raise_on_failure`` and ``max_iter`` is reached; otherwise the
        best-so-far result is returned with ``converged=False``.
    """
    if n_components < 1 or len(init) != n_components:
        raise ValueError("need one initial component per fitted component")
    x, y = np.asarray(x, float), np.asarray(y, float)
    lo, hi = x.min(), x.max()
    if any(not lo <= c.center <= hi for c in init):
        raise ValueError("initial centres must lie inside the sample window")
    x0 = 0.5 * (lo + hi)
    model = _Model(x, n_components, shared_widths, x0)
    n, nw = n_components, model.nw
    gsl = slice(2 * n + nw, 2 * n + 2 * nw)
    c0 = np.array([(c.center - x0) * _MHZ_PER_GHZ for c in init])
    a0 = np.array([c.amplitude for c in init])
    s0 = np.array([c.gaussian_sigma for c in init])
    g0 = np.array([c.lorentzian_gamma for c in init])
    if shared_widths:
        s0, g0 = s0.mean(keepdims=True), g0.mean(keepdims=True)
    p = np.concatenate([c0, a0, s0, g0, [baseline[0], baseline[1]]])
    span = (hi - lo) * _MHZ_PER_GHZ
    width_scale = float(np.concatenate([s0, g0]).max())
    ascale = max(np.abs(a0).max(), 1e-300)
    yscale = max(np.abs(y).max(), 1e-300)
    scale = np.concatenate([np.full(n, span), np.full(n, ascale), np.full(2 * nw, width_scale),
                            [yscale, yscale]])
    is_gamma = np.zeros(len(p), bool)
    is_gamma[gsl] = True
    c_lo, c_hi = (lo - x0) * _MHZ_PER_GHZ, (hi - x0) * _MHZ_PER_GHZ

    def residual(p, jac=False):
        f, J = model.evaluate(p, jac=jac)
        return y - f, J

    def check_rank(J, free):
        Js = (J * scale)[:, free]
        if not np.all(np.isfinite(Js)) or np.linalg.matrix_rank(Js) < Js.shape[1]:
            raise SingularNormalMatrix("model parameters are not independently determined")

    r, J = residual(p, jac=True)
    check_rank(J, np.ones(len(p), bool))
    rss = float(r @ r)
    history = [rss]
    converged = False
    mu = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        Js = J * scale
        N = Js.T @ Js
        g = Js.T @ r
        free = ~(is_gamma & (p <= 0) & (g <= 0))
        Nf, gf = N[np.ix_(free, free)], g[free]
        d = np.diag(Nf).copy()
        if not np.all(np.isfinite(Nf)) or np.any(d <= 0):
            raise SingularNormalMatrix("normal matrix has a null direction")
        accepted = False
        rel = np.inf
        while mu < 1e16:
            try:
                sf = np.linalg.solve(Nf + mu * np.diag(d), gf)
            except np.linalg.LinAlgError as exc:
                raise SingularNormalMatrix(str(exc)) from exc
            if not np.all(np.isfinite(sf)):
                raise SingularNormalMatrix("non-finite Gauss-Newton step")
            trial = p.copy()
            trial[free] += sf * scale[free]
            trial[is_gamma] = np.maximum(trial[is_gamma], 0.0)
            trial[:n] = np.clip(trial[:n], c_lo, c_hi)
            rel = float(np.max(np.abs(trial - p) / scale))
            if model.valid(trial):
                rt, _ = residual(trial)
                rss_t = float(rt @ rt)
                if np.isfinite(rss_t) and rss_t <= rss:
                    accepted = True
                    mu = max(mu / 10, 1e-12)
                    break
            if rel < xtol:
                break
            mu *= 10
        if accepted:
            p, rss = trial, rss_t
            r, J = residual(p, jac=True)
        history.append(rss)
        if rel < xtol or not accepted:
            converged = True
            break
    if not converged and raise_on_failure:
        raise NoConvergence(f"no convergence in {max_iter} iterations")

    # parameters pinned on the boundary carry no error
    Js = J * scale
    free = ~(is_gamma & (p <= 0))
    check_rank(J, free)
    cov = np.zeros((len(p), len(p)))
    try:
        Nf = (Js.T @ Js)[np.ix_(free, free)]
        cov[np.ix_(free, free)] = np.linalg.inv(Nf) * np.outer(scale[free], scale[free])
    except np.linalg.LinAlgError as exc:
        raise SingularNormalMatrix(str(exc)) from exc
    dof = len(x) - int(free.sum())
    cov = cov * (rss / dof if dof > 0 else np.nan)
    err = np.sqrt(np.clip(np.diag(cov), 0, None))

    c, a, s, g_, b0, b1 = model.unpack(p)
    ce, ae, se_, ge, _, _ = model.unpack(err)
    order = np.argsort(c)
    comps = tuple(VoigtComponent(x0 + c[k] / _MHZ_PER_GHZ, s[k], g_[k], a[k]) for k in order)
    errors = np.array([[ce[k] / _MHZ_PER_GHZ, se_[k], ge[k], ae[k]] for k in order])
    spl = np.diff(c[order])
    spl_err = np.array([math.sqrt(max(cov[i, i] + cov[j, j] - 2 * cov[i, j], 0.0))
                        for i, j in zip(order[:-1], order[1:])])
    return FitResult(comps, (float(b0), float(b1)), errors, (float(err[-2]), float(err[-1])), cov, spl, spl_err,
                     rss, it, converged, tuple(history))


@dataclass(frozen=True)
class MonteCarloResult:
    """Seeded noisy round trips: per-trial splitting pulls and convergence flags."""

    true_splittings: np.ndarray
    pulls: np.ndarray
    converged: np.ndarray

    def within(self, nsigma: float = 3.0) -> int:
        """Number of converged trials with every splitting within ``nsigma``."""
        ok = np.all(np.abs(self.pulls) < nsigma, axis=1) & self.converged
        return int(ok.sum())


def _mc_trial(args):
    truth, grid, noise, jitter_mhz, seed, k = args
    clean = sum(voigt(grid, c) for c in truth)
    rng = np.random.default_rng([seed, k])
    data = clean + rng.normal(scale=noise * clean.max(), size=grid.size)
    init = [VoigtComponent(c.center + rng.normal(scale=jitter_mhz / _MHZ_PER_GHZ), 1.1 * c.gaussian_sigma,
                           1.5 * c.lorentzian_gamma, 0.9 * c.amplitude) for c in truth]
    fit = fit_spectrum(grid, data, len(truth), init)
    true_spl = np.diff([c.center for c in truth]) * _MHZ_PER_GHZ
    return (fit.splittings - true_spl) / fit.splitting_errors, fit.converged


def splitting_monte_carlo(truth: Sequence[VoigtComponent], grid, n_trials: int = 100, noise: float = 0.01,
                          seed: int = 0, jitter_mhz: float = 20.0, workers: int = 1) -> MonteCarloResult:
    """Fit ``n_trials`` noisy copies of a known spectrum and record splitting pulls.

    Gaussian noise of standard deviation ``noise`` times the clean peak is
    added. Each fit starts from centres jittered by ``jitter_mhz`` and widths
    and amplitudes offset by 10-50%. Trial ``k`` draws from a generator seeded
    with ``(seed, k)``, so results do not depend on ``workers``.
    """
    truth = sorted(truth, key=lambda c: c.center)
    grid = np.asarray(grid, float)
    jobs = [(truth, grid, noise, jitter_mhz, seed, k) for k in range(n_trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            res = list(ex.map(_mc_trial, jobs))
    else:
        res = [_mc_trial(j) for j in jobs]
    true_spl = np.diff([c.center for c in truth]) * _MHZ_PER_GHZ
    pulls = np.array([r[0] for r in res]).reshape(n_trials, len(truth) - 1)
    return MonteCarloResult(true_spl, pulls, np.array([r[1] for r in res], bool))


# ------------------------------------------------------------------ I/O


def write_spectrum_csv(path, freq_ghz, counts) -> None:
    """Two-column CSV ``frequency_GHz,counts`` to a filename or text stream.

    Frequencies keep 13 significant digits so absolute optical frequencies
    resolve kHz steps.
    """
    if hasattr(path, "write"):
        _write_spectrum(path, freq_ghz, counts)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_spectrum(fh, freq_ghz, counts)


def _write_spectrum(fh, freq_ghz, counts):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("frequency_GHz", "counts"))
    for f, c in zip(freq_ghz, counts):
        w.writerow(("%.12e" % f, "%.6e" % c))


def read_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column spectrum CSV (header optional)."""
    freq, counts = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                f, c = float(row[0]), float(row[1])
            except ValueError:
                continue
            freq.append(f)
            counts.append(c)
    return np.array(freq), np.array(counts)


FIT_COLUMNS = ("component", "center_GHz", "center_err_GHz", "sigma_MHz", "sigma_err_MHz", "gamma_MHz",
               "gamma_err_MHz", "amplitude", "amplitude_err")


def write_fit_report(path, fit: FitResult) -> None:
    """Fitted components as CSV (columns :data:`FIT_COLUMNS`) to a filename or stream.

    Centres and their errors keep 13 significant digits; other columns use 7.
    """
    if hasattr(path, "write"):
        _write_fit(path, fit)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_fit(fh, fit)


def _write_fit(fh, fit):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FIT_COLUMNS)
    for k, (c, e) in enumerate(zip(fit.components, fit.errors)):
        w.writerow([k, "%.12e" % c.center, "%.12e" % e[0]] + ["%.6e" % v for v in (
            c.gaussian_sigma, e[1], c.lorentzian_gamma, e[2], c.amplitude, e[3])])


def format_fit_report(fit: FitResult) -> str:
    """Human-readable summary of a fit."""
    lines = [f"converged: {fit.converged} after {fit.iterations} iterations, residual {fit.residual:.6e}"]
    for k, (c, e) in enumerate(zip(fit.components, fit.errors)):
        lines.append(f"  line {k}: center {c.center:.6f}({e[0] * 1e6:.0f} kHz) GHz, sigma {c.gaussian_sigma:.3f} MHz,"
                     f" gamma {c.lorentzian_gamma:.3f} MHz, amplitude {c.amplitude:.6e}")
    for k, (s, e) in enumerate(zip(fit.splittings, fit.splitting_errors)):
        lines.append(f"  splitting {k}-{k + 1}: {s:.3f} +- {e:.3f} MHz")
    lines.append(f"  baseline: {fit.baseline[0]:.6e} + {fit.baseline[1]:.6e} / GHz")
    return "\n".join(lines)
