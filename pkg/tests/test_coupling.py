import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import constants as sc
from scipy import integrate
from scipy.optimize import curve_fit

from ionops.angular import rotation_matrix
from ionops.coupling import (
    UNIT_SI,
    LaserTone,
    beam_peak_field,
    effective_couplings,
    level_angular_frequency,
    multipole_matrix,
    rabi_matrix,
    raman_effective,
    tone_amplitudes,
)
from ionops.exceptions import DetuningTooSmall, FieldMismatch, MultipoleMismatch, NonTransversePolarization
from ionops.fields import eigenstates, find_state
from ionops.registry import TransitionME, load_default, transition_rate

A_3D1 = 232.2
Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def reg():
    return load_default()


def _states(reg, lid, B=5.0, **kw):
    return eigenstates(reg[lid], reg.nucleus, B, **kw)


def _omega(reg, up, lo):
    return level_angular_frequency(reg[up]) - level_angular_frequency(reg[lo])


class TestBeam:
    def test_intensity_and_power_integral(self):
        P, w = 10e-3, 10e-6
        E0 = beam_peak_field(P, w)
        I0 = 0.5 * sc.c * sc.epsilon_0 * E0 ** 2
        assert I0 == pytest.approx(6.366e7, rel=1e-4)
        got, _ = integrate.quad(lambda r: I0 * np.exp(-2 * r ** 2 / w ** 2) * 2 * np.pi * r, 0, 10 * w)
        assert got == pytest.approx(P, rel=1e-10)

    def test_zero_and_scaling(self):
        assert beam_peak_field(0.0, 1e-5) == 0.0
        assert beam_peak_field(4e-3, 1e-5) == pytest.approx(2 * beam_peak_field(1e-3, 1e-5))

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            beam_peak_field(-1.0, 1e-5)
        with pytest.raises(ValueError):
            beam_peak_field(1.0, 0.0)


class TestLaserTone:
    def test_normalises(self):
        t = LaserTone(1e15, [0, 0, 2], [3, 0, 0], 10.0)
        assert np.linalg.norm(t.polarization) == pytest.approx(1.0)
        assert np.allclose(t.k_dir, X)

    def test_transverse_required(self):
        with pytest.raises(NonTransversePolarization):
            LaserTone(1e15, [1, 0, 0], [1, 0, 0], 1.0)

    def test_negative_field(self):
        with pytest.raises(ValueError):
            LaserTone(1e15, [0, 0, 1], [1, 0, 0], -1.0)


class TestRabiMatrix:
    def test_pi_selection_rule(self, reg):
        d, p = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "5s5p.3P0")
        me = reg.me("5s5p.3P0", "4d5s.3D1", "E1")
        t = LaserTone.from_power(_omega(reg, "5s5p.3P0", "4d5s.3D1"), Z, X, 1e-3, 1e-5)
        cm = rabi_matrix(p, d, t, me, reg)
        j = d.index(find_state(d, 1.5, 0.5))
        assert abs(cm[p.index(find_state(p, 0.5, 0.5)), j]) > 0
        assert cm[p.index(find_state(p, 0.5, -0.5)), j] == 0

    def test_delta_m_structure(self, reg):
        d, p = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "5s5p.3P1", A=-532.0)
        me = reg.me("5s5p.3P1", "4d5s.3D1", "E1")
        plus = -np.array([1, 1j, 0]) / np.sqrt(2)
        t = LaserTone(_omega(reg, "5s5p.3P1", "4d5s.3D1"), plus, Z, 1e3)
        cm = rabi_matrix(p, d, t, me, reg)
        for k, sk in enumerate(p):
            for j, sj in enumerate(d):
                if sk.M - sj.M != 1:
                    assert cm[k, j] == 0

    def test_stretched_e1_magnitude(self, reg):
        # |F=3/2,M=3/2> of 3P1 is |M_J=1, M_I=1/2>; <1 1|d_+1|0 0> = R / sqrt 3
        s, p = _states(reg, "5s2.1S0"), _states(reg, "5s5p.3P1", A=-532.0)
        me = reg.me("5s5p.3P1", "5s2.1S0", "E1")
        t = LaserTone(_omega(reg, "5s5p.3P1", "5s2.1S0"), -np.array([1, 1j, 0]) / np.sqrt(2), Z, 1e3)
        cm = rabi_matrix(p, s, t, me, reg)
        got = abs(cm[p.index(find_state(p, 1.5, 1.5)), s.index(find_state(s, 0.5, 0.5))])
        assert got == pytest.approx(1e3 * UNIT_SI["E1"] * me.reduced_me / np.sqrt(3) / sc.hbar, rel=1e-12)

    def test_sum_rule_over_upper_manifold(self, reg):
        d, p = _states(reg, "4d5s.3D1", B=300.0, A=A_3D1), _states(reg, "5s5p.3P1", B=300.0, A=-532.0)
        me = reg.me("5s5p.3P1", "4d5s.3D1", "E1")
        total = sum(np.abs(multipole_matrix(p, d, me, reg, q)) ** 2 for q in (-1, 0, 1)).sum(axis=0)
        expected = (UNIT_SI["E1"] * me.reduced_me) ** 2 / 3
        np.testing.assert_allclose(total, expected, rtol=1e-12)

    def test_me_scaling(self, reg):
        d, p = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "5s5p.3P0")
        me = reg.me("5s5p.3P0", "4d5s.3D1", "E1")
        me2 = TransitionME(me.upper, me.lower, "E1", 2 * me.reduced_me)
        t = LaserTone(1e15, [0, 0.6, 0.8], X, 50.0)
        np.testing.assert_allclose(rabi_matrix(p, d, t, me2, reg).matrix, 2 * rabi_matrix(p, d, t, me, reg).matrix)

    def test_m1_uses_magnetic_amplitude(self, reg):
        # a pi-polarised M1 field needs b = k x eps along z
        lo, up = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "4d5s.3D2", A=-222.9)
        me = reg.me("4d5s.3D2", "4d5s.3D1", "M1")
        t = LaserTone(1e13, [0, 1, 0], X, sc.c)  # b along z with unit tesla amplitude
        cm = rabi_matrix(up, lo, t, me, reg)
        for k, sk in enumerate(up):
            for j, sj in enumerate(lo):
                if sk.M != sj.M:
                    assert cm[k, j] == 0
        assert np.abs(cm.matrix).max() > 0
        assert tone_amplitudes(t, "M1")[0] == pytest.approx(1.0)

    def test_mismatched_element(self, reg):
        d, p = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "5s5p.3P0")
        with pytest.raises(MultipoleMismatch):
            rabi_matrix(p, d, LaserTone(1e15, Z, X, 1.0), reg.me("5s5p.3P1", "4d5s.3D1", "E1"), reg)

    def test_field_mismatch(self, reg):
        d = _states(reg, "4d5s.3D1", B=5.0, A=A_3D1)
        p = _states(reg, "5s5p.3P0", B=6.0)
        with pytest.raises(FieldMismatch):
            rabi_matrix(p, d, LaserTone(1e15, Z, X, 1.0), reg.me("5s5p.3P0", "4d5s.3D1", "E1"), reg)


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.floats(0, np.pi),
    st.floats(0, 2 * np.pi),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.floats(0, 2 * np.pi),
    st.sampled_from(["E1", "E2"]),
)
def test_rotational_covariance(kv, chi, phase, rv, angle, mult):
    reg = load_default()
    assume(np.linalg.norm(kv) > 0.1 and np.linalg.norm(rv) > 0.1)
    k = _unit(kv)
    e1 = _unit(np.cross(k, [0.3, -0.7, 0.2])) if np.linalg.norm(np.cross(k, [0.3, -0.7, 0.2])) > 1e-3 else _unit(np.cross(k, X))
    e2 = np.cross(k, e1)
    eps = np.cos(chi) * e1 + np.exp(1j * phase) * np.sin(chi) * e2
    if mult == "E1":
        up, lo = "5s5p.3P1", "4d5s.3D1"
        kw = {"5s5p.3P1": -532.0, "4d5s.3D1": A_3D1}
    else:
        up, lo = "4d5s.1D2", "5s2.1S0"
        kw = {"4d5s.1D2": None, "5s2.1S0": None}
    me = reg.me(up, lo, mult)
    U = eigenstates(reg[up], reg.nucleus, 20.0, A=kw[up])
    L = eigenstates(reg[lo], reg.nucleus, 20.0, A=kw[lo])
    R = rotation_matrix(np.array(rv), angle)
    t1 = LaserTone(2e15, eps, k, 100.0)
    t2 = LaserTone(2e15, R @ eps, R @ k, 100.0)
    a = rabi_matrix(U, L, t1, me, reg, quant_axis=Z).matrix
    b = rabi_matrix(U, L, t2, me, reg, quant_axis=R @ Z).matrix
    np.testing.assert_allclose(np.abs(b), np.abs(a), atol=1e-10 * np.abs(a).max())


def test_e2_golden_rule_reproduces_registry_rate(reg):
    # spontaneous E2 rate from the plane-wave coupling, integrated over emission directions
    up, lo = "4d5s.1D2", "5s2.1S0"
    me = reg.me(up, lo, "E2")
    U, L = _states(reg, up, B=0.0), _states(reg, lo, B=0.0)
    w = _omega(reg, up, lo)
    k = w / sc.c
    Q = {q: multipole_matrix(L, U, me, reg, q) for q in range(-2, 3)}
    xs, ws = np.polynomial.legendre.leggauss(8)
    phis = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    total = 0.0
    for ct, wt in zip(xs, ws):
        st_ = np.sqrt(1 - ct ** 2)
        for ph in phis:
            kh = np.array([st_ * np.cos(ph), st_ * np.sin(ph), ct])
            th = np.array([ct * np.cos(ph), ct * np.sin(ph), -st_])
            pp = np.array([-np.sin(ph), np.cos(ph), 0.0])
            for eps in (th, pp):
                c = tone_amplitudes(LaserTone(w, eps, kh, 1.0), "E2", quant_axis=Z, ref_dir=X)
                M = sum(c[q] * Q[q] for q in c)
                total += wt * (2 * np.pi / len(phis)) * np.sum(np.abs(M) ** 2)
    pref = w ** 3 * k ** 2 / (32 * np.pi ** 2 * sc.hbar * sc.epsilon_0 * sc.c ** 3)
    A = pref * total / len(U)
    assert A == pytest.approx(transition_rate(me, reg), rel=3e-4)


def test_e1_golden_rule_reproduces_registry_rate(reg):
    up, lo = "5s5p.3P1", "5s2.1S0"
    me = reg.me(up, lo, "E1")
    U, L = _states(reg, up, B=0.0, A=-532.0), _states(reg, lo, B=0.0)
    w = _omega(reg, up, lo)
    d2 = sum(np.abs(multipole_matrix(L, U, me, reg, q)) ** 2 for q in (-1, 0, 1)).sum() / len(U)
    A = w ** 3 * d2 / (3 * np.pi * sc.epsilon_0 * sc.hbar * sc.c ** 3)
    assert A == pytest.approx(transition_rate(me, reg), rel=3e-4)


# -------------------------------------------------------------- Raman


def _lambda_system(Om1, Om2, Delta, split=2 * np.pi * 10e6, we=2e15):
    wlow = np.array([0.0, split])
    wexc = np.array([we])
    tones = np.array([we + Delta, we - split + Delta])
    up = np.zeros((2, 1, 2), complex)
    up[0, 0, 0] = Om1 / 2
    up[1, 0, 1] = Om2 / 2
    return wlow, wexc, tones, up


def _three_level_transfer(Om1, Om2, Delta, times):
    H = np.array([[0, 0, Om1 / 2], [0, 0, Om2 / 2], [Om1 / 2, Om2 / 2, -Delta]], complex)
    w, v = np.linalg.eigh(H)
    psi0 = np.array([1, 0, 0], complex)
    c = v.conj().T @ psi0
    amps = (v[None] * (np.exp(-1j * np.outer(times, w)) * c)[:, None, :]).sum(-1)
    return np.abs(amps[:, 1]) ** 2


class TestRamanEffective:
    def test_two_level_light_shift(self):
        Om, we = 2 * np.pi * 5e6, 2e15
        for Delta in (2 * np.pi * 1e9, -2 * np.pi * 3e10):
            w = we + Delta
            up = np.array([[[Om / 2]]], complex)
            dn = np.array([[[Om / 2]]], complex)
            K, nu = effective_couplings([0.0], [we], [w], up, dn, counter_rotating=True)
            assert K[0, 0, 0, 0].real == pytest.approx(Om ** 2 / 4 * (1 / Delta - 1 / (w + we)), rel=1e-9)
            K, _ = effective_couplings([0.0], [we], [w], up, dn, counter_rotating=False)
            assert K[0, 0, 0, 0].real == pytest.approx(Om ** 2 / (4 * Delta), rel=1e-9)
            assert nu[0, 0, 0, 0] == 0

    def test_three_level_oracle(self):
        Om, Delta = 2 * np.pi * 1e6, 2 * np.pi * 10e9
        K, nu = effective_couplings(*_lambda_system(Om, Om, Delta), counter_rotating=False)
        # tags are differences of absolute optical frequencies
        assert nu[1, 0, 1, 0] == pytest.approx(0.0, abs=1.0)
        analytic = Om * Om / (4 * Delta)
        assert abs(K[1, 0, 1, 0]) == pytest.approx(analytic, rel=1e-12)
        # fit the transfer sin^2(K t) of the full three-level evolution
        T = np.pi / (2 * analytic)
        times = np.linspace(0, 2 * T, 801)
        P = _three_level_transfer(Om, Om, Delta, times)
        (fit,), _ = curve_fit(lambda t, k: np.sin(k * t) ** 2, times, P, p0=[analytic * 1.001])
        assert fit == pytest.approx(abs(K[1, 0, 1, 0]), rel=1e-6)

    def test_convergence_order(self):
        Om = 2 * np.pi * 50e6
        Ds = 2 * np.pi * np.geomspace(1e9, 1e10, 5)
        errs = []
        for D in Ds:
            K, _ = effective_couplings(*_lambda_system(Om, Om, D), counter_rotating=False)
            eps = (-D + np.sqrt(D ** 2 + 2 * Om ** 2)) / 2
            errs.append(abs(abs(K[1, 0, 1, 0]) - eps / 2) / (eps / 2))
        slope = np.polyfit(np.log(Ds), np.log(errs), 1)[0]
        assert slope == pytest.approx(-2.0, abs=0.05)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_hermitian_generator(self, seed):
        rng = np.random.default_rng(seed)
        nl, ne, nt = 3, 4, 3
        wlow = rng.uniform(0, 1e8, nl)
        wexc = 2e15 + rng.uniform(0, 1e9, ne)
        tones = 2e15 + rng.uniform(1e10, 2e10, nt)
        up = rng.normal(size=(nt, ne, nl)) + 1j * rng.normal(size=(nt, ne, nl))
        dn = rng.normal(size=(nt, nl, ne)) + 1j * rng.normal(size=(nt, nl, ne))
        K, nu = effective_couplings(wlow, wexc, tones, up * 1e6, dn * 1e6)
        t, ph = rng.uniform(0, 1e-6), rng.uniform(0, 2 * np.pi, nt)
        phase = ph[None, :, None, None] - ph[:, None, None, None]
        H = np.sum(K * np.exp(-1j * (nu * t + phase)), axis=(0, 1))
        np.testing.assert_allclose(H, H.conj().T, atol=1e-12 * np.abs(H).max())
        np.testing.assert_allclose(nu, -np.transpose(nu, (1, 0, 3, 2)), atol=1e-3)

    def test_ground_state_pi_pi_no_spin_flip(self, reg):
        B = 5.0
        low = _states(reg, "5s2.1S0", B=B)
        exc = _states(reg, "5s5p.3P1", B=B, A=-532.0)
        w0 = _omega(reg, "5s5p.3P1", "5s2.1S0") + 2 * np.pi * 50e9
        tones = [LaserTone(w0, Z, X, 1e4), LaserTone(w0 + 1e6, Z, -X, 1e4)]
        res = raman_effective(low, exc, tones, reg)
        i, j = low.index(find_state(low, 0.5, 0.5)), low.index(find_state(low, 0.5, -0.5))
        assert np.all(res.couplings[:, :, i, j] == 0)
        assert np.abs(res.light_shifts).min() > 0

    def test_light_shift_sign(self, reg):
        # red detuning lowers the ground state
        low = _states(reg, "5s2.1S0")
        exc = _states(reg, "5s5p.3P1", A=-532.0)
        w0 = _omega(reg, "5s5p.3P1", "5s2.1S0")
        red = raman_effective(low, exc, [LaserTone(w0 - 2 * np.pi * 1e11, Z, X, 1e4)], reg)
        blue = raman_effective(low, exc, [LaserTone(w0 + 2 * np.pi * 1e11, Z, X, 1e4)], reg)
        assert np.all(red.light_shifts < 0) and np.all(blue.light_shifts > 0)

    def test_detuning_too_small(self, reg):
        # 3P1 hyperfine spread is about 800 MHz
        d, p = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "5s5p.3P1", A=-532.0)
        w0 = _omega(reg, "5s5p.3P1", "4d5s.3D1")
        with pytest.raises(DetuningTooSmall):
            raman_effective(d, p, [LaserTone(w0 + 2 * np.pi * 5e9, Z, X, 1e3)], reg)
        raman_effective(d, p, [LaserTone(w0 + 2 * np.pi * 100e9, Z, X, 1e3)], reg)

    def test_zero_field_tone(self, reg):
        d, p = _states(reg, "4d5s.3D1", A=A_3D1), _states(reg, "5s5p.3P0")
        res = raman_effective(d, p, [LaserTone(2e15, Z, X, 0.0)], reg)
        assert np.all(res.couplings == 0)
