import io
import shutil

import numpy as np
import pytest

from ionops import protocols as P
from ionops import spectra as S
from ionops.cli import emit, main, parse_grid, parse_label
from ionops.fields import eigenstates, find_clock_point
from ionops.registry import (
    default_dataset_path,
    lifetime,
    lifetime_uncertainty,
    load_default,
    transition_rate,
    transition_rate_uncertainty,
    wavelength_nm,
)

from reference_values import LIFETIMES


@pytest.fixture(scope="module")
def reg():
    return load_default()


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def expected(header, rows):
    buf = io.StringIO()
    emit(header, rows, buf)
    return buf.getvalue()


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        code, out, err = run(capsys, "bogus")
        assert code == 2
        assert out == ""
        assert "usage" in err

    def test_missing_required_flag(self, capsys):
        assert run(capsys, "rate", "--upper", "5s5p.3P1")[0] == 2

    def test_malformed_grid(self, capsys):
        code, _, err = run(capsys, "zeeman", "--level", "4d5s.3D1", "--B", "1:x:3")
        assert code == 2 and "bad grid" in err

    def test_domain_error(self, capsys):
        code, out, err = run(capsys, "rate", "--upper", "5s5p.3P1", "--lower", "4d5s.3D3", "--multipole", "E1")
        assert code == 1 and out == "" and "KeyError" in err

    def test_unknown_level(self, capsys):
        assert run(capsys, "zeeman", "--level", "nope", "--B", "1")[0] == 1

    def test_unreadable_dataset(self, capsys, tmp_path):
        assert run(capsys, "--dataset", str(tmp_path / "missing.iondata"), "levels")[0] == 1

    def test_bad_workers(self, capsys):
        assert run(capsys, "--workers", "0", "levels")[0] == 2

    def test_help(self, capsys):
        assert run(capsys, "--help")[0] == 0


class TestParsing:
    def test_grid_forms(self):
        assert parse_grid("1,2.5,4") == [1.0, 2.5, 4.0]
        assert parse_grid("0:10:5") == [0.0, 2.5, 5.0, 7.5, 10.0]

    def test_label(self):
        assert parse_label("3/2,-1/2") == (1.5, -0.5)


class TestLevels:
    def test_matches_library(self, capsys, reg):
        code, out, _ = run(capsys, "levels")
        rows = [[lid, lv.label, lv.j, lv.E_exp, lv.A_hfs, lv.g_J, lifetime(lv, reg), lifetime_uncertainty(lv, reg)]
                for lid, lv in reg.levels.items()]
        assert code == 0
        assert out == expected(("id", "label", "J", "energy_cm1", "A_MHz", "g_J", "lifetime_s", "lifetime_err_s"),
                               rows)

    def test_table_lifetimes(self, capsys):
        _, out, _ = run(capsys, "levels")
        lines = out.splitlines()
        assert len(lines) == 26
        taus = {ln.split(",")[0]: float(ln.split(",")[6]) for ln in lines[1:]}
        for lid, (tau, dtau) in LIFETIMES.items():
            assert abs(taus[lid] - tau) <= max(0.03 * tau, dtau)

    def test_branching_block(self, capsys, reg):
        _, out, _ = run(capsys, "levels", "--branching", "5s5p.3P1")
        block = out.split("\n\n")[1]
        br = reg.branching("5s5p.3P1")
        assert block == expected(("upper", "lower", "fraction"), [["5s5p.3P1", k, v] for k, v in br.items()])

    def test_dataset_env_and_flag(self, capsys, monkeypatch, tmp_path):
        copy = tmp_path / "copy.iondata"
        shutil.copy(default_dataset_path(), copy)
        base = run(capsys, "levels")[1]
        monkeypatch.setenv("IONOPS_DATASET", str(tmp_path / "missing.iondata"))
        assert run(capsys, "levels")[0] == 1
        assert run(capsys, "--dataset", str(copy), "levels")[1] == base
        monkeypatch.setenv("IONOPS_DATASET", str(copy))
        assert run(capsys, "levels")[1] == base

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "levels.csv"
        code, out, _ = run(capsys, "levels", "-o", str(target))
        assert code == 0 and out == ""
        assert target.read_text() == run(capsys, "levels")[1]


class TestThinAdapters:
    def test_rate(self, capsys, reg):
        _, out, _ = run(capsys, "rate", "--upper", "5s5p.3P1", "--lower", "5s2.1S0", "--multipole", "E1")
        me = reg.me("5s5p.3P1", "5s2.1S0", "E1")
        row = [me.upper, me.lower, "E1", wavelength_nm(reg["5s5p.3P1"], reg["5s2.1S0"]), me.reduced_me,
               transition_rate(me, reg), transition_rate_uncertainty(me, reg)]
        assert out == expected(("upper", "lower", "multipole", "wavelength_nm", "reduced_me", "rate_s",
                                "rate_err_s"), [row])

    def test_zeeman(self, capsys, reg):
        _, out, _ = run(capsys, "zeeman", "--level", "4d5s.3D1", "--B", "0:200:3")
        rows = [[B, s.F, s.M, s.energy, s.Iz_expect] for B in (0.0, 100.0, 200.0)
                for s in eigenstates(reg["4d5s.3D1"], reg.nucleus, B)]
        assert out == expected(("B_G", "F", "M", "energy_MHz", "Iz"), rows)

    def test_clock_point(self, capsys, reg):
        _, out, _ = run(capsys, "clock-point")
        r = find_clock_point(reg["4d5s.3D1"], reg.nucleus, ((1.5, 0.5), (0.5, 0.5)), B_range=(1.0, 1000.0),
                             A=P.REFERENCE_A["4d5s.3D1"])
        assert out == expected(("B_G", "f_q_MHz", "curvature_kHz_per_G2"), [list(r)])

    @pytest.mark.parametrize("mode,ref", [("zz_stretched", 340.0), ("ms_clock", 680.0)])
    def test_grad_gate(self, capsys, mode, ref):
        _, out, _ = run(capsys, "grad-gate", "--mode", mode, "--T", "50e-6", "--y0", "6e-9")
        g = P.gradient_gate_requirement(mode, 50e-6, 6e-9)
        assert out == expected(("mode", "T_s", "y0_m", "gradient_T_per_m"), [[mode, 50e-6, 6e-9, g]])
        assert float(out.splitlines()[1].split(",")[3]) == pytest.approx(ref, rel=0.05)

    def test_mag_pulse(self, capsys):
        _, out, _ = run(capsys, "mag-pulse")
        m = P.magnetic_pi_pulse("4d5s.3D1", ((1.5, 0.5), (0.5, 0.5)), 168.0, 10e-6)
        assert out == expected(("amplitude_G", "frequency_Hz", "moment_mu_B"),
                               [[m.amplitude_gauss, m.frequency_hz, m.moment_mu_b]])

    @pytest.mark.parametrize("tr", ["3P0", "3F4"])
    def test_measure(self, capsys, tr):
        _, out, _ = run(capsys, "measure", "--transition", tr)
        m = P.measurement_budget(tr)
        assert out == expected(("transition", "counts", "leakage", "per_scatter_leak", "linewidth_s",
                                "supported_time_s"),
                               [[tr, m.counts, m.leakage, m.per_scatter_leak, m.linewidth, m.supported_time]])

    def test_sq_gate(self, capsys):
        _, out, _ = run(capsys, "sq-gate")
        b = P.sq_gate_error()
        assert out == expected(("qubit", "wavelength_nm", "coherent", "se", "total", "leakage", "required_power_mW"),
                               [["clock_168G", 445.0, b.coherent_error, b.spontaneous_emission_error, b.total,
                                 b.leakage, b.required_power * 1e3]])

    def test_ls_gate(self, capsys):
        _, out, _ = run(capsys, "ls-gate")
        b = P.ls_gate_error()
        row = [450.0, b.coherent_error, b.spontaneous_emission_error, b.total, b.leakage, b.required_power * 1e3,
               b.metadata["single_ion_error"], True]
        assert out == expected(("wavelength_nm", "coherent", "se", "total", "leakage", "required_power_mW",
                                "single_ion_error", "attainable"), [row])

    def test_shelve_sweep(self, capsys, reg, tmp_path):
        _, out, _ = run(capsys, "--workers", "2", "shelve-sweep", "--kind", "circular_pm_half", "--B", "150,400")
        rows = P.sweep(lambda B: P.shelving_error(P.build_shelving("circular_pm_half", B, registry=reg), reg),
                       {"B": [150.0, 400.0]})
        buf = io.StringIO()
        P.write_sweep_csv(rows, buf)
        assert out == buf.getvalue()
        assert out.splitlines()[0] == "param1,param2,coherent,se,total,leakage,required_power_mW,error"


class TestSpectra:
    ARGS = ("synth-spectrum", "--upper", "5s5p.3P1", "--lower", "4d5s.3D1", "--A-upper", "-532",
            "--A-lower", "232.2", "--center", "687605.5", "--gamma", "10")

    def test_synth_matches_library(self, capsys, reg):
        _, out, _ = run(capsys, *self.ARGS)
        lines = S.hyperfine_lines(reg["5s5p.3P1"], reg["4d5s.3D1"], reg.nucleus, -532.0, 232.2, center=687605.5)
        c = [l.center for l in lines]
        grid = np.linspace(min(c) - 2.0, max(c) + 2.0, 600)
        y = S.synth_spectrum(lines, 50.0, wavelength_nm(reg["5s5p.3P1"], reg["4d5s.3D1"]), reg.nucleus.mass, 10.0,
                             grid)
        buf = io.StringIO()
        S.write_spectrum_csv(buf, grid, y)
        assert out == buf.getvalue()

    def test_seeded_noise_reproducible(self, capsys):
        a = run(capsys, "--seed", "3", *self.ARGS, "--noise", "0.01")[1]
        b = run(capsys, *self.ARGS, "--noise", "0.01", "--seed", "3")[1]
        c = run(capsys, *self.ARGS, "--noise", "0.01", "--seed", "4")[1]
        assert a == b and a != c

    def test_fit_round_trip(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        run(capsys, *self.ARGS, "--noise", "0.01", "--seed", "3", "-o", str(path))
        init = "687605.05,687605.35,687605.8,687606.25"
        amps = "1.1,0.2,0.2,0.4"
        report = tmp_path / "r.txt"
        code, out, _ = run(capsys, "fit-spectrum", "--input", str(path), "--init", init, "--amplitudes", amps,
                           "--report", str(report))
        assert code == 0
        x, y = S.read_spectrum_csv(path)
        comps = [S.VoigtComponent(float(c), S.fwhm_to_sigma(516.0), 10.0, float(a))
                 for c, a in zip(init.split(","), amps.split(","))]
        fit = S.fit_spectrum(x, y, 4, comps)
        buf = io.StringIO()
        S.write_fit_report(buf, fit)
        buf.write("\n")
        emit(("splitting", "value_MHz", "err_MHz"),
             [[f"{k}-{k + 1}", s, e] for k, (s, e) in enumerate(zip(fit.splittings, fit.splitting_errors))], buf)
        assert out == buf.getvalue()
        assert report.read_text().startswith("converged: True")
        spl = [float(ln.split(",")[1]) for ln in out.split("\n\n")[1].splitlines()[1:]]
        assert spl == pytest.approx([348.3, 449.7, 348.3], abs=15)

    def test_fit_monte_carlo_block(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        run(capsys, *self.ARGS, "--noise", "0.01", "--seed", "3", "-o", str(path))
        argv = ["fit-spectrum", "--input", str(path), "--init", "687605.05,687605.35,687605.8,687606.25",
                "--amplitudes", "1.1,0.2,0.2,0.4", "--monte-carlo", "3", "--seed", "7"]
        out = run(capsys, *argv)[1]
        block = out.split("\n\n")[2].splitlines()
        assert block[0] == "trial,pull_0,pull_1,pull_2,converged"
        assert len(block) == 4
        assert run(capsys, *argv)[1] == out

    def test_fit_needs_amplitude_per_centre(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        run(capsys, *self.ARGS, "-o", str(path))
        code = run(capsys, "fit-spectrum", "--input", str(path), "--init", "687605.1,687605.4",
                   "--amplitudes", "1")[0]
        assert code == 2

    def test_fit_empty_file(self, capsys, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("frequency_GHz,counts\n")
        assert run(capsys, "fit-spectrum", "--input", str(path), "--init", "1.0")[0] == 2
