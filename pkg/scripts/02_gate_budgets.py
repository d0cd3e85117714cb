"""
Error budgets for gates and measurement
=======================================

Single-qubit Raman gates in 3D1, the light-shift two-qubit gate, magnetic
gradient gates and the fluorescence measurement budgets.
"""

from ionops import protocols as P
from ionops.registry import load_default

reg = load_default()

# Raman single-qubit gates at 445 nm: power needed for the pi pulse and the
# scattering error it brings
for qubit in ("clock_168G", "inner_pm_half_400G"):
    b = P.sq_gate_error(qubit, 445.0, registry=reg)
    print(f"{qubit:20s} P = {1e3 * b.required_power:6.2f} mW  SE = {b.spontaneous_emission_error:.2e}")

# the SE error falls as the light moves away from the 3P levels
for lam in (440.0, 450.0, 455.0):
    g = P.ls_gate_error(lam, registry=reg)
    print(f"LS gate {lam:.0f} nm: P = {1e3 * g.required_power:7.1f} mW  "
          f"SE = {g.spontaneous_emission_error:.2e} (one ion {g.metadata['single_ion_error']:.2e})")

# magnetic alternatives need no light at all
for mode in ("zz_stretched", "ms_clock"):
    print(f"{mode:14s} gradient {P.gradient_gate_requirement(mode, 50e-6, 6e-9, registry=reg):6.1f} T/m")
p = P.magnetic_pi_pulse(P.META, P.CLOCK_PAIR, 168.0, 10e-6, registry=reg)
print(f"clock pi pulse: {p.amplitude_gauss:.3f} G at {p.frequency_hz / 1e6:.2f} MHz, mu = {p.moment_mu_b:.3f} mu_B")

# measurement: counts and leakage for the 3P0 cycle, repump time for 3F4
m = P.measurement_budget("3P0", registry=reg)
print(f"3P0: {m.counts:.2f} counts in 50 us, leakage {m.leakage:.2e}")
m = P.measurement_budget("3F4", registry=reg)
print(f"3F4: supported measurement time {1e3 * m.supported_time:.2f} ms")
