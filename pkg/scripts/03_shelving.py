"""
Shelving the ground-state qubit into 3D1
========================================

The three shelving schemes with the default pointing and polarization errors.
The circular scheme changes target states near 165 G and the stretched scheme
hits an accidental resonance near 138 G. Expect a few minutes on one CPU.
"""

import sys

from ionops import protocols as P
from ionops.registry import load_default

reg = load_default()

b = P.shelving_error(P.build_shelving("circular_pm_half", 400.0, 419.0, registry=reg), reg)
print(f"circular 400 G: coherent {b.coherent_error:.2e}  SE {b.spontaneous_emission_error:.2e}  total {b.total:.2e}")

# a coarse field sweep written as CSV; the jump sits between 165 and 166 G
rows = P.sweep(lambda B: P.shelving_error(P.build_shelving("circular_pm_half", B, registry=reg), reg),
               {"B": [150.0, 165.0, 166.0, 200.0]})
P.write_sweep_csv(rows, sys.stdout)

# the accidental resonance of the stretched scheme
B0 = P.accidental_resonance("stretched_pm_3half", 100, 180, registry=reg)
for B in (100.0, B0, 150.0):
    e = P.shelving_error(P.build_shelving("stretched_pm_3half", B, registry=reg), reg)
    print(f"stretched {B:7.2f} G: total {e.total:.2e}")

# optical E2 shelving: Delta M = 2 has no nearby spurious line
for M in (2.5, 1.5):
    e = P.shelving_error(P.build_shelving("optical_E2", 50.0, target_M=M, registry=reg), reg)
    print(f"optical M = {M}: coherent {e.coherent_error:.2e}")
