"""
Level structure of Y+ from the shipped dataset
==============================================

Lifetimes and branching from the reduced matrix elements, then the 3D1
hyperfine-Zeeman structure and its field-insensitive clock point.
"""

import numpy as np

from ionops.fields import eigenstates, find_clock_point, find_state, sensitivity
from ionops.protocols import CLOCK_PAIR, REFERENCE_A
from ionops.registry import branching, lifetime, load_default

reg = load_default()

# lifetimes follow from summing every decay channel of a level
for lid in ("5s5p.3P0", "5s5p.3P1", "4d5s.3D2", "4d5s.3D1"):
    print(f"{lid:10s} tau = {lifetime(reg[lid], reg):.3e} s")

# where does 5s5p 3P1 decay to?
for lower, frac in sorted(branching(reg["5s5p.3P1"], reg).items(), key=lambda kv: -kv[1]):
    print(f"  3P1 -> {lower:10s} {100 * frac:6.2f} %")

# dressed 3D1 states at a few fields, labelled adiabatically by (F, M)
lv, nuc = reg["4d5s.3D1"], reg.nucleus
A = REFERENCE_A["4d5s.3D1"]
for B in (0.0, 50.0, 400.0):
    st = eigenstates(lv, nuc, B, A=A)
    print(f"B = {B:5.0f} G:", ", ".join(f"({float(s.F):g},{float(s.M):+g}) {s.energy:8.2f}" for s in st))

# the clock pair loses its first-order field sensitivity near 166 G
B0, fq, curv = find_clock_point(lv, nuc, CLOCK_PAIR, A=A)
print(f"clock point {B0:.2f} G, f = {fq:.2f} MHz, curvature {curv:.3f} kHz/G^2")

# far from it, the pair is linear in B
for B in (50.0, B0, 300.0):
    s = sensitivity(lv, nuc, *CLOCK_PAIR, B, A=A)
    print(f"  dF/dB at {B:6.1f} G: {s.first_order:10.1f} Hz/G")

# the splitting around the clock point is a parabola
Bs = np.linspace(B0 - 20, B0 + 20, 5)
f = [find_state(st, *CLOCK_PAIR[0]).energy - find_state(st, *CLOCK_PAIR[1]).energy
     for st in (eigenstates(lv, nuc, B, A=A) for B in Bs)]
print(np.column_stack([Bs, f]))
