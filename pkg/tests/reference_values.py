"""Published values used as test oracles.

Rate rows are (upper, lower, multipole, printed element, printed rate);
a leading ``<=`` marks an upper bound.
"""

RATE_ROWS = [
    ("4d5s.3D1", "5s2.1S0", "M1", "6.5e-5", "2.22e-11"),
    ("4d5s.3D2", "5s2.1S0", "E2", "-1.19", "3.9e-8"),
    ("4d5s.3D2", "4d5s.3D1", "M1", "-2.1035", "2.053e-4"),
    ("4d5s.3D2", "4d5s.3D1", "E2", "-4.15", "1.39e-10"),
    ("4d5s.3D3", "4d5s.3D1", "E2", "1.410", "2.68e-9"),
    ("4d5s.3D3", "4d5s.3D2", "M1", "2.1421", "1.1716e-3"),
    ("4d5s.3D3", "4d5s.3D2", "E2", "4.46", "3.46e-9"),
    ("4d5s.1D2", "5s2.1S0", "E2", "-9.49", "7.85e-4"),
    ("4d5s.1D2", "4d5s.3D1", "M1", "0.272", "5.9e-3"),
    ("4d5s.1D2", "4d5s.3D1", "E2", "0.315", "1.98e-7"),
    ("4d5s.1D2", "4d5s.3D2", "M1", "-0.116", "8.3e-4"),
    ("4d5s.1D2", "4d5s.3D2", "E2", "1.37", "2.4e-6"),
    ("4d5s.1D2", "4d5s.3D3", "M1", "-0.277", "2.6e-3"),
    ("4d5s.1D2", "4d5s.3D3", "E2", "-0.58", "1.60e-7"),
    ("4d2.3F2", "5s2.1S0", "E2", "-0.407", "1.22e-4"),
    ("4d2.3F2", "4d5s.3D1", "M1", "0.0052", "<=1.1e-4"),
    ("4d2.3F2", "4d5s.3D1", "E2", "9.96", "4.19e-2"),
    ("4d2.3F2", "4d5s.3D2", "M1", "0.00123", "2.7e-6"),
    ("4d2.3F2", "4d5s.3D2", "E2", "-8.34", "2.54e-2"),
    ("4d2.3F2", "4d5s.3D3", "M1", "-0.0016", "<=1.8e-5"),
    ("4d2.3F2", "4d5s.3D3", "E2", "2.6", "1.80e-3"),
    ("4d2.3F2", "4d5s.1D2", "M1", "0.055", "1.7e-3"),
    ("4d2.3F2", "4d5s.1D2", "E2", "0.78", "3.2e-5"),
    ("4d2.3F3", "4d5s.3D1", "E2", "-7.09", "1.90e-2"),
    ("4d2.3F3", "4d5s.3D2", "M1", "-0.0080", "9e-5"),
    ("4d2.3F3", "4d5s.3D2", "E2", "-11.10", "4.04e-2"),
    ("4d2.3F3", "4d5s.3D3", "M1", "3.330e-3", "1.390e-5"),
    ("4d2.3F3", "4d5s.3D3", "E2", "8.56", "1.81e-2"),
    ("4d2.3F3", "4d5s.1D2", "M1", "-0.078", "3.0e-3"),
    ("4d2.3F3", "4d5s.1D2", "E2", "1.23", "7.8e-5"),
    ("4d2.3F3", "4d2.3F2", "M1", "-2.578", "8.785e-4"),
    ("4d2.3F3", "4d2.3F2", "E2", "-1.855", "1.993e-10"),
    ("4d2.3F4", "4d5s.3D2", "E2", "-7.34", "1.81e-2"),
    ("4d2.3F4", "4d5s.3D3", "M1", "3.680e-3", "1.575e-5"),
    ("4d2.3F4", "4d5s.3D3", "E2", "-16.33", "6.85e-2"),
    ("4d2.3F4", "4d5s.1D2", "E2", "0.64", "2.4e-5"),
    ("4d2.3F4", "4d2.3F2", "E2", "-0.360", "3.59e-10"),
    ("4d2.3F4", "4d2.3F3", "M1", "-2.597", "1.447e-3"),
    ("4d2.3F4", "4d2.3F3", "E2", "-1.873", "5.39e-10"),
    ("4d2.3P0", "4d5s.3D1", "M1", "1.00e-4", "6.0e-7"),
    ("4d2.3P0", "4d5s.3D2", "E2", "-6.00", "1.404"),
    ("4d2.3P0", "4d5s.1D2", "E2", "0.76", "8.6e-3"),
    ("4d2.3P0", "4d2.3F2", "E2", "-4.88", "1.88e-2"),
    ("4d2.3P1", "5s2.1S0", "M1", "0.0037", "3.4e-4"),
    ("4d2.3P1", "4d5s.3D1", "M1", "2.40e-4", "1.19e-6"),
    ("4d2.3P1", "4d5s.3D1", "E2", "7.08", "7.43e-1"),
    ("4d2.3P1", "4d5s.3D2", "M1", "0.0035", "<=5e-4"),
    ("4d2.3P1", "4d5s.3D2", "E2", "2.994", "1.230e-1"),
    ("4d2.3P1", "4d5s.3D3", "E2", "-7.11", "5.91e-1"),
    ("4d2.3P1", "4d5s.1D2", "M1", "0.01747", "3.38e-3"),
    ("4d2.3P1", "4d5s.1D2", "E2", "-0.300", "4.76e-4"),
    ("4d2.3P1", "4d2.3F2", "M1", "0.00185", "6.7e-6"),
    ("4d2.3P1", "4d2.3F2", "E2", "4.90", "7.07e-3"),
    ("4d2.3P1", "4d2.3F3", "E2", "6.89", "1.057e-2"),
    ("4d2.3P1", "4d2.3P0", "M1", "-1.413", "4.403e-5"),
    ("4d2.3P2", "5s2.1S0", "E2", "1.16", "1.68e-2"),
    ("4d2.3P2", "4d5s.3D1", "M1", "-0.0073", "7e-4"),
    ("4d2.3P2", "4d5s.3D1", "E2", "3.99", "1.46e-1"),
    ("4d2.3P2", "4d5s.3D2", "M1", "0.0091", "1.0e-3"),
    ("4d2.3P2", "4d5s.3D2", "E2", "7.92", "5.32e-1"),
    ("4d2.3P2", "4d5s.3D3", "M1", "0.0074", "6e-4"),
    ("4d2.3P2", "4d5s.3D3", "E2", "9.43", "6.44e-1"),
    ("4d2.3P2", "4d5s.1D2", "M1", "0.0287", "5.6e-3"),
    ("4d2.3P2", "4d5s.1D2", "E2", "3.744", "4.62e-2"),
    ("4d2.3P2", "4d2.3F2", "M1", "0.0339", "1.40e-3"),
    ("4d2.3P2", "4d2.3F2", "E2", "1.57", "4.63e-4"),
    ("4d2.3P2", "4d2.3F3", "M1", "-0.0438", "1.99e-3"),
    ("4d2.3P2", "4d2.3F3", "E2", "4.63", "3.08e-3"),
    ("4d2.3P2", "4d2.3F4", "E2", "9.10", "8.17e-3"),
    ("4d2.3P2", "4d2.3P0", "E2", "4.62", "2.18e-10"),
    ("4d2.3P2", "4d2.3P1", "M1", "1.472", "5.94e-6"),
    ("4d2.3P2", "4d2.3P1", "E2", "-6.88", "3.43e-12"),
    ("4d2.1D2", "5s2.1S0", "E2", "-2.6825", "1.1572e-1"),
    ("4d2.1D2", "4d5s.3D1", "M1", "0.0236", "8.2e-3"),
    ("4d2.1D2", "4d5s.3D1", "E2", "1.12", "1.50e-2"),
    ("4d2.1D2", "4d5s.3D2", "M1", "-0.00786", "8.7e-4"),
    ("4d2.1D2", "4d5s.3D2", "E2", "1.6566", "3.063e-2"),
    ("4d2.1D2", "4d5s.3D3", "M1", "-0.0243", "7.6e-3"),
    ("4d2.1D2", "4d5s.3D3", "E2", "3.55", "1.21e-1"),
    ("4d2.1D2", "4d5s.1D2", "M1", "0.01009", "8.43e-4"),
    ("4d2.1D2", "4d5s.1D2", "E2", "-12.3", "7.0e-1"),
    ("4d2.1D2", "4d2.3F2", "M1", "-0.0706", "8.6e-3"),
    ("4d2.1D2", "4d2.3F2", "E2", "1.21", "4.9e-4"),
    ("4d2.1D2", "4d2.3F3", "M1", "0.1015", "1.53e-2"),
    ("4d2.1D2", "4d2.3F3", "E2", "1.75", "8.0e-4"),
    ("4d2.1D2", "4d2.3F4", "E2", "3.21", "1.93e-3"),
    ("4d2.1D2", "4d2.3P0", "E2", "1.57", "4.24e-8"),
    ("4d2.1D2", "4d2.3P1", "M1", "0.576", "9.7e-4"),
    ("4d2.1D2", "4d2.3P1", "E2", "-2.48", "4.92e-8"),
    ("4d2.1D2", "4d2.3P2", "M1", "0.930", "1.85e-3"),
    ("4d2.1D2", "4d2.3P2", "E2", "5.57", "1.49e-7"),
    ("4d2.1G4", "4d5s.3D2", "E2", "-1.83", "2.80e-2"),
    ("4d2.1G4", "4d5s.3D3", "M1", "-1.9e-4", "3.12e-7"),
    ("4d2.1G4", "4d5s.3D3", "E2", "0.5728", "2.385e-6"),
    ("4d2.1G4", "4d5s.1D2", "E2", "-13.7", "6.8e-1"),
    ("4d2.1G4", "4d2.3F2", "E2", "1.06", "3.76e-4"),
    ("4d2.1G4", "4d2.3F3", "M1", "0.0785", "7.34e-3"),
    ("4d2.1G4", "4d2.3F3", "E2", "0.1645", "7.24e-6"),
    ("4d2.1G4", "4d2.3F4", "M1", "-0.1012", "1.025e-2"),
    ("4d2.1G4", "4d2.3F4", "E2", "-0.43373", "3.7674e-5"),
    ("4d2.1G4", "4d2.3P2", "E2", "5.17", "3.32e-6"),
    ("4d2.1G4", "4d2.1D2", "E2", "-13.66", "1.030e-6"),
    ("5s5p.3P0", "4d5s.3D1", "E1", "0.87", "1.76e7"),
    ("5s5p.3P0", "4d2.3P1", "E1", "0.746", "9.45e5"),
    ("5s5p.3P1", "5s2.1S0", "E1", "0.48", "2.10e6"),
    ("5s5p.3P1", "4d5s.3D1", "E1", "0.799", "5.20e6"),
    ("5s5p.3P1", "4d5s.3D2", "E1", "1.17", "1.08e7"),
    ("5s5p.3P1", "4d5s.1D2", "E1", "0.149", "1.30e5"),
    ("5s5p.3P1", "4d2.3F2", "E1", "0.112", "3.4e4"),
    ("5s5p.3P1", "4d2.3P0", "E1", "0.785", "4.03e5"),
    ("5s5p.3P1", "4d2.3P1", "E1", "0.639", "2.56e5"),
    ("5s5p.3P1", "4d2.3P2", "E1", "0.925", "5.24e5"),
    ("5s5p.3P1", "4d2.1D2", "E1", "0.055", "1.4e3"),
    ("5s5p.3P2", "4d5s.3D1", "E1", "0.30", "5e5"),
    ("5s5p.3P2", "4d5s.3D2", "E1", "0.60", "1.9e6"),
    ("5s5p.3P2", "4d5s.3D3", "E1", "1.53", "1.19e7"),
    ("5s5p.3P2", "4d5s.1D2", "E1", "0.7", "<=4.6e6"),
    ("5s5p.3P2", "4d2.3F2", "E1", "0.06", "<=3.3e3"),
    ("5s5p.3P2", "4d2.3F3", "E1", "0.99", "1.7e4"),
    ("5s5p.3P2", "4d2.3P1", "E1", "0.911", "4.04e5"),
    ("5s5p.3P2", "4d2.3P2", "E1", "1.439", "9.85e5"),
    ("5s5p.3P2", "4d2.1D2", "E1", "0.490", "9.2e4"),
    ("4d2.1S0", "4d5s.3D1", "M1", "3e-5", "3.45e-7"),
    ("4d2.1S0", "4d5s.3D2", "E2", "0.421", "1.59e-1"),
    ("4d2.1S0", "4d5s.1D2", "E2", "4.50", "11.1"),
    ("4d2.1S0", "4d2.3F2", "E2", "0.4003", "2.598e-2"),
    ("4d2.1S0", "4d2.3P1", "M1", "-0.0633", "1.46e-1"),
    ("4d2.1S0", "4d2.3P2", "E2", "-4.19", "3.13e-1"),
    ("4d2.1S0", "4d2.1D2", "E2", "11.23", "1.59"),
    ("4d2.1S0", "5s5p.3P1", "E1", "0.121", "64"),
    ("4d5p.1D2", "4d5s.3D1", "E1", "1.75", "2.02e7"),
    ("4d5p.1D2", "4d5s.3D2", "E1", "1.91", "2.34e7"),
    ("4d5p.1D2", "4d5s.3D3", "E1", "0.18", "<=4.1e5"),
    ("4d5p.1D2", "4d5s.1D2", "E1", "4.59", "1.02e8"),
    ("4d5p.1D2", "4d2.3F2", "E1", "1.13", "3.07e6"),
    ("4d5p.1D2", "4d2.3F3", "E1", "0.11", "2.8e4"),
    ("4d5p.1D2", "4d2.3P1", "E1", "0.09", "<=1.7e4"),
    ("4d5p.1D2", "4d2.3P2", "E1", "0.16", "<=4.6e4"),
    ("4d5p.1D2", "4d2.1D2", "E1", "0.497", "1.45e5"),
    ("4d5p.3F2", "4d5s.3D1", "E1", "3.35", "8.35e7"),
    ("4d5p.3F2", "4d5s.3D2", "E1", "1.215", "1.07e7"),
    ("4d5p.3F2", "4d5s.3D3", "E1", "0.616", "2.63e6"),
    ("4d5p.3F2", "4d5s.1D2", "E1", "2.85", "4.53e7"),
    ("4d5p.3F2", "4d2.3F2", "E1", "2.170", "1.355e7"),
    ("4d5p.3F2", "4d2.3F3", "E1", "0.513", "7.21e5"),
    ("4d5p.3F2", "4d2.3P1", "E1", "0.094", "8.2e3"),
    ("4d5p.3F2", "4d2.3P2", "E1", "0.138", "1.7e4"),
    ("4d5p.3F2", "4d2.1D2", "E1", "0.364", "1.02e5"),
    ("4d5p.1P1", "5s2.1S0", "E1", "2.7", "1.02e8"),
    ("4d5p.1P1", "4d5s.3D1", "E1", "1.2", "1.7e7"),
    ("4d5p.1P1", "4d5s.3D2", "E1", "1.28", "2.0e7"),
    ("4d5p.1P1", "4d5s.1D2", "E1", "0.07", "<=1.3e5"),
    ("4d5p.1P1", "4d2.3F2", "E1", "1.5", "1.2e7"),
    ("4d5p.1P1", "4d2.3P0", "E1", "0.34", "2.0e5"),
    ("4d5p.1P1", "4d2.3P1", "E1", "0.29", "1.4e5"),
    ("4d5p.1P1", "4d2.3P2", "E1", "0.77", "9.7e5"),
    ("4d5p.1P1", "4d2.1D2", "E1", "2.20", "6.7e6"),
    ("4d5p.1P1", "4d2.1S0", "E1", "0.83", "6.8e3"),
    ("4d5p.3F3", "4d5s.3D2", "E1", "4.50", "1.09e8"),
    ("4d5p.3F3", "4d5s.3D3", "E1", "2.30", "2.73e7"),
    ("4d5p.3F3", "4d5s.1D2", "E1", "0.66", "1.78e6"),
    ("4d5p.3F3", "4d2.3F2", "E1", "0.828", "1.48e6"),
    ("4d5p.3F3", "4d2.3F3", "E1", "2.83", "1.65e7"),
    ("4d5p.3F3", "4d2.3F4", "E1", "0.27", "1.4e5"),
    ("4d5p.3F3", "4d2.3P2", "E1", "0.205", "2.9e4"),
    ("4d5p.3F3", "4d2.1D2", "E1", "0.040", "9e2"),
    ("4d5p.3F3", "4d2.1G4", "E1", "0.065", "2.0e3"),
    ("4d5p.3F4", "4d5s.3D3", "E1", "5.77", "1.47e8"),
    ("4d5p.3F4", "4d2.3F3", "E1", "0.815", "1.21e6"),
    ("4d5p.3F4", "4d2.3F4", "E1", "3.21", "1.76e7"),
    ("4d5p.3F4", "4d2.1G4", "E1", "0.1139", "5.99e3"),
    ("4d5p.3D1", "5s2.1S0", "E1", "1.5", "3.5e7"),
    ("4d5p.3D1", "4d5s.3D1", "E1", "2.68", "1.04e8"),
    ("4d5p.3D1", "4d5s.3D2", "E1", "1.43", "2.9e7"),
    ("4d5p.3D1", "4d5s.1D2", "E1", "0.35", "1.36e6"),
    ("4d5p.3D1", "4d2.3F2", "E1", "2.62", "4.0e7"),
    ("4d5p.3D1", "4d2.3P0", "E1", "0.63", "8.5e5"),
    ("4d5p.3D1", "4d2.3P1", "E1", "0.51", "5.5e5"),
    ("4d5p.3D1", "4d2.3P2", "E1", "0.60", "7e5"),
    ("4d5p.3D1", "4d2.1D2", "E1", "1.2", "2.7e6"),
    ("4d5p.3D1", "4d2.1S0", "E1", "0.48", "7e3"),
    ("4d5p.3D2", "4d5s.3D1", "E1", "2.031", "3.63e7"),
    ("4d5p.3D2", "4d5s.3D2", "E1", "3.37", "9.8e7"),
    ("4d5p.3D2", "4d5s.3D3", "E1", "2.033", "3.4e7"),
    ("4d5p.3D2", "4d5s.1D2", "E1", "0.57", "2.2e6"),
    ("4d5p.3D2", "4d2.3F2", "E1", "1.095", "4.33e6"),
    ("4d5p.3D2", "4d2.3F3", "E1", "3.74", "4.82e7"),
    ("4d5p.3D2", "4d2.3P1", "E1", "1.094", "1.55e6"),
    ("4d5p.3D2", "4d2.3P2", "E1", "0.455", "2.63e5"),
    ("4d5p.3D2", "4d2.1D2", "E1", "0.215", "5.0e4"),
    ("4d5p.3D3", "4d5s.3D2", "E1", "2.37", "3.62e7"),
    ("4d5p.3D3", "4d5s.3D3", "E1", "4.71", "1.37e8"),
    ("4d5p.3D3", "4d5s.1D2", "E1", "0.028", "<=1.5e3"),
    ("4d5p.3D3", "4d2.3F2", "E1", "0.097", "2.6e4"),
    ("4d5p.3D3", "4d2.3F3", "E1", "0.95", "2.37e6"),
    ("4d5p.3D3", "4d2.3F4", "E1", "4.52", "5.07e7"),
    ("4d5p.3D3", "4d2.3P2", "E1", "1.380", "1.9e6"),
    ("4d5p.3D3", "4d2.1D2", "E1", "0.357", "1.09e5"),
    ("4d5p.3D3", "4d2.1G4", "E1", "0.333", "7.97e4"),
]
# level id -> (lifetime s, quoted uncertainty s)
LIFETIMES = {
    "4d5s.3D1": (4.5e10, 0.5e10),
    "4d5s.3D2": (4.871e3, 0.011e3),
    "4d5s.3D3": (853.5, 2.0),
    "4d5s.1D2": (99.0, 8.0),
    "4d2.3F2": (14.07, 0.24),
    "4d2.3F3": (12.29, 0.21),
    "4d2.3F4": (11.35, 0.21),
    "4d2.3P0": (0.698, 0.012),
    "4d2.3P1": (0.676, 0.008),
    "4d2.3P2": (0.710, 0.011),
    "4d2.1D2": (0.97, 0.03),
    "4d2.1G4": (1.36, 0.06),
    "5s5p.3P0": (5.4e-8, 0.4e-8),
    "5s5p.3P1": (5.1e-8, 0.4e-8),
    "5s5p.3P2": (5.6e-8, 1.0e-8),
    "4d2.1S0": (1.29e-2, 0.20e-2),
    "4d5p.1D2": (6.71e-9, 0.25e-9),
    "4d5p.3F2": (6.39e-9, 0.12e-9),
    "4d5p.3F3": (6.41e-9, 0.13e-9),
    "4d5p.3F4": (6.04e-9, 0.13e-9),
    "4d5p.1P1": (6.3e-9, 1.1e-9),
    "4d5p.3D1": (4.7e-9, 0.6e-9),
    "4d5p.3D2": (4.45e-9, 0.07e-9),
    "4d5p.3D3": (4.38e-9, 0.09e-9),
}

# branching fractions of 5s5p 3P1 in percent
BRANCHING_3P1 = {
    "5s2.1S0": 10.8,
    "4d5s.3D1": 26.72,
    "4d5s.3D2": 55.53,
    "4d5s.1D2": 0.67,
    "4d2.3P0": 2.07,
    "4d2.3P2": 2.69,
}

# Rows where the printed element and printed rate disagree beyond their
# printed precision: an exponent slip in the rate column (two rows) and
# bound rows whose element bound and rate bound are mutually inconsistent.
INCONSISTENT_ROWS = {
    ("4d2.1G4", "4d5s.3D3", "E2"),
    ("5s5p.3P2", "4d2.3F3", "E1"),
    ("5s5p.3P2", "4d2.3F2", "E1"),
    ("4d5p.3D3", "4d5s.1D2", "E1"),
}

# Hyperfine-resolved line centres in GHz keyed by (upper, lower) level and
# (F', F''), with the printed statistical error in GHz.
LINE_CENTRES = {
    ("5s5p.3P1", "5s2.1S0"): {(0.5, 0.5): (712793.583, 0.005), (1.5, 0.5): (712794.376, 0.007)},
    ("5s5p.3P0", "4d5s.3D1"): {(0.5, 1.5): (677676.770, 0.002), (0.5, 0.5): (677677.103, 0.003)},
    ("5s5p.3P1", "4d5s.3D2"): {(1.5, 1.5): (681462.714, 0.012), (1.5, 2.5): (681463.251, 0.004),
                               (0.5, 1.5): (681463.501, 0.005)},
    ("5s5p.3P1", "4d5s.3D1"): {(1.5, 1.5): (687605.032, 0.003), (1.5, 0.5): (687605.392, 0.015),
                               (0.5, 1.5): (687605.841, 0.012), (0.5, 0.5): (687606.202, 0.007)},
}

# Measured hyperfine A constants (MHz) and their errors
MEASURED_A = {"5s5p.3P1": (-532.0, 7.0), "4d5s.3D1": (225.0, 12.0), "4d5s.3D2": (-215.0, 5.0)}
# Literature values quoted alongside
LITERATURE_A = {"4d5s.3D1": (232.2, 1.3), "4d5s.3D2": (-222.9, 0.8)}

SPLIT_1S0_3P1 = (793.0, 8.0)
SPLIT_3D1 = (345.0, 4.0)
