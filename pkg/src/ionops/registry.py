"""Atomic dataset ingestion and closed-form derived quantities.

The registry holds fine-structure levels and reduced matrix elements read from
an ``iondata v1`` text file, and evaluates spontaneous rates, lifetimes,
branching fractions, hyperfine quenching rates and the Doppler limit.

Rate prefactors take the wavelength in nm and the reduced matrix element in
atomic units (E1, E2) or Bohr magnetons (M1)::

    A(E1) = 2.0261e15 |<k||D||i>|^2 / ((2J_k + 1) lambda^3)
    A(M1) = 2.697e10  |<k||M||i>|^2 / ((2J_k + 1) lambda^3)
    A(E2) = 1.1199e13 |<k||Q||i>|^2 / ((2J_k + 1) lambda^5)
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy import constants as sc

from .angular import HalfInt, twice
from .exceptions import (
    DegenerateTransition,
    NoDecayChannels,
    ParseError,
    ValidationError,
)

__all__ = [
    "Level",
    "TransitionME",
    "NucleusSpec",
    "Registry",
    "load_dataset",
    "default_dataset_path",
    "load_default",
    "wavelength_nm",
    "transition_rate",
    "transition_rate_uncertainty",
    "lifetime",
    "lifetime_uncertainty",
    "branching",
    "quench_rate",
    "doppler_limit",
    "lande_gj",
    "out_of_cycle_table",
]

RATE_PREFACTOR = {"E1": 2.0261e15, "M1": 2.697e10, "E2": 1.1199e13}
WAVELENGTH_POWER = {"E1": 3, "M1": 3, "E2": 5}
RANK = {"E1": 1, "M1": 1, "E2": 2}

HARTREE_CM1 = 219474.63
HARTREE_MHZ = 6.57968e9
AU_RATE = 4.13414e16

_L_LETTERS = "SPDFGHIKLMNOQRTUV"
_TERM_RE = re.compile(r"^([a-z]?)(\d+)([A-Z])(o?)$")


def lande_gj(S: float, L: int, J: float, g_s: float = 2.0) -> float:
    """LS-coupling Lande factor; 0 for J = 0."""
    if J == 0:
        return 0.0
    jj, ss, ll = J * (J + 1), S * (S + 1), L * (L + 1)
    return (jj + ll - ss) / (2 * jj) + g_s * (jj - ll + ss) / (2 * jj)


def parse_term(term: str):
    """Split a term label such as ``z3Po`` into (S, L, odd)."""
    m = _TERM_RE.match(term)
    if not m:
        raise ValueError(f"unrecognised term symbol {term!r}")
    mult = int(m.group(2))
    L = _L_LETTERS.index(m.group(3))
    return Fraction(mult - 1, 2), L, m.group(4) == "o"


@dataclass(frozen=True)
class Level:
    """One fine-structure level.

    Energies are in cm^-1 and hyperfine constants in MHz.
    """

    id: str
    configuration: str
    term: str
    parity: str
    J: HalfInt
    E_exp: float
    E_th: float | None = None
    A_hfs: float | None = None
    dA_hfs: float | None = None
    g_J_override: float | None = None

    @property
    def j(self) -> float:
        return self.J.value

    @property
    def twoJ(self) -> int:
        return self.J.twice_value

    @property
    def S(self) -> Fraction:
        return parse_term(self.term)[0]

    @property
    def L(self) -> int:
        return parse_term(self.term)[1]

    @property
    def g_J(self) -> float:
        if self.g_J_override is not None:
            return self.g_J_override
        S, L, _ = parse_term(self.term)
        return lande_gj(float(S), L, self.j)

    @property
    def label(self) -> str:
        """Spectroscopic label such as ``5s5p 3P1o``."""
        S, L, odd = parse_term(self.term)
        j = str(self.J)
        return f"{self.configuration} {int(2 * S + 1)}{_L_LETTERS[L]}{j}{'o' if odd else ''}"


@dataclass(frozen=True)
class TransitionME:
    """Reduced matrix element between two levels."""

    upper: str
    lower: str
    multipole: str
    reduced_me: float
    uncertainty: float = 0.0
    upper_bound: bool = False
    source: str = ""

    @property
    def key(self):
        return (self.upper, self.lower, self.multipole)


@dataclass(frozen=True)
class NucleusSpec:
    """Nuclear spin, magnetic moment (nuclear magnetons) and mass (u)."""

    I: HalfInt
    mu_I: float
    mass: float

    @property
    def i(self) -> float:
        return self.I.value


@dataclass(frozen=True)
class Registry:
    nucleus: NucleusSpec
    levels: Mapping[str, Level]
    transitions: tuple[TransitionME, ...]
    source: str = ""
    _by_upper: Mapping[str, tuple[TransitionME, ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        by_upper: dict[str, list[TransitionME]] = {}
        for t in self.transitions:
            by_upper.setdefault(t.upper, []).append(t)
        object.__setattr__(self, "_by_upper", {k: tuple(v) for k, v in by_upper.items()})

    def __getitem__(self, level_id: str) -> Level:
        return self.levels[level_id]

    def level(self, level_id) -> Level:
        if isinstance(level_id, Level):
            return level_id
        try:
            return self.levels[level_id]
        except KeyError:
            raise KeyError(f"unknown level {level_id!r}") from None

    def decays_from(self, level_id) -> tuple[TransitionME, ...]:
        lid = level_id.id if isinstance(level_id, Level) else level_id
        return self._by_upper.get(lid, ())

    def find(self, upper, lower, multipole=None) -> list[TransitionME]:
        up = upper.id if isinstance(upper, Level) else upper
        lo = lower.id if isinstance(lower, Level) else lower
        return [
            t for t in self.decays_from(up)
            if t.lower == lo and (multipole is None or t.multipole == multipole)
        ]

    def me(self, upper, lower, multipole) -> TransitionME:
        found = self.find(upper, lower, multipole)
        if not found:
            raise KeyError(f"no {multipole} element {upper} -> {lower}")
        return found[0]

    def transition_rate(self, t: TransitionME) -> float:
        return transition_rate(t, self)

    def lifetime(self, level_id, include_bounds: bool = True) -> float:
        return lifetime(self.level(level_id), self, include_bounds)

    def branching(self, level_id, include_bounds: bool = True) -> dict[str, float]:
        return branching(self.level(level_id), self, include_bounds)


def _num(tok: str, lineno: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(lineno, f"{what}: not a number {tok!r}") from None


def _opt(tok: str, lineno: int, what: str):
    return None if tok == "-" else _num(tok, lineno, what)


def _parse_lines(lines: Iterable[str]):
    section = None
    nucleus: dict[str, str] = {}
    levels: list[tuple[int, list[str]]] = []
    transitions: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, "malformed section header")
            section = line[1:-1].strip()
            if section not in ("nucleus", "levels", "transitions"):
                raise ParseError(lineno, f"unknown section [{section}]")
            continue
        cols = line.split()
        if section is None:
            raise ParseError(lineno, "record outside any section")
        if section == "nucleus":
            if len(cols) != 2:
                raise ParseError(lineno, "nucleus record needs 'key value'")
            nucleus[cols[0]] = (lineno, cols[1])
        elif section == "levels":
            if len(cols) != 10:
                raise ParseError(lineno, f"level record has {len(cols)} columns, expected 10")
            levels.append((lineno, cols))
        else:
            if len(cols) != 6:
                raise ParseError(lineno, f"transition record has {len(cols)} columns, expected 6")
            transitions.append((lineno, cols))
    return nucleus, levels, transitions


def _build(nucleus_raw, level_rows, trans_rows, source=""):
    if not level_rows:
        raise ParseError(0, "no [levels] records found")
    for key in ("I", "mu_I", "mass"):
        if key not in nucleus_raw:
            raise ParseError(0, f"[nucleus] lacks {key}")
    lineno, itok = nucleus_raw["I"]
    try:
        I = HalfInt(twice(Fraction(itok)))
    except (ValueError, ZeroDivisionError):
        raise ParseError(lineno, f"bad nuclear spin {itok!r}") from None
    nucleus = NucleusSpec(
        I=I,
        mu_I=_num(nucleus_raw["mu_I"][1], nucleus_raw["mu_I"][0], "mu_I"),
        mass=_num(nucleus_raw["mass"][1], nucleus_raw["mass"][0], "mass"),
    )

    levels: dict[str, Level] = {}
    for lineno, c in level_rows:
        lid, config, term, parity, two_j = c[:5]
        if parity not in ("even", "odd"):
            raise ParseError(lineno, f"parity must be even|odd, got {parity!r}")
        try:
            tj = int(two_j)
        except ValueError:
            raise ParseError(lineno, f"twoJ not an integer: {two_j!r}") from None
        lev = Level(
            id=lid,
            configuration=config,
            term=term,
            parity=parity,
            J=HalfInt(tj),
            E_exp=_num(c[5], lineno, "E_exp"),
            E_th=_opt(c[6], lineno, "E_th"),
            A_hfs=_opt(c[7], lineno, "A"),
            dA_hfs=_opt(c[8], lineno, "dA"),
            g_J_override=_opt(c[9], lineno, "gJ"),
        )
        if lid in levels:
            raise ValidationError(lid, "duplicate level id")
        if tj == 0 or I.twice_value == 0:
            lev = Level(**{**lev.__dict__, "A_hfs": lev.A_hfs if lev.A_hfs is not None else 0.0})
        levels[lid] = lev

    transitions = []
    for lineno, c in trans_rows:
        up, lo, mult, me, dme, flags = c
        if mult not in RATE_PREFACTOR:
            raise ParseError(lineno, f"multipole must be E1|M1|E2, got {mult!r}")
        flag_set = set() if flags == "-" else set(flags.split(","))
        if not flag_set <= {"ub"}:
            raise ParseError(lineno, f"unknown flags {flags!r}")
        transitions.append(
            TransitionME(
                upper=up,
                lower=lo,
                multipole=mult,
                reduced_me=_num(me, lineno, "me"),
                uncertainty=_num(dme, lineno, "dme"),
                upper_bound="ub" in flag_set,
                source=f"{source}:{lineno}",
            )
        )
    reg = Registry(nucleus=nucleus, levels=levels, transitions=tuple(transitions), source=source)
    validate(reg)
    return reg


def validate(reg: Registry) -> None:
    """Check registry invariants; raise :class:`ValidationError` on failure."""
    grounds = [lv for lv in reg.levels.values() if lv.E_exp == 0]
    if len(grounds) != 1:
        raise ValidationError("levels", "exactly one level must have E_exp = 0")
    for lv in reg.levels.values():
        if lv.E_exp < 0:
            raise ValidationError(lv.id, "E_exp must be non-negative")
        try:
            S, L, odd = parse_term(lv.term)
        except ValueError as exc:
            raise ValidationError(lv.id, str(exc)) from None
        tS, tL, tJ = twice(S), 2 * L, lv.twoJ
        if not (abs(tL - tS) <= tJ <= tL + tS and (tL + tS - tJ) % 2 == 0):
            raise ValidationError(lv.id, "J inconsistent with term symbol")
        if odd != (lv.parity == "odd"):
            raise ValidationError(lv.id, "parity inconsistent with term symbol")
        if (lv.twoJ == 0 or reg.nucleus.I.twice_value == 0) and lv.A_hfs not in (None, 0.0):
            raise ValidationError(lv.id, "A_hfs must vanish when J = 0 or I = 0")
    seen = set()
    for t in reg.transitions:
        name = f"{t.upper}->{t.lower} {t.multipole}"
        if t.upper not in reg.levels or t.lower not in reg.levels:
            raise ValidationError(name, "endpoint does not resolve to a level")
        if t.key in seen:
            raise ValidationError(name, "duplicate (upper, lower, multipole)")
        seen.add(t.key)
        up, lo = reg.levels[t.upper], reg.levels[t.lower]
        if not up.E_exp > lo.E_exp:
            raise ValidationError(name, "upper level must lie above lower level")
        same = up.parity == lo.parity
        if (t.multipole == "E1") == same:
            raise ValidationError(name, "parity selection rule violated")
        k2 = 2 * RANK[t.multipole]
        if abs(up.twoJ - lo.twoJ) > k2 or up.twoJ + lo.twoJ < k2:
            raise ValidationError(name, "angular momentum selection rule violated")
        if not np.isfinite(t.reduced_me):
            raise ValidationError(name, "reduced matrix element must be finite")


def load_dataset(path) -> Registry:
    """Parse and validate an ``iondata v1`` file.

    Raises
    ------
    ParseError
        On lexical or structural problems, with the offending line number.
    ValidationError
        When a physical invariant of the registry is violated.
    """
    p = Path(path)
    with p.open(encoding="utf-8") as fh:
        lines = fh.readlines()
    if not any(ln.split("#", 1)[0].strip() for ln in lines):
        raise ParseError(0, "file is empty")
    nucleus, lv, tr = _parse_lines(lines)
    return _build(nucleus, lv, tr, source=p.name)


def default_dataset_path() -> Path:
    """Path of the shipped Y+ dataset."""
    return Path(str(resources.files("ionops") / "data" / "y89.iondata"))


_DEFAULT: Registry | None = None


def load_default() -> Registry:
    """Load (once) and return the shipped dataset."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_dataset(default_dataset_path())
    return _DEFAULT


def wavelength_nm(upper: Level, lower: Level) -> float:
    """Vacuum wavelength from experimental energies."""
    dE = upper.E_exp - lower.E_exp
    if dE == 0:
        raise DegenerateTransition(f"{upper.id} and {lower.id} are degenerate")
    if dE < 0:
        raise DegenerateTransition(f"{upper.id} lies below {lower.id}")
    return 1e7 / dE


def transition_rate(me: TransitionME, registry: Registry) -> float:
    """Spontaneous emission rate (s^-1) of one multipole channel."""
    up, lo = registry.level(me.upper), registry.level(me.lower)
    lam = wavelength_nm(up, lo)
    return (
        RATE_PREFACTOR[me.multipole] * me.reduced_me ** 2
        / ((up.twoJ + 1) * lam ** WAVELENGTH_POWER[me.multipole])
    )


def transition_rate_uncertainty(me: TransitionME, registry: Registry) -> float:
    """First-order uncertainty: relative error of the element doubled."""
    if me.reduced_me == 0:
        return 0.0
    return transition_rate(me, registry) * 2 * abs(me.uncertainty / me.reduced_me)


def _channels(level: Level, registry: Registry, include_bounds: bool):
    return [
        t for t in registry.decays_from(level.id)
        if include_bounds or not t.upper_bound
    ]


def lifetime(level: Level, registry: Registry, include_bounds: bool = True) -> float:
    """Radiative lifetime in seconds; ``inf`` for a level with no decays."""
    level = registry.level(level)
    chans = _channels(level, registry, include_bounds)
    total = sum(transition_rate(t, registry) for t in chans)
    if total == 0:
        return math.inf
    return 1.0 / total


def lifetime_uncertainty(level: Level, registry: Registry) -> float:
    level = registry.level(level)
    tau = lifetime(level, registry)
    if math.isinf(tau):
        return 0.0
    var = sum(transition_rate_uncertainty(t, registry) ** 2 for t in registry.decays_from(level.id))
    return tau ** 2 * math.sqrt(var)


def branching(level: Level, registry: Registry, include_bounds: bool = True) -> dict[str, float]:
    """Branching fraction into each lower level, summed over multipoles.

    Raises
    ------
    NoDecayChannels
        For a level without tabulated decays.
    """
    level = registry.level(level)
    chans = _channels(level, registry, include_bounds)
    if not chans:
        raise NoDecayChannels(level.id)
    rates: dict[str, float] = {}
    for t in chans:
        rates[t.lower] = rates.get(t.lower, 0.0) + transition_rate(t, registry)
    total = math.fsum(rates.values())
    return {k: v / total for k, v in rates.items()}


def quench_rate(omega0: float, mu: float, t_eff: float) -> float:
    """Hyperfine-quenching rate ``(4 alpha^3 / 9) w^3 (mu T)^2`` in s^-1.

    Parameters
    ----------
    omega0 : float
        Transition wavenumber in cm^-1.
    mu : float
        Nuclear magnetic moment in nuclear magnetons.
    t_eff : float
        Reduced matrix element of the effective hyperfine operator in MHz.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    alpha = sc.fine_structure
    w = omega0 / HARTREE_CM1
    T = t_eff / HARTREE_MHZ
    return 4 * alpha ** 3 / 9 * w ** 3 * (mu * T) ** 2 * AU_RATE


def doppler_limit(linewidth: float) -> float:
    """Doppler temperature ``hbar Gamma / (2 k_B)`` for a linewidth in rad/s."""
    return sc.hbar * linewidth / (2 * sc.k)


@dataclass(frozen=True)
class OutOfCycleRow:
    final_level: str
    wavelength_nm: float
    nondipole: float
    quenching: float
    final: float


def out_of_cycle_table() -> list[OutOfCycleRow]:
    """Tabulated non-dipole and quenching decays of the 5s5p 3P0 level."""
    path = resources.files("ionops") / "data" / "y89_3p0_outofcycle.csv"
    rows = []
    with path.open(encoding="utf-8") as fh:
        reader = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        for r in reader:
            rows.append(
                OutOfCycleRow(
                    r["final_level"],
                    float(r["wavelength_nm"]),
                    float(r["nondipole"]),
                    float(r["quenching"]),
                    float(r["final"]),
                )
            )
    return rows
