"""Symbolic advection and direction generation on trigonometric vector fields.

The advective nonlinearity maps a pair of basis fields to a field of the form

    (directional wavenumber) * trig(k.x) * trig(l.x) * (direction vector),

which product-to-sum identities reduce to plain trigonometric terms at the
wavevectors k + l and k - l.  This module carries out that algebra exactly
(coefficients in double precision, wavevectors exact integers), projects the
results back onto the divergence-free unit basis, and assembles the two
families of state-space directions that the noise cascade produces:

  * velocity directions: symmetrized advections of two magnetic modes,
    surviving at a single velocity mode with weight proportional to
    a * (|l|^2 - |k|^2) / |k +- l|, where a = <k, l_perp>/(|k||l|);
  * magnetic directions: antisymmetrized velocity-magnetic advections,
    surviving at a single magnetic mode with weight proportional to
    a * |k -+ l|.

Everything is computed from first principles (advect, then project); the
closed forms above serve only as cross-checks.  ``verify_bracket_identity``
re-derives each direction by an independent numerical route (pointwise field
evaluation, FFT differentiation, grid quadrature) and reports the ratio of
the two computations, which must be one global constant across every
admissible (k, l, combo, slot).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .lattice import (
    BASIS_NORM,
    COS,
    MAGNETIC,
    SIN,
    SLOT_NAMES,
    VELOCITY,
    Mode,
    Vec,
    canonical_rep,
    direction,
    field_values,
    grid_mesh,
    is_canonical,
    make_mode,
    norm_sq,
    pairing_coefficient,
    perp_dot,
    project_onto_mode,
    scalar_values,
)

#: Expansion coefficients below this are discarded as double-precision dust.
PRUNE_TOL = 1e-14

COMBOS = ("sum01", "diff01", "sum11_00", "diff11_00")


class TrigTerm(NamedTuple):
    """amp * trig(k.x) with a constant 2-vector amplitude.

    ``k`` is canonical after reduction; ``k == (0, 0)`` with cos parity is a
    constant vector (the mean component), kept so that pointwise evaluation
    stays faithful until a Leray projection drops it.
    """

    amp: tuple[float, float]
    parity: int
    k: Vec


@dataclass(frozen=True)
class TrigVectorField:
    """A finite, fully reduced sum of trigonometric terms."""

    terms: tuple[TrigTerm, ...]

    def evaluate(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros((2,) + np.broadcast(x1, x2).shape)
        for amp, parity, k in self.terms:
            if k == (0, 0):
                s = np.ones_like(x1)
            else:
                s = scalar_values(k, parity, x1, x2)
            out[0] += amp[0] * s
            out[1] += amp[1] * s
        return out

    def scale(self, factor: float) -> "TrigVectorField":
        return field_from_terms(
            TrigTerm((factor * a1, factor * a2), p, k) for (a1, a2), p, k in self.terms
        )

    def __add__(self, other: "TrigVectorField") -> "TrigVectorField":
        return field_from_terms(itertools.chain(self.terms, other.terms))

    def __sub__(self, other: "TrigVectorField") -> "TrigVectorField":
        return self + other.scale(-1.0)

    def is_zero(self) -> bool:
        return not self.terms


def field_from_terms(raw_terms) -> TrigVectorField:
    """Canonicalize wavevectors, merge duplicate (parity, k) keys, drop zeros."""
    acc: dict[tuple[int, Vec], np.ndarray] = {}
    for amp, parity, k in raw_terms:
        if k == (0, 0):
            if parity == SIN:
                continue  # sin(0) vanishes identically
            key = (COS, (0, 0))
            sign = 1.0
        elif is_canonical(k):
            key, sign = (parity, k), 1.0
        else:
            # cos(-q.x) = cos(q.x); sin(-q.x) = -sin(q.x)
            key = (parity, (-k[0], -k[1]))
            sign = -1.0 if parity == SIN else 1.0
        vec = acc.setdefault(key, np.zeros(2))
        vec += sign * np.asarray(amp, dtype=float)
    terms = []
    for (parity, k), amp in sorted(acc.items()):
        if amp[0] == 0.0 and amp[1] == 0.0:
            continue
        terms.append(TrigTerm((float(amp[0]), float(amp[1])), parity, k))
    return TrigVectorField(tuple(terms))


ZERO_FIELD = TrigVectorField(())


def advect(k: Vec, m: int, l: Vec, m2: int) -> TrigVectorField:
    """Advection of one unnormalized basis field by another: (e_k^m . grad) e_l^m2.

    The gradient of the scalar factor contributes the directional wavenumber
    (direction(k, m) . l); the result is a product of two trig factors times
    the direction vector of the advected field, reduced to sum form.
    """
    if k == (0, 0) or l == (0, 0):
        raise ValueError("advection requires nonzero wavevectors")
    c0 = float(direction(k, m) @ np.asarray(l, dtype=float))
    if m2 == COS:
        coef, second = -c0, SIN  # grad cos(l.x) = -l sin(l.x)
    else:
        coef, second = c0, COS
    if coef == 0.0:
        return ZERO_FIELD
    amp = coef * direction(l, m2)
    first = COS if m == COS else SIN
    ksum = (k[0] + l[0], k[1] + l[1])
    kdif = (k[0] - l[0], k[1] - l[1])
    half = (0.5 * amp[0], 0.5 * amp[1])
    neg_half = (-0.5 * amp[0], -0.5 * amp[1])
    if first == COS and second == COS:
        raw = [TrigTerm(half, COS, kdif), TrigTerm(half, COS, ksum)]
    elif first == COS and second == SIN:
        raw = [TrigTerm(half, SIN, ksum), TrigTerm(neg_half, SIN, kdif)]
    elif first == SIN and second == COS:
        raw = [TrigTerm(half, SIN, ksum), TrigTerm(half, SIN, kdif)]
    else:
        raw = [TrigTerm(half, COS, kdif), TrigTerm(neg_half, COS, ksum)]
    return field_from_terms(raw)


@dataclass
class DirectionExpansion:
    """Projection of a trig field onto unit modes of one slot."""

    coefficients: dict[Mode, float] = field(default_factory=dict)
    degenerate: Optional[str] = None

    def is_empty(self) -> bool:
        return not self.coefficients

    def single_mode(self) -> tuple[Mode, float]:
        if len(self.coefficients) != 1:
            raise ValueError(f"expansion is not single-mode: {self.coefficients}")
        return next(iter(self.coefficients.items()))


def leray_project(f: TrigVectorField, slot: int) -> DirectionExpansion:
    """Orthogonal projection onto the divergence-free mean-zero unit basis.

    A cos term pairs with the parity-0 mode at its wavevector and a sin term
    with the parity-1 mode; only the amplitude component along the mode's
    direction vector survives.  Terms at the zero wavevector are mean
    components and are dropped.
    """
    coeffs: dict[Mode, float] = {}
    for amp, parity, q in f.terms:
        if q == (0, 0):
            continue
        c = float(np.asarray(amp) @ direction(q, parity)) * BASIS_NORM
        if abs(c) > PRUNE_TOL:
            mode = make_mode(slot, q, parity)
            coeffs[mode] = coeffs.get(mode, 0.0) + c
    coeffs = {m: c for m, c in coeffs.items() if abs(c) > PRUNE_TOL}
    return DirectionExpansion(coeffs)


def _sym_advect(k: Vec, m: int, l: Vec, m2: int) -> TrigVectorField:
    """b(e_k^m, e_l^m2) + b(e_l^m2, e_k^m)."""
    return advect(k, m, l, m2) + advect(l, m2, k, m)


def _antisym_advect(k: Vec, m: int, l: Vec, m2: int) -> TrigVectorField:
    """b(e_k^m, e_l^m2) - b(e_l^m2, e_k^m)."""
    return advect(k, m, l, m2) - advect(l, m2, k, m)


def _combo_field(k: Vec, l: Vec, combo: str, slot: int) -> TrigVectorField:
    """Pre-projection field of one direction combination.

    Velocity combos pair magnetic modes symmetrically (the double bracket of
    the drift with two noise directions carries an overall minus sign);
    magnetic combos pair a velocity mode with a magnetic one
    antisymmetrically.  For the parity-(1,1)/(0,0) magnetic combos both
    brackets keep the (k, l) argument order.
    """
    if slot == VELOCITY:
        if combo == "sum01":
            f = _sym_advect(k, COS, l, SIN) + _sym_advect(l, COS, k, SIN)
        elif combo == "diff01":
            f = _sym_advect(k, COS, l, SIN) - _sym_advect(l, COS, k, SIN)
        elif combo == "sum11_00":
            f = _sym_advect(k, SIN, l, SIN) + _sym_advect(l, COS, k, COS)
        elif combo == "diff11_00":
            f = _sym_advect(k, SIN, l, SIN) - _sym_advect(l, COS, k, COS)
        else:
            raise ValueError(f"unknown combo {combo!r}")
        return f.scale(-1.0)
    if combo == "sum01":
        return _antisym_advect(k, COS, l, SIN) + _antisym_advect(l, COS, k, SIN)
    if combo == "diff01":
        return _antisym_advect(k, COS, l, SIN) - _antisym_advect(l, COS, k, SIN)
    if combo == "sum11_00":
        return _antisym_advect(k, SIN, l, SIN) + _antisym_advect(k, COS, l, COS)
    if combo == "diff11_00":
        return _antisym_advect(k, SIN, l, SIN) - _antisym_advect(k, COS, l, COS)
    raise ValueError(f"unknown combo {combo!r}")


def combo_target(k: Vec, l: Vec, combo: str, slot: int) -> tuple[Vec, int]:
    """Raw (uncanonicalized) wavevector and parity where the combo survives."""
    s = (k[0] + l[0], k[1] + l[1])
    d = (k[0] - l[0], k[1] - l[1])
    if slot == VELOCITY:
        table = {"sum01": (s, COS), "diff01": (d, COS),
                 "sum11_00": (d, SIN), "diff11_00": (s, SIN)}
    else:
        table = {"sum01": (d, COS), "diff01": (s, COS),
                 "sum11_00": (d, SIN), "diff11_00": (s, SIN)}
    return table[combo]


def closed_form_weight(k: Vec, l: Vec, combo: str, slot: int) -> float:
    """Modulus structure of the surviving coefficient, without the global constant.

    Velocity: a * (|l|^2 - |k|^2) / |target| up to a combo-fixed sign;
    magnetic: a * |target|.  Returned unsigned relative to those shapes.
    """
    a = pairing_coefficient(k, l)
    target, _ = combo_target(k, l, combo, slot)
    tnorm = float(np.sqrt(norm_sq(target))) if target != (0, 0) else 0.0
    if slot == VELOCITY:
        if tnorm == 0.0:
            return 0.0
        return a * (norm_sq(l) - norm_sq(k)) / tnorm
    return a * tnorm


def _direction_expansion(k: Vec, l: Vec, combo: str, slot: int) -> DirectionExpansion:
    if combo not in COMBOS:
        raise ValueError(f"unknown combo {combo!r}")
    if k == (0, 0) or l == (0, 0):
        raise ValueError("direction generation requires nonzero wavevectors")
    target, _ = combo_target(k, l, combo, slot)
    if slot == MAGNETIC and target == (0, 0):
        return DirectionExpansion(degenerate="degenerate: zero mode")
    if perp_dot(k, l) == 0:
        return DirectionExpansion(degenerate="degenerate: parallel")
    if slot == VELOCITY and norm_sq(k) == norm_sq(l):
        return DirectionExpansion(degenerate="degenerate: equal moduli")
    return leray_project(_combo_field(k, l, combo, slot), slot)


def velocity_direction(k: Vec, l: Vec, combo: str) -> DirectionExpansion:
    """Velocity-slot direction generated from magnetic modes at k and l.

    Empty with a reason flag when the pair is collinear or has equal moduli.
    """
    return _direction_expansion(k, l, combo, VELOCITY)


def magnetic_direction(k: Vec, l: Vec, combo: str) -> DirectionExpansion:
    """Magnetic-slot direction generated from a velocity mode at k and a magnetic one at l."""
    return _direction_expansion(k, l, combo, MAGNETIC)


# ---------------------------------------------------------------------------
# Independent numerical verification.
# ---------------------------------------------------------------------------

def _fft_gradient(component: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = component.shape[0]
    q = np.fft.fftfreq(m, d=1.0 / m)
    f = np.fft.fft2(component)
    d1 = np.real(np.fft.ifft2(1j * q[:, None] * f))
    d2 = np.real(np.fft.ifft2(1j * q[None, :] * f))
    return d1, d2


def _advect_values(k: Vec, m: int, l: Vec, m2: int, x1, x2) -> np.ndarray:
    """(e_k^m . grad) e_l^m2 sampled on the grid, differentiating by FFT."""
    u = field_values(k, m, x1, x2)
    v = field_values(l, m2, x1, x2)
    out = np.zeros_like(v)
    for i in range(2):
        d1, d2 = _fft_gradient(v[i])
        out[i] = u[0] * d1 + u[1] * d2
    return out


def _combo_values(k: Vec, l: Vec, combo: str, slot: int, x1, x2) -> np.ndarray:
    def sym(a, ma, b, mb):
        return _advect_values(a, ma, b, mb, x1, x2) + _advect_values(b, mb, a, ma, x1, x2)

    def antisym(a, ma, b, mb):
        return _advect_values(a, ma, b, mb, x1, x2) - _advect_values(b, mb, a, ma, x1, x2)

    if slot == VELOCITY:
        if combo == "sum01":
            f = sym(k, COS, l, SIN) + sym(l, COS, k, SIN)
        elif combo == "diff01":
            f = sym(k, COS, l, SIN) - sym(l, COS, k, SIN)
        elif combo == "sum11_00":
            f = sym(k, SIN, l, SIN) + sym(l, COS, k, COS)
        else:
            f = sym(k, SIN, l, SIN) - sym(l, COS, k, COS)
        return -f
    if combo == "sum01":
        return antisym(k, COS, l, SIN) + antisym(l, COS, k, SIN)
    if combo == "diff01":
        return antisym(k, COS, l, SIN) - antisym(l, COS, k, SIN)
    if combo == "sum11_00":
        return antisym(k, SIN, l, SIN) + antisym(k, COS, l, COS)
    return antisym(k, SIN, l, SIN) - antisym(k, COS, l, COS)


@dataclass
class VerificationReport:
    k: Vec
    l: Vec
    combo: str
    slot: int
    selection_ok: bool
    degenerate: Optional[str] = None
    target_mode: Optional[Mode] = None
    symbolic_coeff: float = 0.0
    quadrature_coeff: float = 0.0
    coefficient_ratio: float = float("nan")
    pinned_constant: float = float("nan")
    max_stray: float = 0.0

    def to_dict(self) -> dict:
        return {
            "k": list(self.k),
            "l": list(self.l),
            "combo": self.combo,
            "slot": SLOT_NAMES[self.slot],
            "selection_ok": self.selection_ok,
            "degenerate": self.degenerate,
            "target_mode": self.target_mode.label() if self.target_mode else None,
            "symbolic_coeff": self.symbolic_coeff,
            "quadrature_coeff": self.quadrature_coeff,
            "coefficient_ratio": self.coefficient_ratio,
            "pinned_constant": self.pinned_constant,
            "max_stray": self.max_stray,
        }


def _candidate_wavevectors(k: Vec, l: Vec) -> list[Vec]:
    bound = norm_sq((abs(k[0]) + abs(l[0]), abs(k[1]) + abs(l[1])))
    r = int(np.ceil(np.sqrt(bound)))
    cands = []
    for q1 in range(0, r + 1):
        for q2 in range(-r, r + 1):
            q = (q1, q2)
            if q != (0, 0) and is_canonical(q) and norm_sq(q) <= bound:
                cands.append(q)
    return cands


def verify_bracket_identity(
    k: Vec, l: Vec, combo: str, slot: int, grid: Optional[int] = None,
    zero_tol: float = 1e-10,
) -> VerificationReport:
    """Cross-check one symbolic direction against brute-force grid projection.

    The brute-force route samples the raw advection fields pointwise,
    differentiates by FFT, and projects by quadrature onto every candidate
    mode.  ``selection_ok`` requires both routes to agree on the single
    surviving mode (or on total vanishing); ``coefficient_ratio`` is
    symbolic/quadrature on that mode and must equal the same constant for
    every admissible input.  ``pinned_constant`` is the surviving coefficient
    relative to the closed-form weight, i.e. the empirically determined
    normalization constant of the direction lemmas (unit-basis convention).
    """
    symbolic = _direction_expansion(k, l, combo, slot)
    if grid is None:
        grid = 4 * (max(abs(k[0]), abs(k[1])) + max(abs(l[0]), abs(l[1]))) + 4
    if grid % 2:
        grid += 1
    x1, x2 = grid_mesh(grid)
    values = _combo_values(k, l, combo, slot, x1, x2)

    projections = {
        (q, parity): project_onto_mode(values, q, parity)
        for q in _candidate_wavevectors(k, l)
        for parity in (COS, SIN)
    }
    surviving = {key: c for key, c in projections.items() if abs(c) > zero_tol}

    if symbolic.degenerate is not None or symbolic.is_empty():
        ok = not surviving
        return VerificationReport(
            k, l, combo, slot, selection_ok=ok, degenerate=symbolic.degenerate,
            max_stray=max((abs(c) for c in projections.values()), default=0.0),
        )

    mode, sym_coeff = symbolic.single_mode()
    ok = set(surviving) == {(mode.k, mode.parity)}
    quad_coeff = projections.get((mode.k, mode.parity), 0.0)
    stray = max(
        (abs(c) for key, c in projections.items() if key != (mode.k, mode.parity)),
        default=0.0,
    )
    ratio = sym_coeff / quad_coeff if quad_coeff else float("nan")

    raw_target, parity = combo_target(k, l, combo, slot)
    _, sign = canonical_rep(raw_target, parity)
    weight = closed_form_weight(k, l, combo, slot)
    pinned = sym_coeff * sign / weight if weight else float("nan")

    return VerificationReport(
        k, l, combo, slot, selection_ok=ok, target_mode=mode,
        symbolic_coeff=sym_coeff, quadrature_coeff=quad_coeff,
        coefficient_ratio=ratio, pinned_constant=pinned, max_stray=stray,
    )


def verification_sweep(kmax: int, grid: Optional[int] = None) -> list[VerificationReport]:
    """All (k, l, combo, slot) reports with nonzero |k|, |l| <= kmax."""
    points = [
        (a, b)
        for a in range(-kmax, kmax + 1)
        for b in range(-kmax, kmax + 1)
        if (a, b) != (0, 0) and a * a + b * b <= kmax * kmax
    ]
    reports = []
    for k, l in itertools.product(points, repeat=2):
        for slot in (VELOCITY, MAGNETIC):
            for combo in COMBOS:
                reports.append(verify_bracket_identity(k, l, combo, slot, grid=grid))
    return reports
