"""Lattice reachability: generation recursion, window coverage, genealogy certificates.

Starting from a finite forced set of wavevectors (symmetrized under negation),
each generation adds every admissible sum k + l with k in the previous
generation and l forced, where admissibility demands an exact nonzero
perpendicular pairing and distinct squared moduli:

    <k, l_perp> != 0   and   |k|^2 != |l|^2.

Even-indexed generations correspond to reachable magnetic directions and
odd-indexed ones to reachable velocity directions.  The full spanning
condition asks both parity chains to exhaust the nonzero lattice; this module
decides it on bounded windows |k| <= R only, reporting the depth used and any
missing wavevectors rather than asserting the unbounded statement.

Intermediate sums may need to leave the reporting window before re-entering
it, so generations are tracked inside an inflated window whose slack is
recorded in every report.  All predicates are exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .lattice import Vec, norm_sq, perp_dot


@dataclass(frozen=True)
class ForcedSet:
    """A forced wavevector set and its closure under negation."""

    z0: frozenset[Vec]
    symmetrized: frozenset[Vec]

    @classmethod
    def from_wavevectors(cls, vectors: Iterable[Vec]) -> "ForcedSet":
        z0 = frozenset((int(a), int(b)) for a, b in vectors)
        if not z0:
            raise ValueError("forced set must be nonempty")
        if (0, 0) in z0:
            raise ValueError("forced set must not contain the zero wavevector")
        sym = frozenset(z0 | {(-a, -b) for a, b in z0})
        return cls(z0=z0, symmetrized=sym)

    def max_modulus(self) -> float:
        return math.sqrt(max(norm_sq(v) for v in self.symmetrized))


def admissible(k: Vec, l: Vec) -> bool:
    return perp_dot(k, l) != 0 and norm_sq(k) != norm_sq(l)


def next_generation(prev: set[Vec], forced: ForcedSet,
                    window_norm_sq: Optional[int] = None) -> set[Vec]:
    """Exact set {k + l : k in prev, l forced, admissible}, optionally windowed."""
    out: set[Vec] = set()
    for k in prev:
        for l in forced.symmetrized:
            if not admissible(k, l):
                continue
            v = (k[0] + l[0], k[1] + l[1])
            if v == (0, 0):
                continue
            if window_norm_sq is not None and norm_sq(v) > window_norm_sq:
                continue
            out.add(v)
    return out


def _window(radius: int) -> int:
    return radius * radius


def default_max_depth(radius: int) -> int:
    return 4 * radius


def inflation_slack(forced: ForcedSet, radius: int, max_depth: int) -> int:
    """Extra window radius for intermediate excursions, capped at 4*radius."""
    return min(math.ceil(2.0 * forced.max_modulus()) * max_depth, 4 * radius)


@dataclass
class HypothesisReport:
    radius: int
    even_covered: bool
    odd_covered: bool
    missing_even: set[Vec]
    missing_odd: set[Vec]
    depth_used: int
    max_depth: int
    window_bound: int

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "even_covered": self.even_covered,
            "odd_covered": self.odd_covered,
            "missing_even": sorted(list(v) for v in self.missing_even),
            "missing_odd": sorted(list(v) for v in self.missing_odd),
            "depth_used": self.depth_used,
            "max_depth": self.max_depth,
            "window_bound": self.window_bound,
        }


@dataclass
class GenerationTable:
    """Generations inside the inflated window, plus one recorded derivation each."""

    generations: list[set[Vec]] = field(default_factory=list)
    parent: dict[Vec, tuple[Vec, Vec, int]] = field(default_factory=dict)


def generation_table(forced: ForcedSet, depth: int,
                     window_bound: Optional[int] = None) -> GenerationTable:
    """Iterate the recursion ``depth`` times, recording first derivations."""
    wsq = _window(window_bound) if window_bound is not None else None
    table = GenerationTable(generations=[set(forced.symmetrized)])
    prev = table.generations[0]
    for n in range(1, depth + 1):
        cur: set[Vec] = set()
        for k in prev:
            for l in forced.symmetrized:
                if not admissible(k, l):
                    continue
                v = (k[0] + l[0], k[1] + l[1])
                if v == (0, 0):
                    continue
                if wsq is not None and norm_sq(v) > wsq:
                    continue
                cur.add(v)
                if v not in table.parent:
                    table.parent[v] = (k, l, n)
        table.generations.append(cur)
        if not cur:
            break
        prev = cur
    return table


def check_hypothesis(forced: ForcedSet, radius: int,
                     max_depth: Optional[int] = None) -> HypothesisReport:
    """Window-bounded coverage check of the two parity chains.

    Stops as soon as both the even- and odd-indexed unions cover every
    wavevector with 0 < |k| <= radius; exhausting ``max_depth`` without
    saturation produces a report with the missing sets, not an exception.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if max_depth is None:
        max_depth = default_max_depth(radius)
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")

    window_bound = radius + inflation_slack(forced, radius, max_depth)
    wsq = _window(window_bound)
    target = {
        (a, b)
        for a in range(-radius, radius + 1)
        for b in range(-radius, radius + 1)
        if (a, b) != (0, 0) and a * a + b * b <= radius * radius
    }

    in_window = lambda s: {v for v in s if norm_sq(v) <= radius * radius}
    current = set(forced.symmetrized)
    even_union = in_window(current)
    odd_union: set[Vec] = set()
    depth_used = 0
    for n in range(1, max_depth + 1):
        current = next_generation(current, forced, window_norm_sq=wsq)
        depth_used = n
        if not current:
            break
        if n % 2 == 0:
            even_union |= in_window(current)
        else:
            odd_union |= in_window(current)
        if even_union >= target and odd_union >= target:
            break

    return HypothesisReport(
        radius=radius,
        even_covered=even_union >= target,
        odd_covered=odd_union >= target,
        missing_even=target - even_union,
        missing_odd=target - odd_union,
        depth_used=depth_used,
        max_depth=max_depth,
        window_bound=window_bound,
    )


@dataclass
class Certificate:
    """A derivation chain target = k0 + l1 + ... + ln with admissible partial sums.

    ``chain`` is None when no chain of the requested parity exists within the
    searched depth and window.
    """

    target: Vec
    parity: str
    chain: Optional[list[Vec]]
    depth_searched: int
    window_bound: int

    def length(self) -> int:
        if self.chain is None:
            raise ValueError("no chain found")
        return len(self.chain) - 1

    def to_dict(self) -> dict:
        return {
            "target": list(self.target),
            "parity": self.parity,
            "found": self.chain is not None,
            "chain": [list(v) for v in self.chain] if self.chain else None,
            "depth_searched": self.depth_searched,
            "window_bound": self.window_bound,
        }


def generation_certificate(forced: ForcedSet, target: Vec, parity: str = "even",
                           max_depth: Optional[int] = None) -> Certificate:
    """Breadth-first search for a minimal chain of the requested step parity."""
    if target == (0, 0):
        raise ValueError("target must be nonzero")
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    radius = max(1, math.isqrt(norm_sq(target)) + 1)
    if max_depth is None:
        max_depth = default_max_depth(radius)
    window_bound = radius + inflation_slack(forced, radius, max_depth)
    wsq = _window(window_bound)
    want = 0 if parity == "even" else 1

    frontier = {v: [v] for v in forced.symmetrized}
    if want == 0 and target in frontier:
        return Certificate(target, parity, [target], 0, window_bound)

    # chains[v] at step n holds one minimal derivation of v in n steps;
    # parity classes alternate, so track the frontier only.
    depth = 0
    for n in range(1, max_depth + 1):
        depth = n
        new: dict[Vec, list[Vec]] = {}
        for k, chain in frontier.items():
            for l in forced.symmetrized:
                if not admissible(k, l):
                    continue
                v = (k[0] + l[0], k[1] + l[1])
                if v == (0, 0) or norm_sq(v) > wsq or v in new:
                    continue
                new[v] = chain + [l]
        if n % 2 == want and target in new:
            return Certificate(target, parity, new[target], n, window_bound)
        if not new:
            break
        frontier = new
    return Certificate(target, parity, None, depth, window_bound)


def verify_chain(forced: ForcedSet, cert: Certificate) -> bool:
    """Replay a certificate through the admissibility predicates."""
    if cert.chain is None:
        return False
    head, *steps = cert.chain
    if head not in forced.symmetrized:
        return False
    acc = head
    for l in steps:
        if l not in forced.symmetrized or not admissible(acc, l):
            return False
        acc = (acc[0] + l[0], acc[1] + l[1])
        if acc == (0, 0):
            return False
    if acc != cert.target:
        return False
    want = 0 if cert.parity == "even" else 1
    return len(steps) % 2 == want


def parity_unions(forced: ForcedSet, depth: int,
                  window_bound: Optional[int] = None) -> tuple[set[Vec], set[Vec]]:
    """Union of even- and odd-indexed generations up to ``depth`` inclusive."""
    table = generation_table(forced, depth, window_bound=window_bound)
    even: set[Vec] = set()
    odd: set[Vec] = set()
    for n, gen in enumerate(table.generations):
        if n > depth:
            break
        (even if n % 2 == 0 else odd).update(gen)
    return even, odd
