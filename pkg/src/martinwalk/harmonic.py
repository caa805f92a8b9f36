"""Harmonic functions and h-transforms of graded chains.

A function h on states is harmonic when h(x) equals the one-step average
of h under the chain, and normalized when h(root) = 1.  Every such h with
h >= 0 defines a reweighted chain through

    p_h(x, y) = h(y) p(x, y) / h(x),

restricted to the support F_h = {x : h(x) > 0}.  The routines here build
the transform, verify the density and kernel identities it satisfies,
check cotransition invariance, and invert the construction: a chain with
the same cotransitions as a base chain is recovered as an h-transform via
the marginal ratio h(x) = P_observed(Y_n = x) / P_base(Y_n = x).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .chain import DEFAULT_ATOM_BUDGET, GradedChain, State
from .errors import (
    BudgetExceededError,
    CotransitionMismatchError,
    NotHarmonicError,
    UnreachableStateError,
)
from .prob import FLOAT_TOL, Prob, format_prob, is_exact
from .reports import CheckReport, MonteCarloResult, Violation


class HarmonicFn:
    """A non-negative function on states, normalized to 1 at the root.

    Wraps a plain callable; the support predicate defaults to positivity
    of the value.
    """

    def __init__(
        self,
        fn: Callable[[State], Prob],
        name: str = "h",
        support: Optional[Callable[[State], bool]] = None,
    ):
        self._fn = fn
        self._support = support
        self.name = name

    def __call__(self, state: State) -> Prob:
        return self._fn(state)

    def supports(self, state: State) -> bool:
        if self._support is not None:
            return self._support(state)
        return self._fn(state) > 0

    def __repr__(self) -> str:
        return f"HarmonicFn({self.name!r})"

    @classmethod
    def one(cls) -> "HarmonicFn":
        return cls(lambda _s: Fraction(1), name="1")

    @classmethod
    def mixture(cls, weighted: Sequence[tuple[Prob, "HarmonicFn"]], name: str = "mixture") -> "HarmonicFn":
        """Convex combination of harmonic functions (again harmonic and normalized)."""
        parts = tuple(weighted)

        def value(state: State) -> Prob:
            return sum(w * h(state) for w, h in parts)

        return cls(value, name=name)


def is_harmonic(
    chain: GradedChain, h: HarmonicFn, max_level: int, tol: float = FLOAT_TOL
) -> CheckReport:
    """Report every failure of the mean-value identity below max_level.

    Also checks h(root) = 1 and h >= 0 on all enumerated states.  Failures
    are report content, not errors.
    """
    report = CheckReport(f"harmonicity[{h.name} on {chain.name}]")
    report.record("root-normalization", 1, h(chain.root), tol)
    for n in range(max_level + 1):
        for x in chain.enumerate_level(n):
            hx = h(x)
            report.checked += 1
            if hx < 0:
                report.violations.append(Violation(f"non-negativity@{x}", 0, hx))
            if n < max_level:
                mean = sum(q * h(y) for y, q in chain.successors(x))
                report.record(f"mean-value@{x}", hx, mean, tol)
    return report


class HTransformChain(GradedChain):
    """The base chain reweighted by a normalized harmonic function.

    State enumeration shrinks to the support of h; each transition row is
    validated to sum to 1 when it is first built, which is exactly
    harmonicity at that state.
    """

    def __init__(self, base: GradedChain, h: HarmonicFn, tol: float = FLOAT_TOL):
        root_value = h(base.root)
        if root_value != 1 and not (
            not is_exact(root_value) and abs(float(root_value) - 1.0) <= tol
        ):
            raise NotHarmonicError(
                f"{h.name} has value {format_prob(root_value)} at the root, expected 1"
            )

        def family(n: int) -> tuple[State, ...]:
            return tuple(s for s in base.enumerate_level(n) if h.supports(s))

        def successors(x: State):
            hx = h(x)
            if hx == 0:
                raise UnreachableStateError(f"{x} lies outside the support of {h.name}")
            row = []
            total = 0
            for y, q in base.successors(x):
                hy = h(y)
                if hy == 0 or q == 0:
                    continue
                p = hy * q / hx
                total += p
                row.append((y, p))
            exact = is_exact(total)
            if (exact and total != 1) or (not exact and abs(float(total) - 1.0) > tol):
                raise NotHarmonicError(
                    f"{h.name} is not harmonic at {x}: reweighted row sums to "
                    f"{format_prob(total)}"
                )
            return tuple(row)

        super().__init__(
            root=base.root,
            family=family,
            successors=successors,
            level_budget=base.level_budget,
            name=f"h-transform[{h.name}]({base.name})",
        )
        self.base = base
        self.h = h


def h_transform(chain: GradedChain, h: HarmonicFn) -> HTransformChain:
    """Reweight the chain by h; rows are checked lazily as they are built."""
    return HTransformChain(chain, h)


def density_ratio_check(
    base: GradedChain,
    transformed: HTransformChain,
    n: int,
    atom_budget: int = DEFAULT_ATOM_BUDGET,
    tol: float = FLOAT_TOL,
) -> CheckReport:
    """Check P_h(path) = h(x_n) P(path) for every positive base path of length n."""
    h = transformed.h
    base_law = base.cylinder_law(n, atom_budget)
    transformed_law = transformed.cylinder_law(n, atom_budget)
    report = CheckReport(f"density-ratio[{transformed.name}]@{n}")
    for path, p in base_law.atoms.items():
        if p == 0:
            continue
        lifted = transformed_law.atoms.get(path, 0)
        report.record(f"path={path}", h(path[-1]) * p, lifted, tol)
    return report


def kernel_transform_check(
    base: GradedChain,
    transformed: HTransformChain,
    max_level: int,
    tol: float = FLOAT_TOL,
) -> CheckReport:
    """Check K_h(x, y) h(x) = K(x, y) on the support, both sides computed independently."""
    h = transformed.h
    report = CheckReport(f"kernel-transform[{transformed.name}]")
    for m in range(max_level + 1):
        for x in transformed.enumerate_level(m):
            if transformed.forward_law(m).prob(x) == 0:
                continue
            hx = h(x)
            for n in range(m, max_level + 1):
                for y in transformed.enumerate_level(n):
                    if transformed.forward_law(n).prob(y) == 0:
                        continue
                    original = base.martin_kernel(x, y)
                    lifted = transformed.martin_kernel(x, y)
                    report.record(f"K_h@({x}; {y})", original, lifted * hx, tol)
    return report


def cotransition_equality_check(
    a: GradedChain, b: GradedChain, max_level: int, tol: float = FLOAT_TOL
) -> CheckReport:
    """Compare backward one-step laws of two chains over the same family.

    Only conditioning states reachable in both chains are compared; the
    predecessor sets are unioned so that missing mass counts as 0.
    """
    report = CheckReport(f"cotransition-equality[{a.name} vs {b.name}]")
    for n in range(1, max_level + 1):
        law_a = a.forward_law(n)
        law_b = b.forward_law(n)
        shared = sorted(set(law_a.support) & set(law_b.support))
        for y in shared:
            candidates = {x for x, _ in a.predecessors(y)} | {x for x, _ in b.predecessors(y)}
            for x in sorted(candidates):
                report.record(
                    f"cotransition@({y} -> {x})",
                    a.cotransition(y, x),
                    b.cotransition(y, x),
                    tol,
                )
    return report


def recover_h(base: GradedChain, observed: GradedChain, max_level: int) -> HarmonicFn:
    """Exhibit an observed chain as an h-transform of the base chain.

    Requires matching cotransitions up to max_level and a weakly
    irreducible base; returns the marginal-ratio function
    h(x) = P_observed(Y_n = x) / P_base(Y_n = x), which the caller can
    verify with ``is_harmonic`` and ``h_transform``.
    """
    equality = cotransition_equality_check(base, observed, max_level)
    if not equality.ok:
        raise CotransitionMismatchError(str(equality))
    irreducibility = base.check_weak_irreducibility(max_level)
    if not irreducibility.ok:
        raise UnreachableStateError(
            f"base chain {base.name} is not weakly irreducible up to level {max_level}"
        )
    eval_budget = min(base.level_budget, observed.level_budget)

    def value(state: State) -> Prob:
        if state.level > eval_budget:
            raise BudgetExceededError(
                f"recovered h evaluated at level {state.level}, budget {eval_budget}"
            )
        base_mass = base.forward_law(state.level).prob(state)
        if base_mass == 0:
            raise UnreachableStateError(
                f"recovered h undefined at {state}: zero base probability"
            )
        return observed.forward_law(state.level).prob(state) / base_mass

    return HarmonicFn(value, name=f"recovered[{observed.name}]")


def representation_check(
    base: GradedChain,
    h: HarmonicFn,
    x: State,
    n: int,
    transformed: Optional[HTransformChain] = None,
    tol: float = FLOAT_TOL,
) -> CheckReport:
    """Exact finite-horizon representation identity: E_{P_h} K(x, Y_n) = h(x).

    K(x, Y_n) is a backwards martingale under the base chain, so the
    identity holds at every horizon n >= level(x); this is the finitely
    checkable form of the boundary representation of h.
    """
    if not h.supports(x):
        raise UnreachableStateError(f"{x} lies outside the support of {h.name}")
    if transformed is None:
        transformed = h_transform(base, h)
    law = transformed.forward_law(n)
    total = sum(base.martin_kernel(x, y) * p for y, p in law.items())
    report = CheckReport(f"representation[{h.name}]@({x}, n={n})")
    report.record("expected-kernel", h(x), total, tol)
    return report


def representation_check_mc(
    base: GradedChain,
    h: HarmonicFn,
    x: State,
    n: int,
    replicates: int,
    seed: int,
    transformed: Optional[GradedChain] = None,
    kernel: Optional[Callable[[State, State], Prob]] = None,
) -> MonteCarloResult:
    """Monte Carlo form of the representation identity at large horizons.

    Samples Y_n under the transformed chain and averages K(x, Y_n).  Pass
    ``kernel`` to evaluate K in closed form when n exceeds the enumeration
    budget, and ``transformed`` to substitute an equivalent chain with a
    faster sampler (equivalence should be established separately).
    """
    if not h.supports(x):
        raise UnreachableStateError(f"{x} lies outside the support of {h.name}")
    if transformed is None:
        transformed = h_transform(base, h)
    if kernel is None:
        kernel = base.martin_kernel
    finals = transformed.sample_final(n, seed, replicates)
    values = np.array([float(kernel(x, y)) for y in finals])
    estimate = float(values.mean())
    spread = float(values.std(ddof=1)) if replicates > 1 else 0.0
    return MonteCarloResult(
        name=f"representation-mc[{h.name}]@({x}, n={n})",
        estimate=estimate,
        target=float(h(x)),
        std_error=spread / math.sqrt(replicates),
        replicates=replicates,
    )
