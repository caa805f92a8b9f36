"""Exchangeable sequences over a finite alphabet and their counting chains.

Sources produce exact joint laws of (X_1, ..., X_n) with symbols in
{1, ..., d}: finite mixtures of i.i.d. product laws, reinforced urns, and a
deliberately non-exchangeable Markov source used as a negative control.

Counting the symbol occurrences turns a sequence law into a law on
composition paths.  For exchangeable sources that path process is a Markov
chain whose cotransitions are the universal (y_j + 1) / (n + 1) law, which
identifies it as an h-transform of the uniform composition walk; recovering
h and reading off the normalized final counts Y_n / n then recovers the
directing measure.  The binary-expansion helpers lift these finite-alphabet
facts to sequences with values in [0, 1).
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .chain import (
    DEFAULT_ATOM_BUDGET,
    CylinderLaw,
    GradedChain,
    State,
    markov_property_check,
    replicate_rng,
)
from .compositions import polya_cotransition, uniform_walk
from .errors import BudgetExceededError, MartinWalkError, NonStochasticError, UnreachableStateError
from .harmonic import HarmonicFn, h_transform, is_harmonic, recover_h
from .prob import FLOAT_TOL, Prob, format_prob, probs_equal, validate_simplex
from .reports import CheckReport, MonteCarloResult

_POLYA_SAMPLE_BLOCK = 256


# -- sources -----------------------------------------------------------------


@dataclass(frozen=True)
class MixtureSource:
    """Finite mixture of i.i.d. product laws: pick an atom, then draw i.i.d."""

    atoms: tuple[tuple[Prob, ...], ...]
    weights: tuple[Prob, ...]

    def __post_init__(self):
        atoms = tuple(validate_simplex(a) for a in self.atoms)
        weights = validate_simplex(self.weights)
        if len(atoms) != len(weights):
            raise ValueError("one weight per atom required")
        if len({len(a) for a in atoms}) != 1:
            raise ValueError("all atoms must share the alphabet size")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def d(self) -> int:
        return len(self.atoms[0])

    @property
    def name(self) -> str:
        return f"mixture[{len(self.atoms)} atoms, d={self.d}]"

    def word_probability(self, word: Sequence[int]) -> Prob:
        _check_word(word, self.d)
        total: Prob = 0
        for w, atom in zip(self.weights, self.atoms):
            p = w
            for s in word:
                p *= atom[s - 1]
            total += p
        return total

    def directing_moment(self, counts: Sequence[int]) -> Prob:
        """Mixture moment of the directing law: sum_i w_i prod_j mu_i(j)^c_j."""
        total: Prob = 0
        for w, atom in zip(self.weights, self.atoms):
            p = w
            for a, c in zip(atom, counts):
                if c:
                    p *= a**c
            total += p
        return total

    def directing_atoms(self) -> tuple[tuple[Prob, tuple[Prob, ...]], ...]:
        return tuple(zip(self.weights, self.atoms))

    def sample_final_counts(self, n: int, seed: int, start: int, stop: int) -> np.ndarray:
        weights = np.array([float(w) for w in self.weights])
        atoms = np.array([[float(a) for a in atom] for atom in self.atoms])
        out = np.empty((stop - start, self.d), dtype=np.int64)
        for i, r in enumerate(range(start, stop)):
            rng = replicate_rng(seed, r)
            atom = atoms[rng.choice(len(weights), p=weights)]
            out[i] = rng.multinomial(n, atom)
        return out


@dataclass(frozen=True)
class PolyaUrnSource:
    """Reinforced urn: draw a symbol with probability proportional to its count,
    then return the ball together with one more of the same colour."""

    initial: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.initial)
        if not counts or any(c <= 0 for c in counts):
            raise ValueError("urn needs a positive initial count per symbol")
        object.__setattr__(self, "initial", counts)

    @property
    def d(self) -> int:
        return len(self.initial)

    @property
    def name(self) -> str:
        return f"polya{self.initial}"

    def word_probability(self, word: Sequence[int]) -> Fraction:
        _check_word(word, self.d)
        counts = [0] * self.d
        total = sum(self.initial)
        p = Fraction(1)
        for k, s in enumerate(word):
            p *= Fraction(self.initial[s - 1] + counts[s - 1], total + k)
            counts[s - 1] += 1
        return p

    def directing_moment(self, counts: Sequence[int]) -> Fraction:
        return dirichlet_moment(self.initial, counts)

    def sample_final_counts(self, n: int, seed: int, start: int, stop: int) -> np.ndarray:
        initial = np.array(self.initial, dtype=np.float64)
        total0 = initial.sum()
        out = np.empty((stop - start, self.d), dtype=np.int64)
        for block_lo in range(start, stop, _POLYA_SAMPLE_BLOCK):
            block_hi = min(block_lo + _POLYA_SAMPLE_BLOCK, stop)
            rows = block_hi - block_lo
            uniforms = np.empty((rows, n))
            for i, r in enumerate(range(block_lo, block_hi)):
                uniforms[i] = replicate_rng(seed, r).random(n)
            counts = np.zeros((rows, self.d), dtype=np.int64)
            indices = np.arange(rows)
            for k in range(n):
                cum = np.cumsum((initial + counts) / (total0 + k), axis=1)
                chosen = (uniforms[:, k][:, None] >= cum).sum(axis=1)
                np.clip(chosen, 0, self.d - 1, out=chosen)
                counts[indices, chosen] += 1
            out[block_lo - start : block_hi - start] = counts
        return out


@dataclass(frozen=True)
class MarkovSource:
    """Symbol chain with state-dependent rows; non-exchangeable negative control."""

    initial: tuple[Prob, ...]
    rows: tuple[tuple[Prob, ...], ...]

    def __post_init__(self):
        initial = validate_simplex(self.initial)
        rows = tuple(validate_simplex(r) for r in self.rows)
        if len(rows) != len(initial) or any(len(r) != len(initial) for r in rows):
            raise ValueError("need one stochastic row per symbol")
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "rows", rows)

    @property
    def d(self) -> int:
        return len(self.initial)

    @property
    def name(self) -> str:
        return f"markov[d={self.d}]"

    def word_probability(self, word: Sequence[int]) -> Prob:
        _check_word(word, self.d)
        if not word:
            return Fraction(1)
        p = self.initial[word[0] - 1]
        for prev, cur in zip(word, word[1:]):
            p *= self.rows[prev - 1][cur - 1]
        return p


def _check_word(word: Sequence[int], d: int) -> None:
    for s in word:
        if not 1 <= s <= d:
            raise ValueError(f"out-of-alphabet symbol {s!r} (alphabet is 1..{d})")


# -- exact sequence and counting laws -----------------------------------------


def source_cylinder_law(source, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET) -> CylinderLaw:
    """Exact joint law of (X_1, ..., X_n) as a cylinder table over words."""
    if source.d**n > atom_budget:
        raise BudgetExceededError(
            f"{source.d}^{n} words exceed the atom budget {atom_budget}"
        )
    atoms: dict[tuple, Prob] = {}
    for word in itertools.product(range(1, source.d + 1), repeat=n):
        p = source.word_probability(word)
        if p != 0:
            atoms[word] = p
    law = CylinderLaw(n, atoms)
    if not probs_equal(law.total(), 1):
        raise NonStochasticError(
            f"word probabilities of {source.name} sum to {format_prob(law.total())}"
        )
    return law


def counting_chain_path(word: Sequence[int], d: int) -> list[State]:
    """Occurrence counts after each prefix: Y_k = (#{i <= k : X_i = j})_j."""
    counts = [0] * d
    path = [State(0, tuple(counts))]
    for s in word:
        _check_word((s,), d)
        counts[s - 1] += 1
        path.append(State(len(path), tuple(counts)))
    return path


def counting_chain_law(source, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET) -> CylinderLaw:
    """Push-forward of the sequence law onto composition paths.

    The count path reveals the word (each step increments one coordinate),
    so this is a bijective re-keying of the word law.
    """
    word_law = source_cylinder_law(source, n, atom_budget)
    atoms = {
        tuple(counting_chain_path(word, source.d)[1:]): p
        for word, p in word_law.atoms.items()
    }
    return CylinderLaw(n, dict(sorted(atoms.items())))


def dead_symbols(source, atom_budget: int = DEFAULT_ATOM_BUDGET) -> tuple[int, ...]:
    """Symbols with zero one-step probability; their states are pruned, not errors."""
    law = source_cylinder_law(source, 1, atom_budget)
    return tuple(s for s in range(1, source.d + 1) if law.atoms.get((s,), 0) == 0)


def counting_chain(source, horizon: int, atom_budget: int = DEFAULT_ATOM_BUDGET) -> GradedChain:
    """The counting process as a graded chain, with transitions extracted from
    the exact path law (not from any closed form)."""
    law = counting_chain_law(source, horizon, atom_budget)
    d = source.d
    root = State(0, (0,) * d)
    mass: dict[State, Prob] = defaultdict(int)
    joint: dict[State, dict[State, Prob]] = defaultdict(lambda: defaultdict(int))
    for path, p in law.atoms.items():
        prev = root
        mass[root] = 1
        for st in path:
            mass[st] += p
            joint[prev][st] += p
            prev = st
    families: dict[int, tuple[State, ...]] = {}
    for st in mass:
        families.setdefault(st.level, ())
    for level in families:
        families[level] = tuple(sorted(s for s in mass if s.level == level))
    table = {
        x: tuple((y, q / mass[x]) for y, q in sorted(rows.items()))
        for x, rows in joint.items()
    }

    def family(n: int) -> tuple[State, ...]:
        return families.get(n, ())

    def successors(x: State):
        row = table.get(x)
        if row is None:
            if x.level >= horizon:
                raise BudgetExceededError(
                    f"counting chain extracted up to horizon {horizon}"
                )
            raise UnreachableStateError(f"{x} has zero probability under {source.name}")
        return row

    return GradedChain(
        root=root,
        family=family,
        successors=successors,
        level_budget=horizon,
        name=f"counting[{source.name}]",
    )


# -- exchangeability and the two decisive counting-chain facts ----------------


def cylinder_exchangeability_report(law: CylinderLaw, tol: float = FLOAT_TOL) -> CheckReport:
    """Permutation invariance of a sequence law, checked class by class.

    Within each multiset of symbols all orderings must carry equal mass
    (orderings absent from the table count as mass 0).
    """
    report = CheckReport("exchangeability")
    seen: set[tuple] = set()
    for word in sorted(law.atoms):
        key = tuple(sorted(word))
        if key in seen:
            continue
        seen.add(key)
        orderings = sorted(set(itertools.permutations(key)))
        reference = law.atoms.get(orderings[0], 0)
        for other in orderings[1:]:
            report.record(
                f"permutation@{other} vs {orderings[0]}",
                reference,
                law.atoms.get(other, 0),
                tol,
            )
    return report


def exchangeability_report(source, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET) -> CheckReport:
    return cylinder_exchangeability_report(source_cylinder_law(source, n, atom_budget))


def verify_counting_markov(source, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET) -> CheckReport:
    """Markov property of the counting process, from the exact path law."""
    report = markov_property_check(counting_chain_law(source, n, atom_budget))
    report.name = f"counting-markov[{source.name}]@{n}"
    dead = dead_symbols(source, atom_budget)
    if dead:
        report.note(f"symbols {dead} never occur; their states are pruned")
    return report


def verify_counting_cotransitions(
    source, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET, tol: float = FLOAT_TOL
) -> CheckReport:
    """Backward one-step law of the counting process against (y_j + 1) / (k + 1).

    This is the decisive identity: together with the Markov property it
    exhibits the counting chain as an h-transform of the uniform walk.
    """
    law = counting_chain_law(source, n, atom_budget)
    report = CheckReport(f"counting-cotransitions[{source.name}]@{n}")
    root_payload = (0,) * source.d
    for y, p in sorted(law.marginal(1).items()):
        if p == 0:
            continue
        j = 1 + y.payload.index(1)
        report.record(
            f"cotransition@({y} -> root)", polya_cotransition(root_payload, j), 1, tol
        )
    for k in range(1, n):
        next_mass = law.marginal(k + 1)
        for (x, y), p in sorted(law.pair_marginal(k).items()):
            if p == 0:
                continue
            increment = [b - a for a, b in zip(x.payload, y.payload)]
            j = 1 + increment.index(1)
            report.record(
                f"cotransition@({y} -> {x})",
                polya_cotransition(x.payload, j),
                p / next_mass[y],
                tol,
            )
    dead = dead_symbols(source, atom_budget)
    if dead:
        report.note(f"symbols {dead} never occur; their states are pruned")
    return report


def counting_h_recovery(source, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET) -> HarmonicFn:
    """Recover the harmonic function for which the counting chain is the
    h-transform of the uniform walk, and verify the identification exactly."""
    observed = counting_chain(source, n, atom_budget)
    base = uniform_walk(source.d, level_budget=n)
    h = recover_h(base, observed, max_level=n)
    harmonicity = is_harmonic(base, h, n)
    if not harmonicity.ok:
        raise MartinWalkError(f"recovered function is not harmonic:\n{harmonicity}")
    reproduced = h_transform(base, h).cylinder_law(n, atom_budget)
    expected = counting_chain_law(source, n, atom_budget)
    if set(reproduced.atoms) != set(expected.atoms) or any(
        not probs_equal(p, expected.atoms[path]) for path, p in reproduced.atoms.items()
    ):
        raise MartinWalkError(
            f"h-transform of the uniform walk does not reproduce the counting law of {source.name}"
        )
    return h


# -- directing measure ---------------------------------------------------------


@dataclass(frozen=True)
class ClusterSummary:
    atom: tuple[float, ...]
    count: int
    weight: float
    mean: tuple[float, ...]


@dataclass(frozen=True)
class DirectingEstimate:
    """Per-replicate boundary points Y_n / n approximating the directing measure."""

    samples: np.ndarray
    horizon: int
    seed: int

    @property
    def replicates(self) -> int:
        return self.samples.shape[0]

    def cluster_summary(self, atoms: Sequence[Sequence[Prob]]) -> list[ClusterSummary]:
        """Nearest-atom assignment, for verification against a known mixing law."""
        pts = np.array([[float(a) for a in atom] for atom in atoms])
        distances = ((self.samples[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        labels = distances.argmin(axis=1)
        out = []
        for i, atom in enumerate(pts):
            rows = self.samples[labels == i]
            mean = tuple(map(float, rows.mean(axis=0))) if len(rows) else tuple(atom)
            out.append(
                ClusterSummary(tuple(atom), len(rows), len(rows) / self.replicates, mean)
            )
        return out

    def coordinate_moments(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        means = tuple(map(float, self.samples.mean(axis=0)))
        seconds = tuple(map(float, (self.samples**2).mean(axis=0)))
        return means, seconds


def _sample_block(args) -> np.ndarray:
    source, horizon, seed, lo, hi = args
    return source.sample_final_counts(horizon, seed, lo, hi)


def estimate_directing_measure(
    source,
    horizon: int,
    replicates: int,
    seed: int,
    workers: int = 1,
    block_size: int = 256,
) -> DirectingEstimate:
    """Sample the counting process to the horizon and return Y_n / n per replicate.

    Replicate r always uses the stream (seed, r), so the result is independent
    of the block partition and of the worker count.  Multi-worker runs fan
    the blocks out to separate processes (the urn update loop holds the GIL).
    """
    tasks = [
        (source, horizon, seed, lo, min(lo + block_size, replicates))
        for lo in range(0, replicates, block_size)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_block, tasks))
    else:
        parts = [_sample_block(t) for t in tasks]
    counts = np.vstack(parts) if parts else np.zeros((0, source.d), dtype=np.int64)
    return DirectingEstimate(counts.astype(np.float64) / horizon, horizon, seed)


def dirichlet_moment(initial: Sequence[int], counts: Sequence[int]) -> Fraction:
    """Mixed moment E prod_j p_j^{c_j} of a Dirichlet law with the given parameters."""
    if len(initial) != len(counts):
        raise ValueError("parameter and count lengths differ")
    num = 1
    for a, c in zip(initial, counts):
        for t in range(c):
            num *= a + t
    den = 1
    total = sum(initial)
    for t in range(sum(counts)):
        den *= total + t
    return Fraction(num, den)


def definetti_identity_check(
    source,
    k: int,
    directing: Optional[Sequence[tuple[Prob, Sequence[Prob]]]] = None,
    atom_budget: int = DEFAULT_ATOM_BUDGET,
    tol: float = FLOAT_TOL,
) -> CheckReport:
    """Cylinder probabilities against the mixture integral of the directing law.

    With ``directing=None`` the source's own closed-form moment is used (the
    Dirichlet moment for urns); an explicit list of (weight, atom) pairs can
    be passed instead.
    """
    if source.d**k > atom_budget:
        raise BudgetExceededError(f"{source.d}^{k} cylinders exceed the atom budget")
    report = CheckReport(f"definetti-identity[{source.name}]@{k}")
    for word in itertools.product(range(1, source.d + 1), repeat=k):
        counts = [0] * source.d
        for s in word:
            counts[s - 1] += 1
        if directing is None:
            integral = source.directing_moment(counts)
        else:
            integral = 0
            for w, atom in directing:
                piece = w
                for a, c in zip(atom, counts):
                    if c:
                        piece *= a**c
                integral += piece
        report.record(f"cylinder@{word}", integral, source.word_probability(word), tol)
    return report


def definetti_identity_mc(
    source, estimate: DirectingEstimate, k: int, atom_budget: int = DEFAULT_ATOM_BUDGET
) -> list[MonteCarloResult]:
    """Same identity with the integral replaced by an average over estimated
    boundary points; one z-scored record per cylinder."""
    if source.d**k > atom_budget:
        raise BudgetExceededError(f"{source.d}^{k} cylinders exceed the atom budget")
    out = []
    for word in itertools.product(range(1, source.d + 1), repeat=k):
        values = np.ones(estimate.replicates)
        for s in word:
            values = values * estimate.samples[:, s - 1]
        spread = float(values.std(ddof=1)) if estimate.replicates > 1 else 0.0
        out.append(
            MonteCarloResult(
                name=f"definetti-mc@{word}",
                estimate=float(values.mean()),
                target=float(source.word_probability(word)),
                std_error=spread / math.sqrt(estimate.replicates),
                replicates=estimate.replicates,
            )
        )
    return out


# -- binary expansion lift ------------------------------------------------------


def binary_digits(x, count: int) -> tuple[int, ...]:
    """First ``count`` binary digits of x in [0, 1) via floor(2^k x) - 2 floor(2^(k-1) x).

    Exact for floats and rationals alike; dyadic values get the terminating
    expansion, which is what the floor formula produces.
    """
    if count < 1:
        raise ValueError("need at least one digit")
    value = Fraction(x)
    if not 0 <= value < 1:
        raise ValueError(f"expected a value in [0, 1), got {x!r}")
    digits = []
    previous = 0
    for k in range(1, count + 1):
        current = (value.numerator << k) // value.denominator
        digits.append(int(current - 2 * previous))
        previous = current
    return tuple(digits)


def lift_sequence(xs: Sequence, depth: int) -> tuple[tuple[int, ...], ...]:
    """Elementwise digit truncation of a [0, 1)-valued sequence."""
    return tuple(binary_digits(x, depth) for x in xs)


def reconstruct_real(digits: Sequence[int]) -> Fraction:
    """Partial sum sum_k digits_k 2^{-k}; inverts binary_digits up to 2^{-K}."""
    total = 0
    for k, digit in enumerate(digits, start=1):
        if digit not in (0, 1):
            raise ValueError(f"digit {digit!r} is not binary")
        if digit:
            total += 1 << (len(digits) - k)
    return Fraction(total, 1 << len(digits))


def lift_point_masses(masses: Mapping, depth: int) -> dict[tuple[int, ...], Prob]:
    """Push a finitely supported law on [0, 1) forward to depth-k digit tuples."""
    out: dict[tuple[int, ...], Prob] = defaultdict(int)
    for point, weight in masses.items():
        out[binary_digits(point, depth)] += weight
    return dict(sorted(out.items()))


def lift_source_law(
    source, points: Sequence, depth: int, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET
) -> CylinderLaw:
    """Law of the digit-truncated sequence when symbol s stands for points[s-1]."""
    if len(points) != source.d:
        raise ValueError("need one point per symbol")
    digit_of = {s: binary_digits(points[s - 1], depth) for s in range(1, source.d + 1)}
    word_law = source_cylinder_law(source, n, atom_budget)
    atoms: dict[tuple, Prob] = defaultdict(int)
    for word, p in word_law.atoms.items():
        atoms[tuple(digit_of[s] for s in word)] += p
    return CylinderLaw(n, dict(sorted(atoms.items())))


def projection_consistency_check(
    law_deeper: Mapping, law_shallower: Mapping, tol: float = FLOAT_TOL
) -> CheckReport:
    """Dropping the last digit must push the deeper law onto the shallower one."""
    for label, law in (("deeper", law_deeper), ("shallower", law_shallower)):
        total = sum(law.values())
        if not probs_equal(total, 1, tol):
            raise NonStochasticError(f"{label} law sums to {format_prob(total)}")
    depths = {len(k) for k in law_deeper} | {len(k) + 1 for k in law_shallower}
    if len(depths) != 1:
        raise ValueError("expected digit depths k+1 and k")
    pushed: dict[tuple, Prob] = defaultdict(int)
    for digits, weight in law_deeper.items():
        pushed[digits[:-1]] += weight
    report = CheckReport("projection-consistency")
    for key in sorted(set(pushed) | set(law_shallower)):
        report.record(f"digits={key}", law_shallower.get(key, 0), pushed.get(key, 0), tol)
    return report


def ks_distance_uniform(values: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance of a sample to the uniform law on [0, 1]."""
    xs = np.sort(np.asarray(values, dtype=np.float64))
    n = len(xs)
    if n == 0:
        raise ValueError("empty sample")
    below = np.arange(n) / n
    above = np.arange(1, n + 1) / n
    return float(max((xs - below).max(), (above - xs).max()))
