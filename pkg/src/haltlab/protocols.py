"""End-to-end experiments: halting readout by measurement, majority-vote
amplification, parity decoding through the rank permutation, rotation-angle
estimation with certified binary digits, angle-perturbation sweeps, and
inductive checking of a claimed halting oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union


from .machine import decode_program, run_bounded
from .oracle import (
    DyadicRational,
    HaltingSurrogate,
    PrefixError,
    RankTable,
    dovetail_usage,
    g_T,
    g_inverse_T,
)
from .quantum import (
    DiagonalObservable,
    PermutationMap,
    SeededRng,
    apply_permutation,
    measure_diagonal,
    measure_diagonal_noisy,
    measure_sigma_z_shots,
    prepare_basis,
    rotate_qubit,
)

Angle = Union[DyadicRational, Fraction, float]

SAMPLERS = ("shots", "binomial")


def halting_observable(surrogate: HaltingSurrogate) -> DiagonalObservable:
    return DiagonalObservable(surrogate.h, spectrum=(0, 1), name=f"h_{surrogate.bound}")


def rank_permutation(table: RankTable) -> PermutationMap:
    return PermutationMap(lambda x: g_T(x, table), lambda y: g_inverse_T(y, table), name="g_T")


def truncated_permutation(g: PermutationMap, dim: int) -> PermutationMap:
    """Permutation of ``0..dim-1`` agreeing with ``g`` wherever ``g`` stays below ``dim``.

    Indices whose image leaks past the truncation are matched, in ascending
    order, with the targets in ``0..dim-1`` that ``g`` leaves unhit.
    """
    mapping = {}
    leaking = []
    for x in range(dim):
        y = g(x)
        if y < dim:
            mapping[x] = y
        else:
            leaking.append(x)
    hit = set(mapping.values())
    free = [y for y in range(dim) if y not in hit]
    mapping.update(zip(leaking, free))
    return PermutationMap.from_dict(mapping)


# -- halting measurement ----------------------------------------------------

def protocol_measure_halting(x: int, surrogate: HaltingSurrogate, D: int, rng: SeededRng) -> int:
    """Prepare ``|x>``, measure the halting observable, return the outcome."""
    value, _ = measure_diagonal(prepare_basis(x, D), halting_observable(surrogate), rng)
    return int(value)


@dataclass(frozen=True)
class AmplificationPlan:
    eps: float
    confidence: float
    k: int

    @classmethod
    def for_target(cls, eps: float, confidence: float) -> "AmplificationPlan":
        """Hoeffding repetition count for a majority vote of ``eps``-noisy readouts."""
        if not 0 <= eps < 0.5:
            raise ValueError("eps must be in [0, 1/2)")
        if not 0.5 < confidence < 1:
            raise ValueError("confidence must be in (1/2, 1)")
        k = math.ceil(math.log(2 / (1 - confidence)) / (2 * (0.5 - eps) ** 2))
        return cls(eps, confidence, k)


def _nearest(value: float, spectrum: Sequence[float]) -> float:
    return min(spectrum, key=lambda v: (abs(v - value), v))


def amplified_votes(
    x: int,
    surrogate: HaltingSurrogate,
    eps: float,
    delta: float,
    confidence: float,
    rng: SeededRng,
    D: int | None = None,
) -> tuple[AmplificationPlan, list[int]]:
    """Rounded outcomes of ``k`` independent noisy readouts of ``|x>``."""
    plan = AmplificationPlan.for_target(eps, confidence)
    if not 0 <= delta < 0.5:
        raise ValueError("delta must be in [0, 1/2)")
    D = D if D is not None else max(x + 1, surrogate.x_max + 1)
    obs = halting_observable(surrogate)
    state = prepare_basis(x, D)
    votes = []
    for _ in range(plan.k):
        outcome, _ = measure_diagonal_noisy(state, obs, eps, delta, rng)
        votes.append(int(_nearest(outcome, obs.spectrum)))
    return plan, votes


def protocol_amplified(
    x: int,
    surrogate: HaltingSurrogate,
    eps: float,
    delta: float,
    confidence: float,
    rng: SeededRng,
    D: int | None = None,
) -> int:
    """Majority vote over the planned number of noisy readouts.

    A tied vote returns 0: halting is only reported on a strict majority.
    """
    _, votes = amplified_votes(x, surrogate, eps, delta, confidence, rng, D)
    return int(2 * sum(votes) > len(votes))


# -- parity decoding ----------------------------------------------------------

def parity_readout(x: int, table: RankTable, D: int, rng: SeededRng) -> int:
    """Prepare ``|x>``, apply the rank permutation, read out the basis index."""
    if not 0 <= x < len(table):
        raise PrefixError(f"index {x} outside table prefix of length {len(table)}")
    state = apply_permutation(prepare_basis(x, D), rank_permutation(table))
    value, _ = measure_diagonal(state, DiagonalObservable.identity(), rng)
    return int(value)


def protocol_parity(x: int, surrogate: HaltingSurrogate, table: RankTable, D: int, rng: SeededRng) -> int:
    """Parity of the post-permutation readout; equals ``h_T(x)``."""
    k = min(len(table), surrogate.x_max + 1)
    if table.bits[:k] != tuple(surrogate.h(x) for x in range(k)):
        raise ValueError("rank table does not match the surrogate prefix")
    return parity_readout(x, table, D, rng) % 2


# -- rotation angle estimation --------------------------------------------------

def _angle(omega: Angle) -> Fraction:
    if isinstance(omega, DyadicRational):
        return omega.value
    return Fraction(omega)


@dataclass(frozen=True)
class OmegaEstimate:
    shots: int
    successes: int
    p_hat: float
    omega_hat: float
    radius: float
    confidence: float

    @property
    def interval(self) -> tuple[float, float]:
        return self.omega_hat - self.radius, self.omega_hat + self.radius

    def covers(self, omega: Angle) -> bool:
        """Exact test of ``omega`` against ``[omega_hat - radius, omega_hat + radius]``."""
        w, c, r = _angle(omega), Fraction(self.omega_hat), Fraction(self.radius)
        return c - r <= w <= c + r


def hoeffding_radius(shots: int, confidence: float) -> float:
    """Two-sided Hoeffding half-width for a Bernoulli mean at ``confidence``."""
    return math.sqrt(math.log(2 / (1 - confidence)) / (2 * shots))


def _p_to_angle(p: float) -> float:
    return math.acos(math.sqrt(min(1.0, max(0.0, p))))


def estimate_from_counts(successes: int, shots: int, confidence: float) -> OmegaEstimate:
    """Map the Hoeffding interval on ``P(+1) = cos^2 w`` to an interval on ``w``.

    ``p -> acos(sqrt(p))`` is decreasing, so the endpoints swap; the radius is
    the larger of the two one-sided distances from the point estimate.
    """
    p_hat = successes / shots
    t = hoeffding_radius(shots, confidence)
    w_hat = _p_to_angle(p_hat)
    w_lo, w_hi = _p_to_angle(p_hat + t), _p_to_angle(p_hat - t)
    radius = max(w_hat - w_lo, w_hi - w_hat)
    return OmegaEstimate(shots, successes, p_hat, w_hat, radius, confidence)


def estimate_omega(
    omega_true: Angle,
    N: int,
    confidence: float,
    rng: SeededRng,
    sampler: str = "shots",
) -> OmegaEstimate:
    """Rotate spin-up by ``omega_true`` and measure sigma_z, ``N`` times.

    ``sampler="shots"`` draws every measurement; ``"binomial"`` draws the
    number of ``+1`` outcomes from its exact binomial law in one call, for
    shot counts too large to simulate one by one.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    w = _angle(omega_true)
    if not 0 < w < 1:
        raise ValueError(f"rotation angle {float(w)} outside (0, 1)")
    q = rotate_qubit(float(w))
    if sampler == "shots":
        successes = measure_sigma_z_shots(q, N, rng)
    elif sampler == "binomial":
        successes = rng.binomial(N, q.p_up)
    else:
        raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    return estimate_from_counts(successes, N, confidence)


@dataclass(frozen=True)
class BitExtraction:
    bits: str
    certified: bool
    guard: float
    covered: bool | None = None
    true_bits: str | None = None

    @property
    def correct(self) -> bool | None:
        return None if self.true_bits is None else self.bits == self.true_bits


def leading_bits(value: Fraction, n: int) -> str:
    """First ``n`` binary digits of ``value`` in ``[0, 1)`` (clamped outside it)."""
    j = math.floor(value * (1 << n))
    j = min(max(j, 0), (1 << n) - 1)
    return format(j, f"0{n}b")


def extract_bits(est: OmegaEstimate, n: int, omega_true: Angle | None = None) -> BitExtraction:
    """Leading ``n`` digits of ``omega_hat``; certified iff the whole interval
    sits strictly inside one cell ``(j/2^n, (j+1)/2^n)``.

    All comparisons are exact on the float values involved.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    c, r = Fraction(est.omega_hat), Fraction(est.radius)
    scale = 1 << n
    j = math.floor(c * scale)
    left, right = Fraction(j, scale), Fraction(j + 1, scale)
    guard = min(c - r - left, right - (c + r))
    certified = 0 <= j < scale and guard > 0
    covered = true_bits = None
    if omega_true is not None:
        covered = est.covers(omega_true)
        true_bits = leading_bits(_angle(omega_true), n)
    return BitExtraction(leading_bits(c, n), certified, float(guard), covered, true_bits)


# -- perturbation -------------------------------------------------------------

@dataclass(frozen=True)
class PerturbedRun:
    eta: float
    angle: float
    bits: str
    certified: bool
    corrupted: tuple[int, ...]


@dataclass(frozen=True)
class PerturbationReport:
    """Effect of rotating by ``omega + eta`` while reading against ``omega``'s digits 0..n."""

    n: int
    true_bits: str
    runs: tuple[PerturbedRun, ...]
    exact: bool

    @property
    def smallest_corrupting(self) -> float | None:
        """Smallest ``|eta|`` whose certified digits 0..n differ from the truth."""
        bad = [abs(r.eta) for r in self.runs if r.certified and r.corrupted]
        return min(bad) if bad else None


def default_etas(omega: Angle, smallest_exp: int = 16) -> list[float]:
    """``+-2^-k`` for ``k = 1..smallest_exp``, keeping only those that stay inside (0, 1)."""
    w = _angle(omega)
    out = []
    for k in range(1, smallest_exp + 1):
        for eta in (Fraction(1, 1 << k), -Fraction(1, 1 << k)):
            if 0 < w + eta < 1:
                out.append(float(eta))
    return out


def perturbation_sweep(
    omega_true: Angle,
    n: int,
    etas: Sequence[float],
    N: int | None = None,
    confidence: float = 0.95,
    rng: SeededRng | None = None,
    sampler: str = "shots",
) -> PerturbationReport:
    """Read digits 0..n of the angle actually implemented, ``omega_true + eta``.

    With ``N=None`` the implemented angle is read exactly (no sampling).
    Otherwise each eta gets its own child stream of ``rng`` (keyed by
    position in ``etas``) and the digits come from :func:`extract_bits`.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    w = _angle(omega_true)
    width = n + 1
    truth = leading_bits(w, width)
    exact = N is None
    if not exact and rng is None:
        raise ValueError("sampling sweep needs an rng")
    runs = []
    for i, eta in enumerate(etas):
        angle = w + Fraction(eta)
        if not 0 < angle < 1:
            raise ValueError(f"perturbed angle {float(angle)} outside (0, 1) for eta={eta}")
        if exact:
            bits, certified = leading_bits(angle, width), True
        else:
            est = estimate_omega(angle, N, confidence, rng.child(i), sampler)
            ext = extract_bits(est, width)
            bits, certified = ext.bits, ext.certified
        corrupted = tuple(k for k in range(width) if bits[k] != truth[k])
        runs.append(PerturbedRun(float(eta), float(angle), bits, certified, corrupted))
    return PerturbationReport(n, truth, tuple(runs), exact)


# -- inductive verification -----------------------------------------------------

@dataclass(frozen=True)
class Refutation:
    """Program ``x`` halted on input ``x`` after ``steps`` steps, though the candidate said 0."""

    x: int
    program: str
    steps: int

    def replay(self) -> bool:
        out = run_bounded(self.x, self.x, self.steps)
        return out.halted and out.steps == self.steps


@dataclass(frozen=True)
class VerificationReport:
    refutations: tuple[Refutation, ...]
    pending: tuple[int, ...]
    consistent: int
    budget_used: int
    examined: int
    bound: int
    surrogate: HaltingSurrogate = field(repr=False, compare=False)

    @property
    def refuted(self) -> bool:
        return bool(self.refutations)


def verify_candidate_oracle(
    candidate: Mapping[int, int] | Sequence[int],
    x_max: int,
    budget: int,
    prior: HaltingSurrogate | None = None,
) -> VerificationReport:
    """Check a claimed halting table against dovetailed execution.

    A candidate 0 for a program seen halting is refuted, with a replayable
    trace. A candidate 1 for a program not yet seen halting stays pending; no
    amount of running ever confirms non-halting, so it is never refuted.
    """
    if isinstance(candidate, Mapping):
        missing = [x for x in range(x_max + 1) if x not in candidate]
    else:
        missing = list(range(len(candidate), x_max + 1))
    if missing:
        raise ValueError(f"candidate undefined on {missing[:5]}...")
    surrogate, used = dovetail_usage(x_max, budget, prior)
    refutations, pending = [], []
    consistent = 0
    for x in range(surrogate.x_max + 1):
        claim = 1 if candidate[x] else 0
        rec = surrogate.records[x]
        if rec.halted and not claim:
            refutations.append(Refutation(x, str(decode_program(x)), rec.steps))
        elif claim and not rec.halted:
            pending.append(x)
        else:
            consistent += 1
    return VerificationReport(
        tuple(refutations), tuple(pending), consistent, used, surrogate.x_max + 1, surrogate.bound, surrogate
    )


def trial_rngs(seed: int, trials: int) -> list[SeededRng]:
    """Independent per-trial streams derived from one seed."""
    base = SeededRng(seed)
    return [base.child(t) for t in range(trials)]

