"""Truncated statevectors, diagonal projective measurement, basis permutations
and the single-qubit y-rotation.

Amplitudes are complex128 throughout. States and qubits are immutable; every
operation returns a new value.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "NORM_TOL",
    "TruncationError",
    "NumericalError",
    "SeededRng",
    "StateVector",
    "DiagonalObservable",
    "PermutationMap",
    "Qubit",
    "prepare_basis",
    "measure_diagonal",
    "measure_diagonal_noisy",
    "apply_permutation",
    "permutation_matrix",
    "closed_index_set",
    "rotate_qubit",
    "rotation_matrix",
    "measure_sigma_z",
    "measure_sigma_z_shots",
]

NORM_TOL = 1e-12


class TruncationError(IndexError):
    """An index at or beyond the truncation dimension was produced or requested."""


class NumericalError(ArithmeticError):
    pass


class SeededRng:
    """Deterministic sample stream (PCG64) identified by a 64-bit seed.

    A stream belongs to one consumer. Parallel or per-trial streams come from
    :meth:`child`, which hashes ``(seed, *key)`` through numpy's
    ``SeedSequence`` so the derivation does not depend on call order.
    """

    def __init__(self, seed: int, key: Sequence[int] = ()):
        if not 0 <= seed < 1 << 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = seed
        self.key = tuple(key)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *self.key])))

    def child(self, *key: int) -> "SeededRng":
        return SeededRng(self.seed, self.key + tuple(key))

    def random(self, size=None):
        return self._gen.random(size)

    def binomial(self, n: int, p: float) -> int:
        return int(self._gen.binomial(n, p))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, key={self.key})"


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty vector")
        if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={np.linalg.norm(amps)!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.amplitudes)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def allclose(self, other: "StateVector", atol: float = NORM_TOL) -> bool:
        return self.dim == other.dim and np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol)


class DiagonalObservable:
    """Observable ``sum_i eigenvalue(i) |i><i|`` on the truncated basis.

    ``eigenvalue`` is evaluated lazily, only on indices a state actually
    occupies. ``spectrum`` optionally declares the full eigenvalue set of the
    untruncated operator (used by the noisy readout to pick a wrong value).
    """

    def __init__(self, eigenvalue: Callable[[int], float], spectrum: Iterable[float] | None = None, name: str = ""):
        self.eigenvalue = eigenvalue
        self.spectrum = tuple(sorted(set(spectrum))) if spectrum is not None else None
        self.name = name

    def __call__(self, i: int) -> float:
        return self.eigenvalue(int(i))

    @classmethod
    def identity(cls) -> "DiagonalObservable":
        return cls(lambda i: i, name="index")

    @classmethod
    def constant(cls, c: float) -> "DiagonalObservable":
        return cls(lambda i: c, spectrum=(c,), name=f"const({c})")


def prepare_basis(x: int, dim: int) -> StateVector:
    if dim < 1:
        raise ValueError("dimension must be positive")
    if not 0 <= x < dim:
        raise TruncationError(f"basis index {x} outside truncation dimension {dim}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[x] = 1.0
    return StateVector(amps)


def _eigen_groups(state: StateVector, obs: DiagonalObservable):
    """Group the occupied indices by eigenvalue, in ascending eigenvalue order."""
    support = state.support()
    groups: dict[float, list[int]] = {}
    for i in support:
        groups.setdefault(obs(i), []).append(int(i))
    values = sorted(groups)
    probs = state.probabilities()
    weights = np.array([probs[groups[v]].sum() for v in values])
    return values, groups, weights


def _project(state: StateVector, indices: list[int]) -> StateVector:
    amps = np.zeros(state.dim, dtype=np.complex128)
    amps[indices] = state.amplitudes[indices]
    norm = np.linalg.norm(amps)
    if norm == 0.0:
        raise NumericalError("projection onto an empty eigenspace")
    return StateVector(amps / norm)


def _born_pick(weights: np.ndarray, u: float) -> int:
    cum = np.cumsum(weights)
    k = int(np.searchsorted(cum, u * cum[-1], side="right"))
    if k >= len(weights):
        k = int(np.flatnonzero(weights)[-1])
    return k


def measure_diagonal(state: StateVector, obs: DiagonalObservable, rng: SeededRng) -> tuple[float, StateVector]:
    """Projective measurement; returns the eigenvalue and the collapsed state.

    Degenerate eigenvalues collapse onto the whole (occupied) eigenspace.
    Consumes exactly one uniform draw from ``rng``.
    """
    values, groups, weights = _eigen_groups(state, obs)
    k = _born_pick(weights, float(rng.random()))
    if len(values) == 1:
        return values[0], state
    return values[k], _project(state, groups[values[k]])


def measure_diagonal_noisy(
    state: StateVector,
    obs: DiagonalObservable,
    eps: float,
    delta: float,
    rng: SeededRng,
) -> tuple[float, StateVector]:
    """Imperfect readout of ``obs``.

    With probability ``1 - eps`` the reported value is uniform on
    ``[v - delta, v + delta]`` around the ideal outcome ``v``. Otherwise it is
    uniform around the eigenvalue farthest from ``v`` in the declared spectrum
    (the occupied spectrum if none was declared), and the state collapses onto
    that eigenspace when the state has weight there. Draw order: Born draw,
    failure coin, offset.
    """
    if not 0 <= eps < 0.5:
        raise ValueError("eps must be in [0, 1/2)")
    if not 0 <= delta < 0.5:
        raise ValueError("delta must be in [0, 1/2)")
    value, post = measure_diagonal(state, obs, rng)
    bad = float(rng.random()) < eps
    offset = delta * (2.0 * float(rng.random()) - 1.0)
    if not bad:
        return value + offset, post
    spectrum = obs.spectrum or tuple(_eigen_groups(state, obs)[0])
    wrong = max(spectrum, key=lambda v: (abs(v - value), -v))
    if wrong != value:
        occupied = [int(i) for i in state.support() if obs(i) == wrong]
        if occupied:
            post = _project(state, occupied)
    return wrong + offset, post


# -- permutations ------------------------------------------------------------

class PermutationMap:
    """Basis permutation ``|x> -> |forward(x)>`` with a supplied inverse.

    Bijectivity is checked on every index the map is queried with.
    """

    def __init__(self, forward: Callable[[int], int], inverse: Callable[[int], int], name: str = ""):
        self._forward = forward
        self._inverse = inverse
        self.name = name

    @classmethod
    def from_dict(cls, mapping: dict[int, int]) -> "PermutationMap":
        inv = {v: k for k, v in mapping.items()}
        if len(inv) != len(mapping):
            raise ValueError("mapping is not injective")
        return cls(mapping.__getitem__, inv.__getitem__)

    @classmethod
    def identity(cls) -> "PermutationMap":
        return cls(lambda x: x, lambda x: x, name="identity")

    def __call__(self, x: int) -> int:
        y = self._forward(x)
        if self._inverse(y) != x:
            raise ValueError(f"map is not invertible at {x} -> {y}")
        return y

    def inverse(self, y: int) -> int:
        x = self._inverse(y)
        if self._forward(x) != y:
            raise ValueError(f"inverse is inconsistent at {y} -> {x}")
        return x


def apply_permutation(state: StateVector, g: PermutationMap) -> StateVector:
    """Move the amplitude at ``x`` to ``g(x)`` for every occupied ``x``.

    An image at or beyond the truncation dimension raises
    :class:`TruncationError` rather than being dropped.
    """
    out = np.zeros(state.dim, dtype=np.complex128)
    for x in state.support():
        y = g(int(x))
        if not 0 <= y < state.dim:
            raise TruncationError(f"permutation sends {x} to {y}, outside dimension {state.dim}")
        out[y] = state.amplitudes[x]
    return StateVector(out)


def closed_index_set(g: PermutationMap, candidates: Iterable[int], size: int | None = None) -> list[int]:
    """Indices from ``candidates`` whose whole orbit under ``g`` stays in ``candidates``.

    With ``size``, return a union of complete orbits with exactly that many
    elements (smallest orbits' indices preferred via subset-sum over orbit
    lengths), or raise ``ValueError`` if none exists.
    """
    pool = set(candidates)
    orbits: list[list[int]] = []
    seen: set[int] = set()
    for start in sorted(pool):
        if start in seen:
            continue
        orbit = [start]
        y = g(start)
        while y != start and y in pool and len(orbit) <= len(pool):
            orbit.append(y)
            y = g(y)
        seen.update(orbit)
        if y == start:
            orbits.append(orbit)
    if size is None:
        return sorted(i for o in orbits for i in o)
    # subset-sum over orbits, keeping the first way found in index order
    reach: dict[int, tuple[int, ...]] = {0: ()}
    for k, orbit in enumerate(orbits):
        for total, picks in list(reach.items()):
            t = total + len(orbit)
            if t <= size and t not in reach:
                reach[t] = picks + (k,)
    if size not in reach:
        raise ValueError(f"no union of closed orbits has exactly {size} elements")
    return sorted(i for k in reach[size] for i in orbits[k])


def permutation_matrix(g: PermutationMap, indices: Sequence[int]) -> np.ndarray:
    """Dense matrix of ``g`` restricted to ``indices`` (which must be closed under ``g``)."""
    pos = {x: k for k, x in enumerate(indices)}
    mat = np.zeros((len(indices), len(indices)), dtype=np.complex128)
    for x, k in pos.items():
        y = g(x)
        if y not in pos:
            raise TruncationError(f"index set not closed: {x} -> {y}")
        mat[pos[y], k] = 1.0
    return mat


# -- qubit -------------------------------------------------------------------

@dataclass(frozen=True)
class Qubit:
    """``a|up> + b|down>`` in the sigma_z basis."""

    a: complex
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0) > NORM_TOL:
            raise ValueError("qubit is not normalized")

    @property
    def p_up(self) -> float:
        return abs(self.a) ** 2


def rotation_matrix(omega: float) -> np.ndarray:
    """``exp(-i omega sigma_y)`` in closed form."""
    c, s = cos(omega), sin(omega)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rotate_qubit(omega: float) -> Qubit:
    """Spin-up after evolving under ``exp(-i omega sigma_y)``: ``(cos w, sin w)``."""
    return Qubit(complex(cos(omega)), complex(sin(omega)))


def measure_sigma_z(q: Qubit, rng: SeededRng) -> int:
    return 1 if float(rng.random()) < q.p_up else -1


def measure_sigma_z_shots(q: Qubit, shots: int, rng: SeededRng) -> int:
    """Number of ``+1`` outcomes in ``shots`` independent sigma_z measurements.

    Draw-for-draw the same as calling :func:`measure_sigma_z` ``shots`` times.
    """
    if shots < 0:
        raise ValueError("shots must be non-negative")
    return int(np.count_nonzero(rng.random(shots) < q.p_up))
