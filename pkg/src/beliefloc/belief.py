"""Belief states over a finite set of physical states and the exact Bayes primitives."""

from __future__ import annotations

from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .world import ActuationAction, PerceptionAction

ZERO_MASS = 1e-12
BELIEF_QUANTUM = 1e-9
SUM_TOL = 1e-9


class ZeroMassError(ValueError):
    """Raised when a vector (or an observation branch) carries no probability mass."""


class DimensionMismatch(ValueError):
    pass


class BeliefState:
    """Immutable probability vector over the physical states of a world.

    Construct through :func:`normalize`, :meth:`uniform` or :meth:`point` unless
    the input is already a distribution.
    """

    __slots__ = ("probs", "_key")

    def __init__(self, probs: Sequence[float] | np.ndarray, *, check: bool = True):
        arr = np.array(probs, dtype=float)
        if check:
            if arr.ndim != 1 or arr.size == 0:
                raise DimensionMismatch(f"belief must be a non-empty vector, got shape {arr.shape}")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError("belief entries must be finite and non-negative")
            if abs(arr.sum() - 1.0) > SUM_TOL:
                raise ValueError(f"belief entries sum to {arr.sum():.12g}, expected 1")
        arr.flags.writeable = False
        self.probs = arr
        self._key = None

    @classmethod
    def uniform(cls, n: int) -> BeliefState:
        return cls(np.full(n, 1.0 / n), check=False)

    @classmethod
    def point(cls, n: int, state: int) -> BeliefState:
        arr = np.zeros(n)
        arr[state] = 1.0
        return cls(arr, check=False)

    def __len__(self) -> int:
        return self.probs.size

    def __iter__(self):
        return iter(self.probs.tolist())

    def __getitem__(self, i):
        return self.probs[i]

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = belief_key(self)
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, BeliefState):
            return NotImplemented
        return len(self) == len(other) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        if len(self) <= 8:
            body = ", ".join(f"{p:.4g}" for p in self.probs)
        else:
            s, p = max_belief(self)
            body = f"n={len(self)}, max={p:.4g}@{s}"
        return f"BeliefState([{body}])"


def normalize(v: Sequence[float] | np.ndarray) -> BeliefState:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"expected a non-empty vector, got shape {arr.shape}")
    if np.any(arr < 0):
        raise ValueError("cannot normalize a vector with negative entries")
    total = arr.sum()
    if not total > ZERO_MASS:
        raise ZeroMassError(f"vector mass {total:.3g} is too small to normalize")
    return BeliefState(arr / total, check=False)


def _entropy_array(p: np.ndarray) -> np.ndarray:
    # works on a vector or row-wise on a matrix; 0 ln 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def entropy(b: BeliefState) -> float:
    """Shannon entropy in nats."""
    return max(float(_entropy_array(b.probs)), 0.0) + 0.0  # no negative zero


def predict(b: BeliefState, a: ActuationAction) -> BeliefState:
    T = a.transition
    if T.shape != (len(b), len(b)):
        raise DimensionMismatch(f"action {a.name!r} has shape {T.shape}, belief has {len(b)} states")
    # next_j = sum_i b_i T[i, j]
    return normalize(a.transition_t @ b.probs)


def observation_probability(b: BeliefState, a: PerceptionAction, o: str) -> float:
    lik = a.likelihood_of(o)
    if lik.size != len(b):
        raise DimensionMismatch(f"action {a.name!r} has {lik.size} states, belief has {len(b)}")
    return float(np.clip(lik @ b.probs, 0.0, 1.0))


def update(b: BeliefState, a: PerceptionAction, o: str) -> BeliefState:
    lik = a.likelihood_of(o)
    if lik.size != len(b):
        raise DimensionMismatch(f"action {a.name!r} has {lik.size} states, belief has {len(b)}")
    post = b.probs * lik
    mass = post.sum()
    if not mass > ZERO_MASS:
        raise ZeroMassError(f"observation {o!r} of {a.name!r} is impossible under the current belief")
    return BeliefState(post / mass, check=False)


def max_belief(b: BeliefState) -> tuple[int, float]:
    i = int(np.argmax(b.probs))  # first maximum wins ties
    return i, float(b.probs[i])


def quantize(probs: np.ndarray, quantum: float = BELIEF_QUANTUM) -> np.ndarray:
    return np.rint(np.asarray(probs) / quantum).astype(np.uint64)


@lru_cache(maxsize=16)
def _projection(n: int) -> np.ndarray:
    # fixed odd multipliers: a 128-bit linear hash of the quantized vector
    R = np.random.default_rng(0x5EED_2020).integers(1, 2**63, size=(n, 2), dtype=np.uint64)
    R |= np.uint64(1)
    R.flags.writeable = False
    return R


def keys_of_rows(rows: np.ndarray, quantum: float = BELIEF_QUANTUM) -> list[bytes]:
    """belief_key of every row of a 2-D array."""
    rows = np.atleast_2d(rows)
    h = quantize(rows, quantum) @ _projection(rows.shape[1])
    return [r.tobytes() for r in h]


def key_of_array(probs: np.ndarray, quantum: float = BELIEF_QUANTUM) -> bytes:
    return keys_of_rows(np.asarray(probs)[None, :], quantum)[0]


def belief_key(b: BeliefState, quantum: float = BELIEF_QUANTUM) -> bytes:
    """Hashable key equal for beliefs that agree after rounding each entry to ``quantum``."""
    return key_of_array(b.probs, quantum)


def same_belief(a: BeliefState, b: BeliefState, tol: float = BELIEF_QUANTUM) -> bool:
    """L-infinity comparison used for divergence detection."""
    return len(a) == len(b) and float(np.max(np.abs(a.probs - b.probs))) <= tol
