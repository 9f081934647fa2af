"""Halton draws mapped to standard normals, one block of draws per person."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)
DEFAULT_DISCARD = 10
DIMENSIONS = ("time", "cost")


def radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    """Van der Corput radical inverse of nonnegative integers in ``base``."""
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    f = 1.0 / base
    while np.any(idx > 0):
        out += f * (idx % base)
        idx //= base
        f /= base
    return out


def halton_uniforms(n_points: int, base: int, discard: int = 0) -> np.ndarray:
    """Points ``discard+1 .. discard+n_points`` of the base-``base`` Halton sequence."""
    return radical_inverse(np.arange(discard + 1, discard + n_points + 1), base)


@dataclass(frozen=True)
class DrawMatrix:
    """Standard-normal draws indexed [person, draw, dimension]."""

    person_ids: tuple[str, ...]
    draws: np.ndarray
    bases: tuple[int, ...]
    discard: int
    seed: int | None = None
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.draws.setflags(write=False)
        self._index.update({pid: i for i, pid in enumerate(self.person_ids)})

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    def for_person(self, person_id: str) -> np.ndarray:
        return self.draws[self._index[person_id]]

    def subset(self, person_ids) -> "DrawMatrix":
        """Draws for ``person_ids`` in that order, reusing each person's rows."""
        rows = [self._index[p] for p in person_ids]
        return DrawMatrix(tuple(person_ids), self.draws[rows].copy(), self.bases, self.discard, self.seed)

    def metadata(self) -> dict:
        return {"bases": list(self.bases), "discard": self.discard, "seed": self.seed,
                "n_draws": self.n_draws, "n_persons": len(self.person_ids)}


def halton_draws(n_persons: int | list, n_dims: int = 2, n_draws: int = 500,
                 discard: int = DEFAULT_DISCARD, seed: int | None = None) -> DrawMatrix:
    """Normal draws from one long Halton sequence per dimension.

    Dimension d uses the d-th prime as base. After dropping the first
    ``discard`` points, consecutive blocks of ``n_draws`` points go to
    successive persons. With ``seed`` set, a Cranley-Patterson random shift
    (mod 1) is applied per dimension; the default is the plain sequence.

    ``n_persons`` may be a count or a list of person ids.
    """
    if n_draws <= 0:
        raise ValueError("n_draws must be positive")
    if n_dims > len(PRIMES):
        raise ValueError(f"at most {len(PRIMES)} dimensions supported")
    if isinstance(n_persons, int):
        person_ids = tuple(str(i) for i in range(n_persons))
    else:
        person_ids = tuple(n_persons)
    G = len(person_ids)
    bases = PRIMES[:n_dims]
    total = G * n_draws
    u = np.empty((total, n_dims))
    shift_rng = np.random.default_rng(seed) if seed is not None else None
    for d, b in enumerate(bases):
        col = halton_uniforms(total, b, discard)
        if shift_rng is not None:
            col = np.mod(col + shift_rng.random(), 1.0)
            col = np.clip(col, 1e-12, 1 - 1e-12)
        u[:, d] = col
    z = ndtri(u).reshape(G, n_draws, n_dims)
    return DrawMatrix(person_ids, np.ascontiguousarray(z), bases, discard, seed)


def pseudo_random_draws(person_ids, n_dims: int, n_draws: int, seed: int) -> DrawMatrix:
    """Plain pseudo-random normal draws in the same container (for oracles and comparisons)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((len(person_ids), n_draws, n_dims))
    return DrawMatrix(tuple(person_ids), z, (), 0, seed)
