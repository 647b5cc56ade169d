"""Reproducible Brownian paths, dyadic coarsening and iterated-integral oracles.

Paths are keyed by ``(seed, path_index)`` through a counter-based Philox
generator, so any ensemble member can be regenerated on its own.  The
nested Stratonovich integrals are evaluated by midpoint quadrature on the
fine grid and are only used as test oracles; no scheme consumes them.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, InvalidConfig, InvalidFactor

MAGIC = b"BPTH"
_HEADER = struct.Struct("<4sqqdQq")
MAX_DEPTH = 3


@dataclass(frozen=True)
class BrownianPaths:
    increments: np.ndarray  # (M, N)
    dt_fine: float
    seed: int = 0
    path_index: int = 0

    @property
    def channels(self) -> int:
        return self.increments.shape[0]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[1]

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt_fine

    def endpoint(self) -> np.ndarray:
        """W(T) for every channel."""
        return self.increments.sum(axis=1)

    def cumulative(self) -> np.ndarray:
        """W at every grid node, shape (M, N + 1), starting from 0."""
        out = np.zeros((self.channels, self.n_steps + 1))
        np.cumsum(self.increments, axis=1, out=out[:, 1:])
        return out


def rng_for(seed: int, path_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(ss))


def generate_paths(seed: int, path_index: int, channels: int, n_steps: int,
                   dt_fine: float) -> BrownianPaths:
    if n_steps < 1:
        raise InvalidConfig("n_steps must be at least 1")
    if not dt_fine > 0:
        raise InvalidConfig("dt_fine must be positive")
    if channels < 0:
        raise InvalidConfig("channels must be non-negative")
    rng = rng_for(seed, path_index)
    z = rng.standard_normal((channels, n_steps))
    return BrownianPaths(z * math.sqrt(dt_fine), float(dt_fine), int(seed), int(path_index))


def coarsen_paths(paths: BrownianPaths, factor: int) -> BrownianPaths:
    factor = int(factor)
    if factor < 1 or paths.n_steps % factor:
        raise InvalidFactor(f"factor {factor} does not divide {paths.n_steps}")
    if factor == 1:
        return paths
    inc = coarsen_increments(paths.increments, factor)
    return BrownianPaths(inc, paths.dt_fine * factor, paths.seed, paths.path_index)


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along the last axis."""
    n = increments.shape[-1]
    if factor < 1 or n % factor:
        raise InvalidFactor(f"factor {factor} does not divide {n}")
    if factor == 1:
        return increments
    return increments.reshape(increments.shape[:-1] + (n // factor, factor)).sum(axis=-1)


def ensemble_increments(seed: int, members: Sequence[int], channels: int, n_steps: int,
                        dt_fine: float) -> np.ndarray:
    """Stack fine increments of several members into shape (M, B, N)."""
    out = np.empty((channels, len(members), n_steps))
    for b, idx in enumerate(members):
        out[:, b, :] = generate_paths(seed, idx, channels, n_steps, dt_fine).increments
    return out


# -- nested Stratonovich integrals -------------------------------------------

def _driver(paths: BrownianPaths, j: int) -> np.ndarray:
    if j == 0:
        return np.full(paths.n_steps, paths.dt_fine)
    return paths.increments[j - 1]


def _check_index(paths: BrownianPaths, idx):
    idx = tuple(int(j) for j in idx)
    if not idx:
        raise IndexOutOfRange("empty multi-index")
    if len(idx) > MAX_DEPTH:
        raise IndexOutOfRange(f"nesting depth capped at {MAX_DEPTH}")
    for j in idx:
        if j < 0 or j > paths.channels:
            raise IndexOutOfRange(f"index {j} outside 0..{paths.channels}")
    return idx


def nested_integral_path(paths: BrownianPaths, idx) -> np.ndarray:
    """Running value of J_idx at every fine node (length N + 1).

    ``idx[0]`` is the innermost integrator; 0 denotes time.  Each level uses
    the midpoint rule (X_k + X_{k+1}) / 2 * dW_k.
    """
    idx = _check_index(paths, idx)
    running = np.zeros(paths.n_steps + 1)
    np.cumsum(_driver(paths, idx[0]), out=running[1:])
    for j in idx[1:]:
        mid = 0.5 * (running[:-1] + running[1:])
        nxt = np.zeros_like(running)
        np.cumsum(mid * _driver(paths, j), out=nxt[1:])
        running = nxt
    return running


def nested_stratonovich_oracle(paths: BrownianPaths, idx) -> float:
    return float(nested_integral_path(paths, idx)[-1])


def levy_area(paths: BrownianPaths, i: int, j: int) -> float:
    """Alt(J_ij) = (J_ij - J_ji) / 2 over the whole path."""
    if not (1 <= i <= paths.channels and 1 <= j <= paths.channels):
        raise IndexOutOfRange(f"channels must lie in 1..{paths.channels}")
    if i == j:
        return 0.0
    jij = nested_stratonovich_oracle(paths, (i, j))
    jji = nested_stratonovich_oracle(paths, (j, i))
    return 0.5 * (jij - jji)


def insertion_sum(paths: BrownianPaths, idx, extra: int) -> float:
    """sum over the n+1 positions of inserting ``extra`` into ``idx``."""
    idx = tuple(idx)
    total = 0.0
    for pos in range(len(idx) + 1):
        total += nested_stratonovich_oracle(paths, idx[:pos] + (extra,) + idx[pos:])
    return total


def symmetric_part(paths: BrownianPaths, idx) -> float:
    """(1/n!) sum over permutations of J_idx."""
    idx = tuple(idx)
    perms = list(itertools.permutations(idx))
    return sum(nested_stratonovich_oracle(paths, p) for p in perms) / len(perms)


def rank3_parts(values: dict, i, j, k) -> dict:
    """Sym/Alt/N1/N2 pieces of J_ijk from a table of J values keyed by index tuples.

    Alt uses the permutation signs (even: ijk, jki, kij; odd: ikj, jik, kji).
    """
    J = values
    sym = (J[i, j, k] + J[j, k, i] + J[k, i, j] + J[i, k, j] + J[j, i, k] + J[k, j, i]) / 6.0
    alt = (J[i, j, k] + J[j, k, i] + J[k, i, j] - J[i, k, j] - J[j, i, k] - J[k, j, i]) / 6.0
    n1 = (J[i, j, k] - J[i, k, j] + J[j, i, k] - J[k, i, j]) / 3.0
    n2 = (J[i, j, k] - J[j, i, k] + J[i, k, j] - J[j, k, i]) / 3.0
    return {"sym": sym, "alt": alt, "n1": n1, "n2": n2}


def rank3_table(paths: BrownianPaths, i, j, k) -> dict:
    return {p: nested_stratonovich_oracle(paths, p) for p in itertools.permutations((i, j, k))}


# -- binary dump --------------------------------------------------------------

def dump_paths(paths: BrownianPaths, path) -> None:
    header = _HEADER.pack(MAGIC, paths.channels, paths.n_steps, paths.dt_fine,
                          paths.seed & 0xFFFFFFFFFFFFFFFF, paths.path_index)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(paths.increments, dtype="<f8").tobytes())


def load_paths(path) -> BrownianPaths:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, m, n, dt, seed, pidx = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidConfig(f"not a Brownian path file: magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=m * n)
    return BrownianPaths(data.reshape(m, n).astype(float), dt, seed, pidx)
