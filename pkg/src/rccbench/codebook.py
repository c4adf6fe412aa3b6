"""Reproducible per-timestep Gaussian codebooks.

Encoder and decoder never exchange atoms, only a 64-bit seed, so the Gaussian
sampling pipeline is pinned bit-exactly:

* stream: Philox4x64 keyed ``key = (seed, t)``, counter starting at zero;
* atom ``k`` owns the raw draws ``[k*stride, k*stride + dim)`` where
  ``stride = 4*ceil(dim/4)`` keeps atoms aligned to Philox counter blocks;
* each raw uint64 ``u`` maps to a normal via the inverse CDF:
  ``ndtri(((u >> 11) + 0.5) * 2**-53)``.

Anything that reproduces those three rules reproduces every atom exactly.
Atoms are regenerated on demand (random counter access), so a codebook of
K=16384, T=30, dim=4096 occupies no memory until asked for.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_U53_SCALE = 2.0**-53


def _raw_to_normal(raw: np.ndarray) -> np.ndarray:
    u = (raw >> np.uint64(11)).astype(np.float64)
    u += 0.5
    u *= _U53_SCALE
    return ndtri(u, out=u)


class Codebook:
    """T x K x dim standard-normal atoms addressed by (seed, t, k)."""

    def __init__(self, seed: int, steps: int, atoms_per_step: int, dim: int) -> None:
        if steps < 2:
            raise ValueError(f"need at least 2 timesteps, got {steps}")
        if atoms_per_step < 1:
            raise ValueError(f"need at least 1 atom per step, got {atoms_per_step}")
        if dim < 1:
            raise ValueError(f"atom dimension must be positive, got {dim}")
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = int(seed)
        self.steps = int(steps)
        self.atoms_per_step = int(atoms_per_step)
        self.dim = int(dim)
        self._blocks_per_atom = -(-dim // 4)  # ceil; one block = 4 raw draws

    # spec-facing aliases
    @property
    def T(self) -> int:
        return self.steps

    @property
    def K(self) -> int:
        return self.atoms_per_step

    def _stream(self, t: int) -> np.random.Philox:
        if not 0 <= t < self.steps:
            raise IndexError(f"timestep {t} out of range [0, {self.steps})")
        key = np.array([self.seed, t], dtype=np.uint64)
        return np.random.Philox(key=key)

    def atom(self, t: int, k: int) -> np.ndarray:
        """The deterministic atom (t, k); repeated calls are bit-identical."""
        if not 0 <= k < self.atoms_per_step:
            raise IndexError(f"atom {k} out of range [0, {self.atoms_per_step})")
        bg = self._stream(t)
        bg.advance(k * self._blocks_per_atom)
        raw = bg.random_raw(self.dim)
        return _raw_to_normal(raw)

    def atoms(self, t: int, ks) -> np.ndarray:
        """Stack of atoms (len(ks), dim); ks need not be sorted or unique."""
        out = np.empty((len(ks), self.dim))
        for row, k in enumerate(ks):
            out[row] = self.atom(t, int(k))
        return out

    def step_matrix(self, t: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Atoms [start, stop) of step t as a (stop-start, dim) matrix."""
        stop = self.atoms_per_step if stop is None else stop
        if not 0 <= start <= stop <= self.atoms_per_step:
            raise IndexError(f"atom range [{start}, {stop}) out of bounds")
        count = stop - start
        if count == 0:
            return np.empty((0, self.dim))
        bg = self._stream(t)
        bg.advance(start * self._blocks_per_atom)
        raw = bg.random_raw(count * 4 * self._blocks_per_atom)
        z = _raw_to_normal(raw).reshape(count, 4 * self._blocks_per_atom)
        return np.ascontiguousarray(z[:, : self.dim])

    def correlations(self, t: int, residual: np.ndarray, chunk: int = 1024) -> np.ndarray:
        """Inner products of every step-t atom with residual, chunked.

        Peak memory is chunk*dim floats regardless of K.
        """
        residual = np.asarray(residual, dtype=np.float64).ravel()
        if residual.shape[0] != self.dim:
            raise ValueError(
                f"residual has length {residual.shape[0]}, atoms have {self.dim}"
            )
        out = np.empty(self.atoms_per_step)
        for start in range(0, self.atoms_per_step, chunk):
            stop = min(start + chunk, self.atoms_per_step)
            out[start:stop] = self.step_matrix(t, start, stop) @ residual
        return out


def generate_codebook(seed: int, steps: int, atoms_per_step: int, dim: int) -> Codebook:
    return Codebook(seed=seed, steps=steps, atoms_per_step=atoms_per_step, dim=dim)


class MatrixCodebook:
    """In-memory codebook over explicit atom matrices, one (K, dim) per step.

    Mainly for tests and experiments (e.g. orthonormalized dictionaries); it
    mirrors the Codebook access interface.
    """

    def __init__(self, matrices) -> None:
        mats = [np.asarray(m, dtype=np.float64) for m in matrices]
        if not mats:
            raise ValueError("need at least one step matrix")
        k, dim = mats[0].shape
        if any(m.shape != (k, dim) for m in mats):
            raise ValueError("all step matrices must share one shape")
        self._mats = mats
        self.steps = len(mats)
        self.atoms_per_step = k
        self.dim = dim

    @property
    def K(self) -> int:
        return self.atoms_per_step

    def atom(self, t: int, k: int) -> np.ndarray:
        return self._mats[t][k].copy()

    def atoms(self, t: int, ks) -> np.ndarray:
        return self._mats[t][np.asarray(ks, dtype=np.intp)].copy()

    def step_matrix(self, t: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.atoms_per_step if stop is None else stop
        return self._mats[t][start:stop].copy()

    def correlations(self, t: int, residual: np.ndarray, chunk: int = 1024) -> np.ndarray:
        residual = np.asarray(residual, dtype=np.float64).ravel()
        if residual.shape[0] != self.dim:
            raise ValueError(
                f"residual has length {residual.shape[0]}, atoms have {self.dim}"
            )
        return self._mats[t] @ residual
