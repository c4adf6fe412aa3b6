"""Sparse atom selection, coefficient quantization, and noise synthesis.

The residual approximation is the closed-form thresholding rule justified by
near-orthogonality of high-dimensional Gaussian atoms: correlate the residual
with every atom, keep the M largest magnitudes, and quantize each correlation
(divided by dim, which keeps magnitudes O(1)) onto the signed value grid.  No
iterative pursuit anywhere.

Ties always break toward the smaller atom index / smaller grid index so the
encoder is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateCombinationError(ValueError):
    """Synthesized combination has (near-)zero spread and cannot be normalized."""


@dataclass(frozen=True)
class ValueSet:
    """2**C nonzero signed levels, sorted ascending, symmetric about zero."""

    coeff_bits: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        c = self.coeff_bits
        if c < 1:
            raise ValueError("coefficient value sets need at least 1 bit")
        if len(self.values) != 2**c:
            raise ValueError(f"expected {2**c} values, got {len(self.values)}")
        if any(v == 0 for v in self.values):
            raise ValueError("zero is not an encodable coefficient")
        if list(self.values) != sorted(self.values):
            raise ValueError("values must be sorted ascending")
        mirrored = tuple(-v for v in reversed(self.values))
        if mirrored != self.values:
            raise ValueError("values must be symmetric about zero")

    @classmethod
    def uniform(cls, coeff_bits: int) -> "ValueSet":
        """Signed unit-spaced magnitudes 1..2**(C-1); C=1 gives {-1, +1}."""
        half = 2 ** (coeff_bits - 1)
        mags = list(range(1, half + 1))
        vals = tuple(float(-m) for m in reversed(mags)) + tuple(float(m) for m in mags)
        return cls(coeff_bits=coeff_bits, values=vals)

    def scaled(self, factor: float) -> "ValueSet":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return ValueSet(self.coeff_bits, tuple(factor * v for v in self.values))


def encode_coefficient(value: float, vset: ValueSet) -> int:
    """Index of the nearest grid value; ties go to the smaller index."""
    arr = np.asarray(vset.values)
    return int(np.argmin(np.abs(arr - value)))  # argmin takes the first minimum


def decode_coefficient(code: int, vset: ValueSet) -> float:
    if not 0 <= code < len(vset.values):
        raise ValueError(f"coefficient code {code} out of range")
    return vset.values[code]


@dataclass(frozen=True)
class SparseSelection:
    """One coded step: M atom indices (strictly increasing) plus their codes."""

    t: int
    indices: tuple[int, ...]
    coeff_codes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.coeff_codes):
            raise ValueError("indices and coefficient codes must pair up")
        if any(a >= b for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("atom indices must be strictly increasing")

    @property
    def sparsity(self) -> int:
        return len(self.indices)


def select_atoms(residual: np.ndarray, cb, t: int, m: int, vset: ValueSet) -> SparseSelection:
    """Thresholding solve: top-M |correlation| atoms with quantized coefficients.

    Correlations are normalized by the atom dimension before quantization.
    Ties in |correlation| go to the smaller atom index.
    """
    residual = np.asarray(residual, dtype=np.float64).ravel()
    if residual.shape[0] != cb.dim:
        raise ValueError(f"residual length {residual.shape[0]} != atom dim {cb.dim}")
    if not 1 <= m <= cb.atoms_per_step:
        raise ValueError(f"sparsity {m} out of range [1, {cb.atoms_per_step}]")

    corr = cb.correlations(t, residual)
    order = np.argsort(-np.abs(corr), kind="stable")[:m]
    chosen = np.sort(order)
    codes = tuple(encode_coefficient(corr[k] / cb.dim, vset) for k in chosen)
    return SparseSelection(t=t, indices=tuple(int(k) for k in chosen), coeff_codes=codes)


def combine_atoms(cb, t: int, indices, values) -> np.ndarray:
    """Weighted atom sum; indices may repeat (corrupted robust records do)."""
    mats = cb.atoms(t, list(indices))
    return np.asarray(values, dtype=np.float64) @ mats


def synthesize_noise(sel: SparseSelection, cb, vset: ValueSet) -> np.ndarray:
    """Combination of the selected atoms divided by its own empirical std.

    The std subtracts the mean and divides by dim (population convention), so
    the output is scale-invariant in the coefficients and has std 1.
    """
    values = [decode_coefficient(c, vset) for c in sel.coeff_codes]
    y = combine_atoms(cb, sel.t, sel.indices, values)
    std = float(np.sqrt(np.mean((y - y.mean()) ** 2)))
    if std < 1e-12:
        raise DegenerateCombinationError(
            f"combination at step {sel.t} has std {std:.3e}"
        )
    return y / std
