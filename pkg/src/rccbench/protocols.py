"""End-to-end codecs: DDCM, lexicographic turbo, per-atom robust turbo.

Trajectory layout (states indexed by :mod:`rccbench.diffusion` conventions,
``levels + 1`` down to the terminal 1):

* the first coded selection synthesizes the start state itself, targeting the
  residual against the prior mean;
* each further coded selection drives one noisy reverse transition;
* turbo protocols replace the last ``N`` noisy transitions with DDIM
  refinements that carry no bits;
* the transition out of state 2 is the noiseless posterior-mean step.

DDCM runs ``levels = T`` and codes all T noise events.  The turbo protocols
run ``levels = T - 1`` so that exactly ``T - N - 1`` coded steps remain, which
is what their per-step bit formulas count.

Wire format ("RCC1" container): 4-byte magic, version byte, protocol byte,
then little-endian T, K, M, C, N (u32 each), codebook seed (u64), height and
width (u32 each), a u32 payload bit count, then the payload padded to whole
bytes.  Step records are laid out in trajectory order.  Within a step:

* DDCM: one atom index, ceil(log2 K) bits, big-endian;
* TURBO_LEX: the subset rank over C(K, M) combinations, big-endian in
  ceil(log2 C(K,M)) bits, then M coefficient codes of C bits in ascending
  atom order;
* TURBO_ROBUST: M records of (atom index, coefficient code), ascending atom
  order on the encoder side; the decoder preserves wire order, which keeps a
  single bit flip confined to a single slot.

Decoding is total for DDCM and TURBO_ROBUST when K is a power of two; for
other K an out-of-range index is reduced modulo K.  A lexicographic rank at or
beyond C(K, M) means the whole file is treated as corrupted - that asymmetry
is the point of the robust variant.  A corrupted robust record whose atoms
cancel exactly synthesizes a zero noise vector instead of failing.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .bitstream import BitReader, BitWriter
from .codebook import Codebook
from .combinadics import (
    InvalidIndexError,
    SubsetIndex,
    rank_combination,
    subset_index_bits,
    unrank_combination,
)
from .diffusion import DiffusionState, ddcm_select, ddim_step, reverse_step
from .sparse import SparseSelection, ValueSet, decode_coefficient, select_atoms

MAGIC = b"RCC1"
FORMAT_VERSION = 1
_HEADER_STRUCT = struct.Struct("<4sBB5IQ2I")
HEADER_BYTES = _HEADER_STRUCT.size  # 42
_PREFIX_STRUCT = struct.Struct("<I")


class CorruptedFileError(Exception):
    """The decoder cannot make sense of the file; counted, never fatal."""


class Protocol(enum.IntEnum):
    DDCM = 1
    TURBO_LEX = 2
    TURBO_ROBUST = 3
    BASELINE = 4


def index_bits(atoms: int) -> int:
    """ceil(log2 K): bits for one atom index out of K."""
    return (atoms - 1).bit_length()


@dataclass(frozen=True)
class ProtocolConfig:
    """The tuple that fully determines a codec instance."""

    protocol: Protocol
    steps: int  # T
    atoms: int  # K
    height: int
    width: int
    sparsity: int = 1  # M
    coeff_bits: int = 0  # C
    ddim_steps: int = 0  # N
    codebook_seed: int = 0
    coeff_values: tuple[float, ...] | None = None  # override of the value grid

    def __post_init__(self) -> None:
        if self.protocol == Protocol.BASELINE:
            raise ValueError("the baseline codec has its own configuration type")
        if self.steps < 2:
            raise ValueError("need at least 2 steps")
        if self.atoms < 1:
            raise ValueError("need at least 1 atom")
        if not 1 <= self.sparsity <= self.atoms:
            raise ValueError(f"sparsity must lie in [1, {self.atoms}]")
        if self.coeff_bits < 0:
            raise ValueError("coefficient bits must be non-negative")
        if not 0 <= self.ddim_steps <= self.steps - 2:
            raise ValueError("refinement steps must lie in [0, T-2]")
        if self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")
        if not 0 <= self.codebook_seed < 2**64:
            raise ValueError("codebook seed must fit in 64 bits")
        if self.protocol == Protocol.DDCM and (
            self.sparsity != 1 or self.coeff_bits != 0 or self.ddim_steps != 0
        ):
            raise ValueError("DDCM uses M=1, C=0, N=0")

    @property
    def dim(self) -> int:
        return self.height * self.width

    @property
    def levels(self) -> int:
        """Diffusion levels of the trajectory this config drives."""
        return self.steps if self.protocol == Protocol.DDCM else self.steps - 1

    @property
    def coded_steps(self) -> int:
        if self.protocol == Protocol.DDCM:
            return self.steps
        return self.steps - self.ddim_steps - 1

    @property
    def value_set(self) -> ValueSet | None:
        if self.coeff_bits == 0:
            return None
        if self.coeff_values is not None:
            return ValueSet(self.coeff_bits, self.coeff_values)
        return ValueSet.uniform(self.coeff_bits)

    def step_bits(self) -> int:
        """Payload bits contributed by one coded step."""
        if self.protocol == Protocol.DDCM:
            return index_bits(self.atoms)
        if self.protocol == Protocol.TURBO_LEX:
            return subset_index_bits(self.atoms, self.sparsity) + self.sparsity * self.coeff_bits
        return self.sparsity * (index_bits(self.atoms) + self.coeff_bits)


def payload_bits(cfg: ProtocolConfig) -> int:
    """Exact payload length; no entropy coding anywhere in these protocols."""
    return cfg.coded_steps * cfg.step_bits()


def bits_per_pixel(cfg: ProtocolConfig) -> float:
    return payload_bits(cfg) / cfg.dim


@dataclass(frozen=True)
class StepRecord:
    """Decoded form of one coded step, in wire order."""

    indices: tuple[int, ...]
    codes: tuple[int, ...]


@dataclass
class EncodedFile:
    """Header bytes plus payload bitstream; the object the channel corrupts."""

    header: bytes
    payload_bits: int
    payload: bytes

    def __post_init__(self) -> None:
        if len(self.header) != HEADER_BYTES:
            raise ValueError(f"header must be {HEADER_BYTES} bytes")
        if len(self.payload) != -(-self.payload_bits // 8):
            raise ValueError("payload byte count does not match its bit count")

    def to_bytes(self) -> bytes:
        return self.header + _PREFIX_STRUCT.pack(self.payload_bits) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedFile":
        if len(data) < HEADER_BYTES + _PREFIX_STRUCT.size:
            raise CorruptedFileError("file shorter than a container header")
        header = data[:HEADER_BYTES]
        (nbits,) = _PREFIX_STRUCT.unpack_from(data, HEADER_BYTES)
        payload = data[HEADER_BYTES + _PREFIX_STRUCT.size :]
        if len(payload) != -(-nbits // 8):
            raise CorruptedFileError("payload length disagrees with its bit count")
        return cls(header=header, payload_bits=nbits, payload=payload)


def build_header(cfg: ProtocolConfig) -> bytes:
    if cfg.coeff_values is not None:
        raise ValueError("custom coefficient grids are not representable in the container")
    return _HEADER_STRUCT.pack(
        MAGIC,
        FORMAT_VERSION,
        int(cfg.protocol),
        cfg.steps,
        cfg.atoms,
        cfg.sparsity,
        cfg.coeff_bits,
        cfg.ddim_steps,
        cfg.codebook_seed,
        cfg.height,
        cfg.width,
    )


def parse_header(header: bytes) -> ProtocolConfig:
    try:
        magic, version, proto, t, k, m, c, n, seed, h, w = _HEADER_STRUCT.unpack(header)
    except struct.error as exc:
        raise CorruptedFileError(str(exc)) from exc
    if magic != MAGIC:
        raise CorruptedFileError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptedFileError(f"unsupported version {version}")
    try:
        protocol = Protocol(proto)
    except ValueError as exc:
        raise CorruptedFileError(f"unknown protocol id {proto}") from exc
    if protocol == Protocol.BASELINE:
        raise CorruptedFileError("baseline files are decoded by the baseline codec")
    try:
        return ProtocolConfig(
            protocol=protocol,
            steps=t,
            atoms=k,
            sparsity=m,
            coeff_bits=c,
            ddim_steps=n,
            codebook_seed=seed,
            height=h,
            width=w,
        )
    except ValueError as exc:
        raise CorruptedFileError(f"inconsistent header fields: {exc}") from exc


# --- step packing -----------------------------------------------------------


def pack_step(cfg: ProtocolConfig, record: StepRecord, writer: BitWriter) -> None:
    if cfg.protocol == Protocol.DDCM:
        writer.write(record.indices[0], index_bits(cfg.atoms))
        return
    if len(record.indices) != cfg.sparsity:
        raise ValueError("record sparsity does not match the config")
    if cfg.protocol == Protocol.TURBO_LEX:
        rank = rank_combination(record.indices, cfg.atoms)
        writer.write(rank.value, rank.bit_width)
        for code in record.codes:
            writer.write(code, cfg.coeff_bits)
        return
    for k, code in zip(record.indices, record.codes):
        writer.write(k, index_bits(cfg.atoms))
        writer.write(code, cfg.coeff_bits)


def unpack_step(cfg: ProtocolConfig, reader: BitReader) -> StepRecord:
    kbits = index_bits(cfg.atoms)
    if cfg.protocol == Protocol.DDCM:
        k = reader.read(kbits) % cfg.atoms
        return StepRecord(indices=(k,), codes=())
    m = cfg.sparsity
    if cfg.protocol == Protocol.TURBO_LEX:
        width = subset_index_bits(cfg.atoms, m)
        value = reader.read(width)
        try:
            indices = unrank_combination(SubsetIndex(value, cfg.atoms, m))
        except InvalidIndexError as exc:
            raise CorruptedFileError(str(exc)) from exc
        codes = tuple(reader.read(cfg.coeff_bits) for _ in range(m))
        return StepRecord(indices=indices, codes=codes)
    indices = []
    codes = []
    for _ in range(m):
        indices.append(reader.read(kbits) % cfg.atoms)
        codes.append(reader.read(cfg.coeff_bits))
    return StepRecord(indices=tuple(indices), codes=tuple(codes))


def pack_records(cfg: ProtocolConfig, records) -> tuple[bytes, int]:
    writer = BitWriter()
    for record in records:
        pack_step(cfg, record, writer)
    if writer.bit_length != payload_bits(cfg):
        raise AssertionError("packed length disagrees with the closed form")
    return writer.getvalue(), writer.bit_length


def unpack_payload(cfg: ProtocolConfig, payload: bytes, nbits: int) -> list[StepRecord]:
    if nbits != payload_bits(cfg):
        raise CorruptedFileError(
            f"payload of {nbits} bits, protocol requires {payload_bits(cfg)}"
        )
    try:
        reader = BitReader(payload, nbits)
        records = [unpack_step(cfg, reader) for _ in range(cfg.coded_steps)]
    except ValueError as exc:
        raise CorruptedFileError(str(exc)) from exc
    return records


def decode_records(file: EncodedFile) -> tuple[ProtocolConfig, list[StepRecord]]:
    """Parse and unpack without running the trajectory (for flip analyses)."""
    cfg = parse_header(file.header)
    return cfg, unpack_payload(cfg, file.payload, file.payload_bits)


# --- trajectory -------------------------------------------------------------


def _codebook_for(cfg: ProtocolConfig) -> Codebook:
    return Codebook(
        seed=cfg.codebook_seed,
        steps=max(2, cfg.coded_steps),
        atoms_per_step=cfg.atoms,
        dim=cfg.dim,
    )


def _record_values(cfg: ProtocolConfig, record: StepRecord, vset: ValueSet | None):
    if vset is None:
        return [1.0] * len(record.indices)
    return [decode_coefficient(c, vset) for c in record.codes]


def _synthesize(cfg: ProtocolConfig, cb: Codebook, step: int, record: StepRecord,
                vset: ValueSet | None) -> np.ndarray:
    """Normalized atom combination; degenerate combinations become zero noise."""
    if cfg.protocol == Protocol.DDCM:
        return cb.atom(step, record.indices[0])
    values = _record_values(cfg, record, vset)
    mats = cb.atoms(step, list(record.indices))
    y = np.asarray(values) @ mats
    std = float(np.sqrt(np.mean((y - y.mean()) ** 2)))
    if std < 1e-12:
        return np.zeros(cfg.dim)
    return y / std


def _select_step(cfg: ProtocolConfig, cb: Codebook, step: int, residual: np.ndarray,
                 vset: ValueSet | None) -> StepRecord:
    if cfg.protocol == Protocol.DDCM:
        return StepRecord(indices=(ddcm_select(residual, cb, step),), codes=())
    if vset is None:
        # no coefficient bits: unit coefficients, so align signed correlations
        corr = cb.correlations(step, residual)
        chosen = np.sort(np.argsort(-corr, kind="stable")[: cfg.sparsity])
        return StepRecord(indices=tuple(int(k) for k in chosen), codes=())
    sel: SparseSelection = select_atoms(residual, cb, step, cfg.sparsity, vset)
    return StepRecord(indices=sel.indices, codes=sel.coeff_codes)


def _check_model(cfg: ProtocolConfig, model) -> None:
    if model.dim != cfg.dim:
        raise ValueError(f"model dim {model.dim} != config dim {cfg.dim}")
    if model.schedule.levels != cfg.levels:
        raise ValueError(
            f"model schedule has {model.schedule.levels} levels, config needs {cfg.levels}"
        )


def _replay(cfg: ProtocolConfig, model, cb: Codebook, records: list[StepRecord],
            vset: ValueSet | None) -> np.ndarray:
    levels = cfg.levels
    x = _synthesize(cfg, cb, 0, records[0], vset)
    state = DiffusionState(t=levels + 1, x=x)
    step = 1
    ddim_top = cfg.ddim_steps + 2  # DDIM covers states [3, ddim_top]
    for t in range(levels + 1, 2, -1):
        if t > ddim_top:
            noise = _synthesize(cfg, cb, step, records[step], vset)
            state = reverse_step(model, state, noise)
            step += 1
        else:
            state = ddim_step(model, state)
    state = reverse_step(model, state, np.zeros(cfg.dim))
    return state.x


def encode(signal: np.ndarray, cfg: ProtocolConfig, model) -> tuple[EncodedFile, np.ndarray]:
    """Compress a height x width signal; also returns the encoder-side recon.

    The decoder replays the identical trajectory, so at zero channel noise
    decode(file) is bit-identical to the returned reconstruction.
    """
    _check_model(cfg, model)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (cfg.height, cfg.width):
        raise ValueError(f"signal shape {signal.shape} != {(cfg.height, cfg.width)}")
    x0 = signal.ravel()
    cb = _codebook_for(cfg)
    vset = cfg.value_set
    levels = cfg.levels

    records: list[StepRecord] = []
    rec = _select_step(cfg, cb, 0, x0 - model.prior_mean, vset)
    records.append(rec)
    state = DiffusionState(t=levels + 1, x=_synthesize(cfg, cb, 0, rec, vset))

    step = 1
    ddim_top = cfg.ddim_steps + 2
    for t in range(levels + 1, 2, -1):
        if t > ddim_top:
            residual = x0 - model.mmse_estimate(state.x, t)
            rec = _select_step(cfg, cb, step, residual, vset)
            records.append(rec)
            noise = _synthesize(cfg, cb, step, rec, vset)
            state = reverse_step(model, state, noise)
            step += 1
        else:
            state = ddim_step(model, state)
    state = reverse_step(model, state, np.zeros(cfg.dim))

    payload, nbits = pack_records(cfg, records)
    file = EncodedFile(header=build_header(cfg), payload_bits=nbits, payload=payload)
    return file, state.x.reshape(cfg.height, cfg.width)


def decode(file: EncodedFile, model) -> np.ndarray:
    """Reconstruct from a container; raises CorruptedFileError when it cannot."""
    cfg, records = decode_records(file)
    _check_model(cfg, model)
    x = _replay(cfg, model, _codebook_for(cfg), records, cfg.value_set)
    return x.reshape(cfg.height, cfg.width)
