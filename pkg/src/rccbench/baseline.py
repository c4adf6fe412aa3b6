"""Toy transform codec: block DCT, uniform quantization, prefix coding.

The pipeline per block (raster order over the image): 2-D type-II orthonormal
cosine transform, uniform quantization by a single quality step, zigzag scan,
then JPEG-style symbols: the DC level is delta-coded against the previous
block and emitted as a size category plus raw amplitude bits; AC levels become
(zero-run, size) symbols plus amplitude bits, with an end-of-block symbol and
a 16-zero skip.  Symbols use the frozen canonical prefix code from
:mod:`rccbench.baseline_tables`.  There are no restart markers, so one flipped
bit can desynchronize everything after it - which is the behaviour this codec
exists to exhibit.

Baseline files reuse the "RCC1" container with the BASELINE protocol id:
the steps field holds the block size and the atoms field holds the quality
step in fixed-point 1/65536 units (the encoder snaps quality to that grid so
both sides quantize identically).

decode_baseline raises CorruptedFileError on: an invalid codeword, amplitude
size out of range, a zero-run past the block capacity, the bit budget running
out mid-block, or leftover bits after the expected block count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from . import baseline_tables as tables
from .bitstream import BitReader, BitUnderflowError, BitWriter
from .protocols import (
    _HEADER_STRUCT,
    FORMAT_VERSION,
    HEADER_BYTES,
    MAGIC,
    CorruptedFileError,
    EncodedFile,
    Protocol,
)

QUALITY_UNIT = 1.0 / 65536.0
_MIN_QUALITY = 2.0**-13  # keeps amplitude sizes within the symbol alphabet


@dataclass(frozen=True)
class BaselineConfig:
    block_size: int = 8
    quality: float = 0.004  # quantization step; smaller is higher fidelity

    def __post_init__(self) -> None:
        if self.block_size < 2:
            raise ValueError("block size must be at least 2")
        if not _MIN_QUALITY <= self.quality <= 1.0:
            raise ValueError(f"quality must lie in [{_MIN_QUALITY}, 1.0]")

    @property
    def snapped_quality(self) -> float:
        """Quality on the fixed-point grid the header can carry."""
        return round(self.quality / QUALITY_UNIT) * QUALITY_UNIT


def zigzag_order(block_size: int) -> list[tuple[int, int]]:
    order = []
    for s in range(2 * block_size - 1):
        cells = [
            (i, s - i)
            for i in range(max(0, s - block_size + 1), min(s, block_size - 1) + 1)
        ]
        if s % 2 == 0:
            cells.reverse()
        order.extend(cells)
    return order


def _amplitude_size(level: int) -> int:
    return int(abs(level)).bit_length()


def _amplitude_bits(level: int, size: int) -> int:
    return level if level >= 0 else level + (1 << size) - 1


def _amplitude_value(bits: int, size: int) -> int:
    if bits < (1 << (size - 1)):
        return bits - (1 << size) + 1
    return bits


def _quantized_blocks(signal: np.ndarray, block_size: int, step: float) -> np.ndarray:
    h, w = signal.shape
    rows, cols = h // block_size, w // block_size
    levels = np.empty((rows * cols, block_size * block_size), dtype=np.int64)
    zz = zigzag_order(block_size)
    for r in range(rows):
        for c in range(cols):
            block = signal[
                r * block_size : (r + 1) * block_size,
                c * block_size : (c + 1) * block_size,
            ]
            coef = dctn(block, type=2, norm="ortho")
            q = np.round(coef / step).astype(np.int64)
            levels[r * cols + c] = [q[i, j] for i, j in zz]
    return levels


def _block_symbols(levels_row: np.ndarray, prev_dc: int):
    """(dc_size, dc_level_diff), list of (ac_symbol, level) for one block."""
    diff = int(levels_row[0]) - prev_dc
    dc = (_amplitude_size(diff), diff)
    ac = []
    run = 0
    last_nonzero = max((i for i in range(1, levels_row.size) if levels_row[i]), default=0)
    for i in range(1, last_nonzero + 1):
        level = int(levels_row[i])
        if level == 0:
            run += 1
            continue
        while run >= 16:
            ac.append((tables.ZRL, 0))
            run -= 16
        size = _amplitude_size(level)
        ac.append((run * tables.AC_SIZE_SLOTS + size, level))
        run = 0
    if last_nonzero < levels_row.size - 1:
        ac.append((tables.EOB, 0))
    return dc, ac


def count_symbols(signal: np.ndarray, quality: float, block_size: int = 8):
    """Symbol streams for table training; no code tables involved."""
    levels = _quantized_blocks(np.asarray(signal, dtype=np.float64), block_size, quality)
    dc_syms, ac_syms = [], []
    prev_dc = 0
    for row in levels:
        (dc_size, _), ac = _block_symbols(row, prev_dc)
        prev_dc = int(row[0])
        dc_syms.append(dc_size)
        ac_syms.extend(sym for sym, _ in ac)
    return dc_syms, ac_syms


def _build_baseline_header(cfg: BaselineConfig, height: int, width: int) -> bytes:
    return _HEADER_STRUCT.pack(
        MAGIC,
        FORMAT_VERSION,
        int(Protocol.BASELINE),
        cfg.block_size,
        round(cfg.quality / QUALITY_UNIT),
        0,
        0,
        0,
        0,
        height,
        width,
    )


def _parse_baseline_header(header: bytes) -> tuple[BaselineConfig, int, int]:
    try:
        magic, version, proto, bsize, qfix, _, _, _, _, h, w = _HEADER_STRUCT.unpack(header)
    except Exception as exc:  # struct.error
        raise CorruptedFileError(str(exc)) from exc
    if magic != MAGIC:
        raise CorruptedFileError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptedFileError(f"unsupported version {version}")
    if proto != Protocol.BASELINE:
        raise CorruptedFileError("not a baseline file")
    try:
        cfg = BaselineConfig(block_size=bsize, quality=qfix * QUALITY_UNIT)
    except ValueError as exc:
        raise CorruptedFileError(str(exc)) from exc
    if h < 1 or w < 1 or h % bsize or w % bsize:
        raise CorruptedFileError("image dimensions incompatible with the block size")
    return cfg, h, w


def encode_baseline(signal: np.ndarray, cfg: BaselineConfig) -> EncodedFile:
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 2:
        raise ValueError("baseline codec expects a 2-D signal")
    h, w = signal.shape
    if h % cfg.block_size or w % cfg.block_size:
        raise ValueError("image dimensions must be multiples of the block size")

    dc_codes = tables.canonical_codes(tables.DC_CODE_LENGTHS)
    ac_codes = tables.canonical_codes(tables.AC_CODE_LENGTHS)
    step = cfg.snapped_quality
    levels = _quantized_blocks(signal, cfg.block_size, step)

    writer = BitWriter()
    prev_dc = 0
    for row in levels:
        (dc_size, diff), ac = _block_symbols(row, prev_dc)
        prev_dc = int(row[0])
        code, ln = dc_codes[dc_size]
        writer.write(code, ln)
        if dc_size:
            writer.write(_amplitude_bits(diff, dc_size), dc_size)
        for sym, level in ac:
            code, ln = ac_codes[sym]
            writer.write(code, ln)
            size = sym % tables.AC_SIZE_SLOTS
            if size:
                writer.write(_amplitude_bits(level, size), size)

    return EncodedFile(
        header=_build_baseline_header(cfg, h, w),
        payload_bits=writer.bit_length,
        payload=writer.getvalue(),
    )


def decode_baseline(file: EncodedFile) -> np.ndarray:
    cfg, h, w = _parse_baseline_header(file.header)
    if len(file.payload) != -(-file.payload_bits // 8):
        raise CorruptedFileError("payload length disagrees with its bit count")
    bsize = cfg.block_size
    ncoef = bsize * bsize
    rows, cols = h // bsize, w // bsize
    dc_decoder = tables.CanonicalDecoder(tables.DC_CODE_LENGTHS)
    ac_decoder = tables.CanonicalDecoder(tables.AC_CODE_LENGTHS)
    reader = BitReader(file.payload, file.payload_bits)

    blocks = np.zeros((rows * cols, ncoef), dtype=np.int64)
    prev_dc = 0
    try:
        for b in range(rows * cols):
            dc_size = dc_decoder.decode(reader)
            if dc_size > tables.MAX_AMPLITUDE_SIZE:
                raise CorruptedFileError(f"amplitude size {dc_size} out of range")
            diff = _amplitude_value(reader.read(dc_size), dc_size) if dc_size else 0
            prev_dc += diff
            blocks[b, 0] = prev_dc
            pos = 1
            while pos < ncoef:
                sym = ac_decoder.decode(reader)
                if sym == tables.EOB:
                    break
                run, size = divmod(sym, tables.AC_SIZE_SLOTS)
                if sym == tables.ZRL:
                    run, size = 16, 0
                pos += run
                if size == 0:
                    if sym != tables.ZRL:
                        raise CorruptedFileError("zero-size symbol outside EOB/ZRL")
                    if pos > ncoef:
                        raise CorruptedFileError("zero run exceeds the block capacity")
                    continue
                if size > tables.MAX_AMPLITUDE_SIZE:
                    raise CorruptedFileError(f"amplitude size {size} out of range")
                if pos >= ncoef:
                    raise CorruptedFileError("coefficient run exceeds the block capacity")
                blocks[b, pos] = _amplitude_value(reader.read(size), size)
                pos += 1
    except BitUnderflowError as exc:
        raise CorruptedFileError("bitstream ended mid-block") from exc
    except ValueError as exc:
        if isinstance(exc, CorruptedFileError):
            raise
        raise CorruptedFileError(str(exc)) from exc
    if reader.remaining:
        raise CorruptedFileError(f"{reader.remaining} unconsumed payload bits")

    step = cfg.snapped_quality
    zz = zigzag_order(bsize)
    out = np.empty((h, w))
    for r in range(rows):
        for c in range(cols):
            coef = np.zeros((bsize, bsize))
            row = blocks[r * cols + c]
            for idx, (i, j) in enumerate(zz):
                coef[i, j] = row[idx] * step
            out[
                r * bsize : (r + 1) * bsize,
                c * bsize : (c + 1) * bsize,
            ] = idctn(coef, type=2, norm="ortho")
    return out


def fit_quality_to_budget(
    signal: np.ndarray, target_bits: int, block_size: int = 8, iters: int = 18
) -> BaselineConfig:
    """Finest fixed-point quality whose payload fits the bit budget."""
    lo, hi = _MIN_QUALITY, 1.0
    cfg_hi = BaselineConfig(block_size=block_size, quality=hi)
    if encode_baseline(signal, cfg_hi).payload_bits > target_bits:
        raise ValueError(f"budget of {target_bits} bits is infeasible at any quality")
    best = cfg_hi
    for _ in range(iters):
        mid = (lo + hi) / 2.0
        cfg = BaselineConfig(block_size=block_size, quality=mid)
        if encode_baseline(signal, cfg).payload_bits <= target_bits:
            best = cfg
            hi = mid
        else:
            lo = mid
    return best
