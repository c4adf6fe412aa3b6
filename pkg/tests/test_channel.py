import numpy as np
import pytest

from rccbench.channel import ChannelModel, corrupt, flip_exact
from rccbench.protocols import EncodedFile, Protocol, ProtocolConfig, build_header


def make_file(payload_bits=80, seed=0):
    rng = np.random.default_rng(seed)
    nbytes = -(-payload_bits // 8)
    payload = bytearray(rng.integers(0, 256, size=nbytes, dtype=np.uint8).tobytes())
    # zero any padding bits so complement tests stay exact
    if payload_bits % 8:
        payload[-1] &= 0xFF << (8 - payload_bits % 8) & 0xFF
    cfg = ProtocolConfig(Protocol.DDCM, steps=5, atoms=16, height=4, width=4)
    return EncodedFile(header=build_header(cfg), payload_bits=payload_bits,
                       payload=bytes(payload))


def payload_bit_array(file):
    bits = np.unpackbits(np.frombuffer(file.payload, dtype=np.uint8))
    return bits[: file.payload_bits]


def test_zero_probability_is_identity():
    f = make_file()
    out = corrupt(f, ChannelModel(p=0.0, seed=1))
    assert out == f


def test_unit_probability_complements_every_bit():
    f = make_file(payload_bits=77)
    out = corrupt(f, ChannelModel(p=1.0, seed=1))
    assert np.array_equal(payload_bit_array(out), 1 - payload_bit_array(f))
    assert out.header == f.header  # header spared by default


def test_determinism_and_seed_decorrelation():
    f = make_file(payload_bits=2000)
    a = corrupt(f, ChannelModel(p=0.05, seed=9))
    b = corrupt(f, ChannelModel(p=0.05, seed=9))
    c = corrupt(f, ChannelModel(p=0.05, seed=10))
    assert a == b
    assert a != c


def test_flip_count_concentration():
    # binomial(1e5, 0.01): mean 1000, std sqrt(990) = 31.5; 4 std = 126
    f = make_file(payload_bits=100_000, seed=3)
    base = payload_bit_array(f)
    for seed in range(5):
        out = corrupt(f, ChannelModel(p=0.01, seed=seed))
        flips = int(np.sum(base != payload_bit_array(out)))
        assert abs(flips - 1000) <= 126


def test_empirical_rate_converges():
    # 1e6 covered bits at p = 0.003: 3 binomial std = 164
    f = make_file(payload_bits=1_000_000, seed=4)
    out = corrupt(f, ChannelModel(p=0.003, seed=11))
    flips = int(np.sum(payload_bit_array(f) != payload_bit_array(out)))
    assert abs(flips - 3000) <= 3 * np.sqrt(1_000_000 * 0.003 * 0.997)


def test_include_header_flag():
    f = make_file(payload_bits=512)
    out = corrupt(f, ChannelModel(p=1.0, seed=2, include_header=True))
    header = np.unpackbits(np.frombuffer(f.header, dtype=np.uint8))
    got = np.unpackbits(np.frombuffer(out.header, dtype=np.uint8))
    assert np.array_equal(got, 1 - header)


def test_padding_bits_never_flipped():
    f = make_file(payload_bits=77)
    out = corrupt(f, ChannelModel(p=1.0, seed=5))
    pad = np.unpackbits(np.frombuffer(out.payload, dtype=np.uint8))[77:]
    assert not pad.any()


def test_flip_exact_empty_and_involution():
    f = make_file()
    assert flip_exact(f, []) == f
    assert flip_exact(flip_exact(f, [13]), [13]) == f


def test_flip_exact_positions():
    f = make_file(payload_bits=16)
    out = flip_exact(f, [0, 15])
    diff = payload_bit_array(f) != payload_bit_array(out)
    assert list(np.flatnonzero(diff)) == [0, 15]


def test_flip_exact_out_of_range():
    f = make_file(payload_bits=16)
    with pytest.raises(ValueError):
        flip_exact(f, [16])


def test_probability_validation():
    with pytest.raises(ValueError):
        ChannelModel(p=1.5, seed=0)
