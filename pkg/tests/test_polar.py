import numpy as np
import pytest

from deeppolar.polar import (
    NR_SEQUENCE_SHA256,
    CodeSpec,
    InvalidDimensionError,
    SequenceParseError,
    build_code_spec,
    load_reliability_sequence,
    nr_sequence,
    nr_sequence_checksum,
    parse_sequence,
    polar_encode,
)


def test_bundled_sequence_checksum():
    assert nr_sequence_checksum() == NR_SEQUENCE_SHA256
    seq = nr_sequence()
    assert seq.n_max == 1024
    assert np.array_equal(np.sort(seq.order), np.arange(1024))


def test_restriction_n8():
    assert nr_sequence().restrict(8).tolist() == [7, 6, 5, 3, 4, 2, 1, 0]


@pytest.mark.parametrize("N", [2, 4, 16, 128, 1024])
def test_restriction_is_permutation(N):
    r = nr_sequence().restrict(N)
    assert np.array_equal(np.sort(r), np.arange(N))


def test_dega_sequence_small():
    seq = load_reliability_sequence("dega", N=2, sigma2=0.5)
    assert seq.order.tolist() == [1, 0]
    seq = load_reliability_sequence("dega", N=64, sigma2=0.3)
    assert np.array_equal(np.sort(seq.order), np.arange(64))


def test_sequence_file(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("3\n1\n2\n0\n")
    assert load_reliability_sequence(p).order.tolist() == [3, 1, 2, 0]
    p.write_text("3\n1\n1\n0\n")
    with pytest.raises(SequenceParseError):
        load_reliability_sequence(p)
    with pytest.raises(SequenceParseError):
        parse_sequence("0 1 x 3")
    with pytest.raises(SequenceParseError):
        parse_sequence("0 1 2")


def test_build_code_spec_examples():
    s = build_code_spec(8, 0)
    assert s.info_set.size == 0 and s.frozen_set.tolist() == list(range(8))
    s = build_code_spec(8, 8)
    assert s.info_set.tolist() == list(range(8)) and s.frozen_set.size == 0
    assert build_code_spec(8, 2).info_set.tolist() == [6, 7]
    with pytest.raises(InvalidDimensionError):
        build_code_spec(8, 9)


def test_nesting():
    for N in (64, 256):
        prev = set()
        for K in range(0, N + 1, 7):
            cur = set(build_code_spec(N, K).info_set.tolist())
            assert prev <= cur
            prev = cur


def test_encode_examples():
    assert polar_encode(CodeSpec(4, 1, [3]), [1]).tolist() == [1, 1, 1, 1]
    assert polar_encode(CodeSpec(2, 1, [1]), [1]).tolist() == [1, 1]
    spec = build_code_spec(32, 10)
    assert not polar_encode(spec, np.zeros(10, dtype=np.uint8)).any()
    with pytest.raises(ValueError):
        polar_encode(spec, np.zeros(9, dtype=np.uint8))


def test_single_bit_row_weight():
    N = 64
    for i in range(N):
        spec = CodeSpec(N, 1, [i])
        assert polar_encode(spec, [1]).sum() == 2 ** bin(i).count("1")


def test_invalid_spec():
    with pytest.raises(InvalidDimensionError):
        CodeSpec(8, 2, [1, 1])
    with pytest.raises(InvalidDimensionError):
        CodeSpec(8, 1, [8])
