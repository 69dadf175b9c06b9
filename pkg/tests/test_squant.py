import numpy as np
import pytest

from qfix.squant import (
    ScalarBlockQuantizer,
    ScalarQuantizer,
    sq_decode,
    sq_encode,
    sq_worst_case_error,
)


def test_worst_case_error_formula():
    assert sq_worst_case_error((-1.0, 1.0), 0) == 1.0
    assert sq_worst_case_error((-1.0, 1.0), 1) == 0.5
    assert sq_worst_case_error((0.0, 8.0), 3) == 0.5
    q = ScalarQuantizer(0.0, 1.0, 4)
    assert q.worst_case_error == 1.0 / 32.0
    assert q.levels == 16
    assert q.cell_width == pytest.approx(1.0 / 16.0)


def test_quantize_hits_cell_midpoints():
    q = ScalarQuantizer(0.0, 1.0, 2)  # cells of width 0.25, midpoints 0.125..0.875
    assert q.quantize(0.0) == 0.125
    assert q.quantize(0.3) == 0.375
    assert q.quantize(1.0) == 0.875
    # a midpoint is its own quantization
    assert q.quantize(0.625) == 0.625


def test_quantize_error_bound_property():
    rng = np.random.default_rng(0)
    for _ in range(100):
        lo = rng.normal()
        hi = lo + 10.0 ** rng.uniform(-3, 2)
        bits = int(rng.integers(0, 9))
        q = ScalarQuantizer(lo, hi, bits)
        xs = rng.uniform(lo, hi, size=64)
        errs = np.abs(np.array([q.quantize(x) for x in xs]) - xs)
        assert np.all(errs <= q.worst_case_error * (1 + 1e-12) + 1e-15)


def test_encode_decode_round_trip():
    q = ScalarQuantizer(-2.0, 2.0, 3)
    for x in np.linspace(-2.5, 2.5, 41):
        idx = sq_encode(q, x)
        assert 0 <= idx < q.levels
        assert sq_decode(q, idx) == q.quantize(x)


def test_encode_clamps_out_of_range():
    q = ScalarQuantizer(0.0, 1.0, 2)
    assert sq_encode(q, -100.0) == 0
    assert sq_encode(q, 100.0) == q.levels - 1


def test_zero_bits_single_level():
    q = ScalarQuantizer(-1.0, 3.0, 0)
    assert q.levels == 1
    assert q.quantize(-0.7) == 1.0  # interval midpoint
    assert q.worst_case_error == 2.0


def test_degenerate_interval():
    q = ScalarQuantizer(2.0, 2.0, 5)
    assert q.worst_case_error == 0.0
    assert sq_encode(q, 7.0) == 0
    assert sq_decode(q, 0) == 2.0


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        ScalarQuantizer(1.0, 0.0, 2)
    with pytest.raises(ValueError):
        ScalarQuantizer(0.0, 1.0, -1)
    q = ScalarQuantizer(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        sq_encode(q, float("nan"))
    with pytest.raises(ValueError):
        sq_decode(q, 4)


def test_block_quantizer_coordinatewise():
    block = ScalarBlockQuantizer(
        [ScalarQuantizer(0.0, 1.0, 1), ScalarQuantizer(-1.0, 1.0, 2)]
    )
    assert block.size == 2
    out = block.quantize(np.array([0.9, -0.1]))
    assert out[0] == 0.75
    assert out[1] == -0.25
    assert np.allclose(block.worst_case_errors(), [0.25, 0.25])


def test_block_quantizer_shape_check():
    block = ScalarBlockQuantizer([ScalarQuantizer(0.0, 1.0, 1)])
    with pytest.raises(ValueError):
        block.quantize(np.array([0.1, 0.2]))
