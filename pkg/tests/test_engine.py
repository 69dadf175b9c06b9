import io
import math

import numpy as np
import pytest

from qfix.engine import (
    BlockMapping,
    IdentityQuantizer,
    QuantizerBank,
    Scheme,
    accumulated_error,
    accumulated_error_series,
    affine_contraction,
    bound_certificate,
    random_affine_contraction,
    reference_fixed_point,
    run_iteration,
    stationary_probe,
    worst_case_error_bound,
)
from qfix.norms import (
    BlockPartition,
    BoxDomain,
    NormSpec,
    WeightedMax,
    block_norm,
    uniform_l2_spec,
    uniform_wmax_spec,
)
from qfix.squant import ScalarBlockQuantizer, ScalarQuantizer
from qfix.ticoq import make_sq_bank, ticoq_sq_wmax, uniform_sq_allocation


def _halving_map(n=2):
    part = BlockPartition([1] * n)
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)] * n)
    return affine_contraction(0.5 * np.eye(n), np.zeros(n), part, box, spec, 0.5)


def test_unquantized_halving_run():
    mapping = _halving_map()
    traj = run_iteration(mapping, None, np.array([1.0, 1.0]), 10, Scheme.JACOBI)
    assert traj.steps == 10
    assert np.allclose(traj.final(), [2.0**-10, 2.0**-10], atol=1e-15)
    assert np.all(np.asarray(traj.error_norms) == 0.0)


def test_quantized_errors_stay_below_bank_worst_case():
    mapping = _halving_map()
    part = mapping.partition
    bank = make_sq_bank(part, mapping.domain, [1, 1])
    spec = mapping.norm
    e_bar = bank.worst_case_error(part, spec)
    traj = run_iteration(mapping, bank, np.array([1.0, 1.0]), 20, Scheme.JACOBI)
    assert e_bar == pytest.approx(0.5)
    assert max(traj.error_norms) <= e_bar + 1e-15


def test_gauss_seidel_uses_updated_blocks():
    # T(x1, x2) = (0.5 x2, 0.5 x1) from (1, 0): S1 = 0, then S2 = 0.5 * S1 = 0.
    part = BlockPartition([1, 1])
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)] * 2)
    a = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])
    mapping = affine_contraction(a, np.zeros(2), part, box, spec, 0.5)
    traj = run_iteration(mapping, None, np.array([1.0, 0.0]), 1, Scheme.GAUSS_SEIDEL)
    assert np.allclose(traj.final(), [0.0, 0.0], atol=1e-15)
    # Jacobi from the same start lands elsewhere
    traj_j = run_iteration(mapping, None, np.array([1.0, 0.0]), 1, Scheme.JACOBI)
    assert np.allclose(traj_j.final(), [0.0, 0.5], atol=1e-15)


def test_schemes_share_fixed_point():
    rng = np.random.default_rng(4)
    for _ in range(10):
        part = BlockPartition(list(rng.integers(1, 3, size=rng.integers(1, 4))))
        spec = uniform_l2_spec(part)
        box = BoxDomain([(-2.0, 2.0)] * part.n)
        mapping, x_star = random_affine_contraction(part, spec, box, 0.6, rng=rng)
        x0 = np.zeros(part.n)
        tj = run_iteration(mapping, None, x0, 80, Scheme.JACOBI)
        tg = run_iteration(mapping, None, x0, 80, Scheme.GAUSS_SEIDEL)
        assert np.allclose(tj.final(), x_star, atol=1e-8)
        assert np.allclose(tg.final(), x_star, atol=1e-8)


def test_geometric_decay_at_declared_modulus():
    part = BlockPartition([2, 2])
    spec = uniform_l2_spec(part)
    box = BoxDomain([(-3.0, 3.0)] * 4)
    mapping, x_star = random_affine_contraction(part, spec, box, 0.7, rng=11)
    traj = run_iteration(mapping, None, np.full(4, 0.1), 30, Scheme.JACOBI, reference=x_star)
    d = np.asarray(traj.dist_to_ref)
    ratios = d[1:] / d[:-1]
    assert np.all(ratios <= 0.7 + 1e-9)


def test_accumulated_error_worked_values():
    # alpha=0.5, constant error 0.1, t=3: 0.25*0.1*(1+2+4)
    errs = [0.1, 0.1, 0.1]
    assert accumulated_error(0.5, errs, Scheme.JACOBI) == pytest.approx(0.175, rel=1e-12)
    assert accumulated_error(
        0.5, errs, Scheme.GAUSS_SEIDEL, num_blocks=2
    ) == pytest.approx(0.2625, rel=1e-12)
    assert accumulated_error(0.9, [0.3], Scheme.JACOBI) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        accumulated_error(0.5, [], Scheme.JACOBI)


def test_accumulated_error_series_matches_recurrence():
    rng = np.random.default_rng(5)
    errs = rng.uniform(0, 1, size=12)
    series = accumulated_error_series(0.55, errs, Scheme.JACOBI)
    assert series[0] == 0.0
    for t in range(1, 13):
        assert series[t] == pytest.approx(
            accumulated_error(0.55, errs[:t], Scheme.JACOBI), rel=1e-12
        )


def test_worst_case_bound_worked_values():
    assert worst_case_error_bound(0.5, 0.1, math.inf, Scheme.JACOBI) == pytest.approx(0.2)
    assert worst_case_error_bound(
        0.5, 0.1, math.inf, Scheme.GAUSS_SEIDEL, num_blocks=2
    ) == pytest.approx(0.3)
    assert worst_case_error_bound(0.5, 0.0, math.inf, Scheme.ASYNC_BOUND_ONLY) == 0.0
    # finite-t Jacobi: (1 - alpha^t) / (1 - alpha) * e_bar
    assert worst_case_error_bound(0.5, 0.1, 3, Scheme.JACOBI) == pytest.approx(0.175)
    # async limiting bound: e_bar / (1 - alpha)^2
    assert worst_case_error_bound(
        0.5, 0.1, math.inf, Scheme.ASYNC_BOUND_ONLY
    ) == pytest.approx(0.4)


def test_certificate_on_quantized_runs():
    rng = np.random.default_rng(6)
    for _ in range(20):
        sizes = list(rng.integers(1, 3, size=rng.integers(1, 4)))
        part = BlockPartition(sizes)
        spec = uniform_wmax_spec(part)
        box = BoxDomain([(-1.5, 1.5)] * part.n)
        alpha = float(rng.uniform(0.2, 0.85))
        mapping, x_star = random_affine_contraction(part, spec, box, alpha, rng=rng)
        alloc = ticoq_sq_wmax(part, spec, box, int(rng.integers(0, 12)))
        bank = make_sq_bank(part, box, alloc.bits)
        x0 = box.clamp(rng.uniform(-1.5, 1.5, part.n))
        scheme = Scheme.JACOBI if rng.random() < 0.5 else Scheme.GAUSS_SEIDEL
        traj = run_iteration(mapping, bank, x0, 25, scheme)
        cert = bound_certificate(traj, mapping, x_star)
        assert cert.all_ok()
        assert np.all(cert.dist <= cert.bound + 1e-9)


def test_certificate_fails_for_understated_modulus():
    part = BlockPartition([1])
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)])
    # true ratio 0.9 but declared 0.2: alpha^t d0 decays far too fast
    honest = affine_contraction(np.array([[0.9]]), np.zeros(1), part, box, spec, 0.9)
    lying = BlockMapping(honest.fn, part, box, spec, 0.2)
    traj = run_iteration(lying, None, np.array([1.0]), 10, Scheme.JACOBI)
    cert = bound_certificate(traj, lying, np.zeros(1))
    assert not cert.all_ok()


def test_run_iteration_validation():
    mapping = _halving_map()
    with pytest.raises(ValueError):
        run_iteration(mapping, None, np.array([2.0, 0.0]), 5, Scheme.JACOBI)  # outside box
    with pytest.raises(ValueError):
        run_iteration(mapping, None, np.zeros(2), 0, Scheme.JACOBI)
    with pytest.raises(ValueError):
        run_iteration(mapping, None, np.zeros(3), 5, Scheme.JACOBI)
    with pytest.raises(ValueError):
        run_iteration(mapping, None, np.zeros(2), 5, Scheme.ASYNC_BOUND_ONLY)
    bank = make_sq_bank(mapping.partition, mapping.domain, [1, 1])
    with pytest.raises(ValueError):
        run_iteration(mapping, [bank] * 3, np.zeros(2), 5, Scheme.JACOBI)


def test_per_step_quantizer_sequence():
    mapping = _halving_map()
    part = mapping.partition
    banks = [make_sq_bank(part, mapping.domain, [b, b]) for b in (1, 2, 3)]
    traj = run_iteration(mapping, banks, np.array([1.0, 1.0]), 3, Scheme.JACOBI)
    specs = mapping.norm
    for t, bank in enumerate(banks):
        assert traj.error_norms[t] <= bank.worst_case_error(part, specs) + 1e-15


def test_mapping_validation():
    part = BlockPartition([1, 1])
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)] * 2)
    with pytest.raises(ValueError):
        BlockMapping(lambda x: 0.5 * x, part, box, spec, 1.0)  # modulus not < 1
    with pytest.raises(ValueError):
        BlockMapping(lambda x: 0.5 * x, part, BoxDomain([(-1.0, 1.0)]), spec, 0.5)


def test_random_affine_contraction_exact_modulus():
    rng = np.random.default_rng(7)
    for spec_maker in (uniform_wmax_spec, uniform_l2_spec):
        for _ in range(10):
            sizes = list(rng.integers(1, 4, size=rng.integers(1, 4)))
            part = BlockPartition(sizes)
            spec = spec_maker(part)
            box = BoxDomain([(-1.0, 2.0)] * part.n)
            alpha = float(rng.uniform(0.1, 0.9))
            mapping, x_star = random_affine_contraction(part, spec, box, alpha, rng=rng)
            assert box.contains(x_star)
            assert np.allclose(mapping.eval_full(x_star), x_star, atol=1e-12)
            for _ in range(20):
                x = rng.uniform(-1.0, 2.0, part.n)
                y = rng.uniform(-1.0, 2.0, part.n)
                lhs = block_norm(mapping.fn(x) - mapping.fn(y), part, spec)
                rhs = block_norm(x - y, part, spec)
                assert lhs == pytest.approx(alpha * rhs, rel=1e-10, abs=1e-13)


def test_random_affine_contraction_deterministic():
    part = BlockPartition([2, 2])
    spec = uniform_l2_spec(part)
    box = BoxDomain([(-1.0, 1.0)] * 4)
    m1, x1 = random_affine_contraction(part, spec, box, 0.5, rng=42)
    m2, x2 = random_affine_contraction(part, spec, box, 0.5, rng=42)
    assert np.array_equal(x1, x2)
    probe = np.array([0.3, -0.2, 0.9, 0.0])
    assert np.array_equal(m1.eval_full(probe), m2.eval_full(probe))


def test_reference_fixed_point():
    mapping = _halving_map()
    x_star = reference_fixed_point(mapping)
    assert np.allclose(x_star, 0.0, atol=1e-11)
    with pytest.raises(RuntimeError):
        reference_fixed_point(mapping, x0=np.array([1.0, 1.0]), max_steps=1, tol=1e-16)


def test_stationary_probe_identity_quantizer():
    mapping = _halving_map()
    bank = QuantizerBank([IdentityQuantizer(), IdentityQuantizer()])
    report = stationary_probe(mapping, bank, samples=50, radius=0.5, x_star=np.zeros(2), rng=0)
    assert report.fixed_point_found
    assert any(np.allclose(c, 0.0, atol=1e-12) for c in report.stationary)


def test_stationary_probe_one_bit_example():
    # T(x) = 0.5 x on [-1, 1] with a 1-bit quantizer (outputs -0.5 and 0.5):
    # Q(T(-0.5)) = Q(-0.25) = -0.5 and Q(T(0.5)) = 0.5, so both outputs are stationary.
    part = BlockPartition([1])
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)])
    mapping = affine_contraction(0.5 * np.eye(1), np.zeros(1), part, box, spec, 0.5)
    bank = QuantizerBank([ScalarBlockQuantizer([ScalarQuantizer(-1.0, 1.0, 1)])])
    report = stationary_probe(mapping, bank, samples=200, radius=1.0, x_star=np.zeros(1), rng=1)
    assert report.fraction == pytest.approx(1.0)
    assert len(report.candidates) == 2


def test_stationary_probe_empty_ball():
    part = BlockPartition([1])
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)])
    mapping = affine_contraction(0.5 * np.eye(1), np.zeros(1), part, box, spec, 0.5)
    bank = QuantizerBank([ScalarBlockQuantizer([ScalarQuantizer(-1.0, 1.0, 1)])])
    # radius 0 around x*=0, which is not a quantizer output
    report = stationary_probe(mapping, bank, samples=20, radius=0.0, x_star=np.zeros(1), rng=2)
    assert len(report.candidates) == 0
    assert "no stationary point sampled" in report.message


def test_trajectory_csv_export():
    part = BlockPartition([1, 1])
    spec = uniform_wmax_spec(part)
    box = BoxDomain([(-1.0, 1.0)] * 2)
    mapping, x_star = random_affine_contraction(part, spec, box, 0.5, rng=3)
    traj = run_iteration(mapping, None, np.zeros(2), 4, Scheme.JACOBI)
    buf = io.StringIO()
    traj.to_csv(buf, mapping=mapping, x_star=x_star)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "t,err_to_ref,e_norm,bound,certified"
    assert len(lines) == 6  # header + t = 0..4
    first = lines[1].split(",")
    assert first[0] == "0"
    assert first[4] == "1"
    # byte-identical re-export
    buf2 = io.StringIO()
    traj.to_csv(buf2, mapping=mapping, x_star=x_star)
    assert buf2.getvalue() == buf.getvalue()


def test_uniform_allocation_helper():
    assert list(uniform_sq_allocation(3, 8)) == [3, 3, 2]
    assert list(uniform_sq_allocation(4, 8)) == [2, 2, 2, 2]
    assert list(uniform_sq_allocation(2, 0)) == [0, 0]
