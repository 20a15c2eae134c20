"""Finite-difference gradient checker: exactness, convergence, sensitivity."""

import math
import re

import pytest

from tensorlite import (
    DeterminismError,
    ShapeError,
    from_flat,
    full,
    mean,
    mul,
    nn,
    record,
    reset_tape,
    sub,
    sum as tsum,
    tensor,
    transpose2d,
    zeros,
)
from tensorlite.gradcheck import (
    MAX_PARAM_ELEMENTS,
    STANDARD_CHECKS,
    check_function,
    finite_difference_gradient,
    run_suite,
)


@pytest.fixture(autouse=True)
def fresh_tape():
    reset_tape()
    yield
    reset_tape()


def leaf(vals, shape=None):
    t = tensor(vals) if shape is None else from_flat(vals, shape)
    t.requires_grad = True
    return t


# -------------------------------------------------------------- foundations


def test_quadratic_slope_at_three():
    theta = leaf([3.0])
    rep = check_function(lambda: tsum(mul(theta, theta)), {"theta": theta})
    assert rep.passed
    num = finite_difference_gradient(
        lambda: tsum(mul(theta, theta)), {"theta": theta}
    )["theta"]
    # central difference of a quadratic recovers the slope up to f32 noise
    assert abs(num[0] - 6.0) <= 1e-2


def test_constant_function_zero_gradient():
    theta = leaf([1.0, 2.0])
    c = tensor([5.0])
    rep = check_function(lambda: tsum(mul(c, c)), {"theta": theta})
    assert rep.passed
    assert rep.rows[0].max_abs_err == 0.0


def test_relu_indicator_off_kink():
    theta = leaf([-1.5, 2.5])
    num = finite_difference_gradient(lambda: tsum(nn.relu(theta)), {"t": theta})
    assert abs(num["t"][0] - 0.0) <= 1e-6
    assert abs(num["t"][1] - 1.0) <= 1e-4


def test_central_difference_is_second_order():
    # f = theta^3 at 1: error of the central estimate shrinks ~eps^2
    def ratio_for(seed_val):
        theta = leaf([seed_val])

        def f():
            return tsum(mul(mul(theta, theta), theta))

        errs = []
        for eps in (1e-2, 5e-3):
            num = finite_difference_gradient(f, {"t": theta}, eps_fd=eps)["t"][0]
            errs.append(abs(num - 3.0 * seed_val * seed_val))
        return errs[0] / errs[1]

    # halving eps should cut the error ~4x; demand at least 3x
    assert ratio_for(1.0) >= 3.0


def test_zero_parameter_check_passes_vacuously():
    rep = check_function(lambda: tsum(tensor([1.0])), {})
    assert rep.passed
    assert rep.rows == []
    assert rep.to_text() == "OVERALL PASS"


def test_param_element_cap_enforced():
    theta = leaf([0.0] * (MAX_PARAM_ELEMENTS + 1))
    with pytest.raises(ShapeError):
        finite_difference_gradient(lambda: tsum(theta), {"t": theta})


def test_nonscalar_function_rejected():
    theta = leaf([1.0, 2.0])
    with pytest.raises(ShapeError):
        check_function(lambda: mul(theta, theta), {"t": theta})


def test_unfrozen_randomness_detected():
    theta = leaf([1.0] * 16)
    layer = nn.Dropout(0.5, rng=0)
    with pytest.raises(DeterminismError):
        check_function(lambda: tsum(layer(theta)), {"t": theta})


def test_nan_probe_fails_the_row():
    from tensorlite import log

    # theta smaller than the fd step: the minus probe goes negative, log -> nan
    theta = leaf([5e-4])
    rep = check_function(lambda: tsum(log(theta)), {"t": theta})
    assert not rep.passed
    assert math.isnan(rep.rows[0].max_abs_err)


def test_perturbation_is_restored():
    theta = leaf([1.25, -0.5])
    before = theta.flat()
    finite_difference_gradient(lambda: tsum(mul(theta, theta)), {"t": theta})
    assert theta.flat() == before


# ------------------------------------------------------------ report format


def test_report_line_format():
    theta = leaf([2.0])
    rep = check_function(lambda: tsum(mul(theta, theta)), {"slope": theta})
    text = rep.to_text()
    lines = text.splitlines()
    assert re.fullmatch(
        r"slope \d\.\d{3}e[+-]\d{2} \d\.\d{3}e[+-]\d{2} \d+ (PASS|FAIL)",
        lines[0],
    )
    assert lines[-1] == "OVERALL PASS"


def test_report_name_prefix():
    theta = leaf([2.0])
    rep = check_function(
        lambda: tsum(mul(theta, theta)), {"t": theta}, name_prefix="seed7/"
    )
    assert rep.rows[0].name == "seed7/t"


# ----------------------------------------------------------- standard suite


def test_standard_suite_all_green():
    ok, text = run_suite()
    assert ok, text
    assert text.count("== ") == len(STANDARD_CHECKS)
    assert "OVERALL FAIL" not in text


def test_suite_only_filter():
    ok, text = run_suite(only="matmul")
    assert ok
    assert text.startswith("== matmul")
    assert text.count("== ") == 1


def test_suite_unknown_target():
    with pytest.raises(KeyError):
        run_suite(only="not_an_op")


def test_suite_fails_below_f32_precision_floor():
    # f32 finite differences cannot certify 1e-9 relative accuracy
    ok, text = run_suite(only="matmul", rtol=1e-9, atol=1e-12)
    assert not ok
    assert "FAIL" in text


# ------------------------------------------------------ mutation sensitivity
#
# Each case records a deliberately wrong pullback and must be caught at the
# default tolerances for every seed. This pins the checker's power, not just
# its ability to bless correct code.


def _catches(build):
    for seed in (0, 1, 2):
        import random

        rng = random.Random(seed)
        f, params = build(rng)
        rep = check_function(f, params)
        if rep.passed:
            return False
    return True


def _rand_leaf(rng, shape):
    n = 1
    for s in shape:
        n *= s
    t = from_flat([rng.uniform(0.5, 1.5) for _ in range(n)], shape)
    t.requires_grad = True
    return t


def test_catches_mul_missing_factor(
):
    def build(rng):
        a = _rand_leaf(rng, (3, 3))
        b = _rand_leaf(rng, (3, 3))

        def f():
            vals = [x * y for x, y in zip(a.flat(), b.flat())]
            out = from_flat(vals, (3, 3))
            # wrong: d(a*b)/da should be g*b, not g
            bad = record("bad_mul", (a, b), out,
                         (lambda g: g, lambda g: mul(g, a)), saved=(a, b))
            return tsum(bad)

        return f, {"a": a, "b": b}

    assert _catches(build)


def test_catches_sub_sign_flip():
    def build(rng):
        a = _rand_leaf(rng, (4,))
        b = _rand_leaf(rng, (4,))

        def f():
            vals = [x - y for x, y in zip(a.flat(), b.flat())]
            out = from_flat(vals, (4,))
            # wrong: d(a-b)/db should be -g
            bad = record("bad_sub", (a, b), out,
                         (lambda g: g, lambda g: g), saved=())
            return tsum(bad)

        return f, {"a": a, "b": b}

    assert _catches(build)


def test_catches_mean_missing_count():
    def build(rng):
        a = _rand_leaf(rng, (5,))

        def f():
            m = sum(a.flat()) / 5.0
            out = tensor(m)
            # wrong: seed should be spread as g/n, not g
            bad = record("bad_mean", (a,), out,
                         (lambda g: mul(tensor([1.0] * 5), g.item()),), saved=())
            return bad

        return f, {"a": a}

    assert _catches(build)


def test_catches_matmul_transpose_swap():
    from tensorlite import matmul

    def build(rng):
        x = _rand_leaf(rng, (3, 3))
        w = _rand_leaf(rng, (3, 3))

        def f():
            with_no = matmul(x.detach(), w.detach())
            # wrong X-bar: g @ w without the transpose
            bad = record(
                "bad_matmul", (x, w), with_no,
                (lambda g: matmul(g, w),
                 lambda g: matmul(transpose2d(g), transpose2d(x))),
                saved=(x, w),
            )
            return tsum(bad)

        return f, {"x": x, "w": w}

    assert _catches(build)


def test_catches_sigmoid_wrong_derivative():
    def build(rng):
        a = _rand_leaf(rng, (4,))

        def f():
            ys = [1.0 / (1.0 + math.exp(-v)) for v in a.flat()]
            out = from_flat(ys, (4,))
            # wrong: derivative is s(1-s), not s
            bad = record("bad_sigmoid", (a,), out,
                         (lambda g: mul(g, out),), saved=())
            return tsum(bad)

        return f, {"a": a}

    assert _catches(build)
