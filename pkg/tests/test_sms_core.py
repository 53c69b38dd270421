from itertools import combinations, product
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentencing_mlms.errors import CapacityError, ValidationError
from sentencing_mlms.sms_core import (
    CaseRecord,
    StructuralParams,
    build_regressor,
    build_regressors,
    build_theta,
    expand_conviction_basis,
    expand_conviction_basis_batch,
    regressor_dim,
    saturate,
    sms_generate,
    sms_inner,
)


def rec(a=10.0, x=(0, 0, 0, 0), z=(), v=(), lower=1.0, upper=500.0, y=None, **kw):
    return CaseRecord(case_id="t", a=a, x=x, z=z, v=v, lower=lower, upper=upper, y=y, **kw)


def brute_force_basis(z):
    out = []
    for size in range(len(z) + 1):
        for subset in combinations(range(len(z)), size):
            out.append(math.prod(z[i] for i in subset))
    return np.array(out)


# -- expand_conviction_basis ------------------------------------------------


@pytest.mark.parametrize(
    "z, expected",
    [
        ((1, 1), [1, 1, 1, 1]),
        ((0, 0), [1, 0, 0, 0]),
        ((1, 0, 1), [1, 1, 0, 1, 0, 1, 0, 0]),
        ((), [1]),
    ],
)
def test_basis_examples(z, expected):
    np.testing.assert_array_equal(expand_conviction_basis(z), expected)


@pytest.mark.parametrize("m1", range(5))
def test_basis_matches_enumeration_exhaustively(m1):
    for z in product((0, 1), repeat=m1):
        np.testing.assert_array_equal(expand_conviction_basis(z), brute_force_basis(z))


def test_basis_real_inputs_and_batch():
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(20, 4))
    batch = expand_conviction_basis_batch(Z)
    for k in range(20):
        np.testing.assert_allclose(batch[k], brute_force_basis(Z[k]), rtol=1e-14)


def test_basis_capacity_guard():
    with pytest.raises(CapacityError):
        expand_conviction_basis(np.zeros(17))
    assert expand_conviction_basis(np.zeros(16)).size == 2**16


def test_product_identity_of_basis():
    p = np.array([0.3, -0.2, 0.5])
    z = np.array([1.0, 0.0, 1.0])
    assert expand_conviction_basis(p) @ expand_conviction_basis(z) == pytest.approx(np.prod(1 + p * z))


# -- build_regressor / build_theta -----------------------------------------


def test_regressor_all_zero_features():
    phi = build_regressor(rec(a=10, z=(0,), v=(0,)))
    expected = np.zeros(20)
    expected[0] = 10
    np.testing.assert_array_equal(phi, expected)


def test_regressor_hand_expansion():
    phi = build_regressor(rec(a=10, x=(1, 0, 0, 0), z=(1,), v=(1,)))
    np.testing.assert_array_equal(phi, [10, 10, 10, 10, 1, 1, 1, 1] + [0] * 12)


def test_regressor_kron_ordering():
    # entry (j-1)*2**m1 + s of the cross part is v_j * phi1[s]
    r = rec(a=1, z=(1, 1), v=(0, 1))
    phi = build_regressor(r)
    cross = phi[4:12]
    np.testing.assert_array_equal(cross, [0, 0, 0, 0, 1, 1, 1, 1])


@pytest.mark.parametrize("m1", range(9))
@pytest.mark.parametrize("m2", [0, 3, 8])
def test_regressor_dimension(m1, m2):
    phi = build_regressor(rec(z=(1,) * m1, v=(0,) * m2))
    assert phi.size == regressor_dim(m1, m2) == 5 * 2**m1 * (1 + m2)


def test_dimension_for_m1_2_m2_3():
    assert regressor_dim(2, 3) == 80


def test_batched_regressors_match_single():
    rng = np.random.default_rng(0)
    n = 30
    a = rng.uniform(0, 50, n)
    X = rng.integers(0, 4, (n, 4)).astype(float)
    Z = rng.integers(0, 2, (n, 3)).astype(float)
    V = rng.integers(0, 2, (n, 2)).astype(float)
    batch = build_regressors(a, X, Z, V)
    for k in range(n):
        np.testing.assert_allclose(batch[k], build_regressor(rec(a=a[k], x=X[k], z=Z[k], v=V[k])), rtol=1e-15)


def test_theta_only_constant():
    th = build_theta(StructuralParams(p=(0.0,), q=(0.0,)), 10.0)
    expected = np.zeros(20)
    expected[0] = 1
    np.testing.assert_array_equal(th.values, expected)


def test_theta_hand_expansion():
    th = build_theta(StructuralParams(b=2, eta=0.1, p=(0.5,), q=(0.3,)), 10.0)
    expected = [1.1, 0.55, 0.3, 0.15, 2.2, 1.1, 0.6, 0.3] + [0] * 12
    np.testing.assert_allclose(th.values, expected, rtol=1e-14)


def test_theta_box_violation_names_index():
    with pytest.raises(ValidationError, match=r"theta\[0\]"):
        build_theta(StructuralParams(b=2, eta=0.1, p=(0.5,), q=(0.3,)), 1.0)


def test_theta_is_read_only():
    th = build_theta(StructuralParams(p=(0.1,)), 5.0)
    with pytest.raises(ValueError):
        th.values[0] = 3.0


# -- saturate / sms_inner / sms_generate -----------------------------------


@pytest.mark.parametrize("x, expected", [(50, 50), (130, 120), (10, 36)])
def test_saturate_examples(x, expected):
    assert saturate(x, 36, 120) == expected


def test_saturate_rejects_bad_bounds():
    with pytest.raises(ValueError):
        saturate(1.0, 5.0, 5.0)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(finite, finite, st.floats(1e-3, 1e3), finite)
def test_saturate_idempotent_and_monotone(x, lo, width, dx):
    hi = lo + width
    s = saturate(x, lo, hi)
    assert lo <= s <= hi
    assert saturate(s, lo, hi) == s
    assert saturate(x + abs(dx), lo, hi) >= s


def test_sms_inner_examples():
    assert sms_inner(StructuralParams(), rec(a=10)) == 10
    sp = StructuralParams(b=3, p=(1.0,))
    assert sms_inner(sp, rec(a=10, x=(2, 0, 0, 0), z=(1,))) == 32


@pytest.mark.parametrize("inner, eps, expected", [(50, 0, 50), (115, 20, 120), (40, -10, 36)])
def test_sms_generate_examples(inner, eps, expected):
    r = rec(a=inner, lower=36, upper=120)
    assert sms_generate(StructuralParams(), r, eps) == expected


def test_sms_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        sms_inner(StructuralParams(p=(0.1,)), rec(z=()))


@st.composite
def instances(draw):
    m1 = draw(st.integers(0, 4))
    m2 = draw(st.integers(0, 3))
    w = st.floats(-5, 5, allow_nan=False)
    sp = StructuralParams(
        b=draw(w), c=draw(w), d=draw(w), e=draw(w), eta=draw(st.floats(-0.5, 0.5)),
        p=draw(st.lists(st.floats(-0.9, 2), min_size=m1, max_size=m1)),
        q=draw(st.lists(st.floats(-0.5, 0.5), min_size=m2, max_size=m2)),
    )
    r = CaseRecord(
        case_id="h",
        a=draw(st.floats(0, 200)),
        x=draw(st.lists(st.integers(0, 5), min_size=4, max_size=4)),
        z=draw(st.lists(st.floats(-2, 2), min_size=m1, max_size=m1)),
        v=draw(st.lists(st.floats(-2, 2), min_size=m2, max_size=m2)),
        lower=1.0,
        upper=2.0,
        strict_binary=False,
    )
    return sp, r


@given(instances())
def test_linearization_identity_property(inst):
    sp, r = inst
    inner = sms_inner(sp, r)
    assert abs(inner - build_regressor(r) @ build_theta(sp, 1e9).values) <= 1e-9 * (1 + abs(inner))


@given(instances(), st.floats(-50, 50))
def test_generate_within_bounds(inst, eps):
    sp, r = inst
    y = sms_generate(sp, r, eps)
    assert r.lower <= y <= r.upper


# -- CaseRecord validation --------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, column",
    [
        (dict(z=(2,)), "z_1"),
        (dict(v=(0, 0.5)), "v_2"),
        (dict(x=(1, -1, 0, 0)), "x2"),
        (dict(x=(1, 1.5, 0, 0)), "x2"),
        (dict(a=-1), "a"),
        (dict(y=130, lower=36, upper=120), "y"),
        (dict(group="other"), "group"),
    ],
)
def test_record_validation_names_column(kwargs, column):
    with pytest.raises(ValidationError) as info:
        rec(**kwargs)
    assert info.value.column == column


@pytest.mark.parametrize("lower, upper", [(0, 10), (10, 10), (12, 6), (-1, 5)])
def test_record_bounds(lower, upper):
    with pytest.raises(ValidationError):
        rec(lower=lower, upper=upper)


def test_record_optional_y():
    assert rec(y=None).y is None
    assert rec(y=36, lower=36, upper=120).y == 36
