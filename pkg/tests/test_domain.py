import numpy as np
import pytest
from hypothesis import given, strategies as st

from nkpclearn.domain import (
    Dataset,
    InvalidData,
    Lambda,
    OutOfParamSpace,
    ParamSpace,
    StructuralParams,
    validate_lambda,
    validate_theta,
)


def test_theta_roundtrip():
    th = StructuralParams(0.076, 0.998, 0.09)
    assert StructuralParams.from_array(th.as_array()) == th


def test_lambda_needs_five():
    with pytest.raises(ValueError):
        Lambda.from_array([1, 2, 3])


@pytest.mark.parametrize("theta,field", [
    (StructuralParams(0.0, 0.5, 0.1), "gamma"),
    (StructuralParams(0.1, 1.0, 0.1), "delta"),
    (StructuralParams(0.1, 0.5, 11.0), "psi"),
    (StructuralParams(0.1, np.nan, 0.1), "delta"),
])
def test_validate_theta_rejects(theta, field):
    with pytest.raises(OutOfParamSpace) as info:
        validate_theta(theta)
    assert info.value.field == field


def test_two_sided_delta():
    space = ParamSpace(two_sided_delta=True)
    assert space.contains(StructuralParams(0.1, -0.5, 0.1))
    assert not ParamSpace().contains(StructuralParams(0.1, -0.5, 0.1))
    assert not space.contains(StructuralParams(0.1, 0.0, 0.1))


def test_on_boundary():
    assert ParamSpace().on_boundary(StructuralParams(0.001, 0.9999, 0.1)) == ["gamma", "delta"]


def test_lambda_modes():
    lam = Lambda(0.5, 0.0, -0.3, 1.0, 1.0)
    validate_lambda(lam)
    with pytest.raises(OutOfParamSpace):
        validate_lambda(lam, require_pos_rho=True)
    with pytest.raises(OutOfParamSpace):
        validate_lambda(Lambda(0.5, 0.1, 0.3, 0.0, 1.0))


def test_dataset_validation():
    with pytest.raises(InvalidData):
        Dataset(np.zeros(9), np.zeros(9))
    with pytest.raises(InvalidData):
        Dataset(np.zeros(10), np.zeros(11))
    pi = np.zeros(12)
    pi[4] = np.nan
    with pytest.raises(InvalidData, match=r"\[4\]"):
        Dataset(pi, np.zeros(12))


def test_dataset_read_only():
    d = Dataset(np.arange(10.0), np.arange(10.0))
    with pytest.raises(ValueError):
        d.pi[0] = 1.0


@given(st.floats(0.001, 0.3), st.floats(0.01, 0.9999), st.floats(-10, 10))
def test_default_space_accepts_box(g, d, p):
    assert ParamSpace().contains(StructuralParams(g, d, p))
