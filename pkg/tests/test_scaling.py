import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from wdi_outbreak.data import PanelTable
from wdi_outbreak.scaling import ScalerParams, ScalingError, apply_scaler, fit_scaler, scale_matrix


def _col(values):
    return PanelTable.from_array(np.asarray(values, dtype=float)[:, None])


def _quantile_oracle(values, p):
    """Linear interpolation between order statistics at h = (n - 1) p."""
    v = sorted(values)
    h = (len(v) - 1) * p
    lo = int(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def test_robust_fit_example():
    p = fit_scaler(_col([1, 2, 3, 4, 5]), "robust")
    assert p.center[0] == 3 and p.spread[0] == 2


def test_minmax_and_standard_fit_examples():
    p = fit_scaler(_col([0, 10]), "minmax")
    assert (p.center[0], p.center[0] + p.spread[0]) == (0, 10)
    s = fit_scaler(_col([2, 2, 2]), "standard")
    assert s.center[0] == 2 and s.spread[0] == 0
    # zero spread divides by 1
    np.testing.assert_array_equal(scale_matrix(s, np.array([[2.0], [5.0]])), [[0.0], [3.0]])


def test_transform_examples():
    robust = ScalerParams("robust", ("f0",), np.array([3.0]), np.array([2.0]))
    np.testing.assert_array_equal(scale_matrix(robust, np.array([[5.0], [3.0]]))[:, 0], [1.0, 0.0])
    mm = ScalerParams("minmax", ("f0",), np.array([0.0]), np.array([10.0]))
    assert scale_matrix(mm, np.array([[5.0]]))[0, 0] == 0.5
    ld = ScalerParams("logdev", ("f0",), np.array([3.0]), np.array([2.0]))
    assert scale_matrix(ld, np.array([[3.0]]))[0, 0] == 0.0
    assert scale_matrix(ld, np.array([[5.0]]))[0, 0] == pytest.approx(np.log(2))


@given(
    arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3)),
    st.floats(0.01, 0.45),
    st.floats(0.55, 0.99),
)
def test_robust_matches_quantile_oracle(col, lo, hi):
    p = fit_scaler(_col(col), "robust", (lo, hi))
    assert p.center[0] == pytest.approx(_quantile_oracle(col, 0.5), rel=1e-12, abs=1e-9)
    want = _quantile_oracle(col, hi) - _quantile_oracle(col, lo)
    assert p.spread[0] == pytest.approx(want, rel=1e-9, abs=1e-9)


@given(arrays(np.float64, (12, 3), elements=st.floats(-50, 50)), st.sampled_from(["robust", "minmax", "standard", "logdev"]))
def test_monotone_per_column(X, kind):
    p = fit_scaler(PanelTable.from_array(X), kind)
    Z = scale_matrix(p, X)
    for j in range(3):
        order = np.argsort(X[:, j], kind="stable")
        assert np.all(np.diff(Z[order, j]) >= -1e-12)


def test_minmax_range(rng):
    X = rng.normal(size=(50, 4))
    Z = apply_scaler(fit_scaler(PanelTable.from_array(X), "minmax"), PanelTable.from_array(X)).values
    np.testing.assert_allclose(Z.min(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(Z.max(axis=0), 1, atol=1e-12)


def test_params_json_round_trip(rng):
    X = rng.normal(size=(20, 3))
    p = fit_scaler(PanelTable.from_array(X), "logdev", (0.1, 0.9))
    back = ScalerParams.from_dict(json.loads(json.dumps(p.to_dict())))
    np.testing.assert_array_equal(scale_matrix(back, X), scale_matrix(p, X))


def test_errors():
    with pytest.raises(ScalingError):
        fit_scaler(_col([1, 2]), "bogus")
    with pytest.raises(ScalingError):
        fit_scaler(_col([1, 2]), "robust", (0.8, 0.2))
    with pytest.raises(ValueError):
        fit_scaler(PanelTable.from_array(np.array([[1.0], [np.nan]]), mask=np.array([[True], [False]])))
