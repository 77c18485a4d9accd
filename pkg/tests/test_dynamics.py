"""Flow map and variational integrator tests against closed forms."""

import math

import numpy as np
import pytest

from ftme.dynamics import (
    LinearSystem,
    NoClosedFormError,
    ParabolaSystem,
    Scalar1D,
    TrajectoryBlowUpError,
    VectorField,
    closed_form_flow,
    integrate_flow,
    integrate_flow_batch,
    linear_saddle,
    liouville_det,
)


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def _systems():
    return [linear_saddle(), ParabolaSystem(beta=1.0, gamma=1.0)]


def test_closed_form_matches_rk4():
    gen = _rng(1)
    for system in _systems():
        field = system.field()
        for _ in range(25):
            x0 = gen.uniform(-1.5, 1.5, 2)
            exact = closed_form_flow(system, x0, 2.0)
            num = integrate_flow(field, x0, 0.0, 2.0, 400)
            assert np.allclose(num.x_end, exact.x_end, rtol=1e-8, atol=1e-10)
            assert np.allclose(num.phi, exact.phi, rtol=1e-8, atol=1e-10)


def test_closed_form_scalar():
    sys1d = Scalar1D(a=-0.7)
    res = closed_form_flow(sys1d, np.array([2.0]), 3.0)
    assert res.x_end[0] == pytest.approx(2.0 * math.exp(-2.1), rel=1e-14)
    assert res.phi[0, 0] == pytest.approx(math.exp(-2.1), rel=1e-14)


def test_closed_form_rejects_large_linear():
    big = LinearSystem(np.eye(3))
    with pytest.raises(NoClosedFormError):
        closed_form_flow(big, np.zeros(3), 1.0)


def test_cocycle_property():
    field = ParabolaSystem(beta=0.8, gamma=1.3).field()
    x0 = np.array([0.4, -0.2])
    leg1 = integrate_flow(field, x0, 0.0, 1.0, 200)
    leg2 = integrate_flow(field, leg1.x_end, 1.0, 2.0, 200)
    whole = integrate_flow(field, x0, 0.0, 2.0, 400)
    assert np.allclose(leg2.phi @ leg1.phi, whole.phi, rtol=1e-9, atol=1e-12)
    assert np.allclose(leg2.x_end, whole.x_end, rtol=1e-9, atol=1e-12)


def test_tangent_propagation_identity():
    # Phi(T) f(x0) = f(phi(T, x0)) for autonomous fields
    gen = _rng(2)
    for system in _systems():
        field = system.field()
        for _ in range(25):
            x0 = gen.uniform(-1.0, 1.0, 2)
            res = integrate_flow(field, x0, 0.0, 2.0, 400)
            lhs = res.phi @ field.f(0.0, x0)
            rhs = field.f(2.0, res.x_end)
            assert np.linalg.norm(lhs - rhs) <= 1e-6 * (np.linalg.norm(rhs) + 1e-12)


def test_liouville_matches_det_phi():
    field = ParabolaSystem(beta=1.0, gamma=1.5).field()
    x0 = np.array([0.7, 0.3])
    res = integrate_flow(field, x0, 0.0, 2.0, 400)
    lv = liouville_det(field, x0, 0.0, 2.0, 400)
    assert lv == pytest.approx(np.linalg.det(res.phi), rel=1e-8)
    # trace of the Jacobian is gamma - 1 = 0.5, so det grows like e^{0.5 t}
    assert lv == pytest.approx(math.exp(1.0), rel=1e-6)


def test_rk4_fourth_order_convergence():
    system = ParabolaSystem(beta=1.0, gamma=1.0)
    field = system.field()
    x0 = np.array([0.9, -0.4])
    exact = closed_form_flow(system, x0, 1.0)

    def err(steps):
        res = integrate_flow(field, x0, 0.0, 1.0, steps)
        return np.linalg.norm(res.x_end - exact.x_end)

    # halving the step should cut the error by about 16; require >= 12
    assert err(20) / err(40) >= 12.0


def test_jacobian_consistent_with_f():
    gen = _rng(3)
    eps = 1e-6
    for system in _systems():
        field = system.field()
        for _ in range(10):
            x0 = gen.uniform(-1.0, 1.0, 2)
            J = field.jac(0.0, x0)
            for k in range(2):
                e = np.zeros(2)
                e[k] = eps
                col = (field.f(0.0, x0 + e) - field.f(0.0, x0 - e)) / (2 * eps)
                assert np.allclose(J[:, k], col, atol=1e-5)


def _quadratic_1d():
    def f(t, x):
        x = np.asarray(x, dtype=float)
        return x * x

    def jac(t, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x[..., None] * np.eye(1)

    return VectorField(dim=1, f=f, jac=jac, autonomous=True, name="quad")


def test_blow_up_raises_with_last_finite_time():
    field = _quadratic_1d()
    # dx/dt = x^2 from x0 = 1 blows up at t = 1
    with pytest.raises(TrajectoryBlowUpError):
        integrate_flow(field, np.array([1.0]), 0.0, 2.0, 400)


def test_batch_blow_up_freezes_row():
    field = _quadratic_1d()
    x0 = np.array([[1.0], [-1.0]])
    x_end, phi, ok = integrate_flow_batch(field, x0, 0.0, 2.0, 400)
    assert not ok[0] and ok[1]
    assert np.isfinite(x_end).all() and np.isfinite(phi).all()
    # the healthy row follows x(t) = 1/(1/x0 - t)
    assert x_end[1, 0] == pytest.approx(-1.0 / 3.0, rel=1e-8)


def test_batch_matches_single():
    field = linear_saddle().field()
    x0 = np.array([[0.3, 0.5], [-1.0, 0.2]])
    x_end, phi, ok = integrate_flow_batch(field, x0, 0.0, 1.5, 150)
    assert ok.all()
    for row in range(2):
        single = integrate_flow(field, x0[row], 0.0, 1.5, 150)
        assert np.array_equal(single.x_end, x_end[row])
        assert np.array_equal(single.phi, phi[row])


def test_linear_system_validation():
    with pytest.raises(ValueError):
        LinearSystem(np.ones((2, 3)))
    with pytest.raises(ValueError):
        ParabolaSystem(beta=1.0, gamma=0.0)
