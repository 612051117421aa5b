import math

import numpy as np
import pytest

from pslab.errors import GeometryError, PslabError
from pslab.evolution import (
    BumpSpec,
    bump_initial_data,
    evolve,
    evolve_scalar,
    flow,
    scalar_blowup_time,
    subsolution_check,
)
from pslab.geometry import Interval
from pslab.operators import assemble_1d, conjugated_spectrum_oracle
from pslab.spectral import eigenvalues

INTERVAL = Interval(0.0, 1.0)


def fixture_operator(h=0.01, n=2000):
    return assemble_1d(INTERVAL, h, 1.0, n)


def fixture_bump(h=0.01):
    # amplitude pinned at the cap e^{-1/(10h)}; the support rides right and
    # stays inside for t <= 2*delta
    return BumpSpec(center=[0.15], inner_radius=0.05, delta=0.36,
                    cap_constant=10.0, amplitude=math.exp(-1.0 / (10.0 * h)))


class TestFlow:
    def test_identity_at_zero(self):
        assert np.allclose(flow([0.3, 0.4], 0.0, [1.0, 0.0]), [0.3, 0.4])

    def test_closed_form(self):
        assert np.allclose(flow([0.7, 0.0], 0.3, [1.0, 0.0]), [0.4, 0.0])

    def test_composition(self):
        x = np.array([0.5, 0.2])
        X = np.array([0.3, -0.1])
        a = flow(flow(x, 0.2, X), 0.1, X)
        b = flow(x, 0.3, X)
        assert np.allclose(a, b)


class TestBump:
    def test_center_amplitude_default(self):
        h = 0.01
        spec = BumpSpec(center=[0.5], inner_radius=0.05, delta=0.2)
        pts = np.linspace(0, 1, 4001)[:, None]
        rep = bump_initial_data(spec, pts, h)
        assert rep.peak == pytest.approx(math.e * math.exp(-0.2 / (2 * h)), rel=1e-6)

    def test_support_confined(self):
        h = 0.01
        spec = fixture_bump(h)
        pts = np.linspace(0, 1, 2001)[:, None]
        rep = bump_initial_data(spec, pts, h)
        outside = np.abs(pts[:, 0] - 0.15) > 0.1
        assert np.all(rep.values[outside] == 0.0)

    def test_cap_enforced(self):
        h = 0.01
        spec = fixture_bump(h)
        pts = np.linspace(0, 1, 2001)[:, None]
        rep = bump_initial_data(spec, pts, h)
        assert rep.peak <= math.exp(-1.0 / (10.0 * h)) * (1 + 1e-12)

    def test_flow_condition_rejects_bad_window(self):
        # the spec example fixture x0=0.7, a=0.1, delta=0.4 cannot ride for
        # 2*delta inside the unit interval
        h = 0.01
        bad = BumpSpec(center=[0.7], inner_radius=0.1, delta=0.4)
        pts = np.linspace(0, 1, 501)[:, None]
        with pytest.raises(GeometryError):
            bump_initial_data(bad, pts, h, domain=INTERVAL, X=[1.0])

    def test_flow_condition_accepts_fixture(self):
        h = 0.01
        spec = fixture_bump(h)
        pts = np.linspace(0, 1, 501)[:, None]
        rep = bump_initial_data(spec, pts, h, domain=INTERVAL, X=[1.0])
        assert rep.ineq_beta > 0.0

    def test_differential_inequality_spot_check(self):
        h = 0.01
        spec = fixture_bump(h)
        pts = np.linspace(0, 1, 4001)[:, None]
        rep = bump_initial_data(spec, pts, h)
        # -Lap w0 <= C w0 - beta holds on the checked interior with beta > 0
        assert rep.ineq_constant > 0
        assert rep.ineq_beta > 0


class TestEvolve:
    def test_zero_data_stays_zero(self):
        op = fixture_operator(n=200)
        res = evolve(op, 0.2, 2.0, np.zeros(op.n), 1e-3, 0.05)
        assert not res.blew_up
        assert res.sup_norms.max() == 0.0

    def test_scalar_ode_blowup_time(self):
        h, mu, u0 = 0.05, 0.3, 1e-3
        want = scalar_blowup_time(u0, mu, 2.0, h)
        got, _ = evolve_scalar(u0, mu, 2.0, h, dt0=h / 2000.0)
        assert abs(got - want) / want < 0.02

    def test_linear_regime_decay_in_similarity_norm(self):
        # with mu < lambda_1 the conjugated operator is symmetric positive
        # definite, so ||D^{-1} u|| decays monotonically; the plain norm shows
        # the transient pseudospectral growth instead
        from pslab.operators import symmetrizer_1d
        h = 0.01
        op = fixture_operator(h, 1000)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h)
        snaps = np.round(np.linspace(0.0, 2.0, 21), 10)
        res = evolve(op, 0.2, 2.0, rep.values, 5e-4, 2.0, nonlinear=False,
                     snapshot_times=snaps)
        D = symmetrizer_1d(op)
        norms = [np.linalg.norm(res.snapshots[t] / D) for t in snaps]
        assert all(a >= b * (1 - 1e-10) for a, b in zip(norms, norms[1:]))
        # the plain norm grows transiently before the bump is absorbed
        assert res.sup_norms.max() > 10 * res.sup_norms[0]

    def test_positivity_preserved(self):
        h = 0.01
        op = fixture_operator(h, 500)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h)
        res = evolve(op, 0.2, 2.0, rep.values, 5e-4, 0.2)
        for t, u in res.snapshots.items():
            assert u.min() >= -1e-12

    def test_blowup_fixture(self):
        h = 0.01
        op = fixture_operator(h, 2000)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h, domain=INTERVAL, X=[1.0])
        res = evolve(op, 0.2, 2.0, 1.02 * rep.values, 2e-4, 0.6,
                     snapshot_times=np.arange(0.05, 0.40, 0.05))
        assert res.blew_up
        assert res.t_blowup <= 0.5
        # spectral stability of the linearization: eigenvalues of -(P - mu)
        lam = eigenvalues(op, 5, sigma_shift=0.25).values
        assert np.all(-(lam.real - 0.2) <= -0.04)

    def test_blowup_time_dt_refinement(self):
        h = 0.01
        op = fixture_operator(h, 1000)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h)
        t1 = evolve(op, 0.2, 2.0, 1.02 * rep.values, 2e-4, 0.6).t_blowup
        t2 = evolve(op, 0.2, 2.0, 1.02 * rep.values, 1e-4, 0.6).t_blowup
        assert abs(t1 - t2) / t2 < 0.02

    def test_instability_contrast(self):
        # amplitude cut by 100x still blows up before delta at smaller h:
        # the threshold is exponential in 1/h, not amplitude-polynomial
        h = 0.005
        op = fixture_operator(h, 2000)
        spec = BumpSpec(center=[0.15], inner_radius=0.05, delta=0.36,
                        cap_constant=25.0,
                        amplitude=0.01 * math.exp(-1.0 / (25.0 * h)))
        rep = bump_initial_data(spec, op.points, h, domain=INTERVAL, X=[1.0])
        res = evolve(op, 0.2, 2.0, 1.02 * rep.values, 2e-4, spec.delta)
        assert res.blew_up
        assert res.t_blowup < spec.delta


class TestSubsolution:
    def test_initial_ordering(self):
        h = 0.01
        op = fixture_operator(h, 1500)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h)
        res = evolve(op, 0.2, 2.0, 1.02 * rep.values, 2e-4, 0.6,
                     snapshot_times=[0.0, 0.05])
        # u0 = 1.02 w0 >= w0 by construction
        u0 = res.snapshots[0.0]
        assert np.all(u0 >= rep.values - 1e-15)

    def test_comparison_through_window(self):
        h = 0.01
        op = fixture_operator(h, 2000)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h, domain=INTERVAL, X=[1.0])
        res = evolve(op, 0.2, 2.0, 1.02 * rep.values, 2e-4, 0.6,
                     snapshot_times=np.round(np.arange(0.05, 0.36, 0.05), 10))
        report = subsolution_check(res, spec, 0.1, [1.0], op.points)
        assert report.ok
        assert max(report.checked_times) >= 0.35

    def test_subsolution_growth_factor(self):
        # w at the moving center grows exactly by e^{alpha dt / h}
        h, alpha = 0.01, 0.1
        spec = fixture_bump(h)
        X = np.array([1.0])
        t1, t2 = 0.1, 0.15
        c1 = spec.center + t1 * X
        c2 = spec.center + t2 * X
        w1 = math.exp(alpha * t1 / h) * spec.profile(flow(c1[None, :], t1, X), h)[0]
        w2 = math.exp(alpha * t2 / h) * spec.profile(flow(c2[None, :], t2, X), h)[0]
        assert w2 / w1 == pytest.approx(math.exp(alpha * (t2 - t1) / h), rel=1e-12)

    def test_alpha_range_enforced(self):
        h = 0.01
        op = fixture_operator(h, 200)
        spec = fixture_bump(h)
        rep = bump_initial_data(spec, op.points, h)
        res = evolve(op, 0.2, 2.0, rep.values, 2e-4, 0.1, snapshot_times=[0.05])
        with pytest.raises(ValueError):
            subsolution_check(res, spec, 0.25, [1.0], op.points)
