import numpy as np
import pytest

from pslab.errors import (
    CutoffError,
    ExceptionalPointError,
    NoQuasimodeError,
    OutOfChartError,
    ResolutionError,
    SeedRestrictionError,
    WrongSideError,
)
from pslab.geometry import Disk, Interval, boundary_frame, boundary_graph_jet
from pslab.wkb import (
    CharacteristicPhase,
    QuadratureSpec,
    Quasimode,
    SpectralPoint,
    assemble_quasimode,
    build_quasimode,
    characteristic_phase,
    phase_seed,
    quasimode_residual,
    solve_eikonal_jet,
    solve_transport_jet,
)

DISK = Disk((0, 0), 1.0)
E1 = np.array([1.0, 0.0])


def unit_frame_2d():
    return boundary_frame(DISK, E1, [1.0, 0.0])


def pz_value(xi, X, z):
    xi = np.asarray(xi, dtype=complex)
    X = np.asarray(X, dtype=complex)
    return np.dot(xi, xi) + 1j * np.dot(X, xi) - z


class TestPhaseSeed:
    def test_normal_incidence_fixture(self):
        # oracle: solve the quartic numerically and substitute into both
        # real seed equations; values frozen from that computation
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        seed = phase_seed(unit_frame_2d(), sp)
        assert seed.lam == 0.0
        assert seed.c ** 2 == pytest.approx(0.0756939094, abs=1e-9)
        assert seed.c == pytest.approx(0.2751252614, abs=1e-9)
        assert sorted(seed.beta) == pytest.approx([-0.7751252614, -0.2248747386],
                                                  abs=1e-9)
        assert abs(seed.alpha[0]) == pytest.approx(0.9086770105, abs=1e-9)
        assert seed.alpha[0] == -seed.alpha[1]
        # root 1 is the beta closer to zero
        assert abs(seed.beta[0]) < abs(seed.beta[1])

    def test_real_z_below_quarter(self):
        # closed-form branch: c^4 + (Re z - 1/4) c^2 = 0 with Re z = 0.2
        fr = boundary_frame(Interval(0, 1), [1.0], [1.0])
        sp = SpectralPoint(0.2, 0.05, [1.0])
        seed = phase_seed(fr, sp)
        assert seed.lam == 0.0
        assert seed.c ** 2 == pytest.approx(0.05, abs=1e-14)
        assert np.all(seed.alpha == 0.0)

    def test_region_boundary_rejected(self):
        fr = unit_frame_2d()
        z = 0.25 + 0.5j  # Re z = (Im z)^2 exactly
        with pytest.raises(NoQuasimodeError):
            phase_seed(fr, SpectralPoint(z, 0.05, E1))

    def test_outside_region_rejected(self):
        with pytest.raises(NoQuasimodeError):
            phase_seed(unit_frame_2d(), SpectralPoint(-0.5 + 0.5j, 0.05, E1))

    def test_exceptional_point_rejected(self):
        with pytest.raises(ExceptionalPointError):
            phase_seed(unit_frame_2d(), SpectralPoint(0.25, 0.05, E1))

    def test_shadow_point_rejected(self):
        fr = boundary_frame(DISK, E1, [-1.0, 0.0])
        with pytest.raises(WrongSideError):
            phase_seed(fr, SpectralPoint(1 + 0.5j, 0.05, E1))

    def test_one_dimensional_restriction(self):
        fr = boundary_frame(Interval(0, 1), [1.0], [1.0])
        with pytest.raises(SeedRestrictionError):
            phase_seed(fr, SpectralPoint(0.7, 0.05, [1.0]))
        # complex z at the same real part is fine in d=1
        seed = phase_seed(fr, SpectralPoint(0.7 + 0.3j, 0.05, [1.0]))
        assert np.all(seed.beta < 0)

    def test_region_law_random(self):
        # 200 admissible points succeed with residual <= 1e-10; 200 points
        # outside the closed region raise the no-quasimode error
        rng = np.random.default_rng(7)
        count = 0
        while count < 200:
            re = rng.uniform(0.02, 3.0)
            im = rng.uniform(-1.5, 1.5)
            if re <= im * im + 0.05:
                continue
            t = rng.uniform(-0.2, 0.2)  # stay on the illuminated cap
            x0 = DISK.boundary_points([t])[0]
            fr = boundary_frame(DISK, E1, x0)
            z = complex(re, im)
            if abs(z - fr.nu1 ** 2 / 4) < 1e-3:
                continue
            seed = phase_seed(fr, SpectralPoint(z, 0.05, E1))
            assert seed.seed_residual(1) <= 1e-10 * max(1.0, abs(z))
            assert seed.seed_residual(2) <= 1e-10 * max(1.0, abs(z))
            assert np.all(seed.beta < 0.0)
            count += 1
        count = 0
        fr = unit_frame_2d()
        while count < 200:
            re = rng.uniform(-2.0, 3.0)
            im = rng.uniform(-2.0, 2.0)
            if re >= im * im:
                continue
            with pytest.raises(NoQuasimodeError):
                phase_seed(fr, SpectralPoint(complex(re, im), 0.05, E1))
            count += 1

    def test_unit_field_reduction(self):
        # |X| != 1: the scaled covector must satisfy the unscaled eikonal
        X = np.array([2.5, 0.0])
        fr = boundary_frame(DISK, X, [1.0, 0.0])
        z = 3.0 + 1.0j
        seed = phase_seed(fr, SpectralPoint(z, 0.05, X))
        for root in (1, 2):
            res = abs(pz_value(seed.covector(root), X, z))
            assert res <= 1e-10 * max(1.0, abs(z))


class TestEikonalJet:
    def test_disk_fixture_residual(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        g = boundary_graph_jet(DISK, fr, 4)
        p1, p2 = solve_eikonal_jet(seed, g, 4)
        for pj in (p1, p2):
            assert pj.eikonal_residual_jet().max_coeff_through(3) < 1e-10
            # degree-1 part equals the seed covector
            assert pj.jet.coeffs[1, 0] == pytest.approx(
                seed.covector_frame(pj.root)[0], abs=1e-12)
            assert pj.jet.coeffs[0, 1] == pytest.approx(
                seed.covector_frame(pj.root)[1], abs=1e-12)

    def test_boundary_restriction_matches_phi0(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        g = boundary_graph_jet(DISK, fr, 5)
        p1, _ = solve_eikonal_jet(seed, g, 5)
        trace = p1.jet.compose_graph(g).coeffs
        assert trace[0] == pytest.approx(0.0, abs=1e-13)
        assert trace[1] == pytest.approx(seed.lam, abs=1e-12)
        assert trace[2] == pytest.approx(0.5j * seed.eps, abs=1e-12)
        assert np.all(np.abs(trace[3:]) < 1e-12)

    def test_jet_order_consistency(self):
        # K=4 and K=5 agree on all shared coefficients
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        p4, _ = solve_eikonal_jet(seed, boundary_graph_jet(DISK, fr, 4), 4)
        p5, _ = solve_eikonal_jet(seed, boundary_graph_jet(DISK, fr, 5), 5)
        assert np.allclose(p5.jet.coeffs[:5, :5][np.tri(5, 5).astype(bool)[::-1]],
                           p4.jet.coeffs[np.tri(5, 5).astype(bool)[::-1]],
                           atol=1e-10)

    def test_jet_order_residual_slope(self):
        # eikonal residual at distance r from x0 scales like r^K
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        for K in (3, 4, 5):
            pj, _ = solve_eikonal_jet(seed, boundary_graph_jet(DISK, fr, K), K)
            eik = pj.eikonal_residual_jet()
            radii = np.logspace(-1, -3, 9)
            vals = []
            for r in radii:
                th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
                v1, v2 = r * np.cos(th), r * np.sin(th)
                vals.append(np.max(np.abs(eik.eval(v1, v2))))
            slope = np.polyfit(np.log(radii), np.log(vals), 1)[0]
            assert slope >= K - 0.2

    def test_flat_boundary_cross_correction(self):
        # flat boundary: phi = <xi0, v> + (i eps/2) v2^2 + quadratic
        # cross-corrections; residual of degree <= 1 vanishes
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        flat = boundary_graph_jet(Disk((0, 0), 1e12), fr, 2)  # curvature ~ 0
        pj, _ = solve_eikonal_jet(seed, flat, 2)
        assert pj.eikonal_residual_jet().max_coeff_through(1) < 1e-9


class TestTransportJet:
    def test_leading_amplitude_at_base(self):
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, 0.05)
        for amps in q.amplitudes:
            assert amps[0].jet.coeffs[0, 0] == pytest.approx(1.0)

    def test_one_dimensional_constant_amplitude(self):
        # in d=1 the phase is exactly linear, so psi_0 == 1 solves the
        # transport equation exactly (plug-in check)
        fr = boundary_frame(Interval(0, 1), [1.0], [1.0])
        sp = SpectralPoint(1 + 0.5j, 0.05, [1.0])
        seed = phase_seed(fr, sp)
        g = boundary_graph_jet(Interval(0, 1), fr, 4)
        p1, p2 = solve_eikonal_jet(seed, g, 4)
        assert np.all(np.abs(p1.jet.coeffs[2:]) < 1e-12)
        amps = solve_transport_jet(p1, 0, 4)
        assert amps[0].jet.coeffs[0] == pytest.approx(1.0)
        assert np.all(np.abs(amps[0].jet.coeffs[1:]) < 1e-12)

    def test_transport_residual_vanishes(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        K = 5
        g = boundary_graph_jet(DISK, fr, K)
        p1, _ = solve_eikonal_jet(seed, g, K)
        amps = solve_transport_jet(p1, 1, K)
        lap = p1.laplacian()
        grad = p1.gradient()
        prev = None
        for amp in amps:
            psi = amp.jet
            tv = (-1j) * lap.mul(psi, K - 1)
            for ax in range(2):
                tv = tv + (-2j) * grad[ax].mul(psi.diff(ax), K - 1) \
                    + p1.X_frame[ax] * psi.diff(ax)
            if prev is not None:
                tv = tv - sum((prev.diff(ax).diff(ax) for ax in range(2)),
                              type(psi).zero(K - 1, 2))
            assert tv.max_coeff_through(K - 2) < 1e-9
            prev = psi

    def test_higher_amplitude_boundary_trace_zero(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        g = boundary_graph_jet(DISK, fr, 5)
        p1, _ = solve_eikonal_jet(seed, g, 5)
        amps = solve_transport_jet(p1, 1, 5)
        trace1 = amps[1].jet.compose_graph(g).coeffs
        assert np.all(np.abs(trace1) < 1e-10)


class TestQuasimode:
    def test_vanishes_at_base_point(self):
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, 0.05)
        assert abs(q.evaluate([[1.0, 0.0]])[0]) == 0.0

    def test_zero_outside_cutoff(self):
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, 0.05)
        far = q.ambient(np.array([[-q.cutoff.r_outer - 0.01, 0.0]]))
        assert q.evaluate(far)[0] == 0.0

    def test_boundary_trace_small(self):
        # u on the boundary inside the collar vanishes to jet-truncation order
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, 0.05)
        ts = np.linspace(-0.5 * q.cutoff.r_inner, 0.5 * q.cutoff.r_inner, 21)
        pts = DISK.boundary_points(np.arcsin(ts) / (2 * np.pi))
        vals = np.abs(q.evaluate(pts))
        interior_ref = np.abs(q.evaluate(q.ambient(np.array([[-q.sp.h, 0.0]]))))[0]
        assert np.max(vals) < 5e-2 * interior_ref

    def test_two_exponential_profile_inward(self):
        # one normal step inward the profile follows
        # |exp(i c1 x1/h) - exp(i c2 x1/h)| at leading order
        h = 0.01
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, h)
        seed = q.phases[0].seed
        s = np.linspace(0.05, 3.0, 13)
        pts = q.ambient(np.column_stack([-s * h, np.zeros_like(s)]))
        got = np.abs(q.evaluate(pts))
        xi1 = seed.covector_frame(1)[0]
        xi2 = seed.covector_frame(2)[0]
        ref = np.abs(np.exp(1j * xi1 * (-s * h) / h) - np.exp(1j * xi2 * (-s * h) / h))
        got /= got[0]
        ref /= ref[0]
        assert np.allclose(got, ref, rtol=0.1)
        assert np.all(got[1:] > 0)

    def test_cutoff_error_when_not_shrinking(self):
        # a weak tangential Hessian lets Im(phi) dip below zero on a wide
        # collar; without auto-shrink that must surface as a cutoff error
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp, eps=0.05)
        g = boundary_graph_jet(DISK, fr, 4)
        p1, p2 = solve_eikonal_jet(seed, g, 4)
        amps = (solve_transport_jet(p1, 0, 4), solve_transport_jet(p2, 0, 4))
        with pytest.raises(CutoffError):
            assemble_quasimode((p1, p2), amps, sp, radii=(0.3, 0.6),
                               auto_shrink=False)

    def test_auto_shrink_recovers(self):
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, 0.05, eps=0.05)
        assert q.cutoff.r_outer < 0.6

    def test_residual_refinement_guard(self):
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, 0.05)
        with pytest.raises(ResolutionError):
            quasimode_residual(q, QuadratureSpec(points_per_scale=11))


class TestResidualScaling:
    def test_disk_fixture_ratio_decreases(self):
        hs = [0.05, 0.025, 0.0125, 0.00625]
        ratios = []
        norms2 = []
        for h in hs:
            q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, h,
                                order=4, n_max=0)
            rep = quasimode_residual(q)
            ratios.append(rep.ratio)
            norms2.append(rep.norm_u ** 2)
        assert all(r1 > r2 for r1, r2 in zip(ratios, ratios[1:]))
        slope = np.polyfit(np.log(hs), np.log(ratios), 1)[0]
        assert slope >= 0.9
        # The two normal momenta carry opposite real parts (their sum is
        # -i nu1), so the cross term dephases beyond x1 ~ h and the normal
        # integral contributes one power of h: ||u||^2 ~ h^{(d+1)/2}.
        nslope = np.polyfit(np.log(hs), np.log(norms2), 1)[0]
        assert abs(nslope - 1.5) <= 0.15
        # the guaranteed lower bound ||u||^2 >= c h^{(d+3)/2} holds a fortiori
        assert all(n2 / h ** 2.5 >= 0.04 for n2, h in zip(norms2, hs))

    def test_norm_constant_matches_closed_form(self):
        # freeze the Gaussian x two-exponential product integral:
        # ||u||^2 ~ h^{3/2} * I * sqrt(pi/eps), with
        # I = 1/(2 b1) + 1/(2 b2) - 2 (b1+b2)/((b1+b2)^2 + 4 alpha^2)
        h = 0.0125
        q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, h)
        rep = quasimode_residual(q)
        seed = q.phases[0].seed
        b1, b2 = -seed.beta[0], -seed.beta[1]
        alpha = abs(seed.alpha[0])
        I = 0.5 / b1 + 0.5 / b2 - 2 * (b1 + b2) / ((b1 + b2) ** 2 + 4 * alpha ** 2)
        predicted = h ** 1.5 * I * np.sqrt(np.pi / seed.eps)
        assert rep.norm_u ** 2 == pytest.approx(predicted, rel=0.08)


class TestCharacteristicBackend:
    def test_phase_at_base_point(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        ch = CharacteristicPhase(DISK, seed, 1)
        phi, grad, lap, pz = ch.phase_data(np.array([[1.0, 0.0]]))
        assert abs(phi[0]) < 1e-12
        want = seed.covector_frame(1)
        assert np.allclose(grad[0], want, atol=1e-10)
        assert abs(pz[0]) < 1e-10

    def test_eikonal_residual_pointwise(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        ch = CharacteristicPhase(DISK, seed, 2)
        rng = np.random.default_rng(3)
        w = np.column_stack([-rng.uniform(0.0, 0.25, 40),
                             rng.uniform(-0.4, 0.4, 40)])
        pts = (fr.x0[None, :] + np.outer(w[:, 0], fr.normal)
               + np.outer(w[:, 1], fr.tangent))
        _, grad, _, pz = ch.phase_data(pts)
        assert np.max(np.abs(pz)) < 1e-9

    def test_agreement_with_jet(self):
        # |phi_char - phi_jet| = O(|x - x0|^{K+1}) on a shrinking sweep
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        K = 4
        p1, _ = solve_eikonal_jet(seed, boundary_graph_jet(DISK, fr, K), K)
        ch = CharacteristicPhase(DISK, seed, 1)
        radii = np.logspace(-1, -2.5, 7)
        diffs = []
        for r in radii:
            th = np.linspace(0.1, 2 * np.pi, 16)
            w = np.column_stack([-r * np.abs(np.sin(th)) - 0.1 * r,
                                 r * np.cos(th)])
            pts = (fr.x0[None, :] + np.outer(w[:, 0], fr.normal)
                   + np.outer(w[:, 1], fr.tangent))
            phi_c, _, _, _ = ch.phase_data(pts)
            phi_j = p1.jet.eval(w[:, 0], w[:, 1])
            diffs.append(np.max(np.abs(phi_c - phi_j)))
        slope = np.polyfit(np.log(radii), np.log(diffs), 1)[0]
        assert slope >= K + 1 - 0.3

    def test_out_of_chart(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        ch = CharacteristicPhase(DISK, seed, 1)
        with pytest.raises(OutOfChartError):
            ch.phase_data(np.array([[-0.9, 0.1]]))

    def test_closed_form_amplitude_matches_jet(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        seed = phase_seed(fr, sp)
        K = 6
        p1, _ = solve_eikonal_jet(seed, boundary_graph_jet(DISK, fr, K), K)
        amps = solve_transport_jet(p1, 0, K)
        ch = CharacteristicPhase(DISK, seed, 1)
        w = np.column_stack([[-0.01, -0.03, -0.05], [0.02, -0.01, 0.04]])
        pts = (fr.x0[None, :] + np.outer(w[:, 0], fr.normal)
               + np.outer(w[:, 1], fr.tangent))
        a_ray = ch.transported_amplitude(pts)
        a_jet = amps[0].jet.eval(w[:, 0], w[:, 1])
        assert np.allclose(a_ray, a_jet, atol=2e-4)

    def test_wrapper_function(self):
        sp = SpectralPoint(1 + 0.5j, 0.05, E1)
        fr = unit_frame_2d()
        val = characteristic_phase(fr, sp, domain=DISK, x=[0.99, 0.01])
        assert np.isfinite(val.real) and np.isfinite(val.imag)

    def test_super_quadratic_residual_decay(self):
        # analytic phases + amplitude order 1: the ratio decays faster than
        # any power <= 2 across the sweep
        hs = [0.05, 0.025, 0.0125, 0.00625]
        ratios = []
        for h in hs:
            q = build_quasimode(DISK, E1, [1.0, 0.0], 1 + 0.5j, h,
                                order=8, n_max=1, backend="characteristic")
            rep = quasimode_residual(q)
            ratios.append(rep.ratio)
        slope = np.polyfit(np.log(hs), np.log(ratios), 1)[0]
        assert slope > 2.0
