import math

import numpy as np
import pytest

from diracweyl import (
    PotentialSpec,
    alpha_dirichlet,
    alpha_neumann,
    disk_membership,
    e_c,
    halfline_m,
    lft_boundary_change,
    matnorm,
    normal_form_matrix,
    regular_m,
)
from diracweyl.errors import (
    DegenerateArguments,
    EigenvalueHit,
    NoConvergence,
    SingularDenominator,
)
from conftest import (
    mminus_const_q,
    mplus_const_q,
    random_boundary,
    random_normal_form_spec,
)


class TestRegularM:
    def test_free_closed_forms(self, zero1):
        a0 = alpha_dirichlet(1)
        m = regular_m(1j, 1.0, 0.0, a0, (np.zeros((1, 1)), np.eye(1)), zero1)
        assert abs(m[0, 0] - 1j * math.tanh(1.0)) < 1e-12
        m = regular_m(1j, 1.0, 0.0, a0, (np.eye(1), np.zeros((1, 1))), zero1)
        assert abs(m[0, 0] - 1j / math.tanh(1.0)) < 1e-12

    def test_eigenvalue_hit(self, zero1):
        # z real with sin(z c) = 0 is an eigenvalue of the regular problem
        a0 = alpha_dirichlet(1)
        with pytest.raises(EigenvalueHit):
            regular_m(math.pi, 1.0, 0.0, a0,
                      (np.eye(1), np.zeros((1, 1))), zero1)

    def test_degenerate_interval(self, zero1):
        with pytest.raises(DegenerateArguments):
            regular_m(1j, 0.0, 0.0, alpha_dirichlet(1),
                      (np.eye(1), np.zeros((1, 1))), zero1)

    def test_large_z_rescaled(self, zero1):
        # entries of the fundamental system would overflow without rescaling
        a0 = alpha_dirichlet(1)
        z = 500j
        m = regular_m(z, 2.0, 0.0, a0, (np.zeros((1, 1)), np.eye(1)), zero1)
        assert abs(m[0, 0] - 1j) < 1e-10


# Frozen disk-functional values for B = 0, z = i, x0 = 0, c = 1 (independent
# evaluation: U = (cosh - t sinh, i(t cosh - sinh)) e-free form, so
# E_c = -2 (cosh c - t sinh c)(t cosh c - sinh c) at M = i t and
# E_c(+-i) = -+2 e^{-+2c}).
E_AT_I = -2.0 * math.exp(-2.0)          # M = i
E_AT_MINUS_I = 2.0 * math.exp(2.0)      # M = -i


class TestDiskFunctional:
    def test_frozen_values(self, zero1):
        a0 = alpha_dirichlet(1)
        e = e_c(np.array([[1j]]), 1j, 1.0, 0.0, a0, zero1)
        assert abs(e[0, 0] - E_AT_I) < 1e-12
        e = e_c(np.array([[-1j]]), 1j, 1.0, 0.0, a0, zero1)
        assert abs(e[0, 0] - E_AT_MINUS_I) < 1e-11
        e = e_c(np.array([[1j * math.tanh(1.0)]]), 1j, 1.0, 0.0, a0, zero1)
        assert abs(e[0, 0]) < 1e-10

    def test_hermitian_defect_reported(self, zero1):
        _, defect = e_c(np.array([[1j]]), 1j, 1.0, 0.0, alpha_dirichlet(1),
                        zero1, return_defect=True)
        assert defect < 1e-12

    def test_membership(self, zero1):
        a0 = alpha_dirichlet(1)
        args = (1j, 1.0, 0.0, a0, zero1)
        assert disk_membership(np.array([[1j]]), *args).classification == "interior"
        assert disk_membership(np.array([[1j * math.tanh(1.0)]]),
                               *args).classification == "boundary"
        assert disk_membership(np.array([[-1j]]), *args).classification == "exterior"

    def test_nesting(self, zero1):
        # boundary point of the disk at c = 2 lies inside the disk at c = 1
        a0 = alpha_dirichlet(1)
        point = np.array([[1j * math.tanh(2.0)]])
        assert disk_membership(point, 1j, 2.0, 0.0, a0,
                               zero1).classification == "boundary"
        assert disk_membership(point, 1j, 1.0, 0.0, a0,
                               zero1).classification == "interior"

    def test_monotone_in_c(self, rng, zero1):
        a0 = alpha_dirichlet(1)
        for mval in (0.3 + 0.8j, 1j, -0.2 + 0.5j):
            e1 = e_c(np.array([[mval]]), 1j, 1.0, 0.0, a0, zero1)
            e2 = e_c(np.array([[mval]]), 1j, 2.0, 0.0, a0, zero1)
            assert np.linalg.eigvalsh(e2 - e1)[0] > -1e-12

    def test_disk_points_have_sign_property(self, zero1, const_q1):
        # interior/boundary points satisfy sigma(c, x0, z) Im(M) > 0
        from diracweyl import sigma as sgn
        a0 = alpha_dirichlet(1)
        for spec in (zero1, const_q1):
            for z, c in ((1j, 1.0), (-0.8j, 2.0), (0.5 + 1j, 1.5)):
                mval = regular_m(z, c, 0.0, a0,
                                 (np.eye(1), 0.4 * np.eye(1)), spec)
                point = disk_membership(mval, z, c, 0.0, a0, spec)
                assert point.classification in ("interior", "boundary")
                im = (mval - mval.conj().T) / 2j
                assert sgn(c, 0.0, z) * np.linalg.eigvalsh(im)[0] > 0

    def test_selfadjoint_beta_on_circle(self, rng, const_q1):
        # Im(beta2 beta1*) = 0 puts the regular M on the circle;
        # a positive imaginary part puts it strictly inside
        a0 = alpha_dirichlet(1)
        z, c = 0.5 + 1.2j, 1.5
        m_circ = regular_m(z, c, 0.0, a0, (np.eye(1), 0.7 * np.eye(1)),
                           const_q1)
        assert disk_membership(m_circ, z, c, 0.0, a0,
                               const_q1).classification == "boundary"
        m_int = regular_m(z, c, 0.0, a0, (np.eye(1), 0.5j * np.eye(1)),
                          const_q1)
        assert disk_membership(m_int, z, c, 0.0, a0,
                               const_q1).classification == "interior"


class TestHalfLineM:
    def test_free_identity(self, zero1, zero2):
        for m, spec in ((1, zero1), (2, zero2)):
            h = halfline_m(1j, 0.0, alpha_dirichlet(m), spec)
            assert matnorm(h.M - 1j * np.eye(m)) < 1e-10
            h = halfline_m(1j, 0.0, alpha_dirichlet(m), spec, sign=-1)
            assert matnorm(h.M + 1j * np.eye(m)) < 1e-10

    def test_constant_coupling_oracle(self, const_q1):
        z = 2j
        h = halfline_m(z, 0.0, alpha_dirichlet(1), const_q1)
        assert abs(h.M[0, 0] - mplus_const_q(z, 1.0)) < 1e-9
        assert abs(h.M[0, 0] - 1j * (1 + math.sqrt(5)) / 2) < 1e-9
        h = halfline_m(z, 0.0, alpha_dirichlet(1), const_q1, sign=-1)
        assert abs(h.M[0, 0] - mminus_const_q(z, 1.0)) < 1e-9

    def test_conjugation_symmetry(self, const_q1):
        hp = halfline_m(2j, 0.0, alpha_dirichlet(1), const_q1)
        hc = halfline_m(-2j, 0.0, alpha_dirichlet(1), const_q1)
        assert matnorm(hc.M - hp.M.conj().T) < 1e-9

    def test_alpha_independence_free(self, rng, zero2):
        # for B = 0 the half-line M is i I for every boundary condition
        for _ in range(3):
            alpha = random_boundary(rng, 2)
            h = halfline_m(1.5j, 0.0, alpha, zero2)
            assert matnorm(h.M - 1j * np.eye(2)) < 1e-9

    def test_lft_consistency(self, rng, const_q1):
        # recompute directly at alpha and compare against the fractional
        # transform of the gamma-based value
        z = 0.7 + 1.1j
        for _ in range(3):
            alpha = random_boundary(rng, 1)
            gamma = random_boundary(rng, 1)
            m_alpha = halfline_m(z, 0.0, alpha, const_q1).M
            m_gamma = halfline_m(z, 0.0, gamma, const_q1).M
            assert matnorm(lft_boundary_change(m_gamma, alpha, gamma)
                           - m_alpha) < 1e-8

    def test_herglotz_positivity(self, rng):
        for m in (1, 2):
            spec = random_normal_form_spec(rng, m)
            alpha = alpha_dirichlet(m)
            for z in (0.8j, 1.5j, 1.0 + 0.7j, -0.6 + 1.2j):
                h = halfline_m(z, 0.0, alpha, spec)
                im = (h.M - h.M.conj().T) / 2j
                assert np.linalg.eigvalsh(im)[0] > 0

    def test_leading_asymptotics_monotone(self, rng):
        spec = random_normal_form_spec(rng, 1)
        alpha = random_boundary(rng, 1)
        devs = [matnorm(halfline_m(1j * y, 0.0, alpha, spec).M - 1j * np.eye(1))
                for y in (10.0, 100.0, 1000.0)]
        assert devs[0] > devs[1] > devs[2]

    def test_no_convergence_near_axis(self, zero1):
        with pytest.raises(NoConvergence):
            halfline_m(2.0 + 1e-9j, 0.0, alpha_dirichlet(1), zero1,
                       max_range=100.0)

    def test_real_z_rejected(self, zero1):
        with pytest.raises(DegenerateArguments):
            halfline_m(2.0, 0.0, alpha_dirichlet(1), zero1)

    def test_beta_choice_immaterial_in_the_limit(self, const_q1):
        # limit point: any admissible truncation condition gives the same M
        h_d = halfline_m(2j, 0.0, alpha_dirichlet(1), const_q1)
        h_n = halfline_m(2j, 0.0, alpha_dirichlet(1), const_q1,
                         beta=(np.zeros((1, 1)), np.eye(1)))
        assert matnorm(h_d.M - h_n.M) < 1e-9

    def test_sweep_agrees_with_direct_truncation(self, rng):
        # the Cayley-chart sweep equals -(beta Phi)^{-1}(beta Theta) at a
        # truncation radius where the direct formula is still well posed
        spec = random_normal_form_spec(rng, 2)
        alpha = alpha_dirichlet(2)
        z, c = 1.0 + 1.5j, 16.0
        direct = regular_m(z, c, 0.0, alpha,
                           (np.eye(2), np.zeros((2, 2))), spec)
        h = halfline_m(z, 0.0, alpha, spec, tol=1e-11)
        assert matnorm(direct - h.M) < 1e-6

    def test_mixed_gap_band_modes(self):
        # decoupled pair of couplings: one mode in a deep gap, one in-band
        # with small Im z; growth-rate spread is what the chart sweep is for
        b12 = np.diag([3.0, 0.3]).astype(complex)
        spec = PotentialSpec.constant(normal_form_matrix(np.zeros((2, 2)), b12))
        a2 = alpha_dirichlet(2)

        def mq(z, q):
            return -(q + np.sqrt(q * q - z * z)) / z

        for z, tol in [(0.5 + 1e-2j, 1e-8), (2.9 + 1e-3j, 1e-7)]:
            h = halfline_m(z, 0.0, a2, spec, tol=tol)
            oracle = np.diag([mq(z, 3.0), mq(z, 0.3)])
            assert matnorm(h.M - oracle) < 1e-10

    def test_riccati_fixed_point_consistency(self, const_q1):
        # d/dx M_+(z, x) vanishes for a constant potential, so M_+ solves
        # the stationary Riccati equation: z M^2 + 2 q M + z = 0
        z, q = 1.4j, 1.0
        mv = halfline_m(z, 0.0, alpha_dirichlet(1), const_q1).M[0, 0]
        assert abs(z * mv * mv + 2 * q * mv + z) < 1e-8


class TestLft:
    def test_identity_transform(self, rng, const_q1):
        alpha = random_boundary(rng, 1)
        mval = np.array([[0.3 + 0.9j]])
        assert matnorm(lft_boundary_change(mval, alpha, alpha) - mval) < 1e-12

    def test_swap_inverts(self):
        # alpha0 = (1, 0) against gamma0 = (0, 1): M -> -M^{-1}
        a0, g0 = alpha_dirichlet(1), alpha_neumann(1)
        out = lft_boundary_change(np.array([[1j]]), a0, g0)
        assert abs(out[0, 0] - 1j) < 1e-14
        out = lft_boundary_change(np.array([[2j]]), a0, g0)
        assert abs(out[0, 0] - (-1.0 / 2j)) < 1e-14

    def test_singular_denominator(self):
        a0, g0 = alpha_dirichlet(1), alpha_neumann(1)
        with pytest.raises(SingularDenominator):
            lft_boundary_change(np.zeros((1, 1)), a0, g0)
