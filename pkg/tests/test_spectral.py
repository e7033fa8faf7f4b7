import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from alphamodels.spectral import (
    LatticeMismatch,
    SpectralField,
    SpectralVelocity,
    build_lattice,
    check_cutoff,
    cutoff_from_mode_count,
    filter_factor,
    from_physical,
    galerkin_project,
    h1_norm,
    h2_norm,
    helmholtz_apply,
    helmholtz_filter,
    inner,
    is_sum_of_two_squares,
    l2_distance,
    l2_distance_sq_hat,
    l2_norm,
    lattice_for_cutoff,
    leray_project,
    linf_norm,
    next_shell,
    random_field,
    shear_field,
    shell_mode_count,
    sorted_eigenvalues,
    stokes_apply,
    stokes_eigenvalues,
    symmetrize,
    taylor_green_field,
    to_physical,
    transfer,
    weyl_constant,
)

seeds = st.integers(0, 2**31 - 1)
lengths = st.floats(0.5, 20.0)


class TestLattice:
    def test_rejects_bad_resolution(self):
        for n in (3, 7, 2, 0):
            with pytest.raises(ValueError):
                build_lattice(2 * math.pi, n)
        with pytest.raises(ValueError):
            build_lattice(-1.0, 16)

    def test_retained_modes(self, lat16):
        kv = lat16.wavevectors
        assert np.all(np.abs(kv) <= 7)
        assert lat16.mode_count == 15 * 15 - 1
        assert not lat16.mask[0, 0]

    @given(lengths)
    def test_first_eigenvalue(self, L):
        lat = build_lattice(L, 8)
        assert math.isclose(lat.lambda1, (2 * math.pi / L) ** 2)
        assert math.isclose(sorted_eigenvalues(lat)[0], lat.lambda1)

    def test_eigenvalue_multiplicities(self, lat16):
        table = dict(stokes_eigenvalues(lat16))
        lam1 = lat16.lambda1
        assert table[lam1] == 4
        assert table[2 * lam1] == 4
        assert table[5 * lam1] == 8
        assert sum(table.values()) == lat16.mode_count

    def test_padded_resolution(self):
        assert build_lattice(1.0, 16).padded_resolution == 24
        assert build_lattice(1.0, 18).padded_resolution == 28

    def test_index_out_of_range(self, lat16):
        with pytest.raises(IndexError):
            lat16.index(8, 0)


class TestShells:
    def test_sums_of_two_squares(self):
        assert [n for n in range(1, 30) if is_sum_of_two_squares(n)] == [1, 2, 4, 5, 8, 9, 10, 13, 16, 17, 18, 20, 25, 26, 29]

    def test_next_shell(self):
        assert next_shell(1) == 2
        assert next_shell(5) == 8
        assert next_shell(25) == 26

    def test_mode_counts(self):
        assert shell_mode_count(1) == 4
        assert shell_mode_count(2) == 8
        assert shell_mode_count(5) == 20
        assert cutoff_from_mode_count(20) == 5

    def test_split_shell_rejected(self):
        with pytest.raises(ValueError):
            cutoff_from_mode_count(6)

    def test_cutoff_must_be_shell_inside_disk(self, lat16):
        assert check_cutoff(lat16, 49) == 49
        with pytest.raises(ValueError):
            check_cutoff(lat16, 3)
        with pytest.raises(ValueError):
            check_cutoff(lat16, 50)

    @pytest.mark.parametrize("k2", [8, 16, 32, 64, 128])
    def test_lattice_for_cutoff_contains_shell(self, k2):
        lat = lattice_for_cutoff(2 * math.pi, k2)
        assert lat.disk_k2 >= k2


class TestWeyl:
    @pytest.mark.parametrize("n", [16, 32, 64])
    def test_two_sided_linear_growth(self, n):
        lat = build_lattice(2 * math.pi, n)
        c0 = weyl_constant(lat)
        lam = sorted_eigenvalues(lat) / lat.lambda1
        lam = lam[lam <= lat.disk_k2]
        j = np.arange(1, lam.size + 1)
        assert np.all(j / c0 <= lam * (1 + 1e-12))
        assert np.all(lam <= c0 * j * (1 + 1e-12))

    def test_independent_of_box_length(self):
        assert weyl_constant(build_lattice(1.0, 32)) == weyl_constant(build_lattice(7.0, 32))


class TestFields:
    @given(seeds)
    def test_random_field_is_valid_velocity(self, seed):
        lat = build_lattice(2 * math.pi, 16)
        u = random_field(lat, seed)
        SpectralVelocity(lat, u.hat)  # validates reality, support, divergence
        assert math.isclose(l2_norm(u), 1.0, rel_tol=1e-12)

    def test_random_field_shared_across_lattices(self):
        a = random_field(build_lattice(2 * math.pi, 16), 3, l2=None)
        b = random_field(build_lattice(2 * math.pi, 32), 3, l2=None)
        moved = transfer(b.hat, b.lattice, a.lattice)
        k2 = a.lattice.k2
        inner_disk = k2 <= a.lattice.disk_k2
        assert np.allclose(moved[:, inner_disk], a.hat[:, inner_disk], atol=0)

    def test_validation_rejects(self, lat16):
        hat = np.zeros((2, 16, 16), complex)
        hat[0, 1, 0] = 1.0  # no conjugate partner
        with pytest.raises(ValueError):
            SpectralField(lat16, hat)
        hat[0, 15, 0] = 1.0  # real but compressible: k = (1, 0), u = (1, 0)
        with pytest.raises(ValueError):
            SpectralVelocity(lat16, hat)
        SpectralField(lat16, hat)
        hat[0, 8, 0] = 1.0  # Nyquist row
        with pytest.raises(ValueError):
            SpectralField(lat16, hat)

    def test_fields_are_immutable(self, lat16):
        u = random_field(lat16, 0)
        with pytest.raises(ValueError):
            u.hat[0, 1, 1] = 0

    def test_mismatch(self, lat16, lat32):
        with pytest.raises(LatticeMismatch):
            random_field(lat16, 0) + random_field(lat32, 0)

    def test_shear_values(self, lat16):
        u = shear_field(lat16)
        vals = to_physical(u.hat, lat16, 16)
        y = np.arange(16) * 2 * math.pi / 16
        assert np.allclose(vals[0], np.sin(y)[None, :], atol=1e-14)
        assert np.allclose(vals[1], 0, atol=1e-14)

    def test_taylor_green_divergence_free(self, lat16):
        u = taylor_green_field(lat16, 2.0)
        assert u.divergence().max() < 1e-14

    @given(seeds)
    def test_physical_roundtrip(self, seed):
        lat = build_lattice(2 * math.pi, 16)
        u = random_field(lat, seed)
        back = from_physical(lat, to_physical(u.hat, lat, 24))
        assert np.abs(back.hat - u.hat).max() < 1e-14


class TestNorms:
    @given(seeds, lengths)
    def test_parseval(self, seed, L):
        lat = build_lattice(L, 16)
        u = random_field(lat, seed)
        vals = to_physical(u.hat, lat, 32)
        quad = np.sum(vals**2) * (L / 32) ** 2
        assert math.isclose(l2_norm(u) ** 2, quad, rel_tol=1e-12)

    @given(seeds, lengths)
    def test_poincare_chain(self, seed, L):
        lat = build_lattice(L, 16)
        u = random_field(lat, seed)
        lam1 = lat.lambda1
        assert lam1 * l2_norm(u) ** 2 <= h1_norm(u) ** 2 * (1 + 1e-12)
        assert lam1 * h1_norm(u) ** 2 <= h2_norm(u) ** 2 * (1 + 1e-12)
        assert h2_norm(u) ** 2 <= lat.lambda_max * h1_norm(u) ** 2 * (1 + 1e-12)

    def test_h1_equals_gradient_norm(self, lat16):
        u = random_field(lat16, 5)
        k = lat16.k * lat16.scale
        grad = 0.0
        for c in range(2):
            dx = to_physical(np.stack([1j * k[:, None] * u.hat[c], 1j * k[None, :] * u.hat[c]]), lat16, 32)
            grad += np.sum(dx**2) * (lat16.L / 32) ** 2
        assert math.isclose(h1_norm(u) ** 2, grad, rel_tol=1e-12)
        assert math.isclose(inner(u, stokes_apply(u)), grad, rel_tol=1e-12)

    def test_linf_of_shear(self, lat16):
        assert math.isclose(linf_norm(shear_field(lat16, 3.0)), 3.0, rel_tol=1e-12)

    def test_distance_across_lattices(self, lat16, lat32):
        a = random_field(lat16, 1)
        b = random_field(lat32, 1)
        moved = transfer(a.hat, lat16, lat32)
        d_same = l2_distance(SpectralVelocity(lat32, moved), b) ** 2
        assert math.isclose(l2_distance_sq_hat(a.hat, lat16, b.hat, lat32), d_same, rel_tol=1e-12)


class TestOperators:
    @given(seeds)
    def test_leray_idempotent_and_orthogonal(self, seed):
        lat = build_lattice(2 * math.pi, 16)
        rng = np.random.default_rng(seed)
        w = SpectralField(lat, symmetrize(rng.standard_normal((2, 16, 16)) + 1j * rng.standard_normal((2, 16, 16)), lat))
        p = leray_project(w)
        assert p.divergence().max() < 1e-12 * np.abs(w.hat).max() * 8
        assert np.abs(leray_project(p).hat - p.hat).max() < 1e-14
        rest = SpectralField(lat, w.hat - p.hat, validate=False)
        assert abs(inner(rest, p)) < 1e-12 * l2_norm(w) ** 2

    @given(seeds, st.floats(0.0, 2.0))
    def test_helmholtz_inverse(self, seed, alpha):
        lat = build_lattice(2 * math.pi, 16)
        u = random_field(lat, seed)
        back = helmholtz_filter(helmholtz_apply(u, alpha), alpha)
        assert np.abs(back.hat - u.hat).max() < 1e-14

    @given(st.floats(0.0, 3.0))
    def test_filter_factor_range(self, alpha):
        lat = build_lattice(2 * math.pi, 16)
        ff = filter_factor(lat, alpha)[lat.mask]
        assert np.all((ff > 0) & (ff <= 1))

    def test_galerkin_projection_splits(self, lat32):
        u = random_field(lat32, 2)
        lo = galerkin_project(u, 25)
        hi = galerkin_project(u, 25, complement=True)
        assert np.abs((lo + hi).hat - u.hat).max() == 0
        assert abs(inner(lo, hi)) == 0
        assert np.all(lo.hat[:, lat32.k2 > 25] == 0)
