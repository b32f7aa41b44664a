import numpy as np
import pytest

from wavegec import forward_model as fwd
from wavegec import transforms as tr
from oracles import cplx_inner, dense_dft_matrix


def small_model(seed=0, shape=(16, 16), n_coils=2, depth=2, r=2, calib=4):
    mask = fwd.make_point_mask(shape, r, calib_size=calib, seed=seed)
    coils = fwd.generate_coil_maps(shape, n_coils, seed=seed)
    return fwd.ForwardModel(mask=mask, coils=coils, layout=tr.make_layout(shape, depth))


def dense_A(fm):
    """Materialize A column by column through the operator itself."""
    h, w = fm.shape
    n = h * w
    cols = []
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        cols.append(fwd.apply_A(e.reshape(h, w), fm))
    return np.stack(cols, axis=1)


class TestMasks:
    def test_r1_all_ones(self):
        m = fwd.make_point_mask((8, 8), 1, seed=0)
        assert m.sampled.all()
        m = fwd.make_line_mask((8, 8), 1, seed=0)
        assert m.sampled.all()

    def test_point_counts_and_calib(self):
        m = fwd.make_point_mask((64, 64), 4, calib_size=8, seed=3)
        assert m.n_sampled == 64 * 64 // 4
        ys, xs = fwd._center_slices((64, 64), 8)
        assert m.sampled[ys, xs].all()

    def test_line_counts_and_structure(self):
        m = fwd.make_line_mask((64, 64), 4, calib_width=8, seed=3)
        cols = m.sampled[0]
        assert np.count_nonzero(cols) == 16
        assert np.array_equal(m.sampled, np.broadcast_to(cols, (64, 64)))
        lo = 32 - 4
        assert cols[lo:lo + 8].all()

    def test_determinism(self):
        a = fwd.make_point_mask((32, 32), 4, seed=9)
        b = fwd.make_point_mask((32, 32), 4, seed=9)
        c = fwd.make_point_mask((32, 32), 4, seed=10)
        assert np.array_equal(a.sampled, b.sampled)
        assert not np.array_equal(a.sampled, c.sampled)

    def test_infeasible_calib(self):
        with pytest.raises(fwd.ForwardModelError, match="calib"):
            fwd.make_point_mask((16, 16), 16, calib_size=8, seed=0)

    def test_idempotent_projector(self):
        m = fwd.make_point_mask((16, 16), 2, seed=1)
        g = np.random.default_rng(0).standard_normal((16, 16))
        assert np.array_equal((g * m.sampled) * m.sampled, g * m.sampled)


class TestCoils:
    def test_single_coil_is_indicator(self):
        cm = fwd.generate_coil_maps((8, 8), 1, support="full")
        assert np.array_equal(cm.maps[0], np.ones((8, 8)))
        cm = fwd.generate_coil_maps((8, 8), 1, support="ellipse")
        assert np.array_equal(cm.maps[0] != 0, cm.support)

    def test_normalization(self):
        cm = fwd.generate_coil_maps((16, 16), 4, seed=2, support="ellipse")
        ss = np.sum(np.abs(cm.maps) ** 2, axis=0)
        assert np.max(np.abs(ss[cm.support] - 1.0)) <= 1e-12
        assert np.all(cm.maps[:, ~cm.support] == 0)


class TestOperators:
    def test_single_coil_full_mask_is_dft(self):
        shape = (8, 8)
        fm = fwd.ForwardModel(mask=fwd.full_mask(shape),
                              coils=fwd.generate_coil_maps(shape, 1),
                              layout=tr.make_layout(shape, 2))
        rng = np.random.default_rng(0)
        x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        y = fwd.apply_A(x, fm)
        assert np.allclose(y, tr.kspace_center(tr.dft2(x)).ravel(), atol=1e-13)

    def test_adjoint(self):
        fm = small_model(seed=4)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        y = rng.standard_normal(fm.n_measurements) + 1j * rng.standard_normal(fm.n_measurements)
        assert abs(cplx_inner(fwd.apply_A(x, fm), y) - cplx_inner(x, fwd.apply_AH(y, fm))) <= 1e-10

    def test_aha_identity_on_support(self):
        shape = (8, 8)
        fm = fwd.ForwardModel(mask=fwd.full_mask(shape),
                              coils=fwd.generate_coil_maps(shape, 3, seed=1, support="ellipse"),
                              layout=tr.make_layout(shape, 1))
        rng = np.random.default_rng(1)
        x = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * fm.coils.support
        back = fwd.apply_AH(fwd.apply_A(x, fm), fm)
        assert np.max(np.abs(back - x)) <= 1e-10

    def test_dense_matrix_composition(self):
        shape = (8, 8)
        fm = fwd.ForwardModel(mask=fwd.full_mask(shape),
                              coils=fwd.generate_coil_maps(shape, 1),
                              layout=tr.make_layout(shape, 1))
        a = dense_A(fm)
        # row-permuted unitary DFT: the gather reorders rows of F
        f = dense_dft_matrix(8, 8)
        assert np.max(np.abs(a.conj().T @ a - np.eye(64))) <= 1e-10
        assert np.max(np.abs(np.sort(np.abs(a), axis=0) - np.sort(np.abs(f), axis=0))) <= 1e-10

    def test_b_composition_and_adjoint(self):
        fm = small_model(seed=5)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        pyr = tr.dwt2_haar(x, 2, fm.layout)
        assert np.max(np.abs(fwd.apply_B(pyr, fm) - fwd.apply_A(x, fm))) <= 1e-12
        y = rng.standard_normal(fm.n_measurements) + 1j * rng.standard_normal(fm.n_measurements)
        lhs = cplx_inner(fwd.apply_B(pyr, fm), y)
        rhs = cplx_inner(pyr.coeffs, fwd.apply_BH(y, fm).coeffs)
        assert abs(lhs - rhs) <= 1e-10

    def test_dense_B_single_coil(self):
        shape = (8, 8)
        fm = fwd.ForwardModel(mask=fwd.make_point_mask(shape, 2, seed=6),
                              coils=fwd.generate_coil_maps(shape, 1),
                              layout=tr.make_layout(shape, 1))
        n = 64
        cols = []
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = 1.0
            cols.append(fwd.apply_B(tr.WaveletPyramid(fm.layout, e), fm))
        b = np.stack(cols, axis=1)
        rng = np.random.default_rng(6)
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        assert np.max(np.abs(b @ c - fwd.apply_B(tr.WaveletPyramid(fm.layout, c), fm))) <= 1e-10


class TestSimulation:
    def test_infinite_snr(self):
        fm = small_model(seed=7)
        x = fwd.generate_phantom((16, 16), "shepp_logan")
        ms = fwd.simulate_measurements(x, fm, np.inf, seed=7)
        assert np.array_equal(ms.y, fwd.apply_A(x, fm))
        assert ms.gamma_w == fwd.GAMMA_W_NOISELESS

    def test_snr_calibration(self):
        fm = small_model(seed=8, shape=(32, 32), depth=2)
        x = fwd.generate_phantom((32, 32), "piecewise_smooth", seed=8)
        clean = fwd.apply_A(x, fm)
        snrs = []
        for s in range(100):
            ms = fwd.simulate_measurements(x, fm, 40.0, seed=s)
            w = ms.y - clean
            snrs.append(10 * np.log10(np.sum(np.abs(clean) ** 2) / np.sum(np.abs(w) ** 2)))
        assert abs(np.mean(snrs) - 40.0) <= 0.2

    def test_determinism_and_zero_energy(self):
        fm = small_model(seed=9)
        x = fwd.generate_phantom((16, 16), "shepp_logan")
        a = fwd.simulate_measurements(x, fm, 30.0, seed=1)
        b = fwd.simulate_measurements(x, fm, 30.0, seed=1)
        assert np.array_equal(a.y, b.y)
        with pytest.raises(fwd.ForwardModelError, match="zero-energy"):
            fwd.simulate_measurements(np.zeros((16, 16)), fm, 30.0)


class TestGroundTruth:
    def test_projector_identity(self):
        coils = fwd.generate_coil_maps((8, 8), 2, seed=3, support="ellipse")
        fm = fwd.ForwardModel(mask=fwd.full_mask((8, 8)), coils=coils,
                              layout=tr.make_layout((8, 8), 1))
        rng = np.random.default_rng(3)
        x = (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))) * coils.support
        y_full = fwd.apply_A(x, fm)
        out = fwd.ground_truth_from_full(y_full, coils)
        assert np.max(np.abs(out - x)) <= 1e-10
        assert np.all(out[~coils.support] == 0)

    def test_matches_dense_pinv(self):
        coils = fwd.generate_coil_maps((8, 8), 2, seed=4, support="ellipse")
        fm = fwd.ForwardModel(mask=fwd.full_mask((8, 8)), coils=coils,
                              layout=tr.make_layout((8, 8), 1))
        a = dense_A(fm)
        rng = np.random.default_rng(4)
        y_full = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        ref = (np.linalg.pinv(a) @ y_full).reshape(8, 8)
        out = fwd.ground_truth_from_full(y_full, coils)
        assert np.max(np.abs(out - ref)) <= 1e-8


class TestPhantoms:
    def test_shepp_logan(self):
        img = fwd.generate_phantom((64, 64), "shepp_logan")
        assert np.all(img.imag == 0)
        assert np.all(img.real >= 0)
        assert 0.9 <= np.max(np.abs(img)) <= 1.6
        assert abs(np.quantile(np.abs(img), 0.98) - 1.0) <= 1e-6

    def test_sparse_zero(self):
        img = fwd.generate_phantom((32, 32), "random_wavelet_sparse", seed=0, sparsity=0.0)
        assert np.all(img == 0)

    def test_q98_scaling(self):
        for kind in ("piecewise_smooth", "random_wavelet_sparse"):
            img = fwd.generate_phantom((64, 64), kind, seed=5)
            assert abs(np.quantile(np.abs(img), 0.98) - 1.0) <= 1e-6

    def test_determinism_and_unknown_kind(self):
        a = fwd.generate_phantom((32, 32), "piecewise_smooth", seed=1)
        b = fwd.generate_phantom((32, 32), "piecewise_smooth", seed=1)
        assert np.array_equal(a, b)
        with pytest.raises(fwd.ForwardModelError, match="unknown"):
            fwd.generate_phantom((32, 32), "nope")
