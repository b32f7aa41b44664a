"""Integration with the trainable denoiser service (secondary component).

These tests drive the service purely through its external surfaces: the DNZ1
protocol and the committed checkpoint.  They are skipped when the service has
not been built (dist/serve.js + checkpoint.json missing) so the primary suite
stands alone.
"""

import pathlib
import shutil

import numpy as np
import pytest

from wavegec import denoisers as dn
from wavegec import forward_model as fwd
from wavegec import gec
from wavegec import protocol as proto
from wavegec import transforms as tr
from wavegec.diagnostics import psnr

SERVICE = pathlib.Path(__file__).parent.parent / "denoiser-service"
SERVE_JS = SERVICE / "dist" / "serve.js"
CHECKPOINT = SERVICE / "checkpoint.json"
FIXTURES = pathlib.Path(__file__).parent / "fixtures"

pytestmark = pytest.mark.skipif(
    not (SERVE_JS.exists() and CHECKPOINT.exists() and shutil.which("node")),
    reason="denoiser service not built")


def service_spec():
    return f"stdio:node {SERVE_JS} --stdio --checkpoint {CHECKPOINT}"


class TestProtocolConformance:
    def test_golden_frame_and_malformed_recovery(self):
        golden = (FIXTURES / "golden_request.bin").read_bytes()
        with proto.DenoiserEndpoint(service_spec(), timeout=120) as ep:
            resp = ep.roundtrip(golden)
            # header is byte-exact: magic + ok status
            assert resp[:4] == proto.MAGIC
            assert resp[4] == proto.STATUS_OK
            out = proto.decode_response(resp, 2, 2)
            assert out.shape == (2, 2)
            assert np.all(np.isfinite(out))

            # malformed frame: status 1, connection stays usable
            bad = ep.roundtrip(b"DEADBEEF")
            with pytest.raises(proto.ServerReportedError) as exc:
                proto.decode_response(bad, 2, 2)
            assert exc.value.status == proto.STATUS_SHAPE

            resp2 = ep.roundtrip(golden)
            assert resp2[:5] == resp[:5]

    def test_shape_guard(self):
        # L = 13 precisions imply depth 4; a 2x2 image is indivisible
        req = proto.encode_request(np.zeros((2, 2)), [np.zeros((2, 2))], np.ones(13))
        with proto.DenoiserEndpoint(service_spec(), timeout=120) as ep:
            resp = ep.roundtrip(req)
            with pytest.raises(proto.ServerReportedError) as exc:
                proto.decode_response(resp, 2, 2)
            assert exc.value.status == proto.STATUS_SHAPE


class TestEndToEndRecovery:
    def test_dgec_with_external_denoiser(self):
        shape = (64, 64)
        depth = 3
        layout = tr.make_layout(shape, depth)
        mask = fwd.make_point_mask(shape, 4, density_exponent=2.0, calib_size=6, seed=5)
        fm = fwd.ForwardModel(mask=mask, coils=fwd.generate_coil_maps(shape, 1),
                              layout=layout)
        x0 = fwd.generate_phantom(shape, "random_wavelet_sparse", seed=200, sparsity=0.1)
        ms = fwd.simulate_measurements(x0, fm, 40.0, seed=5)
        problem = gec.DgecProblem(y=ms.y, fm=fm, gamma_w=ms.gamma_w, x0=x0)
        calib = [fwd.generate_phantom(shape, "random_wavelet_sparse",
                                      seed=300 + s, sparsity=0.1) for s in range(4)]
        config = gec.SolverConfig(depth=depth, max_iters=10, cg_iters=50,
                                  damping_rho=0.5, gamma_clip_lo=0.01,
                                  conv_tol=0.0, master_seed=5)

        x_soft, _ = gec.run_dgec(problem, config, dn.SoftThresholdDenoiser(),
                                 calib_images=calib)
        psnr_soft = psnr(x_soft, x0)

        with proto.DenoiserEndpoint(service_spec(), timeout=300) as ep:
            ext = dn.ExternalDenoiser(ep, k_channels=1)
            x_ext, diag = gec.run_dgec(problem, config, ext, calib_images=calib)
        psnr_ext = psnr(x_ext, x0)

        assert diag.n_rows() == 10, "external run did not complete 10 iterations"
        assert np.all(np.isfinite(x_ext))
        assert psnr_ext >= psnr_soft - 3.0, \
            f"external {psnr_ext:.2f} dB vs soft-threshold {psnr_soft:.2f} dB"
