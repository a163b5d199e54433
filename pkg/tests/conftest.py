import numpy as np
import pytest


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every hot kernel once so numba compilation does not land inside
    a timed test."""
    from corticospike import adm, neuralcore as nc, snn

    rng = np.random.default_rng(0)
    conv = nc.init_conv(2, 2, 3, 2, rng)
    x = rng.standard_normal((1, 2, 8)).astype(np.float32)
    out = nc.conv1d_forward(conv, x)
    nc.conv1d_backward(conv, x, np.ones_like(out))
    conv64 = nc.init_conv(2, 2, 3, 2, rng, dtype=np.float64)
    x64 = x.astype(np.float64)
    nc.conv1d_backward(conv64, x64, np.ones((1, 2, 3)))
    adm.adm_encode_arrays(rng.standard_normal((2, 6)), 0.5)
    lif = snn.LifParams(dt_s=0.25)
    l1 = snn.init_spiking_dense(4, 4, lif, rng)
    l2 = snn.init_spiking_dense(4, 2, lif, rng)
    frames = adm.adm_encode(rng.standard_normal((2, 3)), 0.5)
    snn.snn_forward_sequence(l1, l2, frames)
    snn.spiking_dense_forward(l1, np.zeros(4, dtype=np.uint8))
    snn.simulate_constant_current(2.0, snn.LifParams(dt_s=1e-4), 10)
    l1_64 = snn.SpikingDense(
        weights=rng.standard_normal((4, 4)), bias=np.zeros(4), lif=lif
    )
    snn.spiking_dense_forward(l1_64, np.zeros(4, dtype=np.uint8))
