import numpy as np
import pytest

from biased_mppi import _accel


@pytest.fixture(params=["numpy", "numba"])
def kernels(request, monkeypatch):
    """Run a test once per kernel flavour."""
    if request.param == "numba" and not _accel.HAS_NUMBA:
        pytest.skip("numba not available")
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


class ZeroCostModel:
    """Rollout model whose cost is identically zero."""

    def __init__(self, m, lo=-np.inf, hi=np.inf):
        self.u_min = np.full(m, lo)
        self.u_max = np.full(m, hi)

    def rollout(self, x0, inputs):
        K, T, _ = inputs.shape
        return np.zeros((K, T + 1, len(x0))), np.zeros(K)


class QuadraticModel:
    """Integrator x += u dt with cost sum |x - target|^2; cheap and smooth."""

    def __init__(self, m, target, dt=0.1, lo=-np.inf, hi=np.inf):
        self.u_min = np.full(m, lo)
        self.u_max = np.full(m, hi)
        self.target = np.asarray(target, dtype=float)
        self.dt = dt

    def rollout(self, x0, inputs):
        traj = np.concatenate(
            [np.broadcast_to(x0, (len(inputs), 1, len(x0))), x0 + np.cumsum(inputs, axis=1) * self.dt], axis=1
        )
        return traj, np.sum((traj[:, 1:] - self.target) ** 2, axis=(1, 2))
