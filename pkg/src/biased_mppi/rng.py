"""Counter-based Gaussian streams.

Every noise value is a pure function of ``(seed, iteration, sample, step,
channel)``: a splitmix64-style finaliser hashes the key tuple (channels go in
pairs), and the 64-bit output feeds Box-Muller, whose cosine and sine halves
fill the two channels of the pair. No generator state is carried between
draws, so a batch can be produced in any order, by any number of workers, and
comes out identical.
"""

import numpy as np

from . import _accel

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_SAMPLE = np.uint64(0xD1B54A32D192ED03)
_K_STEP = np.uint64(0xABC98388FB8FAC03)
_K_CHAN = np.uint64(0x8CB92BA72F3D8DD7)
_K_SECOND = np.uint64(0x632BE59BD9B4E019)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * np.pi


def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_key(seed: int, iteration: int) -> np.uint64:
    """Fold the experiment seed and planner iteration into one 64-bit key."""
    s = (int(seed) & _MASK) ^ 0x5851F42D4C957F2D
    s = _py_mix(s + 0x9E3779B97F4A7C15)
    s = _py_mix(s ^ ((int(iteration) * 0xC2B2AE3D27D4EB4F) & _MASK))
    return np.uint64(s)


def _py_mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _normal_block_np(key, k0, n_samples, horizon, n_channels):
    n_pairs = (n_channels + 1) // 2
    k = (np.arange(n_samples, dtype=np.uint64) + np.uint64(k0))[:, None, None]
    t = np.arange(horizon, dtype=np.uint64)[None, :, None]
    c = np.arange(n_pairs, dtype=np.uint64)[None, None, :]
    h = _mix64(np.uint64(key) ^ ((k + np.uint64(1)) * _K_SAMPLE))
    h = _mix64(h ^ ((t + np.uint64(1)) * _K_STEP))
    h = _mix64(h ^ ((c + np.uint64(1)) * _K_CHAN))
    h2 = _mix64(h ^ _K_SECOND)
    u1 = ((h >> _S11).astype(np.float64) + 0.5) * _INV53
    u2 = ((h2 >> _S11).astype(np.float64) + 0.5) * _INV53
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty((n_samples, horizon, 2 * n_pairs))
    out[:, :, 0::2] = r * np.cos(_TWO_PI * u2)
    out[:, :, 1::2] = r * np.sin(_TWO_PI * u2)
    return out[:, :, :n_channels]


_mix64_jit = _accel.njit(_mix64)


@_accel.njit
def _normal_block_nb(key, k0, n_samples, horizon, n_channels):
    out = np.empty((n_samples, horizon, n_channels))
    one = np.uint64(1)
    for i in range(n_samples):
        hk = _mix64_jit(key ^ ((np.uint64(k0 + i) + one) * _K_SAMPLE))
        for t in range(horizon):
            ht = _mix64_jit(hk ^ ((np.uint64(t) + one) * _K_STEP))
            for p in range((n_channels + 1) // 2):
                h = _mix64_jit(ht ^ ((np.uint64(p) + one) * _K_CHAN))
                h2 = _mix64_jit(h ^ _K_SECOND)
                u1 = (np.float64(h >> _S11) + 0.5) * _INV53
                u2 = (np.float64(h2 >> _S11) + 0.5) * _INV53
                r = np.sqrt(-2.0 * np.log(u1))
                out[i, t, 2 * p] = r * np.cos(_TWO_PI * u2)
                if 2 * p + 1 < n_channels:
                    out[i, t, 2 * p + 1] = r * np.sin(_TWO_PI * u2)
    return out


def standard_normal(seed: int, iteration: int, k0: int, n_samples: int, horizon: int, n_channels: int) -> np.ndarray:
    """Standard normal draws of shape ``(n_samples, horizon, n_channels)``.

    Row ``i`` belongs to sample index ``k0 + i``; any sub-range requested on
    its own reproduces the matching rows of a larger request.
    """
    key = stream_key(seed, iteration)
    if n_samples <= 0:
        return np.zeros((0, horizon, n_channels))
    if _accel.USE_NUMBA:
        return _normal_block_nb(key, np.int64(k0), n_samples, horizon, n_channels)
    return _normal_block_np(key, k0, n_samples, horizon, n_channels)


def substream(seed: int, *labels: int) -> np.random.Generator:
    """A numpy Generator keyed by ``seed`` and integer labels (run index, purpose tag...)."""
    return np.random.default_rng([int(seed) & _MASK, *[int(x) & _MASK for x in labels]])


def derive_seed(seed: int, *labels: int) -> int:
    """A 63-bit integer seed keyed by ``seed`` and labels, e.g. for one agent's planner."""
    state = np.random.SeedSequence([int(seed) & _MASK, *[int(x) & _MASK for x in labels]]).generate_state(2, np.uint64)
    return int(state[0] >> np.uint64(1))
