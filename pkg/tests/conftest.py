import os

# one BLAS thread per process: keeps grid workers from oversubscribing the
# cores and makes suite arithmetic independent of the host's thread count
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from lassossc.core import orthonormal_basis
from lassossc.rng import RngSpec, Stream


@pytest.fixture
def stream():
    return Stream(RngSpec(20240811))


def random_basis(stream: Stream, n: int, d: int) -> np.ndarray:
    return orthonormal_basis(stream.normal_matrix(n, d))


def coordinate_basis(n: int, cols) -> np.ndarray:
    u = np.zeros((n, len(cols)))
    for j, c in enumerate(cols):
        u[c, j] = 1.0
    return u


def block_affinity(sizes, off_block=0.0, stream: Stream | None = None) -> np.ndarray:
    """Symmetric block-diagonal affinity with optional uniform off-block mass."""
    total = sum(sizes)
    w = np.zeros((total, total))
    start = 0
    for size in sizes:
        w[start : start + size, start : start + size] = 1.0
        start += size
    if off_block > 0.0:
        if stream is None:
            stream = Stream(RngSpec(0, ("affinity",)))
        noise = off_block * stream.uniforms(total * total).reshape(total, total)
        noise = 0.5 * (noise + noise.T)
        labels = np.concatenate([[i] * s for i, s in enumerate(sizes)])
        same = labels[:, None] == labels[None, :]
        w = w + np.where(same, 0.0, noise)
    np.fill_diagonal(w, 0.0)
    return w


def block_labels(sizes) -> list[int]:
    out = []
    for i, s in enumerate(sizes):
        out.extend([i] * s)
    return out
