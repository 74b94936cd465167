import numpy as np
import pytest

from ksplit.torus import Grid1D, TorusFn1D, TorusFn2D


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def refine1d(f: TorusFn1D, factor: int = 2) -> TorusFn1D:
    """Same trigonometric polynomial sampled on a grid `factor` times finer."""
    n = f.grid.n
    N = n * factor
    c = np.zeros(N, dtype=np.complex128)
    c[N // 2 - n // 2: N // 2 + n // 2] = f.spectrum
    return TorusFn1D.from_spectrum(Grid1D(N), c)


def refine2d(f: TorusFn2D, factor: int = 2) -> TorusFn2D:
    n1, n2 = f.values.shape
    N1, N2 = n1 * factor, n2 * factor
    c = np.zeros((N1, N2), dtype=np.complex128)
    c[N1 // 2 - n1 // 2: N1 // 2 + n1 // 2,
      N2 // 2 - n2 // 2: N2 // 2 + n2 // 2] = f.spectrum
    return TorusFn2D.from_spectrum((Grid1D(N1), Grid1D(N2)), c)
