import numpy as np
import pytest

from dfrt.basis import build_basis, build_mode_set
from dfrt.dynamics import compute_coupling_tensor, coupling_grid
from dfrt.transform import reference_grid


@pytest.fixture(scope="session")
def basis32():
    return build_basis(build_mode_set(3, 2))


@pytest.fixture(scope="session")
def grid32():
    return reference_grid(3, 2)


@pytest.fixture(scope="session")
def basis21():
    return build_basis(build_mode_set(2, 1))


@pytest.fixture(scope="session")
def gamma32(basis32):
    """Coupling tensor for the (3, 2) truncation; about ten seconds to build."""
    return compute_coupling_tensor(basis32, coupling_grid(basis32.mode_set))


@pytest.fixture(scope="session")
def gamma21(basis21):
    return compute_coupling_tensor(basis21)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("DFRT_CACHE_DIR", str(tmp_path / "cache"))
