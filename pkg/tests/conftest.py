import pytest

from polyseg import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile the jitted kernels once so timed tests measure steady state.
    _kernels.warmup()
