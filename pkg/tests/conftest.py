import pytest

from redlat import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the numba kernels before anything measures a runtime budget
    kernels.warmup()
