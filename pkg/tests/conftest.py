import pytest

from fdsecrecy.channel import reference_instance
from fdsecrecy.perfect import GridSpec, max_sum_secrecy


@pytest.fixture(scope="session")
def inst3():
    """Bundled two-antenna instance at 3 dB, perfect CSI."""
    return reference_instance(3.0)


@pytest.fixture(scope="session")
def perfect_k40(inst3):
    """Perfect-CSI sweep on the 40 x 40 grid (about 10 s)."""
    return max_sum_secrecy(inst3, GridSpec(40, 40))
