import numpy as np
import pytest

from gausskey import ChannelParams, NoiseSpec
from gausskey.reconciliation import gallager_code


@pytest.fixture(scope="session")
def small_code():
    # 512-bit rate-1/4 regular code, enough for unit-level reconciliation
    return gallager_code(512, 3, 4, np.random.default_rng(1234))


@pytest.fixture(scope="session")
def small_code_path(small_code, tmp_path_factory):
    path = tmp_path_factory.mktemp("codes") / "gallager_512.alist"
    path.write_text(small_code.to_alist())
    return str(path)


@pytest.fixture(scope="session")
def big_code():
    return gallager_code(4096, 3, 4, np.random.default_rng(20240501))


@pytest.fixture(scope="session")
def big_code_path(big_code, tmp_path_factory):
    path = tmp_path_factory.mktemp("codes") / "gallager_4096.alist"
    path.write_text(big_code.to_alist())
    return str(path)


@pytest.fixture(scope="session")
def weak_eve_params():
    # strong legitimate channel, badly attenuated eavesdropper: the regime
    # where the full pipeline produces keys at practical block lengths
    return ChannelParams(
        bob_gain=2.0, bob_noise=0.5, bob_offset=0.0, eve_gain=0.3, eve_noise=2.0
    )


@pytest.fixture(scope="session")
def weak_eve_noise():
    return NoiseSpec.gaussian(0.1)


@pytest.fixture(scope="session")
def reference_params():
    # the reference operating point: Bob and Eve both at gain sqrt(2)
    # detector units with unit detector noise, injected variance 0.2
    return ChannelParams(
        bob_gain=np.sqrt(2.0),
        bob_noise=1.0,
        bob_offset=0.0,
        eve_gain=np.sqrt(2.0),
        eve_noise=1.0,
    )
