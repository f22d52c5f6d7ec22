import numpy as np
import pytest

from quatkmp import kmp
from quatkmp.highdim import gen_handover_demos, learn_pose
from quatkmp.orient import learn
from quatkmp.quat import IDENTITY, gen_minjerk_demos, gen_rhythmic_demos, normalize

END_KEY = normalize([0.7, 0.4, 0.5, 0.3])


@pytest.fixture(scope="session")
def minjerk_demos():
    return gen_minjerk_demos([IDENTITY, END_KEY], duration=10.0, N=500, M=5, seed=0)


@pytest.fixture(scope="session")
def time_model(minjerk_demos):
    return learn(minjerk_demos, C=5, spec=kmp.KernelSpec.gaussian(0.01), lam=1.0, grid_N=100)


@pytest.fixture(scope="session")
def rhythmic_demos():
    return gen_rhythmic_demos(N=500, M=5, seed=0)


@pytest.fixture(scope="session")
def rhythmic_model(rhythmic_demos):
    return learn(
        rhythmic_demos, C=8, spec=kmp.KernelSpec.periodic(0.4, 10.0), lam=10.0, grid_N=100
    )


@pytest.fixture(scope="session")
def handover_demos():
    return gen_handover_demos(N=200, M=5, seed=0)


@pytest.fixture(scope="session")
def pose_model(handover_demos):
    return learn_pose(handover_demos, C=5, spec=kmp.KernelSpec.gaussian(1.0), lam=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
