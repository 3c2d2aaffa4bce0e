import os

import pytest
import torch
from hypothesis import settings

from popdyn.crn import parse_network

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

torch.set_num_threads(int(os.environ.get("POPDYN_THREADS", "1")))

PURE_DEATH = """\
model death
species X
param k = 1
init X in [100, 100]
grid t0=0 dt=0.0625 H=16
reaction decay: X -> 0 @ k*X
"""

BIRTH_DEATH = """\
model birthdeath
species X
param kb = 10
param kd = 1
init X in [0, 0]
grid t0=0 dt=0.25 H=8
reaction birth: 0 -> X @ kb
reaction death: X -> 0 @ kd*X
"""


@pytest.fixture(scope="session")
def pure_death():
    return parse_network(PURE_DEATH)


@pytest.fixture(scope="session")
def birth_death():
    return parse_network(BIRTH_DEATH)
