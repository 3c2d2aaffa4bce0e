"""Built-in case-study models.

Rates, ranges and grids follow the published case studies. The MAPK cascade
rate constants are not listed there; the values below are Kholodenko's
(2000) negative-feedback cascade, whose layer totals (100/300/300) match the
published initial-state constraints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .network import ModelError, ReactionNetwork, SimGrid
from .parse import parse_network

__all__ = ["ModelLibraryEntry", "builtin_model", "BUILTIN_NAMES", "BUILTIN_SOURCES"]


SIR = """\
model sir
species S I R
param theta1 = 3
param theta2 = 1
init S in [30, 200]
init I in [30, 200]
init R in [30, 200]
grid t0=0 dt=0.5 H=16
reaction infection: S + I -> 2 I @ theta1*I*S/(S + I + R)
reaction recovery: I -> R @ theta2*I
"""

_ESIRS_BODY = """\
species S I R
{params}
init S in [0, 100]
init I in [0, 100]
init R in [0, 100]
constraint S + I + R = 100
observe S I
grid t0=0 dt=0.1 H=32
reaction infection: S + I -> 2 I @ theta1*I*S/(S + I + R) + theta2*S
reaction recovery: I -> R @ theta3*I
reaction immunity_loss: R -> S @ theta4*R
"""

ESIRS = "model esirs\n" + _ESIRS_BODY.format(
    params="param theta1 = 2.36\nparam theta2 = 1.67\nparam theta3 = 0.9\nparam theta4 = 0.64"
)

ESIRS_1P = "model esirs_1p\n" + _ESIRS_BODY.format(
    params="param theta1 in [0.5, 5]\nparam theta2 = 1.67\nparam theta3 = 0.9\nparam theta4 = 0.64"
)

TOGGLE_SWITCH = """\
model toggle_switch
species G1on G1off G2on G2off P1 P2
param kp1 = 1
param kp2 = 1
param kb1 = 1
param kb2 = 1
param ku1 = 1
param ku2 = 1
param kd1 = 0.01
param kd2 = 0.01
init G1on in [0, 1]
init G1off in [0, 1]
init G2on in [0, 1]
init G2off in [0, 1]
init P1 in [5, 20]
init P2 in [5, 20]
constraint G1on + G1off = 1
constraint G2on + G2off = 1
observe P1 P2
grid t0=0 dt=0.1 H=32
reaction prod1: G1on -> G1on + P1 @ kp1*G1on
reaction prod2: G2on -> G2on + P2 @ kp2*G2on
reaction bind1: 2 P2 + G1on -> G1off @ kb1*G1on*P2*(P2 - 1)
reaction bind2: 2 P1 + G2on -> G2off @ kb2*G2on*P1*(P1 - 1)
reaction unbind1: G1off -> G1on + 2 P2 @ ku1*G1off
reaction unbind2: G2off -> G2on + 2 P1 @ ku2*G2off
reaction deg1: P1 -> 0 @ kd1*P1
reaction deg2: P2 -> 0 @ kd2*P2
"""

OSCILLATOR = """\
model oscillator
species A B C
param theta = 1
init A in [20, 100]
init B in [20, 100]
init C in [20, 100]
grid t0=0 dt=1 H=32
reaction b_transformation: A + B -> 2 A @ theta*A*B/(A + B + C)
reaction c_transformation: B + C -> 2 B @ theta*B*C/(A + B + C)
reaction a_transformation: C + A -> 2 C @ theta*C*A/(A + B + C)
"""

MAPK = """\
model mapk
species MKKK MKKK_P MKK MKK_P MKK_PP MAPK MAPK_P MAPK_PP
param V1 in [0.1, 2.5]
param Kl = 9
param n = 1
param K1 = 10
param V2 = 0.25
param K2 = 8
param k3 = 0.025
param K3 = 15
param k4 = 0.025
param K4 = 15
param V5 = 0.75
param K5 = 15
param V6 = 0.75
param K6 = 15
param k7 = 0.025
param K7 = 15
param k8 = 0.025
param K8 = 15
param V9 = 0.5
param K9 = 15
param V10 = 0.5
param K10 = 15
init MKKK in [0, 100]
init MKKK_P in [0, 100]
init MKK in [0, 300]
init MKK_P in [0, 300]
init MKK_PP in [0, 300]
init MAPK in [0, 300]
init MAPK_P in [0, 300]
init MAPK_PP in [0, 300]
constraint MKKK + MKKK_P = 100
constraint MKK + MKK_P + MKK_PP = 300
constraint MAPK + MAPK_P + MAPK_PP = 300
observe MAPK_PP
grid t0=0 dt=60 H=32
reaction R1: MKKK -> MKKK_P @ V1*MKKK/((1 + (MAPK_PP/Kl)^n)*(K1 + MKKK))
reaction R2: MKKK_P -> MKKK @ V2*MKKK_P/(K2 + MKKK_P)
reaction R3: MKK -> MKK_P @ k3*MKKK_P*MKK/(K3 + MKK)
reaction R4: MKK_P -> MKK_PP @ k4*MKKK_P*MKK_P/(K4 + MKK_P)
reaction R5: MKK_PP -> MKK_P @ V5*MKK_PP/(K5 + MKK_PP)
reaction R6: MKK_P -> MKK @ V6*MKK_P/(K6 + MKK_P)
reaction R7: MAPK -> MAPK_P @ k7*MKK_PP*MAPK/(K7 + MAPK)
reaction R8: MAPK_P -> MAPK_PP @ k8*MKK_PP*MAPK_P/(K8 + MAPK_P)
reaction R9: MAPK_PP -> MAPK_P @ V9*MAPK_PP/(K9 + MAPK_PP)
reaction R10: MAPK_P -> MAPK @ V10*MAPK_P/(K10 + MAPK_P)
"""

BUILTIN_SOURCES = {
    "sir": SIR,
    "esirs": ESIRS,
    "esirs-1p": ESIRS_1P,
    "toggle-switch": TOGGLE_SWITCH,
    "oscillator": OSCILLATOR,
    "mapk": MAPK,
}
BUILTIN_NAMES = tuple(BUILTIN_SOURCES)

# Generator deconvolution / critic convolution stacks for the deeper MAPK variant.
MAPK_GENERATOR_FILTERS = (128, 256, 512, 256, 128)
MAPK_CRITIC_FILTERS = (256, 256, 256, 256, 256)


@dataclass(frozen=True)
class ModelLibraryEntry:
    name: str
    network: ReactionNetwork
    grid: SimGrid
    train_size: tuple[int, int]
    test_size: tuple[int, int] = (25, 2000)
    generator_filters: tuple[int, ...] = (128, 256, 256, 128)
    critic_filters: tuple[int, ...] = (64, 64)

    @property
    def fixed_params(self) -> dict[str, float]:
        return {p.name: p.value for p in self.network.parameters if not p.varying}


@lru_cache(maxsize=None)
def builtin_model(name: str) -> ModelLibraryEntry:
    """Return the library entry for one of :data:`BUILTIN_NAMES`."""
    key = name.lower().replace("_", "-")
    if key not in BUILTIN_SOURCES:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    net = parse_network(BUILTIN_SOURCES[key])
    # fixed-parameter models: 2K settings x 10; one varying parameter: 1K x 50
    train = (1000, 50) if net.m_cond else (2000, 10)
    extra = {}
    if key == "mapk":
        extra = dict(generator_filters=MAPK_GENERATOR_FILTERS, critic_filters=MAPK_CRITIC_FILTERS)
    return ModelLibraryEntry(key, net, net.grid, train, **extra)
