"""Canonical example diagrams, one per identification strategy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

from .criteria import DoubleRoleAssignment, RoleAssignment
from .dsl import GraphDocument, parse_graph

FIXTURE_A = """\
# latent response Y with a back-door set {Z}; U, W, T measure Y
observed Z X U W T
latent Y
Z -> X : 0.5
Z -> Y : 0.4
X -> Y : 0.7
Y -> U : 0.8
Y -> W : 0.6
Y -> T : 0.5
"""

FIXTURE_B = """\
# latent treatment Y acting on the observed response X
observed Z X U W T
latent Y
Z -> Y : 0.6
Z -> X : 0.3
Y -> X : 0.7
Y -> U : 0.8
Y -> W : 0.6
Y -> T : 0.5
"""

FIXTURE_C = """\
# latent response Y confounded with X; Z instruments X given T
observed T Z X U W
latent Y
T -> Z : 0.5
T -> Y : 0.4
Z -> X : 0.6
X -> Y : 0.7
X <-> Y : 0.1
Y -> U : 0.8
Y -> W : 0.5
"""

FIXTURE_D = """\
# latent treatment X1 and latent response X2, two surrogates each
observed Z U1 W1 U2 W2
latent X1 X2
Z -> X1 : 0.5
Z -> X2 : 0.3
X1 -> X2 : 0.6
X1 -> U1 : 0.8
X1 -> W1 : 0.7
X2 -> U2 : 0.8
X2 -> W2 : 0.6
"""


@dataclass(frozen=True)
class Fixture:
    name: str
    source: str
    strategy: str
    roles: object
    treatment: str
    response: str
    truth: float

    @property
    def document(self) -> GraphDocument:
        return parse_graph(self.source)


FIXTURES: Dict[str, Fixture] = {
    "A": Fixture(
        "A", FIXTURE_A, "backdoor-latent-response",
        RoleAssignment("X", "Y", "U", "W", ("Z",), ("T",), "response"), "X", "Y", 0.49,
    ),
    "B": Fixture(
        "B", FIXTURE_B, "backdoor-latent-treatment",
        RoleAssignment("X", "Y", "U", "W", ("Z",), ("T",), "treatment"), "Y", "X", 0.49,
    ),
    "C": Fixture(
        "C", FIXTURE_C, "civ-latent-response",
        RoleAssignment("X", "Y", "U", "W", ("Z",), ("T",), "response"), "X", "Y", 0.49,
    ),
    "D": Fixture(
        "D", FIXTURE_D, "double-latent",
        DoubleRoleAssignment("X1", "X2", "U1", "W1", "U2", "W2", ("Z",)), "X1", "X2", 0.36,
    ),
}
