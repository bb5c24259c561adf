"""Small dense state vectors and real-plane projective qubit measurements.

Angle convention: theta is measured from the z axis in the x-z plane.
Outcome 0 is the vector (cos(theta/2), sin(theta/2)), outcome 1 is
(-sin(theta/2), cos(theta/2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correlations import Behavior, Scenario, StructureError

MAX_QUBITS = 10


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).ravel()
        d = amps.size
        n = d.bit_length() - 1
        if d < 2 or 1 << n != d:
            raise StructureError(f"dimension {d} is not a power of two >= 2")
        if n > MAX_QUBITS:
            raise StructureError(f"{n} qubits exceeds the dense cap of {MAX_QUBITS}")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise ValueError(f"state norm^2 is {np.vdot(amps, amps).real!r}, not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).ravel()
        return cls(amps / np.linalg.norm(amps))

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.amplitudes, other.amplitudes))


def basis_state(bits: Sequence[int]) -> StateVector:
    amps = np.zeros(1 << len(bits), dtype=np.complex128)
    amps[int("".join(str(int(b)) for b in bits), 2)] = 1.0
    return StateVector(amps)


def ghz_state(n: int = 3) -> StateVector:
    """(|0...0> + |1...1>)/sqrt(2)."""
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = amps[-1] = 1.0 / math.sqrt(2.0)
    return StateVector(amps)


def max_entangled_state() -> StateVector:
    """Phi+ = (|00> + |11>)/sqrt(2)."""
    return ghz_state(2)


@dataclass(frozen=True)
class QubitMeasurement:
    theta: float

    def basis(self) -> np.ndarray:
        """Rows are the outcome-0 and outcome-1 basis vectors."""
        c, s = math.cos(self.theta / 2.0), math.sin(self.theta / 2.0)
        return np.array([[c, s], [-s, c]])


@dataclass(frozen=True, eq=False)
class QuantumSetup:
    state: StateVector
    settings: tuple[tuple[QubitMeasurement, ...], ...]

    def __post_init__(self):
        settings = tuple(
            tuple(m if isinstance(m, QubitMeasurement) else QubitMeasurement(float(m)) for m in party)
            for party in self.settings
        )
        object.__setattr__(self, "settings", settings)
        if len(settings) != self.state.n_qubits:
            raise StructureError(f"{len(settings)} parties given for a {self.state.n_qubits}-qubit state")
        if any(len(party) == 0 for party in settings):
            raise StructureError("every party needs at least one measurement setting")

    @classmethod
    def from_angles(cls, state: StateVector, angles: Sequence[Sequence[float]]) -> "QuantumSetup":
        return cls(state, tuple(tuple(QubitMeasurement(float(t)) for t in party) for party in angles))

    @property
    def scenario(self) -> Scenario:
        return Scenario(tuple(len(p) for p in self.settings), (2,) * len(self.settings))

    def angles(self) -> list[list[float]]:
        return [[m.theta for m in party] for party in self.settings]

    def to_dict(self) -> dict:
        amps = self.state.amplitudes
        if np.array_equal(amps, ghz_state(self.state.n_qubits).amplitudes):
            state = "phi_plus" if self.state.n_qubits == 2 else "ghz"
        else:
            state = {"re": amps.real.tolist(), "im": amps.imag.tolist()}
        return {"state": state, "settings": self.angles()}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantumSetup":
        if not isinstance(d, dict) or "state" not in d or "settings" not in d:
            raise StructureError("quantum setup JSON needs 'state' and 'settings'")
        spec = d["state"]
        n = len(d["settings"])
        if spec == "ghz":
            state = ghz_state(n)
        elif spec == "phi_plus":
            state = max_entangled_state()
        elif isinstance(spec, dict):
            state = StateVector(np.asarray(spec["re"], float) + 1j * np.asarray(spec.get("im", [0.0] * len(spec["re"])), float))
        elif isinstance(spec, list):
            state = StateVector(np.asarray(spec, dtype=float))
        else:
            raise StructureError(f"unknown state {spec!r}")
        return cls.from_angles(state, d["settings"])


def born_behavior(q: QuantumSetup) -> Behavior:
    """p(outcomes|inputs) = |<e_a1(x1) ... e_an(xn)|psi>|^2."""
    n = q.state.n_qubits
    scenario = q.scenario
    psi = q.state.amplitudes.reshape((2,) * n)
    table = np.empty(scenario.shape)
    for joint in np.ndindex(*scenario.inputs):
        amp = psi
        for p, x in enumerate(joint):
            # contract qubit p; the resulting outcome axis moves to the end
            amp = np.tensordot(amp, q.settings[p][x].basis(), axes=([0], [1]))
        table[joint] = np.abs(amp) ** 2
    return Behavior(scenario, table)


TSIRELSON_ANGLES = ((0.0, math.pi / 2.0), (math.pi / 4.0, -math.pi / 4.0))


def tsirelson_setup() -> QuantumSetup:
    """Phi+ with the angles that maximize S: S = 2 + sqrt(2).

    This is the textbook optimum, used here as a stand-in for an actual
    experiment's state and settings.
    """
    return QuantumSetup.from_angles(max_entangled_state(), TSIRELSON_ANGLES)


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    d = 1 << n_qubits
    return StateVector.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))


def random_setup(rng: np.random.Generator, n_qubits: int = 2, n_inputs: int = 2) -> QuantumSetup:
    angles = rng.uniform(-math.pi, math.pi, size=(n_qubits, n_inputs))
    return QuantumSetup.from_angles(random_state(n_qubits, rng), angles)
