"""Data-encoding circuits on a linear qubit chain.

Builds the feature-map circuit for a rescaled data row, reorders commuting
two-qubit rotations into parallel layers, and inserts SWAP gates so that
every two-qubit gate acts on adjacent qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GATE_KINDS = ("H", "RZ", "RXX", "SWAP")
_TWO_QUBIT = ("RXX", "SWAP")
_PARAMETRIC = ("RZ", "RXX")


@dataclass(frozen=True)
class FeatureMapConfig:
    """Hyperparameters of the encoding circuit.

    m: qubit / feature count, r: layer repetitions, d: interaction distance
    on the linear chain, gamma: kernel bandwidth coefficient.
    """

    m: int
    r: int
    d: int
    gamma: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if not 1 <= self.d <= self.m - 1:
            raise ValueError(f"d must satisfy 1 <= d <= m-1, got d={self.d} for m={self.m}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in _TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} acts on exactly {arity} qubit(s)")
        if self.kind in _PARAMETRIC and self.angle is None:
            raise ValueError(f"{self.kind} requires an angle")
        if self.kind not in _PARAMETRIC and self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.angle is not None:
            object.__setattr__(self, "angle", float(self.angle))


@dataclass
class Circuit:
    m: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            if any(not 0 <= q < self.m for q in g.qubits):
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.m - 1}")


_H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / math.sqrt(2.0)
_SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary matrix of a gate; two-qubit matrices use the |q0 q1> basis.

    Rotation convention: RZ(theta) = exp(-i theta Z / 2) and
    RXX(theta) = exp(-i theta XX / 2).
    """
    if gate.kind == "H":
        return _H_MATRIX.copy()
    if gate.kind == "SWAP":
        return _SWAP_MATRIX.copy()
    half = 0.5 * gate.angle
    if gate.kind == "RZ":
        return np.diag([np.exp(-1j * half), np.exp(1j * half)]).astype(np.complex128)
    c = math.cos(half)
    s = -1j * math.sin(half)
    return np.array(
        [[c, 0, 0, s], [0, c, s, 0], [0, s, c, 0], [s, 0, 0, c]], dtype=np.complex128
    )


def interaction_graph(m: int, d: int) -> list[tuple[int, int]]:
    """Edges (i, i+k) for 1 <= k <= d on an m-qubit chain, grouped by distance."""
    if not 1 <= d <= m - 1:
        raise ValueError(f"d must satisfy 1 <= d <= m-1, got d={d} for m={m}")
    return [(i, i + k) for k in range(1, d + 1) for i in range(m - k)]


def build_circuit(x, cfg: FeatureMapConfig, drop_zero_rxx: bool = False) -> Circuit:
    """Encoding circuit for a rescaled feature row ``x``.

    Hadamards on every qubit, then ``r`` repetitions of a single-qubit RZ
    layer followed by an RXX gate per interaction edge. Angles are twice the
    underlying Hamiltonian coefficients to match the rotation convention of
    :func:`gate_matrix`. Zero-angle RXX gates are emitted unless
    ``drop_zero_rxx`` is set, so gate counts stay predictable.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != cfg.m:
        raise ValueError(f"expected {cfg.m} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if np.any(x < 0.0) or np.any(x > 2.0):
        raise ValueError("features must lie in [0, 2]; rescale the data first")

    edges = interaction_graph(cfg.m, cfg.d)
    gates = [Gate("H", (q,)) for q in range(cfg.m)]
    for _ in range(cfg.r):
        for q in range(cfg.m):
            gates.append(Gate("RZ", (q,), 2.0 * cfg.gamma * x[q]))
        for i, j in edges:
            angle = 2.0 * cfg.gamma**2 * (math.pi / 2.0) * (1.0 - x[i]) * (1.0 - x[j])
            if drop_zero_rxx and angle == 0.0:
                continue
            gates.append(Gate("RXX", (i, j), angle))
    return Circuit(cfg.m, gates)


def layered_gates(c: Circuit, d: int) -> list[list[Gate]]:
    """Greedy first-fit grouping of a commuting RXX block into parallel layers.

    Each layer touches every qubit at most once and the total never exceeds
    2*d layers for edges of the banded interaction graph.
    """
    layers: list[list[Gate]] = []
    used: list[set[int]] = []
    for g in c.gates:
        if g.kind != "RXX":
            raise ValueError(f"layer scheduling expects RXX gates only, got {g.kind}")
        a, b = g.qubits
        for layer, qubits in zip(layers, used):
            if a not in qubits and b not in qubits:
                layer.append(g)
                qubits.update((a, b))
                break
        else:
            layers.append([g])
            used.append({a, b})
    if len(layers) > 2 * d:
        raise AssertionError(f"greedy scheduling used {len(layers)} > 2d = {2 * d} layers")
    return layers


def schedule_layers(c: Circuit, d: int) -> Circuit:
    """Reorder a block of commuting RXX gates into at most 2*d layers."""
    gates = [g for layer in layered_gates(c, d) for g in layer]
    return Circuit(c.m, gates)


def schedule_circuit(c: Circuit, d: int) -> Circuit:
    """Apply :func:`schedule_layers` to every maximal run of RXX gates."""
    out: list[Gate] = []
    run: list[Gate] = []
    for g in c.gates:
        if g.kind == "RXX":
            run.append(g)
        else:
            if run:
                out.extend(schedule_layers(Circuit(c.m, run), d).gates)
                run = []
            out.append(g)
    if run:
        out.extend(schedule_layers(Circuit(c.m, run), d).gates)
    return Circuit(c.m, out)


def route_linear(c: Circuit) -> Circuit:
    """Make every two-qubit gate act on adjacent qubits via SWAP insertion.

    A gate on positions (i, i+k) is preceded by k-1 SWAPs that bring the
    qubits together and followed by the reverse sequence, so the layout is
    restored after every gate. Logical-to-physical placement is tracked so
    single-qubit gates stay on the right wire.
    """
    pos = list(range(c.m))  # logical -> physical
    occ = list(range(c.m))  # physical -> logical
    out: list[Gate] = []

    def emit_swap(p: int) -> None:
        out.append(Gate("SWAP", (p, p + 1)))
        la, lb = occ[p], occ[p + 1]
        occ[p], occ[p + 1] = lb, la
        pos[la], pos[lb] = p + 1, p

    for g in c.gates:
        if len(g.qubits) == 1:
            out.append(replace(g, qubits=(pos[g.qubits[0]],)))
            continue
        lo, hi = sorted(pos[q] for q in g.qubits)
        for p in range(hi - 1, lo, -1):
            emit_swap(p)
        out.append(replace(g, qubits=(lo, lo + 1)))
        for p in range(lo + 1, hi):
            emit_swap(p)
    return Circuit(c.m, out)


def encode_circuit(x, cfg: FeatureMapConfig) -> Circuit:
    """Build, layer-schedule and route the encoding circuit for one data row."""
    return route_linear(schedule_circuit(build_circuit(x, cfg), cfg.d))


def circuit_to_text(c: Circuit) -> str:
    """Line-oriented text form: ``H q``, ``RZ q angle``, ``RXX q1 q2 angle``, ``SWAP q1 q2``."""
    lines = []
    for g in c.gates:
        parts = [g.kind, *(str(q) for q in g.qubits)]
        if g.angle is not None:
            parts.append(repr(g.angle))
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def circuit_from_text(text: str, m: int | None = None) -> Circuit:
    """Parse :func:`circuit_to_text` output; ``m`` is inferred when omitted."""
    gates = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind not in GATE_KINDS:
            raise ValueError(f"line {ln}: unknown gate kind {kind!r}")
        nq = 2 if kind in _TWO_QUBIT else 1
        has_angle = kind in _PARAMETRIC
        if len(fields) != 1 + nq + (1 if has_angle else 0):
            raise ValueError(f"line {ln}: malformed gate line {line!r}")
        qubits = tuple(int(q) for q in fields[1 : 1 + nq])
        angle = float(fields[1 + nq]) if has_angle else None
        gates.append(Gate(kind, qubits, angle))
    if m is None:
        m = 1 + max((q for g in gates for q in g.qubits), default=0)
    return Circuit(m, gates)
