"""Matrix product state simulation of linear-chain quantum circuits.

A state over ``m`` qubits is a chain of rank-3 site tensors with bonds
(left virtual, physical 2, right virtual); the boundary virtual bonds have
dimension 1. Two-qubit gates grow the shared virtual bond and are truncated
back by SVD within a per-gate error budget, with the discarded weight
accumulated on the state.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .ansatz import Circuit, Gate, gate_matrix
from .tensor import svd_truncated

# Per-gate truncation budget: the squared sum of singular values a single
# gate application may discard. The default is tight enough that kernel
# entries track an exact simulation to better than 1e-10; loosen it (1e-16 is
# a common choice) to trade a little accuracy for smaller bond dimensions.
DEFAULT_TRUNC_BUDGET = 1e-24
_UNITARY_ATOL = 1e-10
_MAX_DENSE_QUBITS = 20
_MAGIC = b"MPS1"


@dataclass
class MpsState:
    """Chain of site tensors plus truncation-error bookkeeping.

    ``ortho_center`` names the site whose flanks are left/right isometries,
    or None when the gauge is unknown. ``accumulated_discard`` is the running
    sum of squared singular values removed by gate truncations and never
    decreases.
    """

    sites: list[np.ndarray]
    trunc_budget_per_gate: float = DEFAULT_TRUNC_BUDGET
    accumulated_discard: float = 0.0
    ortho_center: int | None = None
    peak_chi: int = 1
    gate_count_1q: int = 0
    gate_count_2q: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.sites)

    def bond_dims(self) -> list[int]:
        """Virtual bond dimensions including the two trivial boundary bonds."""
        return [t.shape[0] for t in self.sites] + [self.sites[-1].shape[2]]

    def max_bond(self) -> int:
        return max(self.bond_dims())

    def entry_count(self) -> int:
        return sum(t.size for t in self.sites)

    def copy(self) -> "MpsState":
        return MpsState(
            sites=[t.copy() for t in self.sites],
            trunc_budget_per_gate=self.trunc_budget_per_gate,
            accumulated_discard=self.accumulated_discard,
            ortho_center=self.ortho_center,
            peak_chi=self.peak_chi,
            gate_count_1q=self.gate_count_1q,
            gate_count_2q=self.gate_count_2q,
            timings=dict(self.timings),
        )

    def _tick(self, phase: str, t0: float) -> None:
        self.timings[phase] = self.timings.get(phase, 0.0) + (time.perf_counter() - t0)


@dataclass(frozen=True)
class SimStats:
    max_chi: int
    entry_count: int
    memory_bytes: int
    gate_count_1q: int
    gate_count_2q: int
    wall_time_per_phase: dict[str, float]


def init_state(m: int, basis: str = "zero", trunc_budget_per_gate: float = DEFAULT_TRUNC_BUDGET) -> MpsState:
    """Product state |0...0> or |+>^m with all virtual bonds of dimension 1."""
    if m < 1:
        raise ValueError("qubit count must be at least 1")
    if basis == "zero":
        vec = np.array([1.0, 0.0], dtype=np.complex128)
    elif basis == "plus":
        vec = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
    else:
        raise ValueError(f"unknown basis {basis!r}; use 'zero' or 'plus'")
    sites = [vec.reshape(1, 2, 1).copy() for _ in range(m)]
    # every site of a normalized product state is already an isometry
    return MpsState(sites, trunc_budget_per_gate=trunc_budget_per_gate, ortho_center=0)


def _left_isometrize(state: MpsState, start: int, stop: int) -> None:
    # QR sites start..stop-1, pushing the residual factor to the right
    for i in range(start, stop):
        chi_l, p, chi_r = state.sites[i].shape
        q, r = np.linalg.qr(state.sites[i].reshape(chi_l * p, chi_r))
        state.sites[i] = q.reshape(chi_l, p, q.shape[1])
        state.sites[i + 1] = np.tensordot(r, state.sites[i + 1], axes=(1, 0))


def _right_isometrize(state: MpsState, start: int, stop: int) -> None:
    # QR sites start..stop+1 from the right, pushing the residual to the left
    for i in range(start, stop, -1):
        chi_l, p, chi_r = state.sites[i].shape
        q, r = np.linalg.qr(state.sites[i].reshape(chi_l, p * chi_r).conj().T)
        state.sites[i] = q.conj().T.reshape(q.shape[1], p, chi_r)
        state.sites[i - 1] = np.tensordot(state.sites[i - 1], r.conj().T, axes=(2, 0))


def canonicalize(state: MpsState, center: int) -> MpsState:
    """Move the orthogonality center to ``center`` without changing the state."""
    if not 0 <= center < state.m:
        raise ValueError(f"center {center} out of range for {state.m} sites")
    t0 = time.perf_counter()
    current = state.ortho_center
    if current is None:
        _left_isometrize(state, 0, center)
        _right_isometrize(state, state.m - 1, center)
    elif current < center:
        _left_isometrize(state, current, center)
    elif current > center:
        _right_isometrize(state, current, center)
    state.ortho_center = center
    state._tick("canonicalize", t0)
    return state


def _check_unitary(u: np.ndarray) -> None:
    eye = np.eye(u.shape[0])
    if not np.allclose(u.conj().T @ u, eye, atol=_UNITARY_ATOL):
        raise ValueError("gate matrix is not unitary")


def apply_one_qubit(state: MpsState, q: int, matrix: np.ndarray) -> MpsState:
    """Contract a 2x2 unitary with the site tensor of qubit ``q``."""
    if not 0 <= q < state.m:
        raise ValueError(f"qubit {q} out of range")
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (2, 2):
        raise ValueError("single-qubit gate must be a 2x2 matrix")
    _check_unitary(matrix)
    t0 = time.perf_counter()
    # unitaries preserve the isometry flanks, so the center does not move
    state.sites[q] = np.tensordot(matrix, state.sites[q], axes=(1, 1)).transpose(1, 0, 2)
    state.gate_count_1q += 1
    state._tick("one_qubit", t0)
    return state


def apply_two_qubit(state: MpsState, q: int, matrix: np.ndarray, absorb: str = "right") -> MpsState:
    """Apply a 4x4 unitary (basis |q, q+1>) to the adjacent pair (q, q+1).

    The pair is contracted with the gate, split by a truncated SVD within the
    per-gate budget, and the singular values are absorbed into the side named
    by ``absorb``. The weight removed by truncation is added to
    ``accumulated_discard`` and the kept spectrum is rescaled so the state
    norm is preserved.
    """
    if not 0 <= q < state.m - 1:
        raise ValueError(f"site pair ({q}, {q + 1}) out of range")
    if absorb not in ("left", "right"):
        raise ValueError("absorb must be 'left' or 'right'")
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (4, 4):
        raise ValueError("two-qubit gate must be a 4x4 matrix")
    _check_unitary(matrix)

    canonicalize(state, q)
    t0 = time.perf_counter()
    theta = np.tensordot(state.sites[q], state.sites[q + 1], axes=(2, 0))  # l p0 p1 r
    g = matrix.reshape(2, 2, 2, 2)
    theta = np.tensordot(g, theta, axes=((2, 3), (1, 2)))  # p0' p1' l r
    theta = theta.transpose(2, 0, 1, 3)

    res = svd_truncated(theta, 2, state.trunc_budget_per_gate)
    s = res.singular_values
    if res.discarded_weight > 0.0:
        kept = float(s @ s)
        s = s * np.sqrt((kept + res.discarded_weight) / kept)
    if absorb == "left":
        state.sites[q] = res.left * s
        state.sites[q + 1] = res.right
        state.ortho_center = q
    else:
        state.sites[q] = res.left
        state.sites[q + 1] = s[:, None, None] * res.right
        state.ortho_center = q + 1
    state.accumulated_discard += res.discarded_weight
    state.peak_chi = max(state.peak_chi, s.size)
    state.gate_count_2q += 1
    state._tick("two_qubit", t0)
    return state


def apply_gate(state: MpsState, gate: Gate, absorb: str = "right") -> MpsState:
    """Apply one circuit gate; two-qubit gates require adjacent qubits."""
    for q in gate.qubits:
        if not 0 <= q < state.m:
            raise ValueError(f"qubit {q} out of range for {state.m} sites")
    u = gate_matrix(gate)
    if len(gate.qubits) == 1:
        return apply_one_qubit(state, gate.qubits[0], u)
    a, b = gate.qubits
    if abs(a - b) != 1:
        raise ValueError(f"two-qubit gate on ({a}, {b}) is not adjacent; route the circuit first")
    if a > b:
        u = u.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
    return apply_two_qubit(state, min(a, b), u, absorb=absorb)


def run_circuit(state: MpsState, circuit: Circuit, memory_log: list[int] | None = None) -> MpsState:
    """Apply every gate of ``circuit`` in order.

    Singular values are absorbed toward the next two-qubit gate to keep
    canonicalization sweeps short. When ``memory_log`` is given, the state
    memory in bytes is appended after each gate.
    """
    if circuit.m != state.m:
        raise ValueError(f"circuit has {circuit.m} qubits, state has {state.m}")
    gates = circuit.gates
    # position of the next two-qubit gate after each index, for the absorb hint
    next_2q = [None] * (len(gates) + 1)
    for i in range(len(gates) - 1, -1, -1):
        next_2q[i] = min(gates[i].qubits) if len(gates[i].qubits) == 2 else next_2q[i + 1]
    for i, gate in enumerate(gates):
        if len(gate.qubits) == 2:
            nxt = next_2q[i + 1]
            absorb = "left" if nxt is not None and nxt <= min(gate.qubits) else "right"
            apply_gate(state, gate, absorb=absorb)
        else:
            apply_gate(state, gate)
        if memory_log is not None:
            memory_log.append(16 * state.entry_count())
    return state


def simulate_circuit(
    circuit: Circuit,
    budget: float = DEFAULT_TRUNC_BUDGET,
    memory_log: list[int] | None = None,
) -> MpsState:
    """Simulate ``circuit`` from |0...0>."""
    state = init_state(circuit.m, "zero", trunc_budget_per_gate=budget)
    return run_circuit(state, circuit, memory_log=memory_log)


def inner_product(bra: MpsState, ket: MpsState) -> complex:
    """<bra, ket> with the bra entries conjugated, contracted site by site."""
    if bra.m != ket.m:
        raise ValueError(f"qubit count mismatch: {bra.m} vs {ket.m}")
    env = np.ones((1, 1), dtype=np.complex128)
    for a, b in zip(bra.sites, ket.sites):
        tmp = np.tensordot(env, a.conj(), axes=(0, 0))  # ket-bond p bra-bond'
        env = np.tensordot(tmp, b, axes=((0, 1), (0, 1)))  # bra-bond' ket-bond'
    return complex(env[0, 0])


def to_statevector(state: MpsState) -> np.ndarray:
    """Amplitude vector of length 2^m, qubit 0 most significant."""
    if state.m > _MAX_DENSE_QUBITS:
        raise ValueError(f"refusing dense conversion beyond {_MAX_DENSE_QUBITS} qubits")
    acc = state.sites[0].reshape(2, -1)
    for site in state.sites[1:]:
        acc = np.tensordot(acc, site, axes=(1, 0)).reshape(acc.shape[0] * 2, -1)
    return acc.reshape(-1)


def stats(state: MpsState) -> SimStats:
    """Resource counters for the state; memory is entry count times 16 bytes."""
    n = state.entry_count()
    return SimStats(
        max_chi=max(state.peak_chi, state.max_bond()),
        entry_count=n,
        memory_bytes=16 * n,
        gate_count_1q=state.gate_count_1q,
        gate_count_2q=state.gate_count_2q,
        wall_time_per_phase=dict(state.timings),
    )


def serialize_state(state: MpsState) -> bytes:
    """Binary form: header plus per-site shape and little-endian complex entries."""
    center = -1 if state.ortho_center is None else state.ortho_center
    parts = [
        _MAGIC,
        struct.pack(
            "<IddiIQQ",
            state.m,
            state.trunc_budget_per_gate,
            state.accumulated_discard,
            center,
            state.peak_chi,
            state.gate_count_1q,
            state.gate_count_2q,
        ),
    ]
    for site in state.sites:
        chi_l, _, chi_r = site.shape
        parts.append(struct.pack("<II", chi_l, chi_r))
        parts.append(np.ascontiguousarray(site, dtype="<c16").tobytes())
    return b"".join(parts)


def deserialize_state(buf: bytes) -> MpsState:
    if buf[:4] != _MAGIC:
        raise ValueError("not a serialized MPS state")
    off = 4
    header = struct.Struct("<IddiIQQ")
    m, budget, discard, center, peak, g1, g2 = header.unpack_from(buf, off)
    off += header.size
    sites = []
    for _ in range(m):
        chi_l, chi_r = struct.unpack_from("<II", buf, off)
        off += 8
        n = chi_l * 2 * chi_r
        entries = np.frombuffer(buf, dtype="<c16", count=n, offset=off)
        off += 16 * n
        sites.append(entries.astype(np.complex128).reshape(chi_l, 2, chi_r))
    return MpsState(
        sites=sites,
        trunc_budget_per_gate=budget,
        accumulated_discard=discard,
        ortho_center=None if center < 0 else center,
        peak_chi=peak,
        gate_count_1q=g1,
        gate_count_2q=g2,
    )
