"""Tests for the encoding circuit builder, layer scheduling and SWAP routing."""

import math

import numpy as np
import pytest

from mpskernel.ansatz import (
    Circuit,
    FeatureMapConfig,
    Gate,
    build_circuit,
    circuit_from_text,
    circuit_to_text,
    encode_circuit,
    gate_matrix,
    interaction_graph,
    layered_gates,
    route_linear,
    schedule_circuit,
    schedule_layers,
)

from oracles import feature_map_state, statevector


class TestInteractionGraph:
    def test_five_qubits_distance_two(self):
        edges = interaction_graph(5, 2)
        assert set(edges) == {(0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (1, 3), (2, 4)}
        assert len(edges) == 7

    def test_chain(self):
        assert interaction_graph(4, 1) == [(0, 1), (1, 2), (2, 3)]

    def test_complete_graph(self):
        edges = interaction_graph(6, 5)
        assert len(edges) == 15
        assert len(set(edges)) == 15

    def test_edge_count_formula(self):
        for m in range(2, 9):
            for d in range(1, m):
                assert len(interaction_graph(m, d)) == sum(m - k for k in range(1, d + 1))

    def test_distance_out_of_range(self):
        with pytest.raises(ValueError):
            interaction_graph(5, 0)
        with pytest.raises(ValueError):
            interaction_graph(5, 5)


class TestFeatureMapConfig:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            FeatureMapConfig(0, 1, 1, 0.5)
        with pytest.raises(ValueError):
            FeatureMapConfig(4, 0, 1, 0.5)
        with pytest.raises(ValueError):
            FeatureMapConfig(4, 1, 4, 0.5)
        with pytest.raises(ValueError):
            FeatureMapConfig(4, 1, 1, 0.0)


class TestBuildCircuit:
    def test_midpoint_features_give_zero_coupling(self):
        cfg = FeatureMapConfig(2, 1, 1, 1.0)
        circuit = build_circuit(np.array([1.0, 1.0]), cfg)
        rxx = [g for g in circuit.gates if g.kind == "RXX"]
        assert len(rxx) == 1
        assert rxx[0].angle == 0.0

    def test_gate_count(self):
        cfg = FeatureMapConfig(3, 2, 1, 0.5)
        circuit = build_circuit(np.array([0.2, 1.1, 1.9]), cfg)
        assert len(circuit.gates) == 3 + 2 * (3 + 2)

    def test_endpoint_features_angle(self):
        cfg = FeatureMapConfig(2, 1, 1, 1.0)
        circuit = build_circuit(np.array([0.0, 2.0]), cfg)
        rxx = [g for g in circuit.gates if g.kind == "RXX"]
        assert rxx[0].angle == pytest.approx(-math.pi)
        state = statevector(circuit)
        oracle = feature_map_state([0.0, 2.0], cfg)
        assert np.abs(np.vdot(state, oracle)) == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(state, oracle, atol=1e-10)

    def test_matches_hamiltonian_oracle(self):
        rng = np.random.default_rng(0)
        for m in (2, 3, 5, 6):
            for gamma in (0.1, 0.5, 1.0):
                cfg = FeatureMapConfig(m, int(rng.integers(1, 4)), int(rng.integers(1, m)), gamma)
                x = rng.uniform(0.0, 2.0, m)
                assert np.allclose(
                    statevector(build_circuit(x, cfg)),
                    feature_map_state(x, cfg),
                    atol=1e-10,
                )

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="features"):
            build_circuit(np.zeros(3), FeatureMapConfig(4, 1, 1, 0.5))

    def test_out_of_range_feature_rejected(self):
        with pytest.raises(ValueError, match="rescale"):
            build_circuit(np.array([0.5, 2.5]), FeatureMapConfig(2, 1, 1, 0.5))

    def test_drop_zero_rxx_flag(self):
        cfg = FeatureMapConfig(3, 1, 1, 1.0)
        x = np.array([1.0, 0.5, 1.0])
        full = build_circuit(x, cfg)
        pruned = build_circuit(x, cfg, drop_zero_rxx=True)
        assert len(full.gates) - len(pruned.gates) == 2


class TestScheduleLayers:
    def test_chain_needs_two_layers(self):
        gates = [Gate("RXX", e, 0.1) for e in interaction_graph(5, 1)]
        layers = layered_gates(Circuit(5, gates), 1)
        assert len(layers) == 2

    def test_distance_two_block_within_four_layers(self):
        gates = [Gate("RXX", e, 0.1) for e in interaction_graph(5, 2)]
        layers = layered_gates(Circuit(5, gates), 2)
        assert len(layers) <= 4
        assert sum(len(layer) for layer in layers) == 7
        for layer in layers:
            qubits = [q for g in layer for q in g.qubits]
            assert len(qubits) == len(set(qubits))

    def test_bound_holds_broadly(self):
        for m in (4, 9, 16, 33):
            for d in range(1, min(m, 9)):
                gates = [Gate("RXX", e, 0.1) for e in interaction_graph(m, d)]
                assert len(layered_gates(Circuit(m, gates), d)) <= 2 * d

    def test_reorder_preserves_unitary(self):
        rng = np.random.default_rng(1)
        gates = [Gate("RXX", e, float(a)) for e, a in
                 zip(interaction_graph(5, 2), rng.uniform(-2, 2, 7))]
        block = Circuit(5, gates)
        scheduled = schedule_layers(block, 2)
        assert sorted(map(repr, scheduled.gates)) == sorted(map(repr, block.gates))
        assert np.allclose(statevector(scheduled), statevector(block), atol=1e-10)

    def test_random_permutations_agree(self):
        rng = np.random.default_rng(2)
        gates = [Gate("RXX", e, float(a)) for e, a in
                 zip(interaction_graph(6, 3), rng.uniform(-2, 2, 12))]
        reference = statevector(Circuit(6, gates))
        for _ in range(4):
            perm = [gates[i] for i in rng.permutation(len(gates))]
            assert np.allclose(statevector(Circuit(6, perm)), reference, atol=1e-10)

    def test_non_rxx_gate_rejected(self):
        with pytest.raises(ValueError, match="RXX"):
            schedule_layers(Circuit(2, [Gate("H", (0,))]), 1)


class TestRouteLinear:
    def test_adjacent_gate_unchanged(self):
        circuit = Circuit(3, [Gate("RXX", (0, 1), 0.4)])
        routed = route_linear(circuit)
        assert routed.gates == circuit.gates

    def test_distance_three_adds_four_swaps(self):
        circuit = Circuit(4, [Gate("RXX", (0, 3), 0.4)])
        routed = route_linear(circuit)
        swaps = [g for g in routed.gates if g.kind == "SWAP"]
        assert len(swaps) == 2 * (3 - 1)
        for g in routed.gates:
            if len(g.qubits) == 2:
                assert abs(g.qubits[0] - g.qubits[1]) == 1

    def test_full_circuit_statevector_preserved(self):
        rng = np.random.default_rng(3)
        cfg = FeatureMapConfig(6, 2, 3, 0.8)
        x = rng.uniform(0.0, 2.0, 6)
        plain = build_circuit(x, cfg)
        routed = route_linear(schedule_circuit(plain, cfg.d))
        assert np.allclose(statevector(routed), statevector(plain), atol=1e-10)

    def test_swap_overhead_formula(self):
        for m, d, r in [(4, 2, 1), (6, 3, 2), (8, 5, 2), (7, 4, 3)]:
            cfg = FeatureMapConfig(m, r, d, 0.3)
            x = np.linspace(0.0, 2.0, m)
            routed = encode_circuit(x, cfg)
            swaps = sum(1 for g in routed.gates if g.kind == "SWAP")
            assert swaps == 2 * r * sum((k - 1) * (m - k) for k in range(2, d + 1))

    def test_single_qubit_gates_stay_on_their_wire(self):
        # the layout is restored after each routed gate, so H/RZ positions hold
        circuit = Circuit(4, [Gate("RXX", (0, 3), 0.4), Gate("RZ", (2,), 0.5)])
        routed = route_linear(circuit)
        rz = [g for g in routed.gates if g.kind == "RZ"]
        assert rz == [Gate("RZ", (2,), 0.5)]


class TestGateMatrix:
    def test_all_kinds_unitary(self):
        for gate in (
            Gate("H", (0,)),
            Gate("RZ", (0,), 0.7),
            Gate("RXX", (0, 1), -1.2),
            Gate("SWAP", (0, 1)),
        ):
            u = gate_matrix(gate)
            assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)

    def test_rxx_identity_at_zero(self):
        assert np.allclose(gate_matrix(Gate("RXX", (0, 1), 0.0)), np.eye(4))


class TestCircuitText:
    def test_round_trip(self):
        rng = np.random.default_rng(4)
        cfg = FeatureMapConfig(5, 2, 2, 0.9)
        circuit = encode_circuit(rng.uniform(0, 2, 5), cfg)
        parsed = circuit_from_text(circuit_to_text(circuit), m=5)
        assert parsed.gates == circuit.gates

    def test_golden_format(self):
        circuit = Circuit(
            3,
            [
                Gate("H", (0,)),
                Gate("RZ", (1,), 0.5),
                Gate("RXX", (0, 1), -0.25),
                Gate("SWAP", (1, 2)),
            ],
        )
        assert circuit_to_text(circuit) == "H 0\nRZ 1 0.5\nRXX 0 1 -0.25\nSWAP 1 2\n"

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="line 1"):
            circuit_from_text("RZ 0\n")


class TestGateValidation:
    def test_arity_checked(self):
        with pytest.raises(ValueError):
            Gate("H", (0, 1))
        with pytest.raises(ValueError):
            Gate("RXX", (0,), 0.5)

    def test_angle_presence_checked(self):
        with pytest.raises(ValueError):
            Gate("RZ", (0,))
        with pytest.raises(ValueError):
            Gate("SWAP", (0, 1), 0.5)

    def test_circuit_rejects_out_of_range_qubits(self):
        with pytest.raises(ValueError):
            Circuit(2, [Gate("H", (2,))])
