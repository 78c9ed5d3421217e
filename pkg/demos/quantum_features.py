"""
Quantum features of a single sample
===================================

One normalized sample becomes the fields of a small spin glass. A short
digitized anneal prepares a state whose Z expectation values are the
features.
"""

import numpy as np

from qfsurrogate import (
    CouplingGraph,
    FeatureLayout,
    QuantumConfig,
    Schedule,
    build_hamiltonian,
    build_topology,
    enumerate_subsets,
    evolve,
    extract_features,
    ground_state_fidelity,
)

# four qubits on a line, couplings on neighbouring pairs
top = build_topology("line", 4)
subsets = tuple(enumerate_subsets(top, 2))
graph = CouplingGraph(4, subsets, [0.05, 0.1, 0.05], K=2)
layout = FeatureLayout.from_graph(graph)
print("feature layout:", ", ".join(layout.descriptors))

x = np.array([0.8, -0.3, 0.5, -0.9])

# eight coarse Trotter steps, with and without the counterdiabatic rotation
H = build_hamiltonian(x, graph)
for cd in (False, True):
    cfg = QuantumConfig(4, Schedule("trig", T=1.0, steps=8), cd_enabled=cd)
    state = evolve(x, graph, cfg)
    feats = extract_features(state, layout, cfg)
    print(f"\ncd={cd}: ground-state fidelity {ground_state_fidelity(state, H):.3f}")
    print("  features:", np.array2string(feats, precision=3))

# sampling mode estimates the same numbers from bitstrings
cfg = QuantumConfig(4, Schedule("trig", 1.0, 8), cd_enabled=False, shots=4000, seed=7)
print("\n4000 shots:", np.array2string(extract_features(evolve(x, graph, cfg), layout, cfg),
                                       precision=3))
