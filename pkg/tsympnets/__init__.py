"""
tsympnets: time-adaptive symplectic neural networks (SympNets) that learn flow maps of
autonomous and non-autonomous Hamiltonian systems, with the reference systems, integrators,
reverse-mode gradients, training pipelines and verification suites they are checked against
"""
