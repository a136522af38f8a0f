"""
tsympnets sub-package for Hamiltonian systems and symplectic integrators
"""
