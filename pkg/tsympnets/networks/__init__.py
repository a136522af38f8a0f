"""
tsympnets sub-package for time-adaptive SympNets, their gradients and training
"""
