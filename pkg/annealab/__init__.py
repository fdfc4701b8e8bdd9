"""
Annealab - simulated annealing laboratory.

Discrete and continuous-time annealing of Langevin dynamics, critical
depth of optimization landscapes, and Monte Carlo checks of the
polynomial tail decay of annealed chains.
"""

__version__ = '1.0.0'
