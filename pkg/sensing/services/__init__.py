"""Fock-space simulation, variational circuits, tasks, analytics and training."""
