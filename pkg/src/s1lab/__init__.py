"""Numerical toolkit for circle actions, their quotients and the Dirac-type operators on them."""
