"""Dilations of unital CP maps and CP semigroups on finite-dimensional matrix algebras."""
