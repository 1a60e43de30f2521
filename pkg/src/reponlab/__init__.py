"""Numerical laboratory for an effective theory of generalization.

Subpackages and modules:

* :mod:`reponlab.relations` builds relations and their description lengths.
* :mod:`reponlab.inference` closes partial knowledge and estimates how much of
  a relation is inferable from a sample.
* :mod:`reponlab.repon` integrates the interacting-repon dynamics.
* :mod:`reponlab.autoencoder` trains the embedding + MLP model and runs sweeps.
* :mod:`reponlab.harness` wires everything to config files, a CLI and figures.
"""

__version__ = "0.1.0"
