"""Hot numerical kernels, each with a numba and a numpy implementation."""
from reponlab.kernels.automorph import count_automorphisms
from reponlab.kernels.closure import close_knowledge
from reponlab.kernels.linext import sample_orders_mcmc, sample_orders_topological
from reponlab.kernels.ode import rk4_full, rk4_reduced

__all__ = [
    "close_knowledge",
    "count_automorphisms",
    "rk4_full",
    "rk4_reduced",
    "sample_orders_mcmc",
    "sample_orders_topological",
]
