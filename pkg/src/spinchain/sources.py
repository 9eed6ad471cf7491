"""Uniform access to local density operators omega_n of different state descriptions."""

from functools import lru_cache

import numpy as np

from .fcs import GeneratingTriple, HiddenMarkovSpec, from_hidden_markov, local_density
from .operators import check_density, tensor_power


def as_density_source(source):
    """Return a cached function n -> omega_n.

    Accepted sources: a generating triple, a hidden-Markov spec, a one-site
    density (product state), an ``Interaction`` (local Gibbs states) or any
    callable returning the density on n sites.
    """
    from .ldp import Interaction, gibbs_local_state

    if isinstance(source, HiddenMarkovSpec):
        source = from_hidden_markov(source)
    if isinstance(source, GeneratingTriple):
        triple = source
        fn = lambda n: local_density(triple, n)
    elif isinstance(source, Interaction):
        phi = source
        fn = lambda n: gibbs_local_state(phi, n)
    elif isinstance(source, np.ndarray):
        rho = check_density(source)
        fn = lambda n: tensor_power(rho, n)
    elif callable(source):
        fn = source
    else:
        raise TypeError(f"cannot build local densities from {type(source).__name__}")
    return lru_cache(maxsize=None)(fn)


def site_dimension(source):
    from .ldp import Interaction

    if isinstance(source, HiddenMarkovSpec):
        return source.d_A
    if isinstance(source, (GeneratingTriple, Interaction)):
        return source.d_A
    if isinstance(source, np.ndarray):
        return source.shape[0]
    return as_density_source(source)(1).shape[0]
