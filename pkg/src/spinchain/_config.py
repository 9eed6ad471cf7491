"""Numerical tolerances, brute-force caps and backend selection.

Every tolerance here is a default; public functions accept per-call overrides.
"""

import os

import numpy as np

FAITHFUL_TOL = 1e-10
ATOM_MERGE_TOL = 1e-8
PERIPHERAL_TOL = 1e-8
EIG_CLUSTER_TOL = 1e-7
STRICT_POS_TOL = 1e-8
RANK_TOL = 1e-12
ENTRY_TOL = 1e-12
FD_STEP = 1e-5
T_CAP = 50.0
CONV_TOL = 1e-9

DEFAULT_CAP = 4096


def brute_force_cap():
    """Largest dense local dimension d_A**n we are willing to build.

    ``SPINCHAIN_CAP`` in the environment overrides the default.
    """
    raw = os.environ.get("SPINCHAIN_CAP")
    if raw is None:
        return DEFAULT_CAP
    return int(raw)


def use_numba():
    """Whether the jitted kernels are enabled (``SPINCHAIN_NUMBA=0`` disables)."""
    return os.environ.get("SPINCHAIN_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def default_tol(A):
    """Scale-aware tolerance: 1e-9 * dim * max|A_ij|, floored at 1e-14."""
    A = np.asarray(A)
    if A.size == 0:
        return 1e-14
    scale = float(np.max(np.abs(A)))
    return max(1e-9 * A.shape[0] * scale, 1e-14)
