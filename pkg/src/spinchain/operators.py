"""Dense operator kernel: tensor products, partial traces, site embeddings,
Hermitian functional calculus with the support convention, trace norm and
relative entropy.

Operators are plain complex ``numpy`` arrays.  Functions never mutate their
inputs.
"""

from dataclasses import dataclass
from functools import reduce
import string

import numpy as np

from ._config import default_tol
from .errors import DimensionError, NotHermitianError, NotPositiveError


def tensor_product(*ops):
    """Kronecker product of the given operators, left factor first."""
    if not ops:
        raise ValueError("tensor_product needs at least one operator")
    return reduce(np.kron, (np.asarray(op) for op in ops))


def tensor_power(op, k):
    op = np.asarray(op)
    if k == 0:
        return np.ones((1, 1), dtype=op.dtype)
    return tensor_product(*([op] * k))


def partial_trace(X, dims, keep):
    """Trace out every tensor factor of ``X`` not listed in ``keep``.

    ``dims`` gives the factor dimensions (their product must equal the size of
    ``X``); kept factors come out in ascending order.
    """
    X = np.asarray(X)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if X.shape != (total, total):
        raise DimensionError(f"operator of shape {X.shape} does not match factor dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} factors")
    n = len(dims)
    if 2 * n > 52:
        raise DimensionError("too many tensor factors for partial_trace")
    letters = string.ascii_letters
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    spec = "".join(row) + "".join(col) + "->" + out
    res = np.einsum(spec, X.reshape(dims + dims))
    kept = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(kept, kept)


def shift_embed(a, site, n, d):
    """Place the r-site operator ``a`` on sites [site, site + r) of an n-site chain."""
    a = np.asarray(a)
    r = _num_sites(a.shape[0], d)
    if site < 0 or site + r > n:
        raise DimensionError(f"window [{site}, {site + r}) exceeds chain of length {n}")
    left = np.eye(d ** site)
    right = np.eye(d ** (n - site - r))
    return np.kron(np.kron(left, a), right)


def _num_sites(dim, d):
    r, p = 0, 1
    while p < dim:
        p *= d
        r += 1
    if p != dim:
        raise DimensionError(f"dimension {dim} is not a power of the site dimension {d}")
    return r


def num_sites(dim, d):
    """n such that d**n == dim, raising ``DimensionError`` otherwise."""
    return _num_sites(int(dim), int(d))


def hermitian_residual(A):
    A = np.asarray(A)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def check_hermitian(A, tol=None):
    """Return the Hermitian part of ``A`` after checking it is Hermitian within tol."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    tol = default_tol(A) if tol is None else tol
    res = hermitian_residual(A)
    if res > tol:
        raise NotHermitianError(f"matrix is not Hermitian (residual {res:.3e} > {tol:.3e})")
    return (A + A.conj().T) / 2


def check_density(rho, psd_tol=None, trace_tol=None):
    """Validate a density operator and return its Hermitian part."""
    rho = check_hermitian(rho, psd_tol)
    tol = default_tol(rho)
    psd_tol = tol if psd_tol is None else psd_tol
    trace_tol = tol if trace_tol is None else trace_tol
    lo = float(np.linalg.eigvalsh(rho)[0])
    if lo < -psd_tol:
        raise NotPositiveError(f"density has eigenvalue {lo:.3e} below -{psd_tol:.1e}")
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > trace_tol:
        raise NotPositiveError(f"density has trace {tr!r}", code="TRACE")
    return rho


def is_density(rho, psd_tol=None, trace_tol=None):
    try:
        check_density(rho, psd_tol, trace_tol)
    except (NotHermitianError, NotPositiveError, DimensionError):
        return False
    return True


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues with their orthogonal projectors."""

    eigenvalues: np.ndarray
    projectors: tuple

    def reconstruct(self):
        return sum(lam * P for lam, P in zip(self.eigenvalues, self.projectors))


def spectral_decomposition(A, merge_tol=None, tol=None):
    """Eigen-decomposition of a Hermitian matrix.

    Without ``merge_tol`` every eigenvector gets its own rank-one projector.
    With ``merge_tol`` eigenvalues within that distance of a group's smallest
    member share one projector and the group mean is reported.
    """
    A = check_hermitian(A, tol)
    w, V = np.linalg.eigh(A)
    if merge_tol is None:
        projs = tuple(np.outer(V[:, i], V[:, i].conj()) for i in range(len(w)))
        return SpectralDecomposition(w, projs)
    groups = _group_sorted(w, merge_tol)
    vals, projs = [], []
    for idx in groups:
        Vg = V[:, idx]
        vals.append(float(np.mean(w[idx])))
        projs.append(Vg @ Vg.conj().T)
    return SpectralDecomposition(np.array(vals), tuple(projs))


def _group_sorted(w, tol):
    groups = [[0]] if len(w) else []
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][0]] > tol:
            groups.append([i])
        else:
            groups[-1].append(i)
    return groups


def matrix_function(A, kind, t=None, tol=None):
    """Apply ``exp``, ``log`` or ``power`` to a Hermitian matrix spectrally.

    ``log`` and ``power`` act on the support only: eigenvalues at or below
    ``tol`` are sent to 0 (so ``power`` with t=0 yields the support projection,
    and negative t gives pseudo-inverse powers).
    """
    A = check_hermitian(A)
    w, V = np.linalg.eigh(A)
    if kind == "exp":
        f = np.exp(w)
    elif kind in ("log", "power"):
        tol = default_tol(A) if tol is None else tol
        if w.size and w[0] < -tol:
            raise NotPositiveError(f"{kind} needs a positive semidefinite argument (min eigenvalue {w[0]:.3e})")
        on = w > tol
        f = np.zeros_like(w)
        if kind == "log":
            f[on] = np.log(w[on])
        else:
            if t is None:
                raise ValueError("power needs an exponent t")
            f[on] = w[on] ** t
    else:
        raise ValueError(f"unknown matrix function {kind!r}")
    return (V * f) @ V.conj().T


def expm_h(A):
    return matrix_function(A, "exp")


def logm_h(A, tol=None):
    return matrix_function(A, "log", tol=tol)


def power_h(A, t, tol=None):
    return matrix_function(A, "power", t=t, tol=tol)


def trace_norm(A):
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    A = check_hermitian(A)
    return float(np.sum(np.abs(np.linalg.eigvalsh(A))))


def support_projection(A, tol=None):
    """Projection onto the eigenvectors of a PSD matrix with eigenvalue > tol."""
    A = check_hermitian(A)
    tol = default_tol(A) if tol is None else tol
    w, V = np.linalg.eigh(A)
    if w.size and w[0] < -tol:
        raise NotPositiveError(f"support_projection needs a PSD argument (min eigenvalue {w[0]:.3e})")
    Vs = V[:, w > tol]
    return Vs @ Vs.conj().T


def support_contained(A, B, tol=None):
    """Whether supp A is inside supp B, for PSD ``A`` and ``B``."""
    A = check_hermitian(A)
    tol_b = default_tol(B) if tol is None else tol
    P = support_projection(B, tol_b)
    Q = np.eye(A.shape[0]) - P
    leak = Q @ A @ Q
    tol_a = default_tol(A) if tol is None else tol
    return float(np.max(np.abs(leak))) <= tol_a


def order_gap(A, B, tol=None):
    """Smallest ``beta`` with ``A <= beta * B`` for PSD A and B.

    Returns ``inf`` when supp A is not contained in supp B.
    """
    A = check_hermitian(A)
    B = check_hermitian(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    tol_b = default_tol(B) if tol is None else tol
    if not support_contained(A, B, tol):
        return np.inf
    w, V = np.linalg.eigh(B)
    on = w > tol_b
    if not np.any(on):
        return 0.0
    # compress to supp B and whiten
    Vs = V[:, on] / np.sqrt(w[on])
    M = Vs.conj().T @ A @ Vs
    M = (M + M.conj().T) / 2
    return float(max(np.linalg.eigvalsh(M)[-1], 0.0))


def relative_entropy(phi, omega, tol=None):
    """Umegaki relative entropy S(phi || omega); ``inf`` if supp phi is not inside supp omega."""
    phi = check_hermitian(phi)
    omega = check_hermitian(omega)
    if phi.shape != omega.shape:
        raise DimensionError(f"shape mismatch {phi.shape} vs {omega.shape}")
    tol_p = default_tol(phi) if tol is None else tol
    tol_o = default_tol(omega) if tol is None else tol
    if not support_contained(phi, omega, tol):
        return np.inf
    p = np.linalg.eigvalsh(phi)
    p = p[p > tol_p]
    w, V = np.linalg.eigh(omega)
    on = w > tol_o
    diag = np.real(np.einsum("ij,ji->i", V[:, on].conj().T, phi @ V[:, on]))
    val = float(np.sum(p * np.log(p)) - np.sum(diag * np.log(w[on])))
    # Klein's inequality; negatives are roundoff
    return max(val, 0.0)
