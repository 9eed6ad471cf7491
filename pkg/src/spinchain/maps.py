"""Completely positive and positive maps between matrix algebras.

Two representations are used:

* :class:`KrausMap` -- ``X -> sum_i A_i X A_i^*`` with rectangular Kraus operators;
* :class:`Superoperator` -- the matrix acting on row-major ``vec(X)``, so that
  ``vec(A X B) = (A kron B^T) vec(X)``.

Both expose ``__call__``, ``adjoint``, ``superoperator`` and ``choi``; every
function below accepts either.  The Hilbert-Schmidt adjoint of a superoperator
is its conjugate transpose.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np

from . import _config
from ._kernels import log_power_iterates
from .errors import DimensionError, NotPositiveError, SpinChainError
from .operators import check_hermitian, order_gap


def vec(X):
    return np.asarray(X).reshape(-1)


def unvec(v, d):
    return np.asarray(v).reshape(d, d)


def _choi_from_superoperator(S, in_dim, out_dim):
    # C = sum_ij E_ij (x) Phi(E_ij), input factor first
    return (
        S.reshape(out_dim, out_dim, in_dim, in_dim)
        .transpose(2, 0, 3, 1)
        .reshape(in_dim * out_dim, in_dim * out_dim)
    )


@dataclass(frozen=True, eq=False)
class Superoperator:
    matrix: np.ndarray
    in_dim: int
    out_dim: int

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        if M.shape != (self.out_dim ** 2, self.in_dim ** 2):
            raise DimensionError(
                f"superoperator matrix {M.shape} inconsistent with in_dim={self.in_dim}, out_dim={self.out_dim}"
            )
        object.__setattr__(self, "matrix", M)

    @classmethod
    def square(cls, matrix):
        matrix = np.asarray(matrix)
        d = int(round(np.sqrt(matrix.shape[0])))
        return cls(matrix, d, d)

    def __call__(self, X):
        X = np.asarray(X)
        if X.shape != (self.in_dim, self.in_dim):
            raise DimensionError(f"expected a {self.in_dim}x{self.in_dim} input, got {X.shape}")
        return unvec(self.matrix @ vec(X), self.out_dim)

    def adjoint(self):
        return Superoperator(self.matrix.conj().T, self.out_dim, self.in_dim)

    def superoperator(self):
        return self

    def choi(self):
        return _choi_from_superoperator(self.matrix, self.in_dim, self.out_dim)

    def compose(self, other):
        """``self o other`` (apply ``other`` first)."""
        other = as_superoperator(other)
        if other.out_dim != self.in_dim:
            raise DimensionError("cannot compose maps with mismatched dimensions")
        return Superoperator(self.matrix @ other.matrix, other.in_dim, self.out_dim)

    def scaled(self, c):
        return Superoperator(c * self.matrix, self.in_dim, self.out_dim)


@dataclass(frozen=True, eq=False)
class KrausMap:
    kraus: np.ndarray
    unital: bool = field(default=False)

    def __post_init__(self):
        K = np.asarray(self.kraus, dtype=complex)
        if K.ndim == 2:
            K = K[None]
        if K.ndim != 3:
            raise DimensionError(f"Kraus operators must form an (r, out, in) array, got shape {K.shape}")
        object.__setattr__(self, "kraus", K)
        if self.unital:
            res = unitality_residual(self)
            if res > 1e-9 * max(1, self.out_dim):
                raise SpinChainError(f"map flagged unital but Phi(I) deviates by {res:.3e}", code="NOT_UNITAL")

    @property
    def in_dim(self):
        return self.kraus.shape[2]

    @property
    def out_dim(self):
        return self.kraus.shape[1]

    def __call__(self, X):
        X = np.asarray(X)
        if X.shape != (self.in_dim, self.in_dim):
            raise DimensionError(f"expected a {self.in_dim}x{self.in_dim} input, got {X.shape}")
        K = self.kraus
        return np.einsum("kij,jl,kml->im", K, X, K.conj(), optimize=True)

    def adjoint(self):
        return KrausMap(self.kraus.conj().transpose(0, 2, 1))

    def superoperator(self):
        K = self.kraus
        r, o, i = K.shape
        M = np.einsum("kab,kcd->acbd", K, K.conj()).reshape(o * o, i * i)
        return Superoperator(M, i, o)

    def choi(self):
        # sum_k vec(A_k) vec(A_k)^* with the input index first
        V = self.kraus.transpose(0, 2, 1).reshape(self.kraus.shape[0], -1)
        return V.T @ V.conj()


def as_superoperator(m):
    if isinstance(m, (KrausMap, Superoperator)):
        return m.superoperator()
    return Superoperator.square(m)


def apply_map(m, X):
    return m(X)


def adjoint_map(m):
    return m.adjoint()


def unitality_residual(m):
    d = m.in_dim
    if d != m.out_dim:
        return np.inf
    return float(np.max(np.abs(m(np.eye(d)) - np.eye(d))))


def choi_and_cp_check(m, psd_tol=None):
    """Choi matrix of ``m`` and whether it is PSD (complete positivity)."""
    C = m.choi()
    C = (C + C.conj().T) / 2
    psd_tol = _config.default_tol(C) if psd_tol is None else psd_tol
    return C, bool(np.linalg.eigvalsh(C)[0] >= -psd_tol)


# --- standard maps -----------------------------------------------------------


def identity_map(d):
    return KrausMap(np.eye(d)[None])


def transpose_map(d):
    M = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            M[j * d + i, i * d + j] = 1.0
    return Superoperator(M, d, d)


def erasure_map(rho):
    """``b -> Tr(rho b) I``, the map whose CP-order gap to the identity is bounded by d/min r_i."""
    rho = check_hermitian(rho)
    d = rho.shape[0]
    w, V = np.linalg.eigh(rho)
    ops = [np.sqrt(max(w[i], 0.0)) * np.outer(np.eye(d)[j], V[:, i].conj()) for i in range(d) for j in range(d)]
    return KrausMap(np.array(ops))


def completely_depolarizing(d):
    ops = [np.outer(np.eye(d)[i], np.eye(d)[j]) / np.sqrt(d) for i in range(d) for j in range(d)]
    return KrausMap(np.array(ops))


def stochastic_map(T):
    """Diagonal-algebra embedding of a nonnegative matrix: ``diag(b) -> diag(T b)``.

    Off-diagonal inputs are annihilated.
    """
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    ops = []
    for x in range(d):
        for y in range(d):
            if T[x, y] > 0:
                K = np.zeros((d, d))
                K[x, y] = np.sqrt(T[x, y])
                ops.append(K)
    if not ops:
        ops.append(np.zeros((d, d)))
    return KrausMap(np.array(ops))


def random_kraus_map(in_dim, out_dim=None, rank=2, rng=None):
    rng = np.random.default_rng(rng)
    out_dim = in_dim if out_dim is None else out_dim
    K = rng.normal(size=(rank, out_dim, in_dim)) + 1j * rng.normal(size=(rank, out_dim, in_dim))
    return KrausMap(K / np.sqrt(rank * in_dim))


# --- spectra -----------------------------------------------------------------


def superoperator_spectrum(m):
    """All eigenvalues of the superoperator matrix (sorted by decreasing modulus) and the spectral radius."""
    S = as_superoperator(m)
    if S.in_dim != S.out_dim:
        raise DimensionError("spectrum needs a map from an algebra to itself")
    eigs = np.linalg.eigvals(S.matrix)
    order = np.lexsort((-eigs.imag, -eigs.real, -np.abs(eigs)))
    eigs = eigs[order]
    return eigs, float(np.abs(eigs[0])) if eigs.size else 0.0


def spectral_radius(m):
    return superoperator_spectrum(m)[1]


@dataclass(frozen=True)
class PerronData:
    spectral_radius: float
    right_vector: np.ndarray
    left_density: np.ndarray
    geometric_multiplicity: int
    peripheral_eigenvalues: np.ndarray
    right_residual: float
    left_residual: float


@dataclass(frozen=True)
class PositivityStructure:
    irreducible: bool
    primitive: bool
    perron: PerronData
    right_strictly_positive: bool
    left_strictly_positive: bool
    warnings: tuple = ()


def _hermitian_from_eigvec(v, d):
    X = unvec(v, d)
    tr = np.trace(X)
    if abs(tr) > 1e-300:
        X = X * (np.conj(tr) / abs(tr))
    else:
        k = np.argmax(np.abs(np.diag(X)))
        ph = X[k, k]
        if abs(ph) > 0:
            X = X * (np.conj(ph) / abs(ph))
    return (X + X.conj().T) / 2


def _strictly_positive(H, tol):
    w = np.linalg.eigvalsh(H)
    return bool(w[-1] > 0 and w[0] > tol * w[-1])


def classify_positivity_structure(
    m,
    peripheral_tol=_config.PERIPHERAL_TOL,
    eig_cluster_tol=_config.EIG_CLUSTER_TOL,
    strict_pos_tol=_config.STRICT_POS_TOL,
    rank_tol=_config.RANK_TOL,
):
    """Irreducibility and primitivity of a positive map via its Perron data.

    Irreducible iff the spectral radius is a geometrically simple eigenvalue of
    the map and of its adjoint, both with strictly positive eigenvectors.
    Primitive iff irreducible with no other eigenvalue on the spectral circle.
    """
    S = as_superoperator(m)
    if S.in_dim != S.out_dim:
        raise DimensionError("classification needs a map from an algebra to itself")
    d = S.in_dim
    eigs, r = superoperator_spectrum(S)
    scale = max(1.0, float(np.max(np.abs(S.matrix))))
    if r < rank_tol * scale:
        raise SpinChainError("spectral radius is numerically zero", code="ZERO_MAP")
    notes = []

    A = S.matrix - r * np.eye(d * d)
    U, sv, Vh = np.linalg.svd(A)
    geo = int(np.sum(sv <= eig_cluster_tol * r))
    cluster = int(np.sum(np.abs(eigs - r) <= eig_cluster_tol * r))
    if geo == 0:
        # eigenvalue r not resolved by the SVD threshold; fall back to the eigenvalue count
        geo = max(cluster, 1)
        notes.append("spectral radius eigenvalue poorly conditioned")
    if cluster != geo:
        notes.append(f"eigenvalue cluster size {cluster} differs from geometric multiplicity {geo}")

    z = _hermitian_from_eigvec(Vh[-1].conj(), d)
    rho = _hermitian_from_eigvec(U[:, -1], d)
    z_pos = _strictly_positive(z, strict_pos_tol)
    rho_pos = _strictly_positive(rho, strict_pos_tol)
    if np.real(np.trace(rho)) != 0:
        rho = rho / np.real(np.trace(rho))
    if np.real(np.trace(z)) != 0:
        z = z / np.real(np.trace(z))
    right_res = float(np.max(np.abs(S(z) - r * z)))
    left_res = float(np.max(np.abs(S.adjoint()(rho) - r * rho)))

    peripheral = eigs[np.abs(eigs) >= r * (1.0 - peripheral_tol)]
    irreducible = geo == 1 and z_pos and rho_pos
    primitive = irreducible and peripheral.size == 1
    perron = PerronData(r, z, rho, geo, peripheral, right_res, left_res)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return PositivityStructure(irreducible, primitive, perron, z_pos, rho_pos, tuple(notes))


def cp_order_gap(phi, psi, psd_tol=None):
    """Minimal ``beta`` with ``phi <=_CP beta * psi``, or ``None`` if no finite beta exists.

    Both maps must be completely positive.
    """
    if (phi.in_dim, phi.out_dim) != (psi.in_dim, psi.out_dim):
        raise DimensionError("cp_order_gap needs maps with equal dimensions")
    C_phi, ok_phi = choi_and_cp_check(phi, psd_tol)
    C_psi, ok_psi = choi_and_cp_check(psi, psd_tol)
    if not (ok_phi and ok_psi):
        raise NotPositiveError("cp_order_gap needs completely positive maps")
    beta = order_gap(C_phi, C_psi, psd_tol)
    return None if not np.isfinite(beta) else beta


def cp_order_witness(phi, psi, beta):
    """Minimum eigenvalue of Choi(beta * psi - phi)."""
    C = beta * psi.choi() - phi.choi()
    return float(np.linalg.eigvalsh((C + C.conj().T) / 2)[0])


@dataclass(frozen=True)
class RateCurve:
    """(1/n) log phi(Phi^n(x)) for n = 1..n_max together with its limit log r."""

    values: np.ndarray
    increments: np.ndarray
    limit: float

    @property
    def deviation(self):
        return float(abs(self.values[-1] - self.limit))

    @property
    def increment_deviation(self):
        return float(abs(self.increments[-1] - self.limit))


def asymptotic_rate_curve(m, functional, x, n_max):
    """Finite-n exponential growth rates of ``functional(Phi^n(x))``.

    ``functional`` is the density of a positive functional (phi(y) = Tr(functional y))
    and ``x`` a strictly positive operator.  ``increments`` holds the one-step
    log ratios log phi(Phi^n x) - log phi(Phi^(n-1) x), which converge to
    ``limit`` geometrically, while ``values`` converge only like 1/n.
    """
    S = as_superoperator(m)
    x = check_hermitian(x)
    wx = np.linalg.eigvalsh(x)
    if wx[0] <= _config.STRICT_POS_TOL * max(wx[-1], 0.0) or wx[-1] <= 0:
        raise NotPositiveError("x must be strictly positive")
    f = check_hermitian(functional)
    wf = np.linalg.eigvalsh(f)
    if wf[0] < -_config.default_tol(f) or wf[-1] <= 0:
        raise NotPositiveError("functional must be nonzero and positive")
    # Tr(f y) = vec(f^T) . vec(y)
    logs = log_power_iterates(S.matrix, vec(x), vec(f.T), n_max)
    n = np.arange(1, n_max + 1)
    log0 = np.log(np.real(np.trace(f @ x)))
    inc = np.diff(np.concatenate([[log0], logs]))
    return RateCurve(logs / n, inc, float(np.log(spectral_radius(S))))
