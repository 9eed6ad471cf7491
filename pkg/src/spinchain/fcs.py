"""Finitely correlated states generated by a triple (B, E, rho).

Conventions: ``E : A (x) B -> B`` is unital and completely positive, stored as
Kraus operators of shape ``(d_B, d_A * d_B)`` with the site factor first.
The auxiliary algebra is always the full matrix algebra ``M_{d_B}``; commutative
auxiliary algebras are embedded as diagonal matrices.
"""

from dataclasses import dataclass
from functools import cached_property
import warnings

import numpy as np

from . import _config
from .errors import CapExceededError, DimensionError, NotPositiveError, SpinChainError, TripleError
from .maps import KrausMap, Superoperator, as_superoperator, classify_positivity_structure, unvec, vec
from .operators import check_density, num_sites


@dataclass(frozen=True, eq=False)
class GeneratingTriple:
    d_A: int
    d_B: int
    E: KrausMap
    rho: np.ndarray

    def __post_init__(self):
        E = self.E if isinstance(self.E, KrausMap) else KrausMap(self.E)
        object.__setattr__(self, "E", E)
        if E.in_dim != self.d_A * self.d_B or E.out_dim != self.d_B:
            raise DimensionError(
                f"E must map {self.d_A * self.d_B}-dim matrices to {self.d_B}-dim ones, "
                f"got Kraus shape {E.kraus.shape[1:]}"
            )
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (self.d_B, self.d_B):
            raise DimensionError(f"rho must be {self.d_B}x{self.d_B}, got {rho.shape}")
        object.__setattr__(self, "rho", rho)

    @cached_property
    def site_tensors(self):
        """W[(s, s')] = sum_i A_i^s (x) conj(A_i^{s'}), shape (d_A**2, d_B**2, d_B**2).

        ``sum_{s,s'} a[s, s'] W[(s, s')]`` is the superoperator of ``b -> E(a (x) b)``.
        """
        dA, dB = self.d_A, self.d_B
        K = self.E.kraus.reshape(-1, dB, dA, dB)  # (i, beta, s, gamma)
        W = np.einsum("ibsg,idth->stbdgh", K, K.conj(), optimize=True)
        return W.reshape(dA * dA, dB * dB, dB * dB)

    @cached_property
    def adjoint_kraus(self):
        """Kraus operators of E^*, each of shape (d_A * d_B, d_B)."""
        return self.E.kraus.conj().transpose(0, 2, 1)

    def transfer_map(self, a):
        """Superoperator of ``b -> E(a (x) b)`` for a one-site operator ``a``."""
        a = np.asarray(a)
        if a.shape != (self.d_A, self.d_A):
            raise DimensionError(f"one-site operator must be {self.d_A}x{self.d_A}")
        M = np.tensordot(a.reshape(-1), self.site_tensors, axes=(0, 0))
        return Superoperator(M, self.d_B, self.d_B)

    @property
    def E1(self):
        return self.transfer_map(np.eye(self.d_A))

    def expectation(self, X):
        """omega(X) for X on d_A**m sites, evaluated through the transfer maps."""
        S = block_transfer_map(self, X)
        return complex(np.trace(self.rho @ S(np.eye(self.d_B))))


def make_triple(d_A, kraus, rho=None, faithful_tol=_config.FAITHFUL_TOL):
    """Build a triple; without ``rho`` the stationary density of E_1^* is used.

    A computed stationary density must be faithful, otherwise ``TripleError``.
    """
    E = kraus if isinstance(kraus, KrausMap) else KrausMap(kraus)
    d_B = E.out_dim
    if d_A * d_B != E.in_dim:
        raise DimensionError(f"Kraus input dimension {E.in_dim} is not d_A * d_B = {d_A * d_B}")
    if rho is not None:
        return GeneratingTriple(d_A, d_B, E, rho)
    draft = GeneratingTriple(d_A, d_B, E, np.eye(d_B) / d_B)
    rho, _ = stationary_state(draft.E1)
    if np.linalg.eigvalsh(rho)[0] <= faithful_tol:
        raise TripleError("stationary density is not faithful", code="NOT_FAITHFUL")
    return GeneratingTriple(d_A, d_B, E, rho)


def random_triple(d_A, d_B, rank=2, rng=None):
    """Random triple: E^* has a Haar-like isometric Kraus stack, rho is stationary."""
    rng = np.random.default_rng(rng)
    G = rng.normal(size=(rank * d_A * d_B, d_B)) + 1j * rng.normal(size=(rank * d_A * d_B, d_B))
    Q, _ = np.linalg.qr(G)
    L = Q.reshape(rank, d_A * d_B, d_B)
    return make_triple(d_A, L.conj().transpose(0, 2, 1))


def product_triple(phi1):
    """d_B = 1 triple whose state is the product of the one-site density ``phi1``."""
    phi1 = check_density(phi1)
    w, V = np.linalg.eigh(phi1)
    ops = [np.sqrt(max(w[i], 0.0)) * V[:, i].conj()[None, :] for i in range(len(w)) if w[i] > 0]
    return GeneratingTriple(phi1.shape[0], 1, KrausMap(np.array(ops)), np.ones((1, 1)))


# --- hidden Markov constructions ---------------------------------------------


def stationary_distribution(T):
    """Stationary row vector r = r T of a row-stochastic matrix (a left Perron vector)."""
    T = np.asarray(T, dtype=float)
    w, V = np.linalg.eig(T.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    r = np.real(V[:, k])
    return r / r.sum()


@dataclass(frozen=True, eq=False)
class HiddenMarkovSpec:
    """Markov chain T with stationary r and output densities theta[x, y] on the site.

    ``theta`` has shape (|X|, |X|, d_A, d_A); entries with T[x, y] = 0 are ignored.
    """

    T: np.ndarray
    theta: np.ndarray
    r: np.ndarray = None
    tol: float = 1e-9

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise DimensionError(f"T must be square, got {T.shape}")
        nX = T.shape[0]
        if np.any(T < -self.tol):
            raise SpinChainError("T has negative entries", code="STOCHASTIC_ROW")
        rows = T.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > self.tol)
        if bad.size:
            raise SpinChainError(f"row {int(bad[0])} of T sums to {float(rows[bad[0]])!r}", code="STOCHASTIC_ROW")
        theta = np.asarray(self.theta, dtype=complex)
        if theta.ndim != 4 or theta.shape[:2] != (nX, nX) or theta.shape[2] != theta.shape[3]:
            raise DimensionError(f"theta must have shape ({nX}, {nX}, d, d), got {theta.shape}")
        for x in range(nX):
            for y in range(nX):
                if T[x, y] > 0:
                    try:
                        check_density(theta[x, y])
                    except SpinChainError as exc:
                        raise type(exc)(f"theta[{x}][{y}]: {exc}", code=exc.code) from None
        r = stationary_distribution(T) if self.r is None else np.asarray(self.r, dtype=float)
        if r.shape != (nX,):
            raise DimensionError(f"r must have length {nX}")
        if np.max(np.abs(r @ T - r)) > self.tol or abs(r.sum() - 1.0) > self.tol:
            raise SpinChainError("r is not a stationary distribution of T", code="NOT_STATIONARY")
        if np.any(r <= 0):
            raise SpinChainError("stationary distribution is not strictly positive", code="NOT_FAITHFUL")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", r)

    @property
    def n_states(self):
        return self.T.shape[0]

    @property
    def d_A(self):
        return self.theta.shape[2]

    def output_density(self, x):
        """Theta_x = sum_w T[x, w] theta[x, w]."""
        return np.einsum("w,wij->ij", self.T[x], self.theta[x])


def classical_markov_spec(T, r=None):
    """HMM whose site value is the current chain state (theta[x, y] = |x><x|)."""
    T = np.asarray(T, dtype=float)
    nX = T.shape[0]
    theta = np.zeros((nX, nX, nX, nX))
    for x in range(nX):
        theta[x, :, x, x] = 1.0
    return HiddenMarkovSpec(T, theta, r)


def from_hidden_markov(spec):
    """Triple with diagonal auxiliary algebra: E^*(|x><x|) = sum_y T[x,y] theta[x,y] (x) |y><y|."""
    nX, dA = spec.n_states, spec.d_A
    ops = []
    for x in range(nX):
        for y in range(nX):
            if spec.T[x, y] <= 0:
                continue
            w, V = np.linalg.eigh((spec.theta[x, y] + spec.theta[x, y].conj().T) / 2)
            for k in range(dA):
                if w[k] <= 0:
                    continue
                L = np.zeros((dA * nX, nX), dtype=complex)
                L[:, x] = np.sqrt(spec.T[x, y] * w[k]) * np.kron(V[:, k], np.eye(nX)[y])
                ops.append(L.conj().T)
    return GeneratingTriple(dA, nX, KrausMap(np.array(ops)), np.diag(spec.r).astype(complex))


# --- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class TripleValidation:
    unital_residual: float
    cp_min_eigenvalue: float
    rho_min_eigenvalue: float
    rho_trace_residual: float
    rho_hermitian_residual: float
    invariance_residual: float
    tol: float
    faithful_tol: float

    @property
    def checks(self):
        return {
            "unital": self.unital_residual <= self.tol,
            "completely_positive": self.cp_min_eigenvalue >= -self.tol,
            "rho_density": self.rho_trace_residual <= self.tol and self.rho_hermitian_residual <= self.tol,
            "rho_faithful": self.rho_min_eigenvalue > self.faithful_tol,
            "invariant": self.invariance_residual <= self.tol,
        }

    @property
    def ok(self):
        return all(self.checks.values())

    def failures(self):
        return [name for name, passed in self.checks.items() if not passed]


def validate_triple(triple, tol=1e-9, faithful_tol=_config.FAITHFUL_TOL):
    """Residuals of unitality, complete positivity, faithfulness and invariance.

    Failed checks are reported, not raised.
    """
    dA, dB = triple.d_A, triple.d_B
    E = triple.E
    unital = float(np.max(np.abs(E(np.eye(dA * dB)) - np.eye(dB))))
    C = E.choi()
    cp_min = float(np.linalg.eigvalsh((C + C.conj().T) / 2)[0])
    rho = triple.rho
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    rho_h = (rho + rho.conj().T) / 2
    rho_min = float(np.linalg.eigvalsh(rho_h)[0])
    tr_res = float(abs(np.trace(rho) - 1.0))
    inv = float(np.max(np.abs(triple.E1.adjoint()(rho) - rho)))
    return TripleValidation(unital, cp_min, rho_min, tr_res, herm, inv, tol, faithful_tol)


# --- local densities and transfer maps -------------------------------------------


def _check_cap(d_A, n):
    cap = _config.brute_force_cap()
    if d_A ** n > cap:
        raise CapExceededError(f"d_A**n = {d_A ** n} exceeds the brute-force cap {cap}")


def local_density(triple, n):
    """omega_n = Tr_B (id^(n-1) (x) E^*) o ... o E^*(rho), built site by site."""
    if n < 1:
        raise ValueError("n must be positive")
    dA, dB = triple.d_A, triple.d_B
    _check_cap(dA, n)
    L = triple.adjoint_kraus  # (i, dA*dB, dB)
    phi = triple.rho.reshape(1, dB, 1, dB)
    for _ in range(n):
        D = phi.shape[0]
        new = np.zeros((D, dA * dB, D, dA * dB), dtype=complex)
        for Li in L:
            t1 = np.tensordot(phi, Li, axes=(1, 1))  # (D, D, dB, dAdB)
            t2 = np.tensordot(t1, Li.conj(), axes=(2, 1))  # (D, D, dAdB, dAdB)
            new += t2.transpose(0, 2, 1, 3)
        phi = new.reshape(D * dA, dB, D * dA, dB)
    omega = np.einsum("ibjb->ij", phi)
    return (omega + omega.conj().T) / 2


def block_transfer_map(triple, X):
    """Superoperator of ``b -> E^(m)(X (x) b)`` for X acting on m sites.

    For X = a_1 (x) ... (x) a_m this is E_{a_1} o ... o E_{a_m}.
    """
    X = np.asarray(X)
    dA, dB = triple.d_A, triple.d_B
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError("X must be square")
    m = num_sites(X.shape[0], dA)
    if m == 0:
        return Superoperator(complex(X[0, 0]) * np.eye(dB * dB), dB, dB)
    W = triple.site_tensors
    # (s_1..s_m, s'_1..s'_m) -> ((s_1 s'_1), ..., (s_m s'_m))
    V = X.reshape((dA,) * (2 * m))
    V = V.transpose([ax for k in range(m) for ax in (k, m + k)]).reshape((dA * dA,) * m)
    V = np.tensordot(V, W, axes=([m - 1], [0]))
    for _ in range(m - 1):
        V = np.einsum("...plj,pil->...ij", V, W, optimize=True)
    return Superoperator(V, dB, dB)


def transfer_map(triple, a):
    return triple.transfer_map(a)


# --- ergodicity -------------------------------------------------------------------


@dataclass(frozen=True)
class ErgodicityReport:
    ergodic: bool
    strongly_mixing: bool
    perron: object


def classify_ergodicity(triple):
    """Ergodic iff E_1 is irreducible; strongly mixing iff E_1 is primitive."""
    s = classify_positivity_structure(triple.E1)
    return ErgodicityReport(s.irreducible, s.primitive, s.perron)


def stationary_state(E1, tol=1e-9):
    """A density rho with E_1^*(rho) = rho, and the dimension of the fixed space.

    A multi-dimensional fixed space triggers a warning; the returned density is
    then the projection of the maximally mixed state onto it.
    """
    S = as_superoperator(E1)
    d = S.in_dim
    A = S.matrix.conj().T - np.eye(d * d)
    U, sv, Vh = np.linalg.svd(A)
    mult = int(np.sum(sv <= 1e-8 * max(1.0, float(sv[0]))))
    if mult == 1:
        rho = unvec(Vh[-1].conj(), d)
        rho = rho * (np.conj(np.trace(rho)) / abs(np.trace(rho)))
    else:
        if mult > 1:
            warnings.warn(f"fixed space of E_1^* has dimension {mult}; returning one fixed density", RuntimeWarning)
        # ((id + E_1^*)/2)^(2^k) converges to the projection onto the fixed space
        M = (np.eye(d * d) + S.matrix.conj().T) / 2
        for _ in range(64):
            M = M @ M
        rho = unvec(M @ vec(np.eye(d) / d), d)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.real(np.trace(rho))
    if np.linalg.eigvalsh(rho)[0] < -tol or np.max(np.abs(S.adjoint()(rho) - rho)) > 1e3 * tol:
        raise NotPositiveError("no positive fixed density found for E_1^*", code="NO_FIXED_POINT")
    return rho, max(mult, 1)
