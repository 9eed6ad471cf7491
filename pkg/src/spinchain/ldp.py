"""Interactions, distributions of ergodic averages, moment generating functions,
rate functions and pressures."""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _config
from ._kernels import log_power_iterates, merge_sorted_atoms
from .errors import CapExceededError, DimensionError, ReducibleMapError
from .fcs import GeneratingTriple, block_transfer_map, classify_ergodicity
from .maps import spectral_radius
from .operators import check_hermitian, expm_h, shift_embed, spectral_decomposition

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_cap(d, n):
    cap = _config.brute_force_cap()
    if d ** n > cap:
        raise CapExceededError(f"d**n = {d ** n} exceeds the brute-force cap {cap}")


# --- interactions ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Interaction:
    """Translation-invariant finite-range interaction.

    ``terms[j]`` is the operator on the window of j + 1 consecutive sites
    starting at a fixed site (``None`` or a zero matrix for an absent window).
    Translates of these windows generate the whole interaction.
    """

    d_A: int
    terms: tuple

    def __post_init__(self):
        clean = []
        for j, term in enumerate(self.terms):
            dim = self.d_A ** (j + 1)
            if term is None:
                clean.append(np.zeros((dim, dim), dtype=complex))
                continue
            term = check_hermitian(term)
            if term.shape != (dim, dim):
                raise DimensionError(f"window term {j} must be {dim}x{dim}, got {term.shape}")
            clean.append(term)
        while clean and not np.any(clean[-1]):
            clean.pop()
        object.__setattr__(self, "terms", tuple(clean))

    @property
    def range(self):
        """Largest window length minus one (0 for one-site interactions, -1 if empty)."""
        return len(self.terms) - 1

    def scaled(self, c):
        return Interaction(self.d_A, tuple(c * term for term in self.terms))

    def __add__(self, other):
        if other.d_A != self.d_A:
            raise DimensionError("interactions act on different site dimensions")
        short, long_ = sorted((self.terms, other.terms), key=len)
        out = [t + s for t, s in zip(long_, short)] + list(long_[len(short):])
        return Interaction(self.d_A, tuple(out))


def zero_interaction(d_A):
    return Interaction(d_A, ())


def one_site_interaction(h):
    h = np.asarray(h)
    return Interaction(h.shape[0], (h,))


def ising_interaction(J=1.0, h_z=0.0, h_x=0.0):
    """Qubit chain with J z(x)z couplings and fields h_z z + h_x x."""
    return Interaction(2, (h_z * PAULI_Z + h_x * PAULI_X, J * np.kron(PAULI_Z, PAULI_Z)))


def local_hamiltonian(phi, n):
    """H_n: sum of all translated windows lying inside n sites."""
    _check_cap(phi.d_A, n)
    H = np.zeros((phi.d_A ** n,) * 2, dtype=complex)
    for j, term in enumerate(phi.terms):
        if j + 1 > n or not np.any(term):
            continue
        for site in range(n - j):
            H += shift_embed(term, site, n, phi.d_A)
    return H


def mean_energy_operator(phi):
    """A = sum over windows X containing a fixed site of Phi(X)/|X|.

    Windows reach up to ``range`` sites on either side, so A lives on
    2 * range + 1 sites with the fixed site in the middle.
    """
    R = max(phi.range, 0)
    n = 2 * R + 1
    A = np.zeros((phi.d_A ** n,) * 2, dtype=complex)
    for j, term in enumerate(phi.terms):
        for start in range(R - j, R + 1):
            A += shift_embed(term, start, n, phi.d_A) / (j + 1)
    return A


def mean_energy_norm(phi):
    A = mean_energy_operator(phi)
    return float(np.max(np.abs(np.linalg.eigvalsh(A)))) if A.size else 0.0


def average_observable(a, n):
    """(1/n) sum_k gamma^k(a) for a one-site observable a."""
    a = check_hermitian(a)
    d = a.shape[0]
    _check_cap(d, n)
    return sum(shift_embed(a, k, n, d) for k in range(n)) / n


# --- distributions ---------------------------------------------------------------


@dataclass(frozen=True)
class SpectralDistribution:
    """Finitely supported probability measure with strictly increasing atoms."""

    values: np.ndarray
    masses: np.ndarray

    @property
    def atoms(self):
        return list(zip(self.values.tolist(), self.masses.tolist()))

    @property
    def total_mass(self):
        return float(np.sum(self.masses))

    @property
    def mean(self):
        return float(np.dot(self.values, self.masses))

    def mass(self, lo, hi, closed=True, tol=0.0):
        """mu([lo, hi]) (closed) or mu((lo, hi)) (open), with atoms nudged by tol."""
        v = self.values
        if closed:
            sel = (v >= lo - tol) & (v <= hi + tol)
        else:
            sel = (v > lo + tol) & (v < hi - tol)
        return float(np.sum(self.masses[sel]))

    def mgf(self, s):
        """Integral of exp(s x), evaluated stably as exp(log-sum-exp)."""
        on = self.masses > 0
        z = s * self.values[on] + np.log(self.masses[on])
        zmax = np.max(z)
        return float(np.exp(zmax) * np.sum(np.exp(z - zmax)))


def spectral_distribution(omega, X, merge_tol=_config.ATOM_MERGE_TOL):
    """Distribution of the observable X in the state with density omega."""
    omega = np.asarray(omega)
    X = check_hermitian(X)
    if omega.shape != X.shape:
        raise DimensionError(f"density {omega.shape} and observable {X.shape} differ in size")
    w, V = np.linalg.eigh(X)
    masses = np.real(np.einsum("ij,ji->i", V.conj().T, omega @ V))
    masses = np.clip(masses, 0.0, None)
    vals, mass = merge_sorted_atoms(w, masses, merge_tol)
    return SpectralDistribution(vals, mass)


# --- moment generating functions ---------------------------------------------------


def _transfer_superoperator(triple, a, t):
    return triple.transfer_map(expm_h(t * check_hermitian(a)))


def log_mgf_sequence(triple, a, t, n_max):
    """log m_n(t) for n = 1..n_max, with m_n(t) = rho(E_{exp(ta)}^n(1))."""
    S = _transfer_superoperator(triple, a, t)
    dB = triple.d_B
    return log_power_iterates(S.matrix, np.eye(dB).reshape(-1), triple.rho.T.reshape(-1), n_max)


def mgf_exact(triple, a, t, n):
    """m_n(t) = omega(exp(n t A_n)) through n applications of the transfer map."""
    return float(np.exp(log_mgf_sequence(triple, a, t, n)[-1]))


def log_mgf_limit(triple, a, t, check=True):
    """F(t) = log r(E_{exp(ta)})."""
    if check and not classify_ergodicity(triple).ergodic:
        warnings.warn("E_1 is not irreducible; log r(t) need not be the MGF limit", RuntimeWarning, stacklevel=2)
    return float(np.log(spectral_radius(_transfer_superoperator(triple, a, t))))


@dataclass(eq=False)
class RateFunctionModel:
    """Convex conjugate of F(t) = log r(E_{exp(ta)}) for an ergodic triple."""

    triple: GeneratingTriple
    a: np.ndarray
    t_grid: np.ndarray
    fd_step: float = _config.FD_STEP
    t_cap: float = _config.T_CAP
    F_samples: np.ndarray = field(init=False)
    spectrum_bounds: tuple = field(init=False)
    mean: float = field(init=False)

    def __post_init__(self):
        self.a = check_hermitian(self.a)
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.F_samples = np.array([self.F(t) for t in self.t_grid])
        w = np.linalg.eigvalsh(self.a)
        self.spectrum_bounds = (float(w[0]), float(w[-1]))
        self.mean = self.dF(0.0)
        self._edge = {}

    def F(self, t):
        return log_mgf_limit(self.triple, self.a, t, check=False)

    def dF(self, t):
        h = self.fd_step
        return (self.F(t + h) - self.F(t - h)) / (2 * h)

    def convexity_residual(self):
        """Most negative second difference of the sampled F (0 if fewer than 3 samples)."""
        if self.F_samples.size < 3:
            return 0.0
        return float(min(np.min(np.diff(self.F_samples, 2)), 0.0))

    def _edge_value(self, which):
        # I at a spectrum edge: -log r(E_P) with P the spectral projection at that edge
        if which not in self._edge:
            sd = spectral_decomposition(self.a, merge_tol=_config.ATOM_MERGE_TOL)
            P = sd.projectors[-1] if which == "max" else sd.projectors[0]
            r = spectral_radius(self.triple.transfer_map(P))
            self._edge[which] = float(-np.log(r)) if r > 0 else np.inf
        return self._edge[which]

    def I(self, x, edge_tol=1e-12):
        lo, hi = self.spectrum_bounds
        scale = max(1.0, hi - lo)
        if x > hi + edge_tol * scale or x < lo - edge_tol * scale:
            return np.inf
        if hi - lo <= edge_tol * scale:
            return self._edge_value("max")
        if abs(x - hi) <= edge_tol * scale:
            return self._edge_value("max")
        if abs(x - lo) <= edge_tol * scale:
            return self._edge_value("min")
        t_star = self.t_star(x)
        return max(t_star * x - self.F(t_star), 0.0)

    def t_star(self, x):
        """Maximizer of t x - F(t), clipped to [-t_cap, t_cap]."""
        g = lambda t: self.dF(t) - x
        lo_t, hi_t = -self.t_cap, self.t_cap
        g_lo, g_hi = g(lo_t), g(hi_t)
        if g_lo <= 0 <= g_hi:
            return brentq(g, lo_t, hi_t, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        # F'(t) = x only beyond the cap: maximize on the bounded interval and flag it
        warnings.warn(
            f"supremum for x={x!r} not attained within |t| <= {self.t_cap}; reporting a lower bound",
            RuntimeWarning,
            stacklevel=3,
        )
        res = minimize_scalar(lambda t: self.F(t) - t * x, bounds=(lo_t, hi_t), method="bounded")
        return float(res.x)

    def evaluate(self, xs):
        return np.array([self.I(x) for x in np.atleast_1d(xs)])


def rate_function_model(triple, a, t_grid=None, **kw):
    """Build the rate-function model, refusing when E_1 is not irreducible."""
    report = classify_ergodicity(triple)
    if not report.ergodic:
        raise ReducibleMapError("E_1 is not irreducible; the rate function is not defined through log r(t)")
    t_grid = np.linspace(-3, 3, 25) if t_grid is None else t_grid
    return RateFunctionModel(triple, a, t_grid, **kw)


def rate_function(triple, a, x):
    """I(x) = sup_t (t x - log r(t)); accepts a scalar or an array of x."""
    model = rate_function_model(triple, a, t_grid=np.zeros(0))
    out = model.evaluate(x)
    return float(out[0]) if np.ndim(x) == 0 else out


# --- pressure ----------------------------------------------------------------------


@dataclass(frozen=True)
class PressureCurve:
    """(1/n) log omega(exp(-t H_n)) for n in ``n``; transfer values for triples."""

    t: float
    n: np.ndarray
    values: np.ndarray
    transfer_m: np.ndarray
    transfer_values: np.ndarray
    bound: float

    @property
    def bound_ok(self):
        vals = np.concatenate([self.values, self.transfer_values])
        return bool(np.all(np.abs(vals) <= self.bound + 1e-9))


def _density_sequence(source):
    from .sources import as_density_source

    return as_density_source(source)


def _log_trace_exp(H):
    w = np.linalg.eigvalsh(H)
    wmax = np.max(w)
    return float(wmax + np.log(np.sum(np.exp(w - wmax))))


def finite_pressure(source, phi, t, n):
    """(1/n) log omega(exp(-t H_n)); ``source="tracial"`` uses the normalized trace."""
    H = -t * local_hamiltonian(phi, n)
    if isinstance(source, str) and source == "tracial":
        return (_log_trace_exp(H) - n * np.log(phi.d_A)) / n
    omega = _density_sequence(source)(n)
    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    wmax = np.max(w)
    weights = np.real(np.einsum("ij,ji->i", V.conj().T, omega @ V))
    val = np.sum(np.clip(weights, 0.0, None) * np.exp(w - wmax))
    return float((wmax + np.log(val)) / n)


def finite_pressure_grid(source, phi, t_grid, n):
    """finite_pressure at every t of the grid from one eigendecomposition of H_n."""
    H = local_hamiltonian(phi, n)
    w, V = np.linalg.eigh(H)
    if isinstance(source, str) and source == "tracial":
        weights = np.full(w.size, phi.d_A ** (-float(n)))
    else:
        omega = _density_sequence(source)(n)
        weights = np.clip(np.real(np.einsum("ij,ji->i", V.conj().T, omega @ V)), 0.0, None)
    out = []
    for t in np.atleast_1d(t_grid):
        z = -t * w
        zmax = np.max(z)
        out.append((zmax + np.log(np.sum(weights * np.exp(z - zmax)))) / n)
    return np.array(out)


def transfer_pressure(triple, phi, t, m):
    """(1/m) log r(E_{exp(-t H_m)})."""
    X = expm_h(-t * local_hamiltonian(phi, m))
    return float(np.log(spectral_radius(block_transfer_map(triple, X))) / m)


def pressure_curve(source, phi, t, n_max, m_max=None, n_min=1, m_min=1):
    """Finite-n pressure approximants, plus transfer values for a triple source."""
    ns = np.arange(n_min, n_max + 1)
    vals = np.array([finite_pressure(source, phi, t, n) for n in ns])
    ms = np.zeros(0, dtype=int)
    tvals = np.zeros(0)
    if isinstance(source, GeneratingTriple):
        m_max = n_max if m_max is None else m_max
        ms = np.arange(m_min, m_max + 1)
        tvals = np.array([transfer_pressure(source, phi, t, m) for m in ms])
    return PressureCurve(float(t), ns, vals, ms, tvals, abs(t) * mean_energy_norm(phi))


def gibbs_local_state(phi, n):
    """exp(-H_n) / Tr exp(-H_n)."""
    H = local_hamiltonian(phi, n)
    w, V = np.linalg.eigh(H)
    p = np.exp(-(w - w[0]))
    p /= p.sum()
    G = (V * p) @ V.conj().T
    return (G + G.conj().T) / 2
