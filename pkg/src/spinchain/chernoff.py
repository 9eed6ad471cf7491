"""Binary state discrimination: minimum error probabilities, quasi-traces,
Chernoff curves with factorization envelopes, the hidden-Markov Q(t) matrix and
the Golden-Thompson bound for local Gibbs pairs."""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy.optimize import minimize_scalar

from ._kernels import log_power_iterates
from .errors import DimensionError, HypothesisViolation
from .ldp import local_hamiltonian
from .maps import spectral_radius
from .operators import check_hermitian, power_h
from .sources import as_density_source

NEG_INF = float("-inf")


# --- single-shot discrimination -----------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    kappa: float
    p_min: float
    p_min_trace_norm: float
    optimal_projection: np.ndarray

    @property
    def route_gap(self):
        return abs(self.p_min - self.p_min_trace_norm)


def min_error(omega, sigma, kappa=0.5):
    """Optimal Bayesian error for omega (prior kappa) against sigma.

    The optimal test accepts omega on the strictly positive part of
    kappa * omega - (1 - kappa) * sigma.  ``p_min`` evaluates the error of that
    test directly, ``p_min_trace_norm`` uses 1/2 - ||D||_1 / 2.
    """
    omega = check_hermitian(omega)
    sigma = check_hermitian(sigma)
    if omega.shape != sigma.shape:
        raise DimensionError(f"shape mismatch {omega.shape} vs {sigma.shape}")
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    D = kappa * omega - (1 - kappa) * sigma
    w, V = np.linalg.eigh(D)
    Vp = V[:, w > 0]
    P = Vp @ Vp.conj().T
    direct = kappa * np.real(np.trace(omega) - np.trace(omega @ P)) + (1 - kappa) * np.real(np.trace(sigma @ P))
    via_norm = 0.5 - 0.5 * float(np.sum(np.abs(w)))
    return ErrorReport(kappa, float(direct), via_norm, P)


def quasi_trace(omega, sigma, t, tol=None):
    """Tr omega^(1-t) sigma^t with powers taken on supports (0^s = 0)."""
    A = power_h(omega, 1.0 - t, tol)
    B = power_h(sigma, t, tol)
    return float(max(np.real(np.einsum("ij,ji->", A, B)), 0.0))


def _log(x):
    return np.log(x) if x > 0 else NEG_INF


# --- Chernoff curves -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChernoffCurve:
    """xi_n(t) = (1/n) log Tr omega_n^(1-t) sigma_n^t on a grid, with envelopes.

    ``upper_env`` / ``lower_env`` are computed from block sizes m dividing the
    largest n, for which xi_{km} <= (1/m)(log beta + log q_m) (and dually with
    alpha) hold at every k.  Missing constants give +inf / -inf envelopes.
    """

    t_grid: np.ndarray
    n_values: np.ndarray
    xi: np.ndarray
    upper_env: np.ndarray
    lower_env: np.ndarray
    beta: float = None
    alpha: float = None
    evaluator: object = None

    @property
    def xi_last(self):
        return self.xi[-1]

    def exponent_interval(self):
        """[min_t lower_env, min_t upper_env], bracketing the limiting exponent."""
        return float(np.min(self.lower_env)), float(np.min(self.upper_env))

    def sandwich_ok(self, tol=1e-9):
        x = self.xi_last
        with np.errstate(invalid="ignore"):
            lo = np.all((self.lower_env <= x + tol) | (self.lower_env == NEG_INF))
            hi = np.all((x <= self.upper_env + tol) | (x == NEG_INF))
        return bool(lo and hi)


def chernoff_curve(source_a, source_b, t_grid, n_sweep, beta=None, alpha=None):
    """Finite-n Chernoff curves for two state sources.

    ``beta`` (>= 1) and ``alpha`` (<= 1) are upper and lower factorization
    constants shared by both states.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise ValueError("empty t-grid")
    ns = np.array(sorted(set(int(n) for n in n_sweep)))
    if ns.size == 0 or ns[0] < 1:
        raise ValueError("n-sweep must contain positive integers")
    om = as_density_source(source_a)
    sg = as_density_source(source_b)
    xi = np.array([[_log(quasi_trace(om(n), sg(n), t)) / n for t in t_grid] for n in ns])
    n_max = int(ns[-1])
    upper = np.full(t_grid.size, np.inf)
    lower = np.full(t_grid.size, NEG_INF)
    for i, m in enumerate(ns):
        if n_max % m:
            continue
        if beta is not None:
            upper = np.minimum(upper, (np.log(beta) + m * xi[i]) / m)
        if alpha is not None and alpha > 0:
            lower = np.maximum(lower, (np.log(alpha) + m * xi[i]) / m)
    evaluator = lambda t: _log(quasi_trace(om(n_max), sg(n_max), t)) / n_max
    return ChernoffCurve(t_grid, ns, xi, upper, lower, beta, alpha, evaluator)


def chernoff_exponent(curve, t_grid=None):
    """(t*, min over [0, 1] of xi) by grid scan plus bounded scalar refinement.

    ``curve`` may be a ``ChernoffCurve`` (its largest-n values), a
    ``QMatrixModel`` factory ``t -> model`` or any callable ``t -> xi(t)``.
    """
    if isinstance(curve, ChernoffCurve):
        grid, vals, f = curve.t_grid, curve.xi_last, curve.evaluator
    else:
        f = curve
        grid = np.linspace(0, 1, 41) if t_grid is None else np.asarray(t_grid, dtype=float)
        if grid.size == 0:
            raise ValueError("empty t-grid")
        vals = np.array([_xi_of(f(t)) for t in grid])
    if grid.size == 0:
        raise ValueError("empty t-grid")
    i = int(np.argmin(vals))
    t_best, v_best = float(grid[i]), float(vals[i])
    if v_best == NEG_INF or f is None or grid.size < 2:
        return t_best, v_best
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda t: _xi_of(f(t)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    if res.fun < v_best:
        t_best, v_best = float(res.x), float(res.fun)
    return t_best, v_best


def _xi_of(v):
    return v.xi if isinstance(v, QMatrixModel) else float(v)


# --- hidden-Markov Q(t) --------------------------------------------------------------


@dataclass(frozen=True)
class QMatrixModel:
    t: float
    Q: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def xi(self):
        r = spectral_radius(self.Q) if self.Q.size > 1 else abs(float(self.Q.reshape(-1)[0]))
        return _log(r)

    def log_quasi_trace(self, n_max):
        """log <a, Q^(n-1) b> for n = 1..n_max."""
        first = _log(float(self.a @ self.b))
        if n_max == 1:
            return np.array([first])
        rest = log_power_iterates(self.Q, self.b, self.a, n_max - 1)
        return np.concatenate([[first], rest])

    def quasi_trace(self, n):
        return float(self.a @ np.linalg.matrix_power(self.Q, n - 1) @ self.b)


def _check_orthogonal_blocks(spec, name, tol):
    nX = spec.n_states
    for x in range(nX):
        for xp in range(x + 1, nX):
            for w in range(nX):
                for wp in range(nX):
                    if spec.T[x, w] <= 0 or spec.T[xp, wp] <= 0:
                        continue
                    overlap = np.max(np.abs(spec.theta[x, w] @ spec.theta[xp, wp]))
                    if overlap > tol:
                        raise HypothesisViolation(
                            f"{name}: supports of theta[{x}][{w}] and theta[{xp}][{wp}] are not orthogonal "
                            f"(overlap {overlap:.2e}); use chernoff_curve for this pair"
                        )


def _pow0(M, s):
    # entrywise power with 0^s = 0 for every s
    out = np.zeros_like(M, dtype=float)
    on = M > 0
    out[on] = M[on] ** s
    return out


def q_matrix_model(spec_a, spec_b, t, tol=1e-10):
    """Q(t), a(t), b(t) for two hidden-Markov specs with orthogonal output blocks.

    Requires that output densities with distinct first chain index have
    orthogonal supports, for each spec separately.
    """
    if spec_a.d_A != spec_b.d_A:
        raise DimensionError("specs act on different site dimensions")
    _check_orthogonal_blocks(spec_a, "first state", tol)
    _check_orthogonal_blocks(spec_b, "second state", tol)
    T, S = spec_a.T, spec_b.T
    nX, nY = T.shape[0], S.shape[0]
    Ta, Sb = _pow0(T, 1 - t), _pow0(S, t)
    th_p = {}
    ph_p = {}
    for x in range(nX):
        for w in range(nX):
            if T[x, w] > 0:
                th_p[x, w] = power_h(spec_a.theta[x, w], 1 - t)
    for y in range(nY):
        for z in range(nY):
            if S[y, z] > 0:
                ph_p[y, z] = power_h(spec_b.theta[y, z], t)
    Q = np.zeros((nX * nY, nX * nY))
    for x in range(nX):
        for y in range(nY):
            for w in range(nX):
                for z in range(nY):
                    if (x, w) in th_p and (y, z) in ph_p:
                        q = np.real(np.einsum("ij,ji->", th_p[x, w], ph_p[y, z]))
                        Q[x * nY + y, w * nY + z] = Ta[x, w] * Sb[y, z] * max(q, 0.0)
    a = np.outer(_pow0(spec_a.r, 1 - t), _pow0(spec_b.r, t)).reshape(-1)
    b = np.array(
        [
            quasi_trace(spec_a.output_density(x), spec_b.output_density(y), t)
            for x in range(nX)
            for y in range(nY)
        ]
    )
    pos = np.array([T[x, w] > 0 and S[y, z] > 0 for x in range(nX) for y in range(nY) for w in range(nX) for z in range(nY)])
    if np.any(Q.reshape(-1)[pos] <= 0):
        warnings.warn("some quasi-trace entries of Q(t) vanish; primitivity of Q(t) is not guaranteed", RuntimeWarning)
    return QMatrixModel(float(t), Q, a, b)


# --- Gibbs pairs -------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsBound:
    t: float
    n_values: np.ndarray
    values: np.ndarray
    log_gt_product: np.ndarray
    log_gt_sum: np.ndarray

    @property
    def golden_thompson_gap(self):
        """log Tr e^A e^B - log Tr e^(A+B) per n; nonnegative by Golden-Thompson."""
        return self.log_gt_product - self.log_gt_sum

    def golden_thompson_ok(self, tol=1e-11):
        return bool(np.all(self.golden_thompson_gap >= -tol))


def _log_trace_exp(H):
    w = np.linalg.eigvalsh(H)
    wmax = np.max(w)
    return float(wmax + np.log(np.sum(np.exp(w - wmax))))


def _log_trace_exp_product(A, B):
    # log Tr e^A e^B with both exponentials shifted by their top eigenvalue
    wa, Va = np.linalg.eigh(A)
    wb, Vb = np.linalg.eigh(B)
    ea = (Va * np.exp(wa - wa[-1])) @ Va.conj().T
    eb = (Vb * np.exp(wb - wb[-1])) @ Vb.conj().T
    tr = np.real(np.einsum("ij,ji->", ea, eb))
    return float(wa[-1] + wb[-1] + np.log(tr))


def gibbs_lower_bound(phi, psi, t, n_sweep):
    """Finite-n values of P((1-t)Phi + t Psi) - (1-t) P(Phi) - t P(Psi) and Golden-Thompson checks."""
    ns = np.array(sorted(set(int(n) for n in n_sweep)))
    vals, prod, summ = [], [], []
    for n in ns:
        Hp = local_hamiltonian(phi, n)
        Hq = local_hamiltonian(psi, n)
        A = -(1 - t) * Hp
        B = -t * Hq
        mix = _log_trace_exp(A + B)
        vals.append((mix - (1 - t) * _log_trace_exp(-Hp) - t * _log_trace_exp(-Hq)) / n)
        prod.append(_log_trace_exp_product(A, B))
        summ.append(mix)
    return GibbsBound(float(t), ns, np.array(vals), np.array(prod), np.array(summ))
