"""Upper and lower factorization constants.

A state factorizes from above (below) at block size m and k blocks when
omega_{km} <= beta^(k-1) omega_m^(x)k  (>= alpha^(k-1) omega_m^(x)k).
"""

from dataclasses import dataclass

import numpy as np

from . import _config
from .errors import CapExceededError
from .fcs import HiddenMarkovSpec, from_hidden_markov
from .maps import KrausMap, cp_order_gap, erasure_map
from .operators import order_gap, partial_trace, relative_entropy, support_projection, tensor_power
from .sources import as_density_source, site_dimension


def _check_cap(d, sites):
    cap = _config.brute_force_cap()
    if d ** sites > cap:
        raise CapExceededError(f"{d}**{sites} exceeds the brute-force cap {cap}")


def _min_eig(A):
    return float(np.linalg.eigvalsh((A + A.conj().T) / 2)[0])


@dataclass(frozen=True)
class FactorizationReport:
    """Minimal constants comparing a joint density with a tensor power.

    ``beta_star`` is the least beta with joint <= beta * product (``inf`` if
    the support of the joint is not inside that of the product); ``alpha_star``
    the largest alpha with joint >= alpha * product (0 if the product's support
    is not inside the joint's).  The ``*_root`` fields are the (k-1)-th roots.
    """

    m: int
    k: int
    l: int
    beta_star: float
    alpha_star: float
    support_ok_upper: bool
    support_ok_lower: bool
    upper_witness: float
    lower_witness: float

    @property
    def beta_root(self):
        return self.beta_star ** (1.0 / (self.k - 1)) if self.k > 1 else 1.0

    @property
    def alpha_root(self):
        return self.alpha_star ** (1.0 / (self.k - 1)) if self.k > 1 else 1.0

    def as_dict(self):
        return {
            "m": self.m,
            "k": self.k,
            "l": self.l,
            "beta_star": self.beta_star,
            "alpha_star": self.alpha_star,
            "beta_root": self.beta_root,
            "alpha_root": self.alpha_root,
            "support_ok_upper": self.support_ok_upper,
            "support_ok_lower": self.support_ok_lower,
            "upper_witness": self.upper_witness,
            "lower_witness": self.lower_witness,
        }


def _compare(joint, product, m, k, l, tol):
    beta = order_gap(joint, product, tol)
    inv_alpha = order_gap(product, joint, tol)
    alpha = 0.0 if not np.isfinite(inv_alpha) or inv_alpha == 0 else 1.0 / inv_alpha
    up_w = _min_eig(beta * product - joint) if np.isfinite(beta) else -np.inf
    lo_w = _min_eig(joint - alpha * product)
    return FactorizationReport(m, k, l, float(beta), float(alpha), bool(np.isfinite(beta)), alpha > 0, up_w, lo_w)


def minimal_constants(source, m, k, tol=None):
    """Minimal factorization constants of omega_{km} against omega_m^(x)k."""
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    _check_cap(site_dimension(source), k * m)
    om = as_density_source(source)
    return _compare(om(k * m), tensor_power(om(m), k), m, k, 0, tol)


def weak_upper_check(source, m, l, k, tol=None):
    """Constants for k blocks of m sites separated by gaps of l traced-out sites."""
    if l == 0:
        return minimal_constants(source, m, k, tol)
    d = site_dimension(source)
    total = k * m + (k - 1) * l
    _check_cap(d, total)
    om = as_density_source(source)
    keep = [j for b in range(k) for j in range(b * (m + l), b * (m + l) + m)]
    joint = partial_trace(om(total), [d] * total, keep)
    return _compare(joint, tensor_power(om(m), k), m, k, l, tol)


# --- certificates for finitely correlated states --------------------------------------


@dataclass(frozen=True)
class UpperCertificate:
    m: int
    k: int
    beta: float
    beta_tight: float
    beta_star: float
    witness_min_eig: float
    tol: float

    @property
    def passed(self):
        return bool(
            self.witness_min_eig >= -self.tol and self.beta ** (self.k - 1) >= self.beta_star - self.tol
        )


def _as_triple(source):
    return from_hidden_markov(source) if isinstance(source, HiddenMarkovSpec) else source


def _erased_map(triple):
    """E o (id_A (x) erase) with erase(b) = Tr(rho b) 1."""
    eps = erasure_map(triple.rho).kraus
    IA = np.eye(triple.d_A)
    ops = [Ki @ np.kron(IA, Kj) for Ki in triple.E.kraus for Kj in eps]
    return KrausMap(np.array(ops))


def certified_upper_constant(triple):
    """d_B / min eigenvalue of rho."""
    triple = _as_triple(triple)
    return triple.d_B / float(np.linalg.eigvalsh(triple.rho)[0])


def certified_lower_constant(triple):
    """Largest alpha with alpha * E o (id (x) erase) <=_CP E (0 if none exists).

    Inserting the erasure at every block boundary turns omega_{km} into
    omega_m^(x)k, so this alpha is a lower factorization constant for all m, k.
    """
    triple = _as_triple(triple)
    gap = cp_order_gap(_erased_map(triple), triple.E)
    return 0.0 if gap is None or gap == 0 else 1.0 / gap


def fcs_upper_certificate(triple, m, k, tol=1e-9):
    """Check omega_{km} <= beta^(k-1) omega_m^(x)k for beta = d_B / min eig(rho)."""
    triple = _as_triple(triple)
    beta = certified_upper_constant(triple)
    gap = cp_order_gap(triple.E, _erased_map(triple))
    report = minimal_constants(triple, m, k)
    om = as_density_source(triple)
    W = beta ** (k - 1) * tensor_power(om(m), k) - om(k * m)
    return UpperCertificate(m, k, beta, np.inf if gap is None else gap, report.beta_star, _min_eig(W), tol)


def fcs_lower_certificate(triple, m, k, tol=1e-9):
    """(alpha, min eigenvalue of omega_{km} - alpha^(k-1) omega_m^(x)k)."""
    triple = _as_triple(triple)
    alpha = certified_lower_constant(triple)
    _check_cap(triple.d_A, k * m)
    om = as_density_source(triple)
    W = om(k * m) - alpha ** (k - 1) * tensor_power(om(m), k)
    return alpha, _min_eig(W)


# --- hidden Markov criteria --------------------------------------------------------------


@dataclass(frozen=True)
class HmmCriteria:
    markov_tp: bool
    lf11: bool
    lf21: bool


def hmm_lower_criteria(spec, entry_tol=_config.ENTRY_TOL, support_tol=1e-9):
    """Sufficient conditions for lower factorization of a hidden-Markov state.

    ``lf11``: T > 0 and, for each y, the support of theta[x, y] does not depend on x.
    ``lf21``: T > 0 and, for each x, the support of theta[x, y] does not depend on y.
    """
    tp = bool(np.all(spec.T > entry_tol))
    if not tp:
        return HmmCriteria(False, False, False)
    nX = spec.n_states
    P = [[support_projection(spec.theta[x, y]) for y in range(nX)] for x in range(nX)]
    same = lambda A, B: float(np.max(np.abs(A - B))) <= support_tol
    lf11 = all(same(P[x][y], P[0][y]) for y in range(nX) for x in range(nX))
    lf21 = all(same(P[x][y], P[x][0]) for x in range(nX) for y in range(nX))
    return HmmCriteria(tp, lf11, lf21)


# --- local Gibbs states and entropies -------------------------------------------------


def gibbs_factorization_estimate(phi, m, k, tol=None):
    """Minimal constants for the local Gibbs states of an interaction."""
    return minimal_constants(phi, m, k, tol)


def mean_relative_entropy(source_phi, source_omega, n_values):
    """(1/n) S(phi_n || omega_n) for each n."""
    a = as_density_source(source_phi)
    b = as_density_source(source_omega)
    return np.array([relative_entropy(a(n), b(n)) / n for n in n_values])
