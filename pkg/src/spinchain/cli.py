"""Command-line front end.

Model files are JSON documents ``{"kind": ..., "metadata": {...}, "payload": {...}}``
with matrices given as nested arrays whose entries are numbers or ``[re, im]``
pairs.  Exit status: 0 success, 2 invalid input, 3 brute-force cap exceeded,
1 anything else.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import chernoff, factorization, fcs, ldp
from .errors import CapExceededError, SpinChainError
from .operators import check_density

KINDS = ("triple", "hidden_markov", "product", "interaction", "gibbs")
EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3


class ModelError(SpinChainError):
    """Schema violations; ``violations`` is a list of {code, path, message}."""

    code = "SCHEMA"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v['path']}: [{v['code']}] {v['message']}" for v in self.violations))


@dataclass
class ModelFile:
    kind: str
    model: object
    metadata: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


# --- parsing ---------------------------------------------------------------------------


def _matrix(value, path):
    """Nested array of numbers or [re, im] pairs -> complex square matrix."""
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ModelError([{"code": "DIMENSION", "path": path, "message": "expected a nonempty list of rows"}])
    n = len(value)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != n:
            raise ModelError([{"code": "DIMENSION", "path": f"{path}[{i}]", "message": f"row has {len(row)} entries, expected {n}"}])
        for j, e in enumerate(row):
            if isinstance(e, (int, float)) and not isinstance(e, bool):
                out[i, j] = e
            elif isinstance(e, list) and len(e) == 2 and all(isinstance(c, (int, float)) for c in e):
                out[i, j] = complex(e[0], e[1])
            else:
                raise ModelError([{"code": "ENTRY", "path": f"{path}[{i}][{j}]", "message": "entry must be a number or [re, im]"}])
    return out


def _rect_matrix(value, path):
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ModelError([{"code": "DIMENSION", "path": path, "message": "expected a nonempty list of rows"}])
    width = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != width:
            raise ModelError([{"code": "DIMENSION", "path": f"{path}[{i}]", "message": "ragged rows"}])
        rows.append([complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in row])
    return np.array(rows)


def _require(payload, key, path):
    if key not in payload:
        raise ModelError([{"code": "MISSING", "path": f"{path}.{key}", "message": "required field is missing"}])
    return payload[key]


def _wrap(exc, path):
    return ModelError([{"code": exc.code, "path": path, "message": str(exc)}])


def _parse_hidden_markov(p):
    T = np.real(_matrix(_require(p, "T", "payload"), "payload.T"))
    nX = T.shape[0]
    theta_raw = _require(p, "theta", "payload")
    if not isinstance(theta_raw, list) or len(theta_raw) != nX or any(len(row) != nX for row in theta_raw):
        raise ModelError([{"code": "DIMENSION", "path": "payload.theta", "message": f"theta must be a {nX}x{nX} array of matrices"}])
    thetas = [[_matrix(theta_raw[x][y], f"payload.theta[{x}][{y}]") for y in range(nX)] for x in range(nX)]
    dims = {th.shape for row in thetas for th in row}
    if len(dims) != 1:
        raise ModelError([{"code": "DIMENSION", "path": "payload.theta", "message": "output densities differ in size"}])
    violations = []
    rows = T.sum(axis=1)
    for x in range(nX):
        if abs(rows[x] - 1.0) > 1e-9 or np.any(T[x] < -1e-12):
            violations.append({"code": "STOCHASTIC_ROW", "path": f"payload.T[{x}]", "message": f"row sums to {float(rows[x])!r}"})
    for x in range(nX):
        for y in range(nX):
            if T[x, y] > 0:
                try:
                    check_density(thetas[x][y])
                except SpinChainError as exc:
                    violations.append({"code": exc.code, "path": f"payload.theta[{x}][{y}]", "message": str(exc)})
    if violations:
        raise ModelError(violations)
    r = None if p.get("r") is None else np.asarray(p["r"], dtype=float)
    try:
        return fcs.HiddenMarkovSpec(T, np.array(thetas), r)
    except SpinChainError as exc:
        raise _wrap(exc, "payload") from None


def _parse_triple(p, notes):
    d_A = _require(p, "d_A", "payload")
    kraus_raw = _require(p, "kraus", "payload")
    if not isinstance(kraus_raw, list) or not kraus_raw:
        raise ModelError([{"code": "DIMENSION", "path": "payload.kraus", "message": "expected a nonempty list of matrices"}])
    K = [_rect_matrix(k, f"payload.kraus[{i}]") for i, k in enumerate(kraus_raw)]
    if len({k.shape for k in K}) != 1:
        raise ModelError([{"code": "DIMENSION", "path": "payload.kraus", "message": "Kraus operators differ in shape"}])
    rho = p.get("rho")
    try:
        if rho is None:
            notes.append("rho not given; stationary density of E_1^* computed and checked for faithfulness")
            return fcs.make_triple(int(d_A), np.array(K))
        return fcs.make_triple(int(d_A), np.array(K), _matrix(rho, "payload.rho"))
    except SpinChainError as exc:
        raise _wrap(exc, "payload") from None


def _parse_interaction(p):
    d_A = int(_require(p, "d_A", "payload"))
    terms = _require(p, "terms", "payload")
    mats = [None if t is None else _matrix(t, f"payload.terms[{j}]") for j, t in enumerate(terms)]
    try:
        return ldp.Interaction(d_A, tuple(mats))
    except SpinChainError as exc:
        raise _wrap(exc, "payload.terms") from None


def parse_model_text(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError([{"code": "JSON", "path": f"line {exc.lineno}, column {exc.colno}", "message": exc.msg}]) from None
    if not isinstance(doc, dict):
        raise ModelError([{"code": "SCHEMA", "path": "$", "message": "model must be a JSON object"}])
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ModelError([{"code": "KIND", "path": "kind", "message": f"kind must be one of {', '.join(KINDS)}"}])
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise ModelError([{"code": "MISSING", "path": "payload", "message": "payload object is required"}])
    notes = []
    if kind == "hidden_markov":
        model = _parse_hidden_markov(payload)
    elif kind == "triple":
        model = _parse_triple(payload, notes)
    elif kind == "product":
        try:
            model = check_density(_matrix(_require(payload, "rho", "payload"), "payload.rho"))
        except SpinChainError as exc:
            if isinstance(exc, ModelError):
                raise
            raise _wrap(exc, "payload.rho") from None
    else:
        model = _parse_interaction(payload)
    return ModelFile(kind, model, doc.get("metadata", {}) or {}, notes)


def parse_model_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_model_text(fh.read())


# --- output ------------------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(_fmt(x))
    return x


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Output:
    """Collects tables and a summary, then writes them atomically."""

    def __init__(self, directory, fmt):
        self.directory = directory
        self.fmt = fmt
        self.tables = {}
        self.summary = {}

    def table(self, name, header, rows):
        self.tables[name] = (list(header), [list(r) for r in rows])

    def write(self, command):
        summary = {"command": command, **self.summary}
        if self.fmt == "json":
            summary["tables"] = {
                name: [dict(zip(h, [_jsonable(v) for v in row])) for row in rows] for name, (h, rows) in self.tables.items()
            }
        else:
            for name, (header, rows) in self.tables.items():
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([_fmt(v) for v in row])
                _atomic_write(os.path.join(self.directory, f"{name}.csv"), buf.getvalue())
            summary["tables"] = sorted(f"{name}.csv" for name in self.tables)
        _atomic_write(os.path.join(self.directory, "summary.json"), json.dumps(_jsonable(summary), indent=2) + "\n")


# --- commands -----------------------------------------------------------------------------


class UsageError(SpinChainError):
    code = "USAGE"


def _load(path, flag):
    if path is None:
        raise UsageError(f"{flag} is required for this command")
    return parse_model_file(path)


def _triple(mf):
    if mf.kind == "hidden_markov":
        return fcs.from_hidden_markov(mf.model)
    if mf.kind == "triple":
        return mf.model
    if mf.kind == "product":
        return fcs.product_triple(mf.model)
    raise UsageError(f"this command needs a state model, got kind {mf.kind!r}")


def _state_source(mf):
    if mf.kind in ("interaction", "gibbs"):
        return mf.model  # local Gibbs states
    if mf.kind == "product":
        return mf.model
    return _triple(mf)


def _interaction(mf):
    if mf.kind not in ("interaction", "gibbs"):
        raise UsageError(f"expected an interaction model, got kind {mf.kind!r}")
    return mf.model


def _observable(arg, d):
    if arg is None:
        a = np.diag(np.arange(d, dtype=float))
        return a, "diag(0, 1, ..., d-1)"
    text = arg if arg.lstrip().startswith("[") else open(arg, encoding="utf-8").read()
    a = _matrix(json.loads(text), "observable")
    if a.shape != (d, d):
        raise UsageError(f"observable must be {d}x{d}")
    return a, "user supplied"


def _t_grid(args, default=(-3.0, 3.0)):
    lo, hi = args.t_range if args.t_range else default
    if args.t_steps < 1:
        raise UsageError("--t-steps must be positive")
    return np.linspace(lo, hi, args.t_steps)


def _cmd_validate(args, out):
    mf = _load(args.model, "--model")
    out.summary["kind"] = mf.kind
    out.summary["metadata"] = mf.metadata
    out.summary["notes"] = mf.notes
    if mf.kind in ("interaction", "gibbs"):
        phi = mf.model
        out.summary.update({"valid": True, "range": phi.range, "mean_energy_norm": ldp.mean_energy_norm(phi)})
        return EXIT_OK
    triple = _triple(mf)
    v = fcs.validate_triple(triple, tol=args.tol or 1e-9)
    out.summary.update(
        {
            "valid": v.ok,
            "failures": v.failures(),
            "residuals": {
                "unital": v.unital_residual,
                "cp_min_eigenvalue": v.cp_min_eigenvalue,
                "rho_min_eigenvalue": v.rho_min_eigenvalue,
                "rho_trace": v.rho_trace_residual,
                "rho_hermitian": v.rho_hermitian_residual,
                "invariance": v.invariance_residual,
            },
            "d_A": triple.d_A,
            "d_B": triple.d_B,
        }
    )
    return EXIT_OK if v.ok else EXIT_INVALID


def _cmd_ergodicity(args, out):
    triple = _triple(_load(args.model, "--model"))
    rep = fcs.classify_ergodicity(triple)
    out.summary.update(
        {
            "ergodic": rep.ergodic,
            "strongly_mixing": rep.strongly_mixing,
            "spectral_radius": rep.perron.spectral_radius,
            "geometric_multiplicity": rep.perron.geometric_multiplicity,
            "peripheral_eigenvalues": [complex(z) for z in rep.perron.peripheral_eigenvalues],
        }
    )
    return EXIT_OK


def _cmd_density(args, out):
    mf = _load(args.model, "--model")
    from .sources import as_density_source

    n = args.n_max or 2
    rho = as_density_source(_state_source(mf))(n)
    out.table("density", ["i", "j", "re", "im"], [(i, j, rho[i, j].real, rho[i, j].imag) for i in range(rho.shape[0]) for j in range(rho.shape[1])])
    out.summary.update({"n": n, "dim": rho.shape[0], "trace": float(np.real(np.trace(rho))), "min_eigenvalue": float(np.linalg.eigvalsh(rho)[0])})
    return EXIT_OK


def _cmd_mgf(args, out):
    triple = _triple(_load(args.model, "--model"))
    a, desc = _observable(args.observable, triple.d_A)
    n = args.n_max or 8
    rows = []
    for t in _t_grid(args):
        rows.append((t, n, ldp.log_mgf_sequence(triple, a, t, n)[-1] / n, ldp.log_mgf_limit(triple, a, t, check=False)))
    out.table("mgf", ["t", "n", "log_mgf_over_n", "F"], rows)
    out.summary.update({"observable": desc, "n": n})
    return EXIT_OK


def _cmd_rate_function(args, out):
    triple = _triple(_load(args.model, "--model"))
    a, desc = _observable(args.observable, triple.d_A)
    model = ldp.rate_function_model(triple, a, _t_grid(args))
    lo, hi = model.spectrum_bounds
    xs = np.linspace(lo, hi, args.x_steps)
    rows = []
    for x in xs:
        I = model.I(x)
        if np.isfinite(I) and lo < x < hi:
            t = model.t_star(x)
            rows.append((t, model.F(t), x, I))
        else:
            rows.append((math.inf if x >= hi else -math.inf, math.nan, x, I))
    out.table("rate_function", ["t", "F", "x", "I"], rows)
    out.table("log_mgf", ["t", "F"], zip(model.t_grid, model.F_samples))
    out.summary.update(
        {
            "observable": desc,
            "mean": model.mean,
            "I_at_mean": model.I(model.mean),
            "spectrum_bounds": list(model.spectrum_bounds),
            "convexity_residual": model.convexity_residual(),
        }
    )
    return EXIT_OK


def _cmd_distribution(args, out):
    mf = _load(args.model, "--model")
    from .sources import as_density_source

    source = _state_source(mf)
    n = args.n_max or 4
    omega = as_density_source(source)(n)
    d = int(round(omega.shape[0] ** (1.0 / n)))
    if args.interaction:
        phi = _interaction(parse_model_file(args.interaction))
        X, desc = ldp.local_hamiltonian(phi, n) / n, "H_n / n"
    else:
        a, desc = _observable(args.observable, d)
        X = ldp.average_observable(a, n)
    dist = ldp.spectral_distribution(omega, X)
    out.table("distribution", ["value", "mass"], dist.atoms)
    out.summary.update({"n": n, "observable": desc, "total_mass": dist.total_mass, "mean": dist.mean})
    return EXIT_OK


def _cmd_pressure(args, out):
    phi = _interaction(_load(args.interaction, "--interaction"))
    source = "tracial" if args.model is None else _state_source(parse_model_file(args.model))
    n_max = args.n_max or 8
    t = args.t if args.t is not None else 1.0
    curve = ldp.pressure_curve(source, phi, t, n_max, m_max=args.m or n_max)
    out.table("pressure", ["n", "value"], zip(curve.n, curve.values))
    if curve.transfer_m.size:
        out.table("pressure_transfer", ["m", "value"], zip(curve.transfer_m, curve.transfer_values))
    out.summary.update({"t": t, "bound": curve.bound, "bound_ok": curve.bound_ok, "source": "tracial" if source == "tracial" else "state"})
    return EXIT_OK


def _cmd_factorization(args, out):
    mf = _load(args.model, "--model")
    source = _state_source(mf)
    m, k, l = args.m or 2, args.k or 2, args.l or 0
    rep = factorization.weak_upper_check(source, m, l, k, tol=args.tol)
    summary = rep.as_dict()
    if l == 0 and mf.kind in ("triple", "hidden_markov", "product"):
        cert = factorization.fcs_upper_certificate(_triple(mf), m, k)
        summary.update({"certified_beta": cert.beta, "certificate_witness": cert.witness_min_eig, "certificate_passed": cert.passed})
    if mf.kind == "hidden_markov":
        crit = factorization.hmm_lower_criteria(mf.model)
        summary["verdicts"] = {"markov_tp": crit.markov_tp, "lf11": crit.lf11, "lf21": crit.lf21}
    out.summary.update(summary)
    return EXIT_OK


def _pair(args):
    return _load(args.model_a, "--model-a"), _load(args.model_b, "--model-b")


def _cmd_chernoff(args, out):
    ma, mb = _pair(args)
    sa, sb = _state_source(ma), _state_source(mb)
    n_max = args.n_max or 8
    beta, alpha = args.beta, args.alpha
    certified = []
    if beta is None and all(m.kind in ("triple", "hidden_markov", "product") for m in (ma, mb)):
        beta = max(factorization.certified_upper_constant(_triple(m)) for m in (ma, mb))
        certified.append("beta")
    if alpha is None and all(m.kind in ("triple", "hidden_markov", "product") for m in (ma, mb)):
        alpha = min(factorization.certified_lower_constant(_triple(m)) for m in (ma, mb))
        alpha = alpha if alpha > 0 else None
        if alpha is not None:
            certified.append("alpha")
    t_grid = np.linspace(0.0, 1.0, args.t_steps) if args.t_range is None else _t_grid(args)
    curve = chernoff.chernoff_curve(sa, sb, t_grid, range(1, n_max + 1), beta=beta, alpha=alpha)
    header = ["t"] + [f"xi_{n}" for n in curve.n_values] + ["upper_env", "lower_env"]
    rows = [[t, *curve.xi[:, i], curve.upper_env[i], curve.lower_env[i]] for i, t in enumerate(curve.t_grid)]
    out.table("chernoff", header, rows)
    t_star, value = chernoff.chernoff_exponent(curve)
    lo, hi = curve.exponent_interval()
    out.summary.update(
        {
            "n_max": n_max,
            "beta": beta,
            "alpha": alpha,
            "certified": certified,
            "t_star": t_star,
            "xi_n_max_min": value,
            "exponent_interval": [lo, hi],
            "sandwich_ok": curve.sandwich_ok(),
        }
    )
    return EXIT_OK


def _cmd_pmin(args, out):
    ma, mb = _pair(args)
    from .sources import as_density_source

    n = args.n_max or 4
    om = as_density_source(_state_source(ma))(n)
    sg = as_density_source(_state_source(mb))(n)
    rep = chernoff.min_error(om, sg, args.kappa)
    out.summary.update({"n": n, "kappa": args.kappa, "p_min": rep.p_min, "p_min_trace_norm": rep.p_min_trace_norm})
    return EXIT_OK


def _cmd_gibbs_bound(args, out):
    ma, mb = _pair(args)
    phi, psi = _interaction(ma), _interaction(mb)
    n_max = args.n_max or 8
    t = args.t if args.t is not None else 0.5
    gb = chernoff.gibbs_lower_bound(phi, psi, t, range(1, n_max + 1))
    out.table("gibbs_bound", ["n", "value", "log_tr_product", "log_tr_sum"], zip(gb.n_values, gb.values, gb.log_gt_product, gb.log_gt_sum))
    out.summary.update({"t": t, "golden_thompson_ok": gb.golden_thompson_ok()})
    return EXIT_OK


COMMANDS = {
    "validate": _cmd_validate,
    "ergodicity": _cmd_ergodicity,
    "density": _cmd_density,
    "mgf": _cmd_mgf,
    "rate-function": _cmd_rate_function,
    "distribution": _cmd_distribution,
    "pressure": _cmd_pressure,
    "factorization": _cmd_factorization,
    "chernoff": _cmd_chernoff,
    "pmin": _cmd_pmin,
    "gibbs-bound": _cmd_gibbs_bound,
}


def build_parser():
    p = argparse.ArgumentParser(prog="spinchain", description="Large deviations and hypothesis testing for correlated spin-chain states.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--model")
    p.add_argument("--model-a")
    p.add_argument("--model-b")
    p.add_argument("--interaction")
    p.add_argument("--observable", help="JSON matrix, inline or as a file path")
    p.add_argument("--t-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--t-steps", type=int, default=21)
    p.add_argument("--x-steps", type=int, default=101)
    p.add_argument("--t", type=float, help="single t for pressure and gibbs-bound")
    p.add_argument("--n-max", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--output", default=".")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def run(argv=None):
    """Parse arguments, run one command and return the exit status."""
    args = build_parser().parse_args(argv)
    out = Output(args.output, args.format)
    try:
        status = COMMANDS[args.command](args, out)
    except CapExceededError as exc:
        out.summary.update({"error": {"code": exc.code, "message": str(exc)}})
        status = EXIT_CAP
    except ModelError as exc:
        out.summary.update({"error": {"code": exc.violations[0]["code"], "violations": exc.violations}})
        status = EXIT_INVALID
    except SpinChainError as exc:
        out.summary.update({"error": {"code": exc.code, "message": str(exc)}})
        status = EXIT_INVALID
    except OSError as exc:
        out.summary.update({"error": {"code": "IO", "message": str(exc)}})
        status = EXIT_ERROR
    out.summary["exit_status"] = status
    if status != EXIT_OK:
        err = out.summary.get("error")
        if err:
            print(f"spinchain {args.command}: [{err['code']}] {err.get('message', '')}".rstrip(), file=sys.stderr)
            for v in err.get("violations", []):
                print(f"  {v['path']}: [{v['code']}] {v['message']}", file=sys.stderr)
    try:
        out.write(args.command)
    except OSError as exc:
        print(f"spinchain: cannot write output: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
