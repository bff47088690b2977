"""Deterministic JSON/CSV emission with round-trip-exact floats.

Floats are rendered with 17 significant digits, which reproduces the exact
double on re-parse; keys are emitted sorted and lines end with LF, so equal
inputs serialize to byte-identical documents.
"""

from __future__ import annotations

import json

import numpy as np

from .design import BoundReport, LqgSolution, PolicyBundle
from .model import CostWeights, LinearSystem, NominalMoments
from .riccati import SteadyStateSolution

__all__ = [
    "format_float",
    "dumps_json",
    "write_json",
    "write_csv",
    "steady_to_dict",
    "steady_from_dict",
    "bound_to_dict",
    "bound_from_dict",
    "bundle_to_dict",
    "bundle_from_dict",
]


def format_float(x):
    """17-significant-digit decimal form; always parses back as a float."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("cannot serialize non-finite float %r" % x)
    if x == 0.0:
        x = 0.0  # normalize -0.0
    text = format(x, ".17g")
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def _render(obj, indent):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj):
            items.append('%s  "%s": %s' % (pad, key, _render(obj[key], indent + 1)))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = ["%s  %s" % (pad, _render(v, indent + 1)) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist(), indent)
    raise TypeError("cannot serialize %r" % type(obj))


def dumps_json(obj):
    return _render(obj, 0) + "\n"


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_json(obj))


def write_csv(path, header, rows):
    """CSV with LF endings, '.' decimals, and 17-significant-digit floats."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return format_float(v)
        return str(v)

    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def _matrix(a):
    return np.asarray(a, dtype=float).tolist()


def steady_to_dict(s):
    return {
        "lam": s.lam,
        "theta": s.theta,
        "P": _matrix(s.P),
        "S": _matrix(s.S),
        "r": _matrix(s.r),
        "K": _matrix(s.K),
        "L": _matrix(s.L),
        "H": _matrix(s.H),
        "G": _matrix(s.G),
        "Phi": _matrix(s.Phi),
        "Sigma_star": _matrix(s.Sigma_star),
        "X_prior": _matrix(s.X_prior),
        "X_post": _matrix(s.X_post),
        "z": s.z,
        "rho": s.rho,
    }


def steady_from_dict(d):
    return SteadyStateSolution(
        lam=float(d["lam"]),
        theta=None if d["theta"] is None else float(d["theta"]),
        P=np.array(d["P"], dtype=float),
        S=np.array(d["S"], dtype=float),
        r=np.array(d["r"], dtype=float),
        K=np.array(d["K"], dtype=float),
        L=np.array(d["L"], dtype=float),
        H=np.array(d["H"], dtype=float),
        G=np.array(d["G"], dtype=float),
        Phi=np.array(d["Phi"], dtype=float),
        Sigma_star=np.array(d["Sigma_star"], dtype=float),
        X_prior=np.array(d["X_prior"], dtype=float),
        X_post=np.array(d["X_post"], dtype=float),
        z=float(d["z"]),
        rho=float(d["rho"]),
    )


def bound_to_dict(b):
    return {"lam": b.lam, "theta": b.theta, "rho": b.rho, "bound": b.bound}


def bound_from_dict(d):
    return BoundReport(lam=float(d["lam"]), theta=float(d["theta"]),
                       rho=float(d["rho"]), bound=float(d["bound"]))


def _lqg_to_dict(s):
    return {
        "P": _matrix(s.P), "K": _matrix(s.K), "L": _matrix(s.L),
        "r": _matrix(s.r), "X_prior": _matrix(s.X_prior), "X_post": _matrix(s.X_post),
    }


def _lqg_from_dict(d):
    return LqgSolution(
        P=np.array(d["P"], dtype=float), K=np.array(d["K"], dtype=float),
        L=np.array(d["L"], dtype=float), r=np.array(d["r"], dtype=float),
        X_prior=np.array(d["X_prior"], dtype=float),
        X_post=np.array(d["X_post"], dtype=float),
    )


def bundle_to_dict(bundle):
    system = bundle.system
    weights = bundle.weights
    return {
        "method": bundle.method,
        "system": {
            "A": _matrix(system.A), "B": _matrix(system.B), "C": _matrix(system.C),
            "M": _matrix(system.M), "m0": _matrix(system.m0), "M0": _matrix(system.M0),
        },
        "weights": {"Q": _matrix(weights.Q), "Qf": _matrix(weights.Qf), "R": _matrix(weights.R)},
        "nominal": {"w_hat": _matrix(bundle.nominal.w_hat),
                    "sigma_hat": _matrix(bundle.nominal.sigma_hat)},
        "steady": None if bundle.steady is None else steady_to_dict(bundle.steady),
        "lqg": None if bundle.lqg is None else _lqg_to_dict(bundle.lqg),
        "estimator_gain": _matrix(bundle.estimator_gain),
        "provenance": dict(bundle.provenance),
    }


def bundle_from_dict(d):
    sys_d = d["system"]
    system = LinearSystem(A=sys_d["A"], B=sys_d["B"], C=sys_d["C"],
                          M=sys_d["M"], m0=sys_d["m0"], M0=sys_d["M0"])
    w_d = d["weights"]
    weights = CostWeights(Q=w_d["Q"], Qf=w_d["Qf"], R=w_d["R"])
    nominal = NominalMoments(w_hat=d["nominal"]["w_hat"],
                             sigma_hat=d["nominal"]["sigma_hat"])
    gain = np.array(d["estimator_gain"], dtype=float)
    return PolicyBundle(
        method=d["method"], system=system, weights=weights, nominal=nominal,
        steady=None if d["steady"] is None else steady_from_dict(d["steady"]),
        lqg=None if d["lqg"] is None else _lqg_from_dict(d["lqg"]),
        estimator_gain=gain, provenance=dict(d["provenance"]),
    )
