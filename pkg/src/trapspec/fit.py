"""Least-squares recovery of the measured quantities.

Two fitting problems from the experiment are covered: (a) the maximum
modulation index, resonance width, and mode frequency from joint carrier +
sideband drive scans via |A_n J_n(m(f))|^2 with the Lorentzian m(f), and
(b) laser and field parameters from a fluorescence-vs-detuning scan using
the eight-level Bloch model as the forward model.

The optimizer core is scipy.optimize.least_squares (trust-region
Levenberg-Marquardt with bounds); this module owns the parameter handling,
degeneracy diagnostics, covariance, and initial-guess heuristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import j0, j1

from .bloch import SteadyStateModel
from .errors import ConfigurationError, DomainError, NonIdentifiableError
from .motion import lorentzian_mod_index

_SINGULAR_RTOL = 1e-10


@dataclass(frozen=True)
class FreeParameter:
    name: str
    initial: float
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if not self.lower <= self.initial <= self.upper:
            raise ConfigurationError(
                f"initial value of {self.name} outside its bounds"
            )


@dataclass
class TraceModel:
    """A named forward model with fixed values and free parameters."""

    kind: str  # carrier_J0 | sideband_J1 | bloch_scan
    fixed: dict = field(default_factory=dict)
    free: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("carrier_J0", "sideband_J1", "bloch_scan"):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")

    def evaluate(self, x: np.ndarray, values: dict) -> np.ndarray:
        params = dict(self.fixed)
        params.update(values)
        if self.kind in ("carrier_J0", "sideband_J1"):
            m = lorentzian_mod_index(
                np.asarray(x, dtype=float),
                params["m_max"],
                params["f_macro"],
                params["delta_f"],
            )
            bessel = j0(m) if self.kind == "carrier_J0" else j1(m)
            amp = params["a0"] if self.kind == "carrier_J0" else params["a1"]
            return (amp * bessel) ** 2
        raise ConfigurationError("bloch_scan models are evaluated by fit_bloch_scan")


@dataclass
class FitResult:
    """Converged parameters with uncertainties from the final Jacobian."""

    parameters: dict
    standard_errors: dict | None
    residual_norm: float
    iterations: int
    converged: bool
    covariance: np.ndarray | None = None
    parameter_names: list = field(default_factory=list)
    message: str = ""
    masked_points: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "standard_errors": (
                None
                if self.standard_errors is None
                else {k: float(v) for k, v in self.standard_errors.items()}
            ),
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "parameter_names": list(self.parameter_names),
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "message": self.message,
            "masked_points": list(self.masked_points),
        }


def _sorted_copy(x, y, sigma):
    """Lexicographic sort so fits are exactly permutation-invariant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if sigma is None:
        order = np.lexsort((y, x))
        return x[order], y[order], None
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    order = np.lexsort((sig, y, x))
    return x[order], y[order], sig[order]


def _check_identifiable(jac: np.ndarray, names, scale=None) -> None:
    """Flag a singular Jacobian, in relative (scaled) parameter units."""
    j = np.asarray(jac, dtype=float)
    if scale is not None:
        j = j * np.asarray(scale, dtype=float)[None, :]
    _, s, vh = np.linalg.svd(j, full_matrices=False)
    if s[0] == 0 or s[-1] / s[0] < _SINGULAR_RTOL:
        v = vh[-1]
        terms = [
            f"{v[i]:+.2f}*{names[i]}" for i in range(len(names)) if abs(v[i]) > 0.2
        ]
        raise NonIdentifiableError(" ".join(terms) or names[int(np.argmax(np.abs(v)))])


def least_squares(
    model_fn,
    x,
    y,
    p0,
    names,
    sigma=None,
    bounds=None,
    max_nfev: int | None = None,
    x_scale=None,
    diff_step=None,
) -> FitResult:
    """Damped Gauss-Newton (Levenberg-Marquardt family) fit of model_fn.

    model_fn(x, p_vector) -> y_model. Converges on relative step < 1e-9 or
    relative cost change < 1e-12; the covariance comes from the final
    Jacobian (scaled by the reduced chi-square when sigma is not given).
    Raises NonIdentifiableError when the Jacobian is singular, naming the
    degenerate parameter combination.
    """
    x, y, sig = _sorted_copy(x, y, sigma)
    if len(x) < len(p0) + 1:
        raise ConfigurationError("need at least n_parameters + 1 data points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ConfigurationError("data contain non-finite values")
    w = 1.0 if sig is None else 1.0 / sig

    def residuals(p):
        return (model_fn(x, p) - y) * w

    kwargs = {}
    if bounds is not None:
        kwargs["bounds"] = bounds
        kwargs["method"] = "trf"
    else:
        kwargs["method"] = "lm"
    if x_scale is not None:
        kwargs["x_scale"] = x_scale
    if diff_step is not None:
        kwargs["diff_step"] = diff_step
    res = optimize.least_squares(
        residuals,
        np.asarray(p0, dtype=float),
        xtol=1e-9,
        ftol=1e-12,
        gtol=1e-14,
        max_nfev=max_nfev,
        **kwargs,
    )
    converged = bool(res.success)
    scale = [max(abs(v), 1e-12) for v in res.x]
    _check_identifiable(res.jac, names, scale)
    params = dict(zip(names, res.x))
    errors = None
    cov = None
    if converged:
        _, s, vh = np.linalg.svd(res.jac, full_matrices=False)
        cov = (vh.T / s**2) @ vh
        if sig is None:
            dof = max(len(y) - len(names), 1)
            cov = cov * (2 * res.cost / dof)
        errors = dict(zip(names, np.sqrt(np.diag(cov))))
    return FitResult(
        parameters=params,
        standard_errors=errors,
        residual_norm=float(np.linalg.norm(res.fun)),
        iterations=int(res.nfev),
        converged=converged,
        covariance=cov,
        parameter_names=list(names),
        message=res.message,
    )


def _as_xy(trace):
    """Accept (x, y) arrays or a SpectrumTrace-like object."""
    if hasattr(trace, "bin_centers"):
        return np.asarray(trace.bin_centers, float), np.asarray(trace.power, float)
    x, y = trace
    return np.asarray(x, float), np.asarray(y, float)


def _invert_j0_squared(dip: float) -> float:
    """m with J0(m)^2 = dip, on the first branch m in [0, 2.40)."""
    dip = min(max(dip, 1e-6), 1.0)
    target = math.sqrt(dip)
    if target >= 1.0:
        return 0.0
    return optimize.brentq(lambda m: j0(m) - target, 0.0, 2.404, xtol=1e-10)


def _initial_guesses(f, y_carrier, y_sideband):
    edge = max(3, len(f) // 10)
    baseline = float(np.median(np.concatenate([y_carrier[:edge], y_carrier[-edge:]])))
    baseline = max(baseline, 1e-12 * max(y_carrier.max(), 1.0))
    i_max = int(np.argmax(y_sideband))
    f0 = float(f[i_max])
    # Half-height width of the sideband peak as the width seed.
    half = 0.5 * (y_sideband.max() + float(np.median(y_sideband[:edge])))
    above = np.nonzero(y_sideband >= half)[0]
    if len(above) >= 2:
        width = float(f[above[-1]] - f[above[0]])
    else:
        width = float((f[-1] - f[0]) / 10)
    width = max(width, float(f[1] - f[0]))
    m_max = _invert_j0_squared(float(y_carrier.min()) / baseline)
    m_max = min(max(m_max, 0.05), 2.3)
    a0 = math.sqrt(baseline)
    a1 = math.sqrt(max(y_sideband.max(), 1e-12 * baseline) / max(j1(m_max) ** 2, 1e-6))
    return a0, a1, m_max, width, f0


def fit_sideband_pair(
    carrier_trace,
    sideband_trace,
    sigma=None,
    joint: bool = True,
    fit_db: bool = False,
):
    """Fit |A_n J_n(m(f_drive))|^2, n = 0 and 1, to a drive-scan trace pair.

    Both traces must share the f_drive grid. The default joint fit shares
    (m_max, delta_f, f_macro) between the traces; joint=False returns the
    two separate fits instead. Powers are fitted in linear units unless
    fit_db is set. Initial guesses are derived from the data (sideband
    argmax, half-height width, carrier dip depth).
    """
    f_c, y_c = _as_xy(carrier_trace)
    f_s, y_s = _as_xy(sideband_trace)
    if f_c.shape != f_s.shape or not np.allclose(f_c, f_s, rtol=0, atol=1e-9 * max(abs(f_c[-1]), 1.0)):
        raise ConfigurationError("carrier and sideband traces must share the f_drive grid")
    a0, a1, m_max0, df0, f00 = _initial_guesses(f_c, y_c, y_s)
    span = float(f_c[-1] - f_c[0])

    def transform(y):
        if fit_db:
            return 10 * np.log10(np.maximum(y, 1e-300))
        return y

    if joint:
        names = ["a0", "a1", "m_max", "delta_f", "f_macro"]
        p0 = [a0, a1, m_max0, df0, f00]
        lower = [0.0, 0.0, 1e-3, 1e-3, f_c[0] - span]
        upper = [np.inf, np.inf, 2.4, 100 * span, f_c[-1] + span]
        x_all = np.concatenate([f_c, f_s])
        y_all = transform(np.concatenate([y_c, y_s]))
        tag = np.concatenate([np.zeros(len(f_c)), np.ones(len(f_s))])

        def model(xv, p):
            m = lorentzian_mod_index(xv, p[2], p[4], p[3])
            out = np.where(tag_sorted == 0, (p[0] * j0(m)) ** 2, (p[1] * j1(m)) ** 2)
            return transform(out)

        # Sorting must carry the carrier/sideband tag along; encode it into x
        # by an offset far outside the scan, then strip it inside the model.
        offset = 10 * (abs(f_c[-1]) + span + 1.0)
        x_tagged = x_all + tag * offset
        order = np.lexsort((y_all, x_tagged))
        x_sorted = x_all[order]
        tag_sorted = tag[order]
        y_sorted = y_all[order]
        sig_sorted = None
        if sigma is not None:
            sig_c, sig_s = sigma if isinstance(sigma, (tuple, list)) else (sigma, sigma)
            sig_all = np.concatenate(
                [np.broadcast_to(np.asarray(sig_c, float), y_c.shape),
                 np.broadcast_to(np.asarray(sig_s, float), y_s.shape)]
            )
            sig_sorted = sig_all[order]
        w = 1.0 if sig_sorted is None else 1.0 / sig_sorted

        def residuals(p):
            return (model(x_sorted, p) - y_sorted) * w

        res = optimize.least_squares(
            residuals, p0, bounds=(lower, upper), method="trf",
            xtol=1e-9, ftol=1e-12, gtol=1e-14,
            x_scale=[max(abs(v), 1e-3) for v in p0],
        )
        _check_identifiable(res.jac, names, [max(abs(v), 1e-12) for v in res.x])
        cov = None
        errors = None
        if res.success:
            _, s, vh = np.linalg.svd(res.jac, full_matrices=False)
            cov = (vh.T / s**2) @ vh
            if sig_sorted is None:
                dof = max(len(y_sorted) - len(names), 1)
                cov = cov * (2 * res.cost / dof)
            errors = dict(zip(names, np.sqrt(np.diag(cov))))
        return FitResult(
            parameters=dict(zip(names, res.x)),
            standard_errors=errors,
            residual_norm=float(np.linalg.norm(res.fun)),
            iterations=int(res.nfev),
            converged=bool(res.success),
            covariance=cov,
            parameter_names=names,
            message=res.message,
        )

    results = {}
    for label, kind, amp0, y in (
        ("carrier", "carrier_J0", a0, y_c),
        ("sideband", "sideband_J1", a1, y_s),
    ):
        model_obj = TraceModel(kind)
        amp_name = "a0" if kind == "carrier_J0" else "a1"
        names = [amp_name, "m_max", "delta_f", "f_macro"]

        def model(xv, p, _m=model_obj, _names=tuple(names)):
            return transform(_m.evaluate(xv, dict(zip(_names, p))))

        results[label] = least_squares(
            model,
            f_c,
            transform(y),
            [amp0, m_max0, df0, f00],
            names,
            sigma=sigma if not isinstance(sigma, (tuple, list)) else sigma[0 if label == "carrier" else 1],
            bounds=([0.0, 1e-3, 1e-3, f_c[0] - span], [np.inf, 2.4, 100 * span, f_c[-1] + span]),
            x_scale=[max(abs(amp0), 1e-3), 1.0, max(df0, 1.0), max(f00, 1.0)],
        )
    return results


_BLOCH_PARAM_MAP = {
    "delta_493": "delta_493",
    "delta_650": "delta_650",
    "i_493": "intensity_493",
    "i_650": "intensity_650",
    "b_field": "b_field",
}
_BLOCH_FREE_DEFAULT = ("delta_493", "i_493", "i_650", "b_field", "scale")


def fit_bloch_scan(
    detunings_650,
    fluorescence,
    model: SteadyStateModel,
    free=_BLOCH_FREE_DEFAULT,
    p0: dict | None = None,
    sigma=None,
    bounds: dict | None = None,
) -> FitResult:
    """Fit the eight-level model to a fluorescence scan over the 650 detuning.

    Free parameters are a subset of {delta_493, i_650, i_493, b_field,
    scale}; initial guesses default to the model's configured values
    (override via p0). Each evaluation is a full steady-state scan; points
    whose steady state fails are masked and reported.
    """
    x = np.asarray(detunings_650, dtype=float)  # rad/s
    y = np.asarray(fluorescence, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigurationError("scan data must be matching 1-d arrays")
    bad = set(free) - set(_BLOCH_FREE_DEFAULT) - {"delta_650"}
    if bad:
        raise ConfigurationError(f"unknown free parameters: {sorted(bad)}")
    order = np.lexsort((y, x))
    x, y = x[order], y[order]
    sig = None
    if sigma is not None:
        sig = np.broadcast_to(np.asarray(sigma, float), y.shape)[order]
    w = 1.0 if sig is None else 1.0 / sig

    base = {
        "delta_493": model.laser_493.detuning,
        "delta_650": model.laser_650.detuning,
        "i_493": model.laser_493.intensity,
        "i_650": model.laser_650.intensity,
        "b_field": model.b_field,
        "scale": 1.0,
    }
    if p0:
        unknown = set(p0) - set(base)
        if unknown:
            raise ConfigurationError(f"unknown initial-guess keys: {sorted(unknown)}")
        base.update(p0)
    names = list(free)
    p_init = [base[n] for n in names]
    default_bounds = {
        "delta_493": (-np.inf, np.inf),
        "delta_650": (-np.inf, np.inf),
        "i_493": (0.0, np.inf),
        "i_650": (0.0, np.inf),
        "b_field": (0.0, np.inf),
        "scale": (1e-12, np.inf),
    }
    if bounds:
        default_bounds.update(bounds)
    lower = [default_bounds[n][0] for n in names]
    upper = [default_bounds[n][1] for n in names]
    masked: set[int] = set()

    def forward(p):
        values = dict(base)
        values.update(dict(zip(names, p)))
        overrides = {
            _BLOCH_PARAM_MAP[k]: values[k] for k in _BLOCH_PARAM_MAP if k != "delta_650"
        }
        out = np.empty_like(x)
        for i, d in enumerate(x):
            try:
                out[i] = model.p_population(delta_650=d, **overrides)
            except Exception:
                masked.add(i)
                out[i] = np.nan
        return values["scale"] * out

    def residuals(p):
        r = (forward(p) - y) * w
        return np.where(np.isfinite(r), r, 0.0)

    x_scale = [max(abs(v), 1e-6) for v in p_init]
    res = optimize.least_squares(
        residuals,
        p_init,
        bounds=(lower, upper),
        method="trf",
        xtol=1e-9,
        ftol=1e-12,
        gtol=1e-14,
        x_scale=x_scale,
        diff_step=1e-5,
    )
    _check_identifiable(res.jac, names, [max(abs(v), 1e-12) for v in res.x])
    cov = None
    errors = None
    if res.success:
        _, s, vh = np.linalg.svd(res.jac, full_matrices=False)
        cov = (vh.T / s**2) @ vh
        if sig is None:
            dof = max(len(y) - len(names), 1)
            cov = cov * (2 * res.cost / dof)
        errors = dict(zip(names, np.sqrt(np.diag(cov))))
    return FitResult(
        parameters=dict(zip(names, res.x)),
        standard_errors=errors,
        residual_norm=float(np.linalg.norm(res.fun)),
        iterations=int(res.nfev),
        converged=bool(res.success),
        covariance=cov,
        parameter_names=names,
        message=res.message,
        masked_points=sorted(masked),
    )
