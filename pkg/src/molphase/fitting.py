"""Joint nonlinear least-squares fits of extinction and phase spectra."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import EmitterParams, MolphaseError, OutOfRange, wrap_phase
from .steadystate import max_phase, on_resonance_extinction, transmission_t

PARAM_NAMES = ("gamma_mhz", "omega0_mhz", "eta", "psi", "baseline")
FLOQUET_THRESHOLD = 0.1


class NoConvergence(MolphaseError):
    pass


class SingularCovariance(MolphaseError):
    pass


@dataclass(frozen=True)
class SpectrumParams:
    gamma_mhz: float = 21.0
    omega0_mhz: float = 0.0
    eta: float = 0.1
    psi: float = 0.0
    baseline: float = 0.0

    def as_array(self):
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, p):
        return cls(*(float(v) for v in p))

    def emitter(self) -> EmitterParams:
        return EmitterParams(gamma=self.gamma_mhz, omega0=self.omega0_mhz, eta=self.eta,
                             psi=float(wrap_phase(self.psi)))


def model_two_beam(params: SpectrumParams, frequency_mhz, delta_split_mhz: float = 114.3, saturation: float = 0.0):
    """Observed extinction and beat phase (degrees) for a two-beam scan.

    ``frequency_mhz`` is the frequency of beam 1; beam 2 is ``delta_split_mhz``
    above it.  The detected dip is the mean of the two per-beam dips (each
    resonance affects half of the detected power), shifted by ``baseline``.
    Above a saturation of 0.1 the per-beam response comes from the two-tone
    solution instead of the closed form.
    """
    nu = np.asarray(frequency_mhz, dtype=float)
    g = params.gamma_mhz
    d1 = (nu - params.omega0_mhz) / g
    split = delta_split_mhz / g
    if saturation > FLOQUET_THRESHOLD:
        from .floquet import BichromaticDrive, beat_scan

        drive = BichromaticDrive.from_saturation(saturation, saturation, split, 0.0)
        beat, ext, _ = beat_scan(params.emitter(), drive, d1)
    else:
        t1 = transmission_t(params.eta, params.psi, d1, saturation)
        t2 = transmission_t(params.eta, params.psi, d1 + split, saturation)
        ext = 1.0 - 0.5 * (np.abs(t1) ** 2 + np.abs(t2) ** 2)
        beat = np.angle(t1 * np.conj(t2))
    return ext + params.baseline, np.degrees(beat)


def synthesize_two_beam(params: SpectrumParams, frequency_mhz, delta_split_mhz=114.3, saturation=0.0,
                        sigma_extinction=0.005, sigma_phase_deg=0.2, seed=0):
    """Noisy synthetic spectrum with Gaussian noise per channel."""
    ext, ph = model_two_beam(params, frequency_mhz, delta_split_mhz, saturation)
    rng = np.random.default_rng(seed)
    return ext + rng.normal(0.0, sigma_extinction, ext.shape), ph + rng.normal(0.0, sigma_phase_deg, ph.shape)


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jacobian: np.ndarray
    residuals: np.ndarray
    iterations: int
    cost_history: list = field(default_factory=list)


def finite_difference_jacobian(fun, x, steps):
    cols = []
    for i, h in enumerate(steps):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.column_stack(cols)


def levenberg_marquardt(fun, x0, steps, valid=None, lam0=1e-3, max_iter=200, xtol=1e-12, ftol=1e-15):
    """Damped Gauss-Newton with Marquardt scaling.

    ``fun`` returns the weighted residual vector.  The damping is multiplied
    by 0.3 after an accepted step and by 3 after a rejected one; the cost is
    therefore non-increasing over accepted iterates.  ``valid(x)`` may veto
    trial points outside the parameter domain.
    """
    x = np.asarray(x0, dtype=float).copy()
    steps = np.asarray(steps, dtype=float)
    r = fun(x)
    cost = float(r @ r)
    history = [cost]
    lam = lam0
    for it in range(1, max_iter + 1):
        J = finite_difference_jacobian(fun, x, steps)
        A = J.T @ J
        g = J.T @ r
        scale = np.diag(A).copy()
        scale[scale <= 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                dx = np.linalg.solve(A + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                lam *= 3.0
                continue
            x_new = x + dx
            if valid is not None and not valid(x_new):
                lam *= 3.0
                continue
            r_new = fun(x_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 3.0
        if not accepted:
            # no downhill step exists at any damping: stationary point
            return LMResult(x, cost, J, r, it, history)
        small_step = np.all(np.abs(dx) <= xtol * (np.abs(x) + xtol))
        small_gain = cost - cost_new <= ftol * max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam *= 0.3
        if small_step or small_gain:
            J = finite_difference_jacobian(fun, x, steps)
            return LMResult(x, cost, J, r, it, history)
    raise NoConvergence(f"no convergence after {max_iter} iterations")


def _covariance(J):
    A = J.T @ J
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e14:
        raise SingularCovariance("normal matrix is singular at the optimum")
    return np.linalg.inv(A)


@dataclass
class FitResult:
    params: SpectrumParams
    uncertainties: dict
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    cost_history: list
    sigma_extinction: float
    sigma_phase_deg: float
    config: dict = field(default_factory=dict)

    def confidence_interval(self, name: str, z: float = 1.959964):
        v = getattr(self.params, name)
        s = self.uncertainties[name]
        return v - z * s, v + z * s

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "uncertainties": dict(self.uncertainties),
            "covariance": self.covariance.tolist(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "sigma_extinction": self.sigma_extinction,
            "sigma_phase_deg": self.sigma_phase_deg,
            "config": self.config,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _spectrum_steps(p):
    return np.array([1e-6 * max(abs(p[0]), 1e-3), 1e-6 * max(abs(p[0]), 1e-3), 1e-7, 1e-7, 1e-8])


def _spectrum_valid(p):
    return p[0] > 0 and 0.0 <= p[2] <= 1.0


def fit(frequency_mhz, extinction, phase_deg, initial: SpectrumParams, delta_split_mhz: float = 114.3,
        saturation: float = 0.0, sigma_extinction: float | None = None, sigma_phase_deg: float | None = None,
        max_iter: int = 200) -> FitResult:
    """Simultaneous fit of the observed extinction and beat-phase spectra.

    Residuals are weighted by the inverse noise standard deviation of each
    channel; phase residuals are wrapped to the principal branch.  If the
    noise levels are not supplied they are estimated from a first pass and
    the fit is repeated with those weights.
    """
    nu = np.asarray(frequency_mhz, dtype=float)
    ext = np.asarray(extinction, dtype=float)
    ph = np.asarray(phase_deg, dtype=float)
    if not (nu.shape == ext.shape == ph.shape):
        raise OutOfRange("data", "grid, extinction and phase must have equal length")
    if 2 * nu.size < 5 * len(PARAM_NAMES):
        raise OutOfRange("data", "need at least five data points per parameter")

    def run(se, sp, start):
        def residuals(p):
            params = SpectrumParams.from_array(p)
            m_ext, m_ph = model_two_beam(params, nu, delta_split_mhz, saturation)
            d_ph = np.degrees(wrap_phase(np.radians(m_ph - ph)))
            return np.concatenate([(m_ext - ext) / se, d_ph / sp])

        return levenberg_marquardt(residuals, start, _spectrum_steps(start), _spectrum_valid, max_iter=max_iter)

    start = initial.as_array()
    if sigma_extinction is None or sigma_phase_deg is None:
        se0 = sigma_extinction or 0.01
        sp0 = sigma_phase_deg or 1.0
        first = run(se0, sp0, start)
        n = nu.size
        dof = max(n - len(PARAM_NAMES) / 2.0, 1.0)
        est_e = math.sqrt(float(first.residuals[:n] @ first.residuals[:n]) / dof) * se0
        est_p = math.sqrt(float(first.residuals[n:] @ first.residuals[n:]) / dof) * sp0
        sigma_extinction = sigma_extinction or max(est_e, 1e-12)
        sigma_phase_deg = sigma_phase_deg or max(est_p, 1e-12)
        start = first.x
    res = run(sigma_extinction, sigma_phase_deg, start)
    cov = _covariance(res.jacobian)
    x = res.x.copy()
    x[3] = wrap_phase(x[3])
    params = SpectrumParams.from_array(x)
    unc = {n: float(math.sqrt(cov[i, i])) for i, n in enumerate(PARAM_NAMES)}
    config = {"delta_split_mhz": delta_split_mhz, "saturation": saturation, "initial": asdict(initial),
              "n_points": int(nu.size)}
    return FitResult(params, unc, cov, float(math.sqrt(res.cost)), res.iterations, res.cost_history,
                     float(sigma_extinction), float(sigma_phase_deg), config)


# ---------------------------------------------------------------------------
# power series


@dataclass(frozen=True)
class PowerSpectrum:
    """Single-beam spectrum recorded at one relative power (detuning in linewidths)."""

    relative_power: float
    detuning: np.ndarray
    extinction: np.ndarray
    phase: np.ndarray  # radians


def _peak(x, y):
    k = int(np.argmax(y))
    if 0 < k < len(y) - 1:
        y0, y1, y2 = y[k - 1], y[k], y[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            return float(y1 - 0.125 * (y0 - y2) ** 2 / denom)
    return float(y[k])


def extract_power_point(series_point: PowerSpectrum):
    """(line-center extinction, peak |phase|).

    The extinction is read at zero detuning rather than at its maximum: under
    two-tone driving at high power the partner beam's two-photon feature can
    outgrow the saturated main dip.  The phase peak is parabolically refined.
    """
    det = np.asarray(series_point.detuning, dtype=float)
    if not det[0] <= 0.0 <= det[-1]:
        raise OutOfRange("detuning", "spectrum must straddle the resonance")
    return float(np.interp(0.0, det, series_point.extinction)), _peak(det, np.abs(series_point.phase))


def saturation_model(eta: float, reference_saturation: float, relative_power):
    """Peak extinction and peak |phase| (rad) versus relative power."""
    p = np.asarray(relative_power, dtype=float)
    s = reference_saturation * p
    emitter = EmitterParams(eta=eta)
    phase = np.array([abs(max_phase(emitter, float(si))[0]) for si in s])
    return on_resonance_extinction(eta, s), phase


@dataclass
class PowerSeriesFit:
    eta: float
    reference_saturation: float
    covariance: np.ndarray
    uncertainties: dict
    correlation: float
    degenerate: bool
    relative_power: np.ndarray
    extinction: np.ndarray
    max_phase: np.ndarray
    channels: tuple
    iterations: int


def fit_power_series(spectra, initial_eta: float = 0.2, initial_reference: float = 1.0,
                     channels=("extinction", "phase"), rel_sigma: float = 0.01,
                     degeneracy_threshold: float = 0.99) -> PowerSeriesFit:
    """Fit coupling efficiency and power calibration to a series of spectra.

    Each spectrum is reduced to its peak extinction and peak |phase|; the
    saturation model is then fitted to the logarithms of those values (so
    each channel carries relative error ``rel_sigma``).  ``degenerate`` is set
    when the eta / calibration correlation exceeds ``degeneracy_threshold``.
    """
    spectra = sorted(spectra, key=lambda s: s.relative_power)
    power = np.array([s.relative_power for s in spectra], dtype=float)
    if power.size < 4 or np.any(power <= 0) or power[-1] / power[0] < 100.0:
        raise OutOfRange("spectra", "need >= 4 positive powers spanning >= 2 decades")
    points = np.array([extract_power_point(s) for s in spectra])
    ext, phase = points[:, 0], points[:, 1]
    use_ext = "extinction" in channels
    use_phase = "phase" in channels
    if not (use_ext or use_phase):
        raise OutOfRange("channels", "select at least one channel")

    def residuals(q):
        eta, logs = q
        m_ext, m_phase = saturation_model(eta, math.exp(logs), power)
        parts = []
        if use_ext:
            parts.append((np.log(m_ext) - np.log(ext)) / rel_sigma)
        if use_phase:
            parts.append((np.log(m_phase) - np.log(phase)) / rel_sigma)
        return np.concatenate(parts)

    res = levenberg_marquardt(residuals, [initial_eta, math.log(initial_reference)], [1e-7, 1e-7],
                              lambda q: 0.0 < q[0] <= 1.0)
    A = res.jacobian.T @ res.jacobian
    try:
        cov_q = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        cov_q = np.full((2, 2), np.inf)
    eta, logs = res.x
    s_ref = math.exp(logs)
    # d s / d log s = s
    jac = np.diag([1.0, s_ref])
    cov = jac @ cov_q @ jac
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = float(cov_q[0, 1] / math.sqrt(cov_q[0, 0] * cov_q[1, 1]))
    cond = np.linalg.cond(A)
    degenerate = bool(not np.isfinite(corr) or abs(corr) > degeneracy_threshold or cond > 1e12)
    unc = {"eta": float(math.sqrt(abs(cov[0, 0]))), "reference_saturation": float(math.sqrt(abs(cov[1, 1])))}
    return PowerSeriesFit(float(eta), s_ref, cov, unc, corr, degenerate, power, ext, phase,
                          tuple(channels), res.iterations)


def synthesize_power_series(eta: float, reference_saturation: float, relative_powers, points: int = 801,
                            rel_noise: float = 0.0, seed: int = 0, floquet_split: float | None = None):
    """Single-beam spectra at each power, optionally through the two-tone model.

    With ``floquet_split`` set (linewidths) the per-beam response of beam 1 is
    taken from the two-tone solution with equal beam powers.
    """
    rng = np.random.default_rng(seed)
    emitter = EmitterParams(eta=eta)
    out = []
    for p in relative_powers:
        s = reference_saturation * p
        half = 4.0 * math.sqrt(1.0 + s)
        grid = np.linspace(-half, half, points)
        if floquet_split is None:
            t = transmission_t(eta, 0.0, grid, s)
        else:
            from .floquet import BichromaticDrive, single_beam_scan

            t, _ = single_beam_scan(emitter, BichromaticDrive.from_saturation(s, s, floquet_split, 0.0), grid)
        ext = 1.0 - np.abs(t) ** 2
        ph = np.angle(t)
        if rel_noise:
            ext = ext * (1.0 + rel_noise * rng.standard_normal(ext.shape))
            ph = ph * (1.0 + rel_noise * rng.standard_normal(ph.shape))
        out.append(PowerSpectrum(float(p), grid, ext, ph))
    return out
