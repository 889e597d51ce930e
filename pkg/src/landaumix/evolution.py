"""Time integration: homogeneous nonlinear relaxation and per-mode linear transport.

Nonlinear runs use explicit RK4 preconditioned at the predicted equilibrium, so
the target Maxwellian family is an exact fixed point of the discrete flow.
Linear mode runs use Strang splitting: exact phase rotation for the transport
term (diagonal in the nodal basis) around a Crank-Nicolson collision step,
which is unconditionally contractive in the weighted L^2 norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .collision import entropy_and_production, moments, q_pair_many
from .errors import NoExponentialWindow, SolveFailure, StepUnstable
from .fields import DistributionField
from .grid import VelocityGrid, gram_matrices
from .linearized import kernel_basis, project
from .mixture import MixtureConfig, discrete_equilibrium, maxwellian_field


@dataclass
class TimeSeries:
    times: np.ndarray
    records: dict

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.records = {k: np.asarray(v, dtype=float) for k, v in self.records.items()}
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass
class DecayFit:
    rate: float
    prefactor: float
    window: tuple
    residual: float
    accepted: bool
    quantity: str = ""


@dataclass
class ModeProblem:
    wavenumber: np.ndarray          # integer 3-vector (torus Fourier mode)
    values: np.ndarray              # complex (N, G)

    def __post_init__(self):
        self.wavenumber = np.asarray(self.wavenumber, dtype=int)
        self.values = np.asarray(self.values, dtype=complex)


def _q_total_values(values: np.ndarray, cfg: MixtureConfig, grid: VelocityGrid,
                    reference=None) -> np.ndarray:
    N = cfg.n_species
    out = np.zeros_like(values)
    for i in range(N):
        for j in range(N):
            out[i] += q_pair_many(values[i][None], values[j][None], i, j, cfg, grid,
                                  reference)[0]
    return out


def estimate_collision_norm(negL: np.ndarray, grid: VelocityGrid, n_iter: int = 30,
                            seed: int = 0) -> float:
    """Spectral-radius estimate of the nodal operator W^{-1} negL (power iteration)."""
    rng = np.random.default_rng(seed)
    n = negL.shape[0]
    winv = 1.0 / np.tile(grid.weights, n // grid.n_nodes)
    v = rng.standard_normal(n)
    lam = 1.0
    for _ in range(n_iter):
        v = winv * (negL @ v)
        lam = np.linalg.norm(v)
        if lam == 0:
            return 0.0
        v /= lam
    return float(lam)


def step_nonlinear(F: DistributionField, dt: float, cfg: MixtureConfig,
                   grid: VelocityGrid, reference=None):
    """One RK4 step of F' = sum_j Q_ij; returns (F_next, clipped_mass).

    Negative nodal values produced by the step are clipped to zero, the clipped
    quadrature mass is reported, and each species is rescaled to its pre-clip
    mass so that the exact discrete mass conservation survives the clipping.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v0 = F.values
    k1 = _q_total_values(v0, cfg, grid, reference)
    k2 = _q_total_values(v0 + 0.5 * dt * k1, cfg, grid, reference)
    k3 = _q_total_values(v0 + 0.5 * dt * k2, cfg, grid, reference)
    k4 = _q_total_values(v0 + dt * k3, cfg, grid, reference)
    nxt = v0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt) > 10.0 * max(np.linalg.norm(v0), 1e-300):
        raise StepUnstable(f"norm grew more than 10x in one step (dt={dt})")
    w = grid.weights
    clipped = float(np.sum(np.where(nxt < 0, -nxt, 0.0) @ w))
    if clipped > 0.0:
        mass_pre = nxt @ w
        nxt = np.maximum(nxt, 0.0)
        mass_post = nxt @ w
        scale = np.where(mass_post > 0, mass_pre / np.maximum(mass_post, 1e-300), 1.0)
        nxt = nxt * scale[:, None]
    return DistributionField(values=nxt, kind="density"), clipped


def run_relaxation(F0: DistributionField, t_end: float, cfg: MixtureConfig,
                   grid: VelocityGrid, dt: float | None = None,
                   record_every: int = 4, negL: np.ndarray | None = None,
                   min_dt_factor: float = 2.0 ** -10, dt_safety: float = 2.0):
    """Integrate the homogeneous system to t_end and fit the decay of the deviation.

    Records per sample: species masses, total momentum and energy, entropy H and
    production D, clipped mass, and the norms ||(F - M)/sqrt(M)|| in L^2 and H,
    where M is the Maxwellian family fixed by the initial moments.  The stepper
    is preconditioned at those moments, making M an exact discrete fixed point.

    Default step: dt = dt_safety / lambda_max(W^-1 negL); the RK4 real-axis
    stability bound is 2.785, and StepUnstable triggers halving.
    """
    mom0 = discrete_equilibrium(F0, cfg, grid)
    target = maxwellian_field(cfg, mom0, grid)
    sqrt_target = np.sqrt(target.values)
    grams = gram_matrices(grid, cfg)
    wfull = np.tile(grid.weights, cfg.n_species)

    if dt is None:
        if negL is None:
            from .linearized import assemble_negL
            negL = assemble_negL("full", cfg, grid).matrix
        norm_est = estimate_collision_norm(negL, grid)
        dt = dt_safety / max(norm_est, 1e-12)
    dt_min = dt * min_dt_factor

    times, rows = [], []
    F = F0.copy()
    t = 0.0
    clipped_total = 0.0

    def record():
        dev = ((F.values - target.values) / sqrt_target).reshape(-1)
        mom = moments(F, cfg, grid)
        H, D = entropy_and_production(F, cfg, grid)
        row = {"entropy": H, "production": D,
               "dev_l2": float(np.sqrt(dev @ (wfull * dev))),
               "dev_h": float(np.sqrt(dev @ (grams.h_norm @ dev))),
               "energy": mom.energy, "clipped_mass": clipped_total}
        for i in range(cfg.n_species):
            row[f"mass_{i}"] = float(mom.mass[i])
        for k, name in enumerate("xyz"):
            row[f"momentum_{name}"] = float(mom.momentum[k])
        times.append(t)
        rows.append(row)

    record()
    steps = 0
    while t < t_end * (1.0 - 1e-12):
        step_dt = min(dt, t_end - t)
        try:
            F, clipped = step_nonlinear(F, step_dt, cfg, grid, reference=mom0)
        except StepUnstable:
            dt *= 0.5
            if dt < dt_min:
                raise
            continue
        clipped_total += clipped
        t += step_dt
        steps += 1
        if steps % record_every == 0 or t >= t_end * (1.0 - 1e-12):
            record()

    records = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    series = TimeSeries(times=np.array(times), records=records)
    try:
        fit = fit_decay(series, "dev_l2")
    except NoExponentialWindow:
        fit = DecayFit(rate=float("nan"), prefactor=float("nan"), window=(0.0, 0.0),
                       residual=float("inf"), accepted=False, quantity="dev_l2")
    return series, fit


class LinearModeStepper:
    """Strang-split integrator for f' = (L - i 2 pi k.p/m_i) f at fixed dt.

    The collision half is Crank-Nicolson with one Cholesky factorization of
    (W + dt/2 negL), shared across modes; the transport half is an exact
    pointwise phase rotation.
    """

    def __init__(self, cfg: MixtureConfig, grid: VelocityGrid, negL: np.ndarray,
                 dt: float):
        self.cfg = cfg
        self.grid = grid
        self.dt = float(dt)
        n = negL.shape[0]
        wfull = np.tile(grid.weights, cfg.n_species)
        A = 0.5 * dt * negL + np.diag(wfull)
        try:
            self._cho = sla.cho_factor(A, lower=True)
        except sla.LinAlgError as exc:
            raise SolveFailure(f"collision step factorization failed: {exc}") from exc
        self._wfull = wfull
        self._negL = negL
        self._n = n

    def _phase(self, k: np.ndarray, tau: float) -> np.ndarray:
        pts = self.grid.points
        blocks = [np.exp(-2j * np.pi * tau * (pts @ k) / m) for m in self.cfg.masses]
        return np.concatenate(blocks)

    def _collide(self, v: np.ndarray) -> np.ndarray:
        rhs = self._wfull * v - 0.5 * self.dt * (self._negL @ v)
        out = np.empty_like(v)
        stacked = np.column_stack([rhs.real, rhs.imag])
        sol = sla.cho_solve(self._cho, stacked)
        out.real, out.imag = sol[:, 0], sol[:, 1]
        return out

    def step(self, mode: ModeProblem) -> ModeProblem:
        v = mode.values.reshape(-1)
        k = mode.wavenumber
        if np.any(k != 0):
            v = self._phase(k, 0.5 * self.dt) * v
            v = self._collide(v)
            v = self._phase(k, 0.5 * self.dt) * v
        else:
            v = self._collide(v)
        return ModeProblem(wavenumber=k, values=v.reshape(mode.values.shape))


def step_linear_mode(mode: ModeProblem, dt: float, cfg: MixtureConfig,
                     grid: VelocityGrid, negL: np.ndarray) -> ModeProblem:
    """One IMEX step; for repeated stepping build a LinearModeStepper once."""
    return LinearModeStepper(cfg, grid, negL, dt).step(mode)


def run_linear_modes(k_list, f0: np.ndarray, t_end: float, cfg: MixtureConfig,
                     grid: VelocityGrid, negL: np.ndarray | None = None,
                     dt: float | None = None, n_steps: int | None = None,
                     record_every: int = 2, beat_cycles: float = 1.0):
    """Per-mode decay of ||f||_L2 for wavenumbers k e_1; returns fits and global tau.

    For k = 0 the conserved component (projection onto N(L)) is removed first.
    For k != 0 the spectrum pairs decay rates with opposite transport
    frequencies, so the raw norm beats at twice the typical frequency; fits run
    on a geometric moving average spanning `beat_cycles` beat periods
    (recorded as norm_l2_smooth alongside the raw norm).
    """
    if negL is None:
        from .linearized import assemble_negL
        negL = assemble_negL("full", cfg, grid).matrix
    if n_steps is None:
        n_steps = 400
    if dt is None:
        dt = t_end / n_steps
    else:
        n_steps = int(round(t_end / dt))
    stepper = LinearModeStepper(cfg, grid, negL, dt)
    wfull = np.tile(grid.weights, cfg.n_species)
    kb = kernel_basis("full", cfg, grid)

    results = {}
    for kval in k_list:
        kvec = np.array([int(kval), 0, 0])
        v = np.asarray(f0, dtype=complex).reshape(-1).copy()
        if np.all(kvec == 0):
            par, _ = project(kb, v.real, grid)
            par_i, _ = project(kb, v.imag, grid)
            v = v - par - 1j * par_i
        mode = ModeProblem(wavenumber=kvec, values=v.reshape(cfg.n_species, -1))
        times = [0.0]
        norms = [float(np.sqrt(np.real(np.conj(v) @ (wfull * v))))]
        for s in range(1, n_steps + 1):
            mode = stepper.step(mode)
            if s % record_every == 0 or s == n_steps:
                vv = mode.values.reshape(-1)
                times.append(s * dt)
                norms.append(float(np.sqrt(np.real(np.conj(vv) @ (wfull * vv)))))
        times = np.array(times)
        norms = np.array(norms)
        if kval != 0 and beat_cycles > 0:
            # beat period ~ pi / (2 pi k <|p_x|/m>) with <|p_x|> = sqrt(2 m kT / pi)
            freq = max(2.0 * np.pi * abs(kval) * np.sqrt(2.0 * cfg.kT / (np.pi * m))
                       for m in cfg.masses)
            window_t = beat_cycles * np.pi / freq * 2.0
            half = int(round(0.5 * window_t / max(times[1] - times[0], 1e-300)))
            if half >= 1 and len(times) > 4 * half:
                logq = np.log(np.maximum(norms, 1e-300))
                kern = np.ones(2 * half + 1) / (2 * half + 1)
                smooth = np.exp(np.convolve(logq, kern, mode="valid"))
                times_s = times[half:len(times) - half]
                series = TimeSeries(times=times_s,
                                    records={"norm_l2": norms[half:len(times) - half],
                                             "norm_l2_smooth": smooth})
                fit = fit_decay(series, "norm_l2_smooth")
                results[int(kval)] = (series, fit)
                continue
        series = TimeSeries(times=times, records={"norm_l2": norms})
        fit = fit_decay(series, "norm_l2")
        results[int(kval)] = (series, fit)
    rates = [fit.rate for _, fit in results.values() if fit.rate > 0]
    tau_global = max(1.0 / r for r in rates) if rates else float("inf")
    return results, tau_global


def fit_decay(series: TimeSeries, quantity_name: str, slope_tol: float = 0.05,
              floor: float = 1e-10, accept_residual: float = 0.05) -> DecayFit:
    """Least-squares exponential fit on the auto-detected decay window.

    The window starts at the first sample from which the log-slope has
    stabilized (first- and second-half regression slopes within 5%) and ends
    where the quantity drops below `floor` or the series ends.
    """
    t = series.times
    q = series.records[quantity_name]
    good = np.isfinite(q) & (q > 0)
    t, q = t[good], q[good]
    if len(t) < 20:
        raise NoExponentialWindow(
            f"need >= 20 positive samples of {quantity_name!r}, got {len(t)}")
    y = np.log(q)
    n = len(t)
    below = np.nonzero(q < floor)[0]
    if below.size:
        n = min(max(int(below[0]) + 1, 20), n)

    W = max(8, n // 8)
    n_win = n - W
    if n_win < 2:
        raise NoExponentialWindow(f"series too short for windowed slopes of {quantity_name!r}")
    slopes = np.array([np.polyfit(t[i:i + W], y[i:i + W], 1)[0] for i in range(n_win)])

    # transient ends at the first window from which every later local slope
    # stays within slope_tol of the current one
    start = None
    for i in range(n_win):
        s = slopes[i]
        if s >= 0:
            continue
        if np.all(np.abs(slopes[i:] - s) <= slope_tol * abs(s)):
            start = i
            break
    if start is None:
        raise NoExponentialWindow(f"no stabilized decay window for {quantity_name!r}")
    hi = n

    def fitted(lo):
        slope, intercept = np.polyfit(t[lo:hi], y[lo:hi], 1)
        resid = float(np.max(np.abs(y[lo:hi] - (intercept + slope * t[lo:hi]))))
        return slope, intercept, resid

    # advance past residual tail-curvature while enough samples remain
    slope, intercept, resid = fitted(start)
    while resid > accept_residual and hi - start - W // 2 >= max(20, W):
        start += W // 2
        slope, intercept, resid = fitted(start)

    rate = -float(slope)
    if rate <= 0:
        raise NoExponentialWindow(f"{quantity_name!r} does not decay")
    return DecayFit(rate=rate, prefactor=float(np.exp(intercept)),
                    window=(float(t[start]), float(t[hi - 1])), residual=resid,
                    accepted=resid <= accept_residual, quantity=quantity_name)
