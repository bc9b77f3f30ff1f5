"""Co-simulation of a switched plant with its interval observer pair.

The plant, the lower/upper observers, and the two diagnostic observers run
from the exact (sampled) plant matrices are one coupled linear system per
active subsystem, so a single block matrix drives each integration step.
Continuous time uses classical fixed-step RK4 with the sample grid refined
to hit every switch instant exactly; discrete time iterates the maps with no
discretization error.

Besides the state bracket ``0 <= xhat_lower <= x <= xhat_upper``, each trace
records the two one-sided errors ``eps_lower = F x - omega_mid_lower`` and
``eps_upper = omega_mid_upper - F x`` whose nonnegativity is what makes the
bracket work; they are exposed for numerical verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import as_matrix, as_vector, freeze
from .synth import CONTINUOUS, DISCRETE, IntervalSystem, ObserverRealization

__all__ = [
    "BracketReport",
    "SimulationTrace",
    "SwitchingSignal",
    "TrueSystem",
    "export_csv",
    "make_switching_signal",
    "sample_truth",
    "simulate_continuous",
    "simulate_discrete",
    "validate_truth",
    "verify_bracket",
]


@dataclass(frozen=True)
class TrueSystem:
    """One admissible realization: exact subsystem matrices and initial state."""

    a: tuple
    x0: np.ndarray

    def __post_init__(self):
        mats = tuple(as_matrix(m, f"A[{i}]") for i, m in enumerate(self.a))
        if not mats:
            raise ValueError("need at least one subsystem matrix")
        n = mats[0].shape[0]
        for i, m in enumerate(mats):
            if m.shape != (n, n):
                raise ValueError(f"A[{i}] must be {n}x{n}, got {m.shape}")
        x0 = as_vector(self.x0, "x0")
        if x0.shape != (n,):
            raise ValueError(f"x0 must have length {n}")
        object.__setattr__(self, "a", tuple(freeze(m) for m in mats))
        object.__setattr__(self, "x0", freeze(x0))


def validate_truth(sys: IntervalSystem, truth: TrueSystem, tol: float = 0.0) -> None:
    """Raise when the realization leaves the interval model, naming the entry."""
    if len(truth.a) != sys.nsub:
        raise ValueError(f"truth has {len(truth.a)} subsystems, model has {sys.nsub}")
    for i, (m, lo, up) in enumerate(zip(truth.a, sys.a_lower, sys.a_upper)):
        if m.shape != lo.shape:
            raise ValueError(f"truth A[{i}] has shape {m.shape}, expected {lo.shape}")
        low_bad = np.argwhere(m < lo - tol)
        if low_bad.size:
            r, c = low_bad[0]
            raise ValueError(
                f"truth A[{i}] entry ({r}, {c}) = {m[r, c]:g} is below A_lower = {lo[r, c]:g}"
            )
        up_bad = np.argwhere(m > up + tol)
        if up_bad.size:
            r, c = up_bad[0]
            raise ValueError(
                f"truth A[{i}] entry ({r}, {c}) = {m[r, c]:g} is above A_upper = {up[r, c]:g}"
            )
    if truth.x0.shape != sys.x0_lower.shape:
        raise ValueError("truth x0 has wrong length")
    if np.any(truth.x0 < sys.x0_lower - tol) or np.any(truth.x0 > sys.x0_upper + tol):
        j = int(np.argmax(np.maximum(sys.x0_lower - truth.x0, truth.x0 - sys.x0_upper)))
        raise ValueError(
            f"truth x0[{j}] = {truth.x0[j]:g} outside [{sys.x0_lower[j]:g}, {sys.x0_upper[j]:g}]"
        )


def sample_truth(sys: IntervalSystem, seed: int) -> TrueSystem:
    """Draw an admissible realization uniformly from the interval model."""
    rng = np.random.default_rng(seed)
    mats = tuple(lo + rng.uniform(size=lo.shape) * (up - lo)
                 for lo, up in zip(sys.a_lower, sys.a_upper))
    x0 = sys.x0_lower + rng.uniform(size=sys.n) * (sys.x0_upper - sys.x0_lower)
    return TrueSystem(a=mats, x0=x0)


@dataclass(frozen=True)
class SwitchingSignal:
    """Piecewise-constant subsystem selection.

    ``times`` holds the interval start points (time values in continuous
    time, step indices in discrete time) beginning at 0 and strictly
    increasing; ``indices`` holds the matching 1-based subsystem ids.
    """

    times: np.ndarray
    indices: np.ndarray
    n_subsystems: int
    min_dwell: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        idx = np.array(self.indices, dtype=int)
        if times.ndim != 1 or idx.shape != times.shape or times.size < 1:
            raise ValueError("times and indices must be 1-D of equal nonzero length")
        if times[0] != 0.0:
            raise ValueError("switching must start at time 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("switch times must be strictly increasing")
        if self.min_dwell > 0 and times.size > 1:
            if np.min(np.diff(times)) < self.min_dwell - 1e-12:
                raise ValueError("an interval is shorter than min_dwell")
        if np.any(idx < 1) or np.any(idx > self.n_subsystems):
            raise ValueError(f"subsystem ids must lie in 1..{self.n_subsystems}")
        object.__setattr__(self, "times", freeze(times))
        object.__setattr__(self, "indices", freeze(idx))

    def index_at(self, t: float) -> int:
        """Active subsystem id at time ``t`` (right-continuous)."""
        pos = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.indices[max(pos, 0)])


def make_switching_signal(
    n_subsystems: int,
    horizon: float,
    min_dwell: float,
    seed: int,
    domain: str = CONTINUOUS,
) -> SwitchingSignal:
    """Seeded random switching: dwell uniform in [min_dwell, 2 min_dwell].

    Consecutive ids always differ when more than one subsystem exists.  A
    dwell of zero, or one at least as long as the horizon, degenerates to a
    single interval covering the whole horizon.  Discrete-time dwells are
    rounded to whole steps (at least one).
    """
    if n_subsystems < 1:
        raise ValueError("n_subsystems must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if min_dwell < 0:
        raise ValueError("min_dwell must be >= 0")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(1, n_subsystems + 1))
    times = [0.0]
    indices = [first]
    if n_subsystems > 1 and 0 < min_dwell < horizon:
        t = 0.0
        while True:
            dwell = rng.uniform(min_dwell, 2.0 * min_dwell)
            if domain == DISCRETE:
                dwell = max(1.0, float(round(dwell)))
            t += dwell
            if t >= horizon:
                break
            others = [j for j in range(1, n_subsystems + 1) if j != indices[-1]]
            times.append(t)
            indices.append(others[int(rng.integers(len(others)))])
    return SwitchingSignal(
        times=np.array(times),
        indices=np.array(indices),
        n_subsystems=n_subsystems,
        min_dwell=min_dwell,
        seed=seed,
    )


@dataclass(frozen=True)
class SimulationTrace:
    """Time-indexed samples of the plant, observers, and proof errors.

    ``sigma`` is the active 1-based subsystem id per sample;
    ``omega_mid_lower``/``omega_mid_upper`` are the diagnostic observers run
    with the exact plant matrices, from which the one-sided errors
    ``eps_lower``/``eps_upper`` are formed.
    """

    domain: str
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    omega_lower: np.ndarray
    omega_upper: np.ndarray
    omega_mid_lower: np.ndarray
    omega_mid_upper: np.ndarray
    xhat_lower: np.ndarray
    xhat_upper: np.ndarray
    xi: np.ndarray
    eps_lower: np.ndarray
    eps_upper: np.ndarray
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]


def _coupled_matrix(a: np.ndarray, obs: ObserverRealization, idx0: int, n: int, p: int) -> np.ndarray:
    """Block generator/step matrix for (x, omega_l, omega_u, mid_l, mid_u)."""
    m = obs.order
    a_true = a[p:, p:] - obs.gain_l @ a[:p, p:]
    g_true = a_true @ obs.gain_l + a[p:, :p] - obs.gain_l @ a[:p, :p]
    dim = n + 4 * m
    big = np.zeros((dim, dim))
    big[:n, :n] = a
    rows = [
        (obs.ahat_lower[idx0], obs.g_lower[idx0]),
        (obs.ahat_upper[idx0], obs.g_upper[idx0]),
        (a_true, g_true),
        (a_true, g_true),
    ]
    for k, (ahat, g) in enumerate(rows):
        r0 = n + k * m
        big[r0 : r0 + m, :p] = g
        big[r0 : r0 + m, r0 : r0 + m] = ahat
    return big


def _rk4_step(mat: np.ndarray, z: np.ndarray, h: float) -> np.ndarray:
    k1 = mat @ z
    k2 = mat @ (z + 0.5 * h * k1)
    k3 = mat @ (z + 0.5 * h * k2)
    k4 = mat @ (z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_setup(sys: IntervalSystem, truth: TrueSystem, obs: ObserverRealization,
                 sig: SwitchingSignal) -> None:
    validate_truth(sys, truth)
    if obs.order != sys.n - sys.p or obs.p != sys.p:
        raise ValueError("observer dimensions do not match the system")
    if sig.n_subsystems != sys.nsub:
        raise ValueError(
            f"switching signal covers {sig.n_subsystems} subsystems, model has {sys.nsub}"
        )


def _assemble_trace(sys, obs, domain, times, z_rows, sigma) -> SimulationTrace:
    n, p, m = sys.n, sys.p, obs.order
    x = z_rows[:, :n]
    y = x[:, :p].copy()
    omega_l = z_rows[:, n : n + m]
    omega_u = z_rows[:, n + m : n + 2 * m]
    mid_l = z_rows[:, n + 2 * m : n + 3 * m]
    mid_u = z_rows[:, n + 3 * m : n + 4 * m]
    xhat_l = omega_l @ obs.chat.T + y @ obs.dhat.T
    xhat_u = omega_u @ obs.chat.T + y @ obs.dhat.T
    fx = x @ obs.f.T
    return SimulationTrace(
        domain=domain,
        times=times,
        x=x,
        y=y,
        omega_lower=omega_l,
        omega_upper=omega_u,
        omega_mid_lower=mid_l,
        omega_mid_upper=mid_u,
        xhat_lower=xhat_l,
        xhat_upper=xhat_u,
        xi=xhat_u - xhat_l,
        eps_lower=fx - mid_l,
        eps_upper=mid_u - fx,
        sigma=sigma,
    )


def simulate_continuous(
    sys: IntervalSystem,
    truth: TrueSystem,
    obs: ObserverRealization,
    sig: SwitchingSignal,
    step: float = 1e-3,
    horizon: float = 2.0,
) -> SimulationTrace:
    """Integrate plant and observers over [0, horizon] with fixed-step RK4.

    The sample grid is the uniform ``step`` grid with every switch instant
    inserted exactly, so no integration interval straddles a switch.  All
    states are continuous across switches; only the driving matrices change.
    """
    if sys.domain != CONTINUOUS:
        raise ValueError("simulate_continuous requires a continuous-time system")
    if step <= 0:
        raise ValueError("step must be > 0")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    _check_setup(sys, truth, obs, sig)

    n_whole = int(np.floor(horizon / step + 1e-9))
    base = np.arange(n_whole + 1) * step
    interior_switches = sig.times[(sig.times > 0.0) & (sig.times < horizon)]
    times = np.unique(np.concatenate([base, interior_switches, [horizon]]))

    mats = [_coupled_matrix(truth.a[i], obs, i, sys.n, sys.p) for i in range(sys.nsub)]
    sigma = np.array([sig.index_at(t) for t in times], dtype=int)

    z = np.concatenate([truth.x0, obs.omega0_lower, obs.omega0_upper,
                        obs.omega0_lower, obs.omega0_upper])
    rows = np.empty((times.size, z.size))
    rows[0] = z
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(times.size - 1):
            h = times[j + 1] - times[j]
            z = _rk4_step(mats[sigma[j] - 1], z, h)
            if not np.isfinite(z).all():
                raise FloatingPointError(f"non-finite state at t = {times[j + 1]:.9g}")
            rows[j + 1] = z
    return _assemble_trace(sys, obs, CONTINUOUS, times, rows, sigma)


def simulate_discrete(
    sys: IntervalSystem,
    truth: TrueSystem,
    obs: ObserverRealization,
    sig: SwitchingSignal,
    horizon_steps: int,
) -> SimulationTrace:
    """Iterate the coupled maps for ``horizon_steps`` steps (exact arithmetic)."""
    if sys.domain != DISCRETE:
        raise ValueError("simulate_discrete requires a discrete-time system")
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be >= 1")
    _check_setup(sys, truth, obs, sig)

    times = np.arange(horizon_steps + 1, dtype=float)
    mats = [_coupled_matrix(truth.a[i], obs, i, sys.n, sys.p) for i in range(sys.nsub)]
    sigma = np.array([sig.index_at(k) for k in times], dtype=int)

    z = np.concatenate([truth.x0, obs.omega0_lower, obs.omega0_upper,
                        obs.omega0_lower, obs.omega0_upper])
    rows = np.empty((times.size, z.size))
    rows[0] = z
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(horizon_steps):
            z = mats[sigma[k] - 1] @ z
            if not np.isfinite(z).all():
                raise FloatingPointError(f"non-finite state at step {k + 1}")
            rows[k + 1] = z
    return _assemble_trace(sys, obs, DISCRETE, times, rows, sigma)


@dataclass(frozen=True)
class BracketReport:
    """Violation counts for the three bracket layers plus summary statistics.

    Layers: ``nonneg`` (xhat_lower >= 0), ``lower`` (xhat_lower <= x) and
    ``upper`` (x <= xhat_upper), each counted elementwise over the grid with
    slack ``tol``.  ``outputs_exact`` records whether the measured components
    of both estimates equal the output bit-for-bit.
    """

    tol: float
    violations_nonneg: int
    violations_lower: int
    violations_upper: int
    worst_violation: float
    worst_location: tuple | None
    sup_xi_norm: float
    xi_norm_start: float
    xi_norm_end: float
    outputs_exact: bool

    @property
    def total_violations(self) -> int:
        return self.violations_nonneg + self.violations_lower + self.violations_upper

    @property
    def ok(self) -> bool:
        return self.total_violations == 0


def verify_bracket(trace: SimulationTrace, tol: float = 1e-6) -> BracketReport:
    """Count elementwise bracket violations beyond ``tol`` over the trace."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    layers = {
        "nonneg": trace.xhat_lower,
        "lower": trace.x - trace.xhat_lower,
        "upper": trace.xhat_upper - trace.x,
    }
    counts = {}
    worst = 0.0
    worst_loc = None
    for name, slack in layers.items():
        mask = slack < -tol
        counts[name] = int(mask.sum())
        if counts[name]:
            flat = np.argmin(slack)
            t_idx, comp = np.unravel_index(flat, slack.shape)
            magnitude = float(-slack[t_idx, comp])
            if magnitude > worst:
                worst = magnitude
                worst_loc = (name, float(trace.times[t_idx]), int(comp))
    xi_norms = np.linalg.norm(trace.xi, axis=1)
    p = trace.p
    outputs_exact = (
        np.array_equal(trace.y, trace.x[:, :p])
        and np.array_equal(trace.xhat_lower[:, :p], trace.y)
        and np.array_equal(trace.xhat_upper[:, :p], trace.y)
    )
    return BracketReport(
        tol=tol,
        violations_nonneg=counts["nonneg"],
        violations_lower=counts["lower"],
        violations_upper=counts["upper"],
        worst_violation=worst,
        worst_location=worst_loc,
        sup_xi_norm=float(xi_norms.max()),
        xi_norm_start=float(xi_norms[0]),
        xi_norm_end=float(xi_norms[-1]),
        outputs_exact=outputs_exact,
    )


def export_csv(trace: SimulationTrace, fileobj) -> None:
    """Write the trace as CSV: t, x, both estimates, xi, active subsystem id."""
    n = trace.n
    header = (
        ["t"]
        + [f"x{j + 1}" for j in range(n)]
        + [f"xhatl{j + 1}" for j in range(n)]
        + [f"xhatu{j + 1}" for j in range(n)]
        + [f"xi{j + 1}" for j in range(n)]
        + ["sigma"]
    )
    fileobj.write(",".join(header) + "\n")
    for row_idx in range(trace.times.size):
        values = np.concatenate(
            [
                [trace.times[row_idx]],
                trace.x[row_idx],
                trace.xhat_lower[row_idx],
                trace.xhat_upper[row_idx],
                trace.xi[row_idx],
            ]
        )
        cells = [f"{v:.12e}" for v in values] + [str(int(trace.sigma[row_idx]))]
        fileobj.write(",".join(cells) + "\n")
