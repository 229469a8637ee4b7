"""Velocity-averaged absorption objective and its constrained maximization.

The objective is the weighted mean of A(k) over a discrete k-grid.  The
optimization variables are the laser parameters (detuning, Rabi frequency)
per segment rather than the complex potential itself: that bakes in Im V < 0
and the locked relation between Re V and Im V, leaving only box bounds plus
the weak-driving inequalities as explicit constraints.

The landscape is multimodal (absorbing barriers interfere), so the solver
runs a deterministic start plus seeded random feasible restarts and keeps
the best local optimum that passes an explicit KKT residual check.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .errors import OptimizationError
from .potential import LaserProfile, Segment, profile_to_potential
from .scatter import _Chain, solve_one_channel_batch
from .units import AtomSpecies, kinetic_energy, velocity_to_wavenumber

DEFAULT_KAPPA = 0.2
_KKT_TOL = 1e-6
_FEAS_TOL = 1e-8
# minimum segment width fraction when widths are free, of the equal share
_WIDTH_FLOOR_FRACTION = 0.01


@dataclass(frozen=True)
class KGrid:
    """Discrete wavenumber grid with normalized weights."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("grid needs at least one point")
        total = 0.0
        for k, w in self.points:
            if k <= 0:
                raise ValueError(f"grid wavenumbers must be positive, got {k}")
            if w < 0:
                raise ValueError(f"grid weights must be nonnegative, got {w}")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"grid weights must sum to 1, got {total!r}")

    @property
    def k_values(self) -> np.ndarray:
        return np.array([k for k, _ in self.points])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.points])

    def energy_max(self, species: AtomSpecies) -> float:
        return max(kinetic_energy(k, species) for k, _ in self.points)


def uniform_velocity_grid(v_min: float, v_max: float, n: int,
                          species: AtomSpecies) -> KGrid:
    """n equally spaced velocities (cm/s, inclusive) with uniform weights."""
    if not (0 < v_min < v_max):
        raise ValueError(f"need 0 < v_min < v_max, got [{v_min}, {v_max}]")
    if n < 2:
        raise ValueError(f"need at least 2 grid points, got {n}")
    velocities = np.linspace(v_min, v_max, n)
    return KGrid(points=tuple(
        (velocity_to_wavenumber(float(v), species), 1.0 / n)
        for v in velocities))


def grid_from_velocities(velocities_cm_s, weights, species: AtomSpecies) -> KGrid:
    """Grid from explicit velocity points and weights (weights sum to 1)."""
    return KGrid(points=tuple(
        (velocity_to_wavenumber(float(v), species), float(w))
        for v, w in zip(velocities_cm_s, weights, strict=True)))


@dataclass(frozen=True)
class ParameterBounds:
    """Box bounds on each segment's detuning and Rabi frequency (us^-1)."""

    delta_min: float = -500.0
    delta_max: float = 500.0
    omega_max: float = 500.0

    def __post_init__(self):
        if not (self.delta_min < self.delta_max):
            raise ValueError("need delta_min < delta_max")
        if self.omega_max <= 0:
            raise ValueError("omega_max must be positive")


@dataclass(frozen=True)
class OptimizationProblem:
    species: AtomSpecies
    grid: KGrid
    n_segments: int
    total_length: float
    kappa: float = DEFAULT_KAPPA
    bounds: ParameterBounds = field(default_factory=ParameterBounds)
    multistart: int = 16
    seed: int = 0
    tie_detuning: bool = False
    free_widths: bool = False
    x_start: float = 0.0

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("n_segments must be at least 1")
        if self.total_length <= 0:
            raise ValueError("total_length must be positive")
        if not (0 < self.kappa < 1):
            raise ValueError("kappa must lie in (0, 1)")
        if self.multistart < 0:
            raise ValueError("multistart must be nonnegative")


@dataclass(frozen=True)
class OptimizationResult:
    profile: LaserProfile
    objective: float
    per_k_absorption: tuple[float, ...]
    iterations: int
    converged: bool
    restarts_summary: tuple[float, ...]
    kkt_residual: float
    max_constraint_violation: float


def objective_value(profile: LaserProfile, grid: KGrid) -> float:
    """Abar = sum_j W_j A(k_j), one-channel."""
    potential = profile_to_potential(profile)
    _, _, A = solve_one_channel_batch(grid.k_values, potential, profile.species)
    return float(np.dot(grid.weights, A))


def objective_gradient(profile: LaserProfile, grid: KGrid) -> np.ndarray:
    """Flat gradient (dAbar/dDelta_0, dAbar/dOmega_0, dAbar/dDelta_1, ...)."""
    from .scatter import _gradient_batch
    A, _, _, dDelta, dRabi, _, _ = _gradient_batch(grid.k_values, profile)
    w = grid.weights
    n = len(profile.segments)
    out = np.empty(2 * n)
    out[0::2] = dDelta @ w
    out[1::2] = dRabi @ w
    return out


# ---------------------------------------------------------------------------
# parameter packing: x = [detunings (1 or n)] + [omegas (n)] + [free widths
# (n-1, the last width is total_length minus their sum)]

class _Packing:
    def __init__(self, problem: OptimizationProblem):
        self.n = problem.n_segments
        self.tie = problem.tie_detuning
        self.free_w = problem.free_widths
        self.n_delta = 1 if self.tie else self.n
        self.n_params = self.n_delta + self.n + (self.n - 1 if self.free_w else 0)
        self.L = problem.total_length
        self.equal_width = problem.total_length / problem.n_segments
        self.w_floor = _WIDTH_FLOOR_FRACTION * self.equal_width

    def unpack(self, x):
        deltas = np.repeat(x[0], self.n) if self.tie else x[:self.n_delta]
        omegas = x[self.n_delta:self.n_delta + self.n]
        if self.free_w:
            head = x[self.n_delta + self.n:]
            widths = np.concatenate([head, [self.L - float(np.sum(head))]])
        else:
            widths = np.full(self.n, self.equal_width)
        return np.asarray(deltas, dtype=float), np.asarray(omegas, dtype=float), widths

    def pack(self, deltas, omegas, widths=None):
        parts = [np.atleast_1d(deltas)[:1] if self.tie else np.asarray(deltas),
                 np.asarray(omegas)]
        if self.free_w:
            parts.append(np.asarray(widths)[:-1])
        return np.concatenate(parts)

    def profile(self, x, problem: OptimizationProblem) -> LaserProfile:
        deltas, omegas, widths = self.unpack(x)
        segs = tuple(Segment(width=float(w), detuning=float(d), rabi=float(o))
                     for w, d, o in zip(widths, deltas, omegas))
        return LaserProfile(species=problem.species, x_start=problem.x_start,
                            segments=segs)

    def scipy_bounds(self, b: ParameterBounds):
        lo = ([b.delta_min] * self.n_delta + [0.0] * self.n
              + [self.w_floor] * (self.n - 1 if self.free_w else 0))
        hi = ([b.delta_max] * self.n_delta + [b.omega_max] * self.n
              + [self.L - self.w_floor] * (self.n - 1 if self.free_w else 0))
        return np.array(lo), np.array(hi)


class _Objective:
    """Caches the latest (value, gradient) pair; scipy asks for them apart."""

    def __init__(self, problem: OptimizationProblem, packing: _Packing):
        self.problem = problem
        self.packing = packing
        self.k = problem.grid.k_values
        self.w = problem.grid.weights
        self._key = None
        self._val = None
        self._grad = None
        self.evaluations = 0

    def _evaluate(self, x):
        key = x.tobytes()
        if key == self._key:
            return
        self.evaluations += 1
        p = self.problem
        pk = self.packing
        deltas, omegas, widths = pk.unpack(x)
        denom = 2.0 * deltas + 1j * p.species.gamma
        values = omegas ** 2 / (2.0 * denom)
        from .potential import ComplexPotentialProfile
        potential = ComplexPotentialProfile(
            x_start=p.x_start, values=tuple(zip(widths, values)))
        chain = _Chain(self.k, potential, p.species.mass_over_hbar,
                       want_gradient=True)
        R1, T1, dR, TbardT = chain.gradient_dV(p.x_start, p.total_length)
        A = 1.0 - np.abs(R1) ** 2 - np.abs(T1) ** 2
        S = np.conj(R1)[None, :] * dR + TbardT          # (n_seg, nk)
        dA_dDelta = (-2.0 * S * (-(omegas ** 2) / denom ** 2)[:, None]).real
        dA_dRabi = (-2.0 * S * (omegas / denom)[:, None]).real
        grad_delta = dA_dDelta @ self.w
        grad_omega = dA_dRabi @ self.w
        parts = [np.array([np.sum(grad_delta)]) if pk.tie else grad_delta,
                 grad_omega]
        if pk.free_w:
            _, _, dRw, TbardTw = chain.gradient_dV(
                p.x_start, p.total_length, terms=chain.width_derivative_terms)
            Sw = np.conj(R1)[None, :] * dRw + TbardTw
            dA_dw = (-2.0 * Sw).real @ self.w
            parts.append(dA_dw[:-1] - dA_dw[-1])
        self._key = key
        self._val = -float(np.dot(self.w, A))
        self._grad = -np.concatenate(parts)
        self._per_k = A

    def fun(self, x):
        self._evaluate(np.asarray(x))
        return self._val

    def jac(self, x):
        self._evaluate(np.asarray(x))
        return self._grad.copy()

    def per_k(self, x):
        self._evaluate(np.asarray(x))
        return self._per_k.copy()


class _Constraints:
    """Weak-driving inequalities g(x) >= 0, vectorized with jacobian.

    Per segment: kappa*|2 Delta + i gamma| - Omega >= 0 and
    kappa*|2 Delta + i gamma| - 2 E_max >= 0.  With free widths, one more
    row keeps the implicit last width above its floor.
    """

    def __init__(self, problem: OptimizationProblem, packing: _Packing):
        self.p = problem
        self.pk = packing
        self.e_max = problem.grid.energy_max(problem.species)
        self.gamma = problem.species.gamma

    def fun(self, x):
        deltas, omegas, _ = self.pk.unpack(np.asarray(x))
        scale = self.p.kappa * np.hypot(2.0 * deltas, self.gamma)
        rows = [scale - omegas, scale - 2.0 * self.e_max]
        if self.pk.free_w:
            head = np.asarray(x)[self.pk.n_delta + self.pk.n:]
            rows.append(np.array([self.pk.L - self.pk.w_floor - float(np.sum(head))]))
        return np.concatenate(rows)

    def jac(self, x):
        x = np.asarray(x)
        deltas, omegas, _ = self.pk.unpack(x)
        n, nd = self.pk.n, self.pk.n_delta
        hyp = np.hypot(2.0 * deltas, self.gamma)
        dscale = self.p.kappa * 4.0 * deltas / hyp
        m = 2 * n + (1 if self.pk.free_w else 0)
        J = np.zeros((m, self.pk.n_params))
        for j in range(n):
            dcol = 0 if self.pk.tie else j
            J[j, dcol] += dscale[j]
            J[j, nd + j] = -1.0
            J[n + j, dcol] += dscale[j]
        if self.pk.free_w:
            J[2 * n, nd + n:] = -1.0
        return J

    def violation(self, x) -> float:
        return float(max(0.0, -np.min(self.fun(x))))


def _kkt_residual(grad_f, x, cons: _Constraints, lo, hi) -> float:
    """Stationarity residual of min f s.t. g >= 0, lo <= x <= hi.

    Fits multipliers by nonnegative least squares over the active set; the
    leftover norm of grad f - J_act^T mu, scaled by max(1, |grad f|), is the
    reported residual.
    """
    g = cons.fun(x)
    J = cons.jac(x)
    scale_g = np.maximum(1.0, np.abs(g))
    cols = [J[i] for i in range(len(g)) if g[i] / scale_g[i] < 1e-6]
    n = len(x)
    for j in range(n):
        span = max(1.0, abs(hi[j] - lo[j]))
        if (x[j] - lo[j]) / span < 1e-9:
            e = np.zeros(n)
            e[j] = 1.0
            cols.append(e)
        if (hi[j] - x[j]) / span < 1e-9:
            e = np.zeros(n)
            e[j] = -1.0
            cols.append(e)
    norm = max(1.0, float(np.linalg.norm(grad_f)))
    if not cols:
        return float(np.linalg.norm(grad_f)) / norm
    C = np.stack(cols, axis=1)
    _, resid = scipy.optimize.nnls(C, grad_f)
    return float(resid) / norm


def _deterministic_start(problem: OptimizationProblem, packing: _Packing,
                         cons: _Constraints) -> np.ndarray:
    """Resonant start when feasible, else just inside the detuning that the
    energy constraint allows; Rabi frequency set for ~0.9 single-pass
    absorption at the grid's median k."""
    p = problem
    gamma = p.species.gamma
    target = 2.0 * cons.e_max / p.kappa
    if target <= gamma:
        delta0 = float(np.clip(0.0, p.bounds.delta_min, p.bounds.delta_max))
    else:
        d_floor = 0.5 * np.sqrt(target ** 2 - gamma ** 2)
        if p.bounds.delta_max < d_floor and p.bounds.delta_min > -d_floor:
            raise OptimizationError(
                "no feasible starting point: the energy constraint needs "
                f"|detuning| >= {d_floor:.6g} us^-1 but the bounds are "
                f"[{p.bounds.delta_min:.6g}, {p.bounds.delta_max:.6g}]",
                restarts=0)
        delta0 = -1.05 * d_floor
        if delta0 < p.bounds.delta_min:
            delta0 = min(1.05 * d_floor, p.bounds.delta_max)
        delta0 = float(np.clip(delta0, p.bounds.delta_min, p.bounds.delta_max))
    k_med = float(np.median(p.grid.k_values))
    mass = p.species.mass_over_hbar
    om_cap = min(p.bounds.omega_max,
                 p.kappa * float(np.hypot(2.0 * delta0, gamma)))
    want = np.log(10.0) / (2.0 * p.total_length)   # 1 - e^{-2 s L} = 0.9

    def im_klocal(om):
        V = om ** 2 / (2.0 * (2.0 * delta0 + 1j * gamma))
        return np.sqrt(complex(k_med ** 2 - 2.0 * mass * V)).imag - want

    if im_klocal(om_cap) < 0:
        omega0 = 0.999 * om_cap
    else:
        omega0 = scipy.optimize.brentq(im_klocal, 0.0, om_cap)
    deltas = np.full(p.n_segments, delta0)
    omegas = np.full(p.n_segments, omega0)
    widths = np.full(p.n_segments, packing.equal_width)
    return packing.pack(deltas, omegas, widths)


def _random_start(rng, problem: OptimizationProblem, packing: _Packing,
                  cons: _Constraints) -> np.ndarray:
    p = problem
    gamma = p.species.gamma
    target = 2.0 * cons.e_max / p.kappa
    d_floor = 0.0 if target <= gamma else 0.5 * np.sqrt(target ** 2 - gamma ** 2)
    n_delta = packing.n_delta
    deltas = np.empty(n_delta)
    for i in range(n_delta):
        lo_mag, hi_mag = d_floor, max(abs(p.bounds.delta_min), p.bounds.delta_max)
        for _ in range(100):
            mag = rng.uniform(lo_mag, hi_mag)
            sign = -1.0 if rng.random() < 0.5 else 1.0
            d = sign * mag
            if p.bounds.delta_min <= d <= p.bounds.delta_max:
                deltas[i] = d
                break
        else:
            raise OptimizationError(
                "no feasible detuning inside the bounds: the energy "
                f"constraint needs |detuning| >= {d_floor:.3g} us^-1",
                restarts=0)
    full_d = np.repeat(deltas[0], packing.n) if packing.tie else deltas
    caps = np.minimum(p.bounds.omega_max,
                      p.kappa * np.hypot(2.0 * full_d, gamma))
    omegas = rng.uniform(0.0, caps)
    if packing.free_w:
        shares = rng.dirichlet(np.ones(packing.n))
        widths = packing.w_floor + shares * (packing.L - packing.n * packing.w_floor)
    else:
        widths = np.full(packing.n, packing.equal_width)
    return packing.pack(full_d, omegas, widths)


def _polish(obj, cons, x, lo, hi):
    nlc = scipy.optimize.NonlinearConstraint(cons.fun, 0.0, np.inf, jac=cons.jac)
    res = scipy.optimize.minimize(
        obj.fun, x, jac=obj.jac, method="trust-constr",
        bounds=scipy.optimize.Bounds(lo, hi), constraints=[nlc],
        options={"maxiter": 800, "gtol": 1e-12, "xtol": 1e-14, "verbose": 0})
    return res.x, int(res.nit)


def _run_single_start(args):
    obj, cons, x0, lo, hi = args
    try:
        res = scipy.optimize.minimize(
            obj.fun, x0, jac=obj.jac, method="SLSQP",
            bounds=list(zip(lo, hi)),
            constraints=[{"type": "ineq", "fun": cons.fun, "jac": cons.jac}],
            options={"maxiter": 500, "ftol": 1e-12})
    except Exception as exc:                       # pragma: no cover
        return None, 0, f"raised {type(exc).__name__}: {exc}"
    x = np.clip(res.x, lo, hi)
    return x, int(res.nit), None


def optimize(problem: OptimizationProblem, warm_starts=(),
             threads: int = 1) -> OptimizationResult:
    """Maximize the grid-averaged absorption over segment parameters.

    warm_starts: extra starting parameter vectors (e.g. a coarser optimum
    embedded into this segmentation); they join the deterministic and the
    seeded random starts.  threads > 1 runs restarts concurrently; results
    are selected deterministically regardless.
    """
    packing = _Packing(problem)
    cons = _Constraints(problem, packing)
    lo, hi = packing.scipy_bounds(problem.bounds)
    rng = np.random.default_rng(problem.seed)

    starts = [_deterministic_start(problem, packing, cons)]
    starts.extend(np.asarray(w, dtype=float) for w in warm_starts)
    for _ in range(problem.multistart):
        starts.append(_random_start(rng, problem, packing, cons))
    for i, s in enumerate(starts):
        if s.shape != (packing.n_params,):
            raise ValueError(
                f"start {i} has {s.shape[0]} parameters, expected {packing.n_params}")
        if cons.violation(s) > 1e-9:
            raise OptimizationError(
                f"infeasible starting point (index {i}, violation "
                f"{cons.violation(s):.2e})", restarts=0)

    # one objective per worker keeps the value/gradient cache thread-local
    objs = [_Objective(problem, packing) for _ in starts]
    jobs = [(o, cons, s, lo, hi) for o, s in zip(objs, starts)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(_run_single_start, jobs))
    else:
        raw = [_run_single_start(j) for j in jobs]

    obj = objs[0]
    summary = []
    candidates = []
    failures = []
    for idx, (x, nit, err) in enumerate(raw):
        if x is None:
            summary.append(float("nan"))
            failures.append(f"start {idx}: {err}")
            continue
        val = -obj.fun(x)
        summary.append(float(val))
        viol = cons.violation(x)
        kkt = _kkt_residual(obj.jac(x), x, cons, lo, hi)
        candidates.append((val, -idx, x, nit, viol, kkt))
    if not candidates:
        raise OptimizationError(
            "all restarts failed:\n" + "\n".join(failures),
            restarts=len(starts))

    candidates.sort(reverse=True)
    val, negidx, x, nit, viol, kkt = candidates[0]
    if kkt > _KKT_TOL or viol > _FEAS_TOL:
        x2, extra = _polish(obj, cons, x, lo, hi)
        val2 = -obj.fun(x2)
        viol2 = cons.violation(x2)
        kkt2 = _kkt_residual(obj.jac(x2), x2, cons, lo, hi)
        if viol2 <= _FEAS_TOL and (val2 >= val - 1e-12 or viol > _FEAS_TOL):
            x, val, viol, kkt = x2, val2, viol2, kkt2
            nit += extra
    converged = bool(kkt <= _KKT_TOL and viol <= _FEAS_TOL)
    profile = packing.profile(x, problem)
    per_k = obj.per_k(x)
    check = objective_value(profile, problem.grid)
    if abs(check - val) > 1e-10:
        raise OptimizationError(
            f"objective re-evaluation mismatch: {val!r} vs {check!r}",
            restarts=len(starts))
    return OptimizationResult(
        profile=profile,
        objective=float(val),
        per_k_absorption=tuple(float(a) for a in per_k),
        iterations=int(nit),
        converged=converged,
        restarts_summary=tuple(summary),
        kkt_residual=float(kkt),
        max_constraint_violation=float(viol),
    )


def embed_profile(coarse: LaserProfile, problem: OptimizationProblem) -> np.ndarray:
    """Parameter vector representing a coarser equal-width optimum inside a
    finer equal-width segmentation (segment counts must divide evenly)."""
    n_coarse = len(coarse.segments)
    n = problem.n_segments
    if n % n_coarse:
        raise ValueError(f"cannot embed {n_coarse} segments into {n}")
    rep = n // n_coarse
    deltas = np.repeat([s.detuning for s in coarse.segments], rep)
    omegas = np.repeat([s.rabi for s in coarse.segments], rep)
    packing = _Packing(problem)
    widths = np.full(n, packing.equal_width)
    return packing.pack(deltas, omegas, widths)
