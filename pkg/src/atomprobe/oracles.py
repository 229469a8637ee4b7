"""Independent cross-check integrators for the stationary scattering problem.

These deliberately avoid the transfer-matrix/interface-matching code paths:
the Schroedinger equation is integrated as a first-order linear ODE with a
high-order composition of Cayley (implicit midpoint) steps, marching from
the transmitted side back to the incident side.  Backward marching makes the
incident-direction content the growing one, which is the numerically stable
direction for absorbing structures.

Agreement between these integrators and the production solvers is the main
correctness evidence for both, so nothing here may import from scatter or
twochannel.
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError
from .potential import ComplexPotentialProfile, LaserProfile
from .units import AtomSpecies

# Triple-jump composition coefficients: starting from one 2nd-order step,
# three recursions lift the order to 8 (27 substeps per step).
def _composition_gammas() -> np.ndarray:
    gam = [1.0]
    for kk in (1, 2, 3):
        p = 2 * kk + 1
        g1 = 1.0 / (2.0 - 2.0 ** (1.0 / p))
        g0 = -(2.0 ** (1.0 / p)) / (2.0 - 2.0 ** (1.0 / p))
        gam = [gi * g for g in (g1, g0, g1) for gi in gam]
    return np.array(gam)


_GAMMAS = _composition_gammas()
_RENORM_AT = 1e100
_MAX_HALVINGS = 10


def _step_operator(A: np.ndarray, h: float) -> np.ndarray:
    """Composed Cayley step across width h for constant system matrix A.

    All factors are rational in the same A and therefore commute; the
    product order is immaterial.
    """
    n = A.shape[0]
    eye = np.eye(n, dtype=complex)
    op = eye
    for g in _GAMMAS:
        half = 0.5 * g * h * A
        op = op @ np.linalg.solve(eye - half, eye + half)
    return op


def _matrix_power_scaled(op: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    """op**n with entries renormalized along the way; returns (mat, log scale)."""
    result = np.eye(op.shape[0], dtype=complex)
    log_scale = 0.0
    base = op.copy()
    while n:
        if n & 1:
            result = result @ base
            m = np.abs(result).max()
            if m > _RENORM_AT:
                result /= m
                log_scale += np.log(m)
        n >>= 1
        if n:
            base = base @ base
            m = np.abs(base).max()
            if m > _RENORM_AT:
                base /= m
                log_scale += np.log(m) * n  # applied n more times
    return result, log_scale


def _propagate_left(y_right, system_mats, widths, rates, refine):
    """March a state vector from the right edge to the left edge.

    rates sets the per-segment step density (steps per unit width times the
    local wavenumber scale); refine doubles everything.
    """
    y = np.array(y_right, dtype=complex)
    log_scale = 0.0
    for A, w, rate in zip(reversed(system_mats), reversed(widths),
                          reversed(rates)):
        n_steps = max(16, int(np.ceil(rate * w * 8))) * refine
        op, ls = _matrix_power_scaled(_step_operator(A, -w / n_steps), n_steps)
        y = op @ y
        log_scale += ls
        m = np.abs(y).max()
        if m > _RENORM_AT:
            y /= m
            log_scale += np.log(m)
    return y, log_scale


def oracle_one_channel(k: float, potential: ComplexPotentialProfile,
                       species: AtomSpecies, tol: float = 1e-10):
    """(R1, T1) for one incident k, by backward ODE integration."""
    k = float(k)
    if k <= 0:
        raise ValueError("incident wavenumber must be positive")
    mass = species.mass_over_hbar
    widths = [w for w, _ in potential.values]
    zetas = [k * k - 2.0 * mass * V for _, V in potential.values]
    mats = [np.array([[0.0, 1.0], [-z, 0.0]], dtype=complex) for z in zetas]
    rates = [max(k, abs(z) ** 0.5) for z in zetas]
    x_l, x_r = potential.x_start, potential.x_end

    prev = None
    refine = 1
    for _ in range(_MAX_HALVINGS):
        y, logc = _propagate_left((1.0, 1j * k), mats, widths, rates, refine)
        a = 0.5 * (y[0] + y[1] / (1j * k))
        b = 0.5 * (y[0] - y[1] / (1j * k))
        R1 = (b / a) * np.exp(2j * k * x_l)
        T1 = np.exp(-1j * k * (x_r - x_l) - logc - np.log(a))
        if prev is not None and abs(R1 - prev[0]) < tol and abs(T1 - prev[1]) < tol:
            return complex(R1), complex(T1)
        prev = (R1, T1)
        refine *= 2
    raise ConvergenceError(
        f"backward integration did not converge to {tol} at k={k}")


def _coupling_matrix(detuning: float, rabi: float, gamma: float) -> np.ndarray:
    return np.array([[0.0, 0.5 * rabi],
                     [0.5 * rabi, -detuning - 0.5j * gamma]], dtype=complex)


def oracle_two_channel(k: float, profile: LaserProfile, tol: float = 1e-10):
    """(R1, T1, R2, T2) by shooting two backward trial solutions.

    Channel-2 amplitudes follow the edge-referenced convention: R2 multiplies
    e^{-i q (x - x_start)} and T2 multiplies e^{+i q (x - x_end)}, with q
    taken on the Im q > 0 branch so both tails decay away from the structure.
    """
    k = float(k)
    if k <= 0:
        raise ValueError("incident wavenumber must be positive")
    species = profile.species
    mass = species.mass_over_hbar
    gamma = species.gamma
    energy = k * k / (2.0 * mass)
    segs = profile.segments
    if not segs:
        return 0.0 + 0.0j, 1.0 + 0.0j, 0.0 + 0.0j, 0.0 + 0.0j
    widths = [s.width for s in segs]
    mats = []
    rates = []
    for s in segs:
        U = _coupling_matrix(s.detuning, s.rabi, gamma)
        block = 2.0 * mass * (U - energy * np.eye(2))
        A = np.zeros((4, 4), dtype=complex)
        A[0, 2] = 1.0
        A[1, 3] = 1.0
        A[2:, :2] = block
        mats.append(A)
        lam = np.max(np.abs(np.linalg.eigvals(block)))
        rates.append(max(k, lam ** 0.5))
    # channel-2 edge wavenumbers from the adjoining detunings
    def _edge_q(detuning):
        q = np.sqrt(2.0 * mass * (energy + detuning + 0.5j * gamma))
        return -q if q.imag < 0 else q
    q_l = _edge_q(segs[0].detuning)
    q_r = _edge_q(segs[-1].detuning)
    x_l = profile.x_start
    length = profile.total_length

    trial_rights = (np.array([1.0, 0.0, 1j * k, 0.0], dtype=complex),
                    np.array([0.0, 1.0, 0.0, 1j * q_r], dtype=complex))
    prev = None
    refine = 1
    for _ in range(_MAX_HALVINGS):
        cols_a = np.zeros((2, 2), dtype=complex)
        cols_b = np.zeros((2, 2), dtype=complex)
        logs = np.zeros(2)
        for t, y0 in enumerate(trial_rights):
            y, logc = _propagate_left(y0, mats, widths, rates, refine)
            cols_a[0, t] = 0.5 * (y[0] + y[2] / (1j * k))
            cols_a[1, t] = 0.5 * (y[1] + y[3] / (1j * q_l))
            cols_b[0, t] = 0.5 * (y[0] - y[2] / (1j * k))
            cols_b[1, t] = 0.5 * (y[1] - y[3] / (1j * q_l))
            logs[t] = logc
        # lambda: unit channel-1 incident, zero incoming channel-2 content;
        # the incident wave carries phase e^{i k x_l} at the structure, which
        # every outgoing amplitude inherits
        lam = np.linalg.solve(cols_a, np.array([1.0, 0.0], dtype=complex))
        b = cols_b @ lam
        R1 = b[0] * np.exp(2j * k * x_l)
        R2 = b[1] * np.exp(1j * k * x_l)
        T1 = lam[0] * np.exp(-logs[0]) * np.exp(-1j * k * length)
        T2 = lam[1] * np.exp(-logs[1]) * np.exp(1j * k * x_l)
        amps = (complex(R1), complex(T1), complex(R2), complex(T2))
        if prev is not None and all(abs(x - p) < tol for x, p in zip(amps, prev)):
            return amps[0], amps[1], amps[2], amps[3]
        prev = amps
        refine *= 2
    raise ConvergenceError(
        f"two-channel backward integration did not converge to {tol} at k={k}")
