"""One-channel scattering off a piecewise-constant complex potential.

Transfer matrices act on the pair (psi, psi'/(i k)); with that choice both
components are continuous across interfaces and the full structure is the
ordered product of per-segment matrices.  All matrix entries are entire
functions of the local k^2, so no branch of the complex square root is ever
selected implicitly.  Growing exponentials are factored out of every segment
matrix and tracked as a running log, which keeps the product finite for
arbitrarily opaque structures (reflection comes out of a ratio, transmission
out of a single exponential of the accumulated log).

The reflection/transmission amplitudes use the free-wave convention
psi = e^{ikx} + R1 e^{-ikx} left of the structure and psi = T1 e^{ikx} to
the right; absorption is A = 1 - |R1|^2 - |T1|^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError
from .potential import ComplexPotentialProfile, LaserProfile, profile_to_potential
from .units import AtomSpecies, kinetic_energy

# Series/direct switch for sin(z)/z style helpers; below this the direct
# forms lose digits to cancellation, above it the series would need more terms.
_SMALL_Z = 1e-2
# Entry magnitude that triggers a mid-chain renormalization of the product.
_RENORM_AT = 1e120
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ScatteringAmplitudes:
    """Stationary amplitudes at one incident wavenumber."""

    k: float
    R1: complex
    T1: complex
    A: float


@dataclass(frozen=True)
class GradientRecord:
    """Per-segment derivatives of the absorption A at one k.

    dA_dReV/dA_dImV differentiate with respect to the complex potential of
    each segment; dA_dDelta/dA_dRabi chain through the laser parameters.
    """

    dA_dReV: tuple[float, ...]
    dA_dImV: tuple[float, ...]
    dA_dDelta: tuple[float, ...]
    dA_dRabi: tuple[float, ...]


def transfer_matrix_segment(k_local: complex, width: float) -> np.ndarray:
    """2x2 map of (psi, psi'/(i k_local)) across one constant segment.

    Entries are even in k_local except for the normalization, so the
    Im k_local >= 0 branch convention only fixes which representation is
    returned, not the physics.  det = 1 always.
    """
    if not (width > 0):
        raise ValueError(f"width must be positive, got {width}")
    z = complex(k_local) * width
    c, s = np.cos(z), np.sin(z)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def _segment_entries(k, zeta, w, want_derivative=False):
    """Scaled transfer-matrix entries for segments of squared wavenumber zeta.

    k and zeta broadcast to a common shape; w broadcasts likewise.  Returns
    entries of the segment matrix times e^{-s} with s = |Im(w sqrt(zeta))|,
    and s itself.  Optionally also the (equally scaled) d/dV entries.
    """
    z = w * np.sqrt(zeta.astype(complex))
    s = np.abs(z.imag)
    ep = np.exp(1j * z - s)
    em = np.exp(-1j * z - s)
    cs = 0.5 * (ep + em)
    z2 = z * z
    small = np.abs(z) < _SMALL_Z
    es = np.exp(-s)
    with np.errstate(invalid="ignore", divide="ignore"):
        gs_direct = (ep - em) / (2j * z)
        gs = np.where(small, (1 - z2 / 6 + z2 * z2 / 120 - z2 * z2 * z2 / 5040) * es,
                      gs_direct)
    m11 = cs
    m12 = 1j * k * w * gs
    m21 = 1j * zeta * w * gs / k
    if not want_derivative:
        return (m11, m12, m21, m11), s
    # G2(z) = (z cos z - sin z)/z^3, scaled by e^{-s}; entire, even in z.
    with np.errstate(invalid="ignore", divide="ignore"):
        G2_direct = (cs - gs) / z2
        G2 = np.where(small, (-1 / 3 + z2 / 30 - z2 * z2 / 840 + z2 * z2 * z2 / 45360) * es,
                      G2_direct)
    # mass enters through zeta = k^2 - 2 m V: d zeta / dV = -2 m, folded in
    # by the caller; here we return d/d zeta times (-1) ... kept explicit:
    return (m11, m12, m21, m11), s, gs, G2, z2


def _mat_mul(a, b):
    """(...,2,2) complex matrix product without einsum overhead."""
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (a11 * b11 + a12 * b21, a11 * b12 + a12 * b22,
            a21 * b11 + a22 * b21, a21 * b12 + a22 * b22)


class _Chain:
    """Scaled product of segment matrices over a batch of wavenumbers.

    Holds prefix products F[j] (segments 0..j-1 applied) and, when gradients
    are requested, suffix products B[j] (segments j..N-1), each with its own
    accumulated log scale.
    """

    def __init__(self, k, potential: ComplexPotentialProfile, mass,
                 want_gradient=False):
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise ValueError("incident wavenumber must be positive")
        self.k = k
        self.widths = np.array([w for w, _ in potential.values])
        self.values = np.array([V for _, V in potential.values], dtype=complex)
        self.n_seg = len(self.widths)
        self.mass = mass
        zeta = k[..., None] ** 2 - 2.0 * mass * self.values
        self.zeta = zeta
        self.segment_entries = []
        self.segment_s = []
        self.derivative_terms = [] if want_gradient else None
        self.width_derivative_terms = [] if want_gradient else None
        for j in range(self.n_seg):
            out = _segment_entries(k, zeta[..., j], self.widths[j],
                                   want_derivative=want_gradient)
            if want_gradient:
                entries, s, gs, G2, z2 = out
                w = self.widths[j]
                zj = zeta[..., j]
                d11 = mass * w * w * gs
                d12 = -1j * mass * k * w ** 3 * G2
                d21 = -2j * mass * w / k * (gs + 0.5 * z2 * G2)
                self.derivative_terms.append((d11, d12, d21, d11))
                cs = entries[0]
                self.width_derivative_terms.append(
                    (-zj * w * gs, 1j * k * cs, 1j * zj * cs / k, -zj * w * gs))
            else:
                entries, s = out
            self.segment_entries.append(entries)
            self.segment_s.append(s)

        eye = (np.ones_like(k, dtype=complex), np.zeros_like(k, dtype=complex),
               np.zeros_like(k, dtype=complex), np.ones_like(k, dtype=complex))
        self.F = [eye]
        self.lsF = [np.zeros_like(k)]
        for j in range(self.n_seg):
            prod = _mat_mul(self.segment_entries[j], self.F[-1])
            ls = self.lsF[-1] + self.segment_s[j]
            prod, ls = self._renorm(prod, ls)
            self.F.append(prod)
            self.lsF.append(ls)
        if want_gradient:
            self.B = [None] * (self.n_seg + 1)
            self.lsB = [None] * (self.n_seg + 1)
            self.B[self.n_seg] = eye
            self.lsB[self.n_seg] = np.zeros_like(k)
            for j in range(self.n_seg - 1, -1, -1):
                prod = _mat_mul(self.B[j + 1], self.segment_entries[j])
                ls = self.lsB[j + 1] + self.segment_s[j]
                prod, ls = self._renorm(prod, ls)
                self.B[j] = prod
                self.lsB[j] = ls

    @staticmethod
    def _renorm(prod, ls):
        mags = np.maximum(np.maximum(np.abs(prod[0]), np.abs(prod[1])),
                          np.maximum(np.abs(prod[2]), np.abs(prod[3])))
        big = mags > _RENORM_AT
        if np.any(big):
            scale = np.where(big, mags, 1.0)
            prod = tuple(p / scale for p in prod)
            ls = ls + np.log(scale)
        return prod, ls

    def amplitudes(self, x_start, total_length):
        """R1, T1 (plus internals used by the gradient path)."""
        m11, m12, m21, m22 = self.F[-1]
        alpha = 0.5 * (m11 + m12 - m21 - m22)
        beta = 0.5 * (m11 - m12 - m21 + m22)
        norm = np.maximum(np.maximum(np.abs(m11), np.abs(m12)),
                          np.maximum(np.abs(m21), np.abs(m22)))
        cond = norm / np.maximum(np.abs(beta), 1e-300)
        if np.any(cond > _COND_LIMIT):
            worst = np.max(cond)
            raise IllConditionedError(
                f"transfer-matrix product condition {worst:.2e} exceeds {_COND_LIMIT:.0e}")
        R1 = -np.exp(2j * self.k * x_start) * alpha / beta
        T1 = np.exp(-1j * self.k * total_length - self.lsF[-1] - np.log(beta))
        return R1, T1, alpha, beta

    def gradient_dV(self, x_start, total_length, terms=None):
        """dR1/dterm_j and (T1bar dT1)/dterm_j for every segment, batch over k.

        terms defaults to the d/dV matrices; pass width_derivative_terms for
        d/dwidth.  The transmission factor e^{-ikL} also depends on widths;
        that piece is the caller's (it knows which widths are free).
        """
        R1, T1, alpha, beta = self.amplitudes(x_start, total_length)
        if terms is None:
            terms = self.derivative_terms
        dR = np.empty((self.n_seg,) + self.k.shape, dtype=complex)
        TbardT = np.empty_like(dR)
        phase = np.exp(2j * self.k * x_start)
        for j in range(self.n_seg):
            b11, b12, b21, b22 = self.B[j + 1]
            row0 = 0.5 * (b11 - b21)
            row1 = 0.5 * (b12 - b22)
            d11, d12, d21, d22 = terms[j]
            r0 = row0 * d11 + row1 * d21
            r1 = row0 * d12 + row1 * d22
            f11, f12, f21, f22 = self.F[j]
            colp0, colp1 = f11 + f12, f21 + f22
            colm0, colm1 = f11 - f12, f21 - f22
            dal = r0 * colp0 + r1 * colp1
            dbe = r0 * colm0 + r1 * colm1
            delta_ls = self.lsB[j + 1] + self.segment_s[j] + self.lsF[j] - self.lsF[-1]
            rescale = np.exp(np.clip(delta_ls, -700.0, 700.0))
            dal = dal * rescale
            dbe = dbe * rescale
            dR[j] = -phase * (dal - alpha / beta * dbe) / beta
            TbardT[j] = -np.abs(T1) ** 2 * dbe / beta
        return R1, T1, dR, TbardT


def solve_one_channel(k: float, potential: ComplexPotentialProfile,
                      species: AtomSpecies) -> ScatteringAmplitudes:
    """Stationary scattering amplitudes at one incident k (um^-1)."""
    R1, T1, A = solve_one_channel_batch(np.array([float(k)]), potential, species)
    return ScatteringAmplitudes(k=float(k), R1=complex(R1[0]), T1=complex(T1[0]),
                                A=float(A[0]))


def solve_one_channel_batch(k, potential: ComplexPotentialProfile,
                            species: AtomSpecies):
    """Vectorized amplitudes over a k array; the per-segment potential is
    energy independent and therefore shared across the whole batch."""
    k = np.asarray(k, dtype=float)
    chain = _Chain(k, potential, species.mass_over_hbar)
    R1, T1, _, _ = chain.amplitudes(potential.x_start, potential.total_length)
    A = 1.0 - np.abs(R1) ** 2 - np.abs(T1) ** 2
    return R1, T1, A


def absorption_gradient(k: float, profile: LaserProfile) -> tuple[ScatteringAmplitudes, GradientRecord]:
    """Absorption and its per-segment parameter gradient at one k."""
    A, dRe, dIm, dDelta, dRabi, R1, T1 = _gradient_batch(
        np.array([float(k)]), profile)
    rec = GradientRecord(
        dA_dReV=tuple(float(x) for x in dRe[:, 0]),
        dA_dImV=tuple(float(x) for x in dIm[:, 0]),
        dA_dDelta=tuple(float(x) for x in dDelta[:, 0]),
        dA_dRabi=tuple(float(x) for x in dRabi[:, 0]),
    )
    amps = ScatteringAmplitudes(k=float(k), R1=complex(R1[0]), T1=complex(T1[0]),
                                A=float(A[0]))
    return amps, rec


def _gradient_batch(k, profile: LaserProfile):
    """A(k) and gradients over a k batch; shapes (n_seg, nk) for gradients."""
    potential = profile_to_potential(profile)
    species = profile.species
    chain = _Chain(np.asarray(k, dtype=float), potential,
                   species.mass_over_hbar, want_gradient=True)
    R1, T1, dR, TbardT = chain.gradient_dV(potential.x_start,
                                           potential.total_length)
    A = 1.0 - np.abs(R1) ** 2 - np.abs(T1) ** 2
    S = np.conj(R1)[None, :] * dR + TbardT
    dA_dReV = -2.0 * S.real
    dA_dImV = 2.0 * S.imag
    # chain to laser parameters: V = Omega^2 / (2 (2 Delta + i gamma))
    gamma = species.gamma
    dDelta = np.empty_like(dA_dReV)
    dRabi = np.empty_like(dA_dReV)
    for j, seg in enumerate(profile.segments):
        denom = 2.0 * seg.detuning + 1j * gamma
        dV_dDelta = -seg.rabi ** 2 / denom ** 2
        dV_dRabi = seg.rabi / denom
        dDelta[j] = (-2.0 * S[j] * dV_dDelta).real
        dRabi[j] = (-2.0 * S[j] * dV_dRabi).real
    return A, dA_dReV, dA_dImV, dDelta, dRabi, R1, T1


def _mode_amplitudes(k: float, potential: ComplexPotentialProfile, mass: float):
    """Edge-referenced plane-wave amplitudes inside every segment.

    In segment j the state is a_j e^{i kappa (x - xl_j)} + b_j e^{-i kappa
    (x - xr_j)}, each exponential referenced to its own edge so every
    propagation factor has modulus <= 1.  The interface-matching system is
    therefore well conditioned no matter how opaque the structure is, unlike
    naive forward substitution through the transfer-matrix product.
    """
    if k <= 0:
        raise ValueError("incident wavenumber must be positive")
    widths = np.array([w for w, _ in potential.values])
    values = np.array([V for _, V in potential.values], dtype=complex)
    n = len(widths)
    if n == 0:
        return 0.0 + 0.0j, 1.0 + 0.0j, np.zeros((0, 2), dtype=complex), values
    kappas = np.sqrt(k * k - 2.0 * mass * values)
    kappas = np.where(kappas.imag < 0, -kappas, kappas)
    # measure-zero degeneracy kappa = 0 collapses the basis; nudge off it
    floor = 1e-8 / widths
    kappas = np.where(np.abs(kappas) * widths < 1e-8, floor, kappas)
    phases = np.exp(1j * kappas * widths)

    x_l = potential.x_start
    size = 2 * n + 2
    mat = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    p = np.exp(1j * k * x_l)
    # unknowns: [rhat, a_0, b_0, ..., a_{n-1}, b_{n-1}, that]
    # left boundary, psi and psi'/(ik)
    mat[0, 0] = -1.0
    mat[0, 1] = 1.0
    mat[0, 2] = phases[0]
    rhs[0] = p
    mat[1, 0] = 1.0
    mat[1, 1] = kappas[0] / k
    mat[1, 2] = -kappas[0] / k * phases[0]
    rhs[1] = p
    for i in range(1, n):
        r = 2 * i
        c = 2 * i - 1
        mat[r, c] = phases[i - 1]
        mat[r, c + 1] = 1.0
        mat[r, c + 2] = -1.0
        mat[r, c + 3] = -phases[i]
        mat[r + 1, c] = kappas[i - 1] / k * phases[i - 1]
        mat[r + 1, c + 1] = -kappas[i - 1] / k
        mat[r + 1, c + 2] = -kappas[i] / k
        mat[r + 1, c + 3] = kappas[i] / k * phases[i]
    r = 2 * n
    c = 2 * n - 1
    mat[r, c] = phases[n - 1]
    mat[r, c + 1] = 1.0
    mat[r, c + 2] = -1.0
    mat[r + 1, c] = kappas[n - 1] / k * phases[n - 1]
    mat[r + 1, c + 1] = -kappas[n - 1] / k
    mat[r + 1, c + 2] = -1.0
    sol = np.linalg.solve(mat, rhs)
    R1 = complex(sol[0] * np.exp(1j * k * x_l))
    T1 = complex(sol[-1] * np.exp(-1j * k * potential.x_end))
    ab = sol[1:-1].reshape(n, 2)
    return R1, T1, ab, kappas


def one_channel_wavefunction(k: float, potential: ComplexPotentialProfile,
                             species: AtomSpecies, x: np.ndarray) -> np.ndarray:
    """Stationary state psi(x) with unit incident amplitude, on arbitrary x."""
    k = float(k)
    x = np.asarray(x, dtype=float)
    R1, T1, ab, kappas = _mode_amplitudes(k, potential,
                                          species.mass_over_hbar)
    psi = np.empty(x.shape, dtype=complex)
    edges = potential.edges()
    left = x < edges[0]
    right = x >= edges[-1]
    psi[left] = np.exp(1j * k * x[left]) + R1 * np.exp(-1j * k * x[left])
    psi[right] = T1 * np.exp(1j * k * x[right])
    for j in range(len(kappas)):
        sel = (~left & ~right & (x >= edges[j]) & (x < edges[j + 1]))
        if not np.any(sel):
            continue
        dxL = x[sel] - edges[j]
        dxR = x[sel] - edges[j + 1]
        psi[sel] = (ab[j, 0] * np.exp(1j * kappas[j] * dxL)
                    + ab[j, 1] * np.exp(-1j * kappas[j] * dxR))
    return psi
