"""Frame integration: solve dPhi = Phi xi along paths in the z-domain.

Two levels are supported.  Loop-level integration carries the whole window of
Laurent coefficients of Phi through the ODE at once (the potential has fixed
finite lam-degree, so the right multiplication by xi is a short convolution).
Pointwise integration fixes a spectral value lam and propagates a single 2x2
matrix; monodromy matrices around punctures are computed this way.

Determinants: all potential families are trace free, so det Phi = 1 is exact
for the true flow and drifts only through integration error.  With
``det_renormalize`` on (the default) the drift is divided out after every
path segment using the principal square root of det Phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .loops import LaurentLoop, loop_det
from .potentials import PoleError, Potential, eval_xi, trinoid_h, trinoid_q

#: Paths must keep this distance from declared singular points.
EPS_POLE = 1e-3


class IntegrationError(RuntimeError):
    """ODE solver failure; message carries the z-location of the failure."""


@dataclass(frozen=True)
class DomainPath:
    """Piecewise-linear path in the z-plane.

    ``closed`` appends the segment from the last vertex back to the first;
    the first vertex is the base point.
    """

    vertices: tuple[complex, ...]
    closed: bool = False

    def __post_init__(self) -> None:
        verts = tuple(complex(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 1:
            raise ValueError("path needs at least one vertex")
        for u, v in zip(verts, verts[1:]):
            if u == v:
                raise ValueError(f"consecutive path vertices coincide at {u}")
        if self.closed and len(verts) >= 2 and verts[0] == verts[-1]:
            raise ValueError("closed path must not repeat the base vertex")

    @classmethod
    def line(cls, z0: complex, z1: complex) -> "DomainPath":
        return cls((complex(z0), complex(z1)))

    @classmethod
    def polyline(cls, points) -> "DomainPath":
        return cls(tuple(complex(p) for p in points))

    def segments(self) -> list[tuple[complex, complex]]:
        verts = self.vertices
        segs = list(zip(verts, verts[1:]))
        if self.closed and len(verts) >= 2:
            segs.append((verts[-1], verts[0]))
        return segs

    @property
    def base(self) -> complex:
        return self.vertices[0]

    @property
    def end(self) -> complex:
        return self.vertices[0] if self.closed else self.vertices[-1]


def circle_path(center: complex, radius: float, n: int = 64, start_angle: float = 0.0) -> DomainPath:
    """Closed n-gon approximation of a circle, traversed counterclockwise."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if n < 3:
        raise ValueError(f"need at least 3 vertices, got {n}")
    angles = start_angle + 2.0 * np.pi * np.arange(n) / n
    verts = tuple(complex(center) + radius * np.exp(1j * angles))
    return DomainPath(verts, closed=True)


def default_monodromy_circle(pot: Potential, singularity: complex, n: int = 64) -> DomainPath:
    """Circle around one singular point; radius is half the distance to the
    nearest other singularity (falling back to half the distance to the base
    point when the singular set is a single point)."""
    s = complex(singularity)
    others = [abs(p - s) for p in pot.singular_points if abs(p - s) > 1e-12]
    if others:
        radius = 0.5 * min(others)
    else:
        radius = 0.5 * abs(pot.base_point - s)
        if radius == 0.0:
            raise ValueError("cannot choose a default radius: base point sits on the singularity")
    return circle_path(s, radius, n=n)


def _segment_pole_distance(a: complex, b: complex, p: complex) -> float:
    """Distance from point p to the segment [a, b]."""
    d = b - a
    t = ((p - a) * np.conj(d)).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(a + t * d - p)


def validate_path(path: DomainPath, pot: Potential, eps_pole: float = EPS_POLE) -> None:
    """Reject paths that pass within eps_pole of a declared singular point."""
    for a, b in path.segments():
        for p in pot.singular_points:
            dist = _segment_pole_distance(a, b, p)
            if dist < eps_pole:
                raise PoleError(
                    f"path segment {a} -> {b} passes within {dist:.2e} of singular point {p}"
                )


@dataclass(frozen=True)
class OdeOptions:
    """Integrator configuration.

    method "rk45" uses adaptive RK45 with atol = rtol = tolerance; "rk4" uses
    fixed steps of at most ``step`` in |dz|.
    """

    method: str = "rk45"
    tolerance: float = 1e-10
    step: float = 1e-2
    det_renormalize: bool = True

    def __post_init__(self) -> None:
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"method must be 'rk45' or 'rk4', got {self.method!r}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")


# ---------------------------------------------------------------------------
# Pointwise (fixed lam) integration


def _xi_at_lambda(pot: Potential, lam: complex):
    """Fast z -> xi(z, lam) closure, avoiding loop construction per call."""
    lam = complex(lam)
    v = pot.variant
    p = pot.spec.params
    if v == "sphere":
        m = np.array([[0, 1 / lam], [0, 0]], dtype=np.complex128)
        return lambda z: m
    if v == "torus":
        m = np.array([[0, 1 / lam], [1 / lam, 0]], dtype=np.complex128)
        return lambda z: m
    if v == "equivariant":
        a, b, c = p["a"], p["b"], p["c"]
        off_ur = a / lam + b * lam
        off_ll = a * lam + b / lam
        d = np.array([[c, off_ur], [off_ll, -c]], dtype=np.complex128)
        return lambda z: d / z
    if v == "radial":
        c, k = complex(p["c"]), p["k"]
        inv = 1.0 / lam

        def xi_radial(z: complex) -> np.ndarray:
            return np.array([[0, inv], [c * z**k * inv, 0]], dtype=np.complex128)

        return xi_radial
    if v == "trinoid":
        lh = lam * trinoid_h(lam, p["lambda0"])
        v0, v1, vinf = p["v0"], p["v1"], p["vinf"]
        inv = 1.0 / lam

        def xi_trinoid(z: complex) -> np.ndarray:
            q = trinoid_q(z, v0, v1, vinf)
            return np.array([[0, inv], [lh * q, 0]], dtype=np.complex128)

        return xi_trinoid

    from .loops import loop_eval

    def xi_generic(z: complex) -> np.ndarray:
        return loop_eval(eval_xi(pot, z), lam)

    return xi_generic


def _rk4_fixed(rhs, y0: np.ndarray, n_steps: int) -> np.ndarray:
    """Classical RK4 on y' = rhs(t, y), t in [0, 1], complex array state."""
    y = y0.copy()
    h = 1.0 / n_steps
    t = 0.0
    for _ in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


def _solve_segment_complex(rhs, y0: np.ndarray, opts: OdeOptions, seg_len: float, z_at):
    """Integrate a complex array state over t in [0,1] with the chosen method."""
    if opts.method == "rk4":
        n_steps = max(1, int(np.ceil(seg_len / opts.step)))
        return _rk4_fixed(rhs, y0, n_steps)
    shape = y0.shape

    def rhs_real(t: float, yr: np.ndarray) -> np.ndarray:
        y = yr.view(np.complex128).reshape(shape)
        return rhs(t, y).ravel().view(np.float64)

    sol = solve_ivp(
        rhs_real,
        (0.0, 1.0),
        np.ascontiguousarray(y0).ravel().view(np.float64),
        method="RK45",
        rtol=opts.tolerance,
        atol=opts.tolerance,
    )
    if not sol.success:
        raise IntegrationError(f"adaptive integrator failed near z = {z_at(sol.t[-1])}: {sol.message}")
    return sol.y[:, -1].copy().view(np.complex128).reshape(shape)


def integrate_at_lambda(
    pot: Potential,
    path: DomainPath,
    phi0: np.ndarray | None = None,
    lam: complex = 1.0,
    opts: OdeOptions = OdeOptions(),
) -> np.ndarray:
    """Propagate a single 2x2 frame along the path at fixed spectral value."""
    validate_path(path, pot)
    xi = _xi_at_lambda(pot, lam)
    y = np.eye(2, dtype=np.complex128) if phi0 is None else np.asarray(phi0, dtype=np.complex128).copy()
    for a, b in path.segments():
        dz = b - a

        def rhs(t: float, m: np.ndarray, a=a, dz=dz) -> np.ndarray:
            return m @ xi(a + t * dz) * dz

        y = _solve_segment_complex(rhs, y, opts, abs(dz), lambda t, a=a, dz=dz: a + t * dz)
        if opts.det_renormalize:
            y = y / np.sqrt(np.linalg.det(y))
    return y


def monodromy(
    pot: Potential,
    gamma: DomainPath,
    lam: complex,
    opts: OdeOptions = OdeOptions(),
    phi0: np.ndarray | None = None,
) -> np.ndarray:
    """Left monodromy H(gamma)(lam) = Phi_after Phi_before^{-1} around a loop."""
    if not gamma.closed:
        raise ValueError("monodromy needs a closed path")
    before = np.eye(2, dtype=np.complex128) if phi0 is None else np.asarray(phi0, dtype=np.complex128)
    after = integrate_at_lambda(pot, gamma, before, lam, opts)
    return after @ np.linalg.inv(before)


def unitarizing_gauge(mats, tol: float = 1e-8) -> np.ndarray:
    """Simultaneous unitarizer of a family of SL(2,C) monodromies.

    Finds C with C H C^{-1} in SU(2) for every H in ``mats``, when one
    exists.  The monodromies of a multiply-connected potential generically
    take values outside the unitary loop group in the default Phi(base) = id
    gauge; conjugating by a z-independent dressing matrix fixes this exactly
    when the group generated by the monodromies preserves a positive definite
    Hermitian form M (then C = M^{1/2}).  M is recovered as the nullspace of
    the stacked linear conditions H^* M H = M over Hermitian matrices.

    Raises ValueError if no invariant form exists (residual above tol) or if
    the form is indefinite, i.e. the representation is not unitarizable.
    """
    mats = [np.asarray(m, dtype=np.complex128) for m in mats]
    if not mats:
        raise ValueError("need at least one matrix")

    # Hermitian M = x0*E00 + x1*E11 + x2*(E01+E10) + x3*(i E01 - i E10)
    basis = [
        np.array([[1, 0], [0, 0]], dtype=np.complex128),
        np.array([[0, 0], [0, 1]], dtype=np.complex128),
        np.array([[0, 1], [1, 0]], dtype=np.complex128),
        np.array([[0, 1j], [-1j, 0]], dtype=np.complex128),
    ]
    rows = []
    for h in mats:
        cols = [h.conj().T @ e @ h - e for e in basis]
        # each condition is Hermitian: record its 4 real components
        for comp in (
            lambda m: m[0, 0].real,
            lambda m: m[1, 1].real,
            lambda m: m[0, 1].real,
            lambda m: m[0, 1].imag,
        ):
            rows.append([comp(c) for c in cols])
    a = np.array(rows, dtype=np.float64)
    _, svals, vt = np.linalg.svd(a)
    if svals[-1] > tol * max(1.0, svals[0]):
        raise ValueError(
            f"no common invariant Hermitian form (residual {svals[-1]:.2e}); "
            "monodromies are not simultaneously unitarizable"
        )
    x = vt[-1]
    m = sum(xi * e for xi, e in zip(x, basis))
    evals, evecs = np.linalg.eigh(m)
    if evals[0] < 0 and evals[-1] < 0:
        evals, m = -evals[::-1], -m
        evecs = evecs[:, ::-1]
    if evals[0] <= 0:
        raise ValueError("invariant form is indefinite; representation not unitarizable")
    m /= np.sqrt(np.linalg.det(m).real)
    evals, evecs = np.linalg.eigh(m)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


# ---------------------------------------------------------------------------
# Loop-level integration


def _xi_coeff_fn(pot: Potential, k_min: int, k_max: int):
    """z -> dense xi coefficient array on [k_min, k_max], built once per path."""

    def fn(z: complex) -> np.ndarray:
        loop = eval_xi(pot, z)
        out = np.zeros((k_max - k_min + 1, 2, 2), dtype=np.complex128)
        lo = loop.k_min - k_min
        out[lo : lo + loop.coeffs.shape[0]] = loop.coeffs
        return out

    return fn


def _xi_degree_range(pot: Potential) -> tuple[int, int]:
    z = pot.base_point
    if z in pot.singular_points:  # custom specs may declare odd base points
        z = z + 0.1
    loop = eval_xi(pot, z)
    return loop.k_min, loop.k_max


def _convolve_clip(phi: np.ndarray, phi_kmin: int, xi: np.ndarray, xi_kmin: int,
                   n_min: int, n_max: int) -> np.ndarray:
    """(Phi * xi) convolution clipped back onto the state window [n_min, n_max]."""
    out_kmin = phi_kmin + xi_kmin
    ka = phi.shape[0]
    kb = xi.shape[0]
    full = np.empty((ka + kb - 1, 2, 2), dtype=np.complex128)
    for r in range(2):
        for c in range(2):
            full[:, r, c] = np.convolve(phi[:, r, 0], xi[:, 0, c]) + np.convolve(
                phi[:, r, 1], xi[:, 1, c]
            )
    clipped = np.zeros((n_max - n_min + 1, 2, 2), dtype=np.complex128)
    lo = max(out_kmin, n_min)
    hi = min(out_kmin + ka + kb - 2, n_max)
    if lo <= hi:
        clipped[lo - n_min : hi - n_min + 1] = full[lo - out_kmin : hi - out_kmin + 1]
    return clipped


def _renormalize_det_loop(coeffs: np.ndarray, k_min: int) -> np.ndarray:
    """Divide a loop by the principal square root of its determinant loop.

    det Phi is a scalar Laurent polynomial close to 1; its inverse square root
    is computed on circle samples and projected back onto the state window.
    """
    k = coeffs.shape[0]
    loop = LaurentLoop(coeffs, k_min)
    dcoef, dkmin = loop_det(loop)
    m = 4 * (dcoef.shape[0] + k) + 4
    lam = np.exp(2j * np.pi * np.arange(m) / m)
    powers = lam[:, None] ** (dkmin + np.arange(dcoef.shape[0]))[None, :]
    dvals = powers @ dcoef
    if np.any(np.abs(dvals) < 1e-8):
        raise IntegrationError("determinant loop vanishes on the circle; cannot renormalize")
    svals = 1.0 / np.sqrt(dvals)
    # inverse DFT of the sample values onto the state window
    ks = k_min + np.arange(k)
    proj = lam[:, None] ** (-ks)[None, :]
    scoef = (svals[:, None] * proj).sum(axis=0) / m
    sloop = np.zeros((k, 2, 2), dtype=np.complex128)
    sloop[:, 0, 0] = scoef
    sloop[:, 1, 1] = scoef
    return _convolve_clip(coeffs, k_min, sloop, k_min, k_min, k_min + k - 1)


def integrate_frame(
    pot: Potential,
    path: DomainPath,
    phi0: LaurentLoop | None = None,
    opts: OdeOptions = OdeOptions(),
    window: int | None = None,
) -> LaurentLoop:
    """Integrate dPhi = Phi xi at the level of Laurent coefficient windows.

    The state is the coefficient array of Phi on [-window, window]; the right
    multiplication by xi is clipped back onto the window each evaluation, so
    the result is the exact flow of the truncated system.
    """
    from .loops import DEFAULT_WINDOW_N

    n = DEFAULT_WINDOW_N if window is None else int(window)
    if n < 1:
        raise ValueError(f"window must be >= 1, got {n}")
    validate_path(path, pot)

    n_min, n_max = -n, n
    k = n_max - n_min + 1
    if phi0 is None:
        y = np.zeros((k, 2, 2), dtype=np.complex128)
        y[-n_min] = np.eye(2)
    else:
        y = np.zeros((k, 2, 2), dtype=np.complex128)
        lo = max(phi0.k_min, n_min)
        hi = min(phi0.k_max, n_max)
        if lo > hi:
            raise ValueError("phi0 lies entirely outside the state window")
        y[lo - n_min : hi - n_min + 1] = phi0.coeffs[lo - phi0.k_min : hi - phi0.k_min + 1]

    xk_min, xk_max = _xi_degree_range(pot)
    xi_fn = _xi_coeff_fn(pot, xk_min, xk_max)

    for a, b in path.segments():
        dz = b - a

        def rhs(t: float, state: np.ndarray, a=a, dz=dz) -> np.ndarray:
            xi = xi_fn(a + t * dz)
            return _convolve_clip(state, n_min, xi, xk_min, n_min, n_max) * dz

        y = _solve_segment_complex(rhs, y, opts, abs(dz), lambda t, a=a, dz=dz: a + t * dz)
        if opts.det_renormalize:
            y = _renormalize_det_loop(y, n_min)

    return LaurentLoop(y, n_min)
