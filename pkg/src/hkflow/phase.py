"""Complex phase field of an immersed surface and the pointwise meters.

The phase a(x) is the canonical twistor coefficient of the oriented
orthonormal frame at each node.  Gradients of a are central differences
in parameter space; the energy density is the edge (Dirichlet form)
density of surface.dirichlet_energy_density, so that the integral of
|grad a|^2 matches the quadratic form of the discrete Laplacian exactly.

The identity meters (mean-curvature formula, frame identity, polar
identity, hyper-Lagrangian residual) all work in the basis adapted to
the pair (a, b) where b is a deterministic pointwise-orthogonal
companion phase; every exported number is independent of that choice
and of the normal gauge, which the tests pin down.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import FrameError, PreconditionError
from .surface import dirichlet_energy_density, laplace_beltrami, surface_integral

PHI_SWAP_TOL = 0.1       # switch companion chart when |z x a| falls below this
POLE_TOL = 0.05          # refuse polar charts closer than this to |a3| = 1
LAGRANGIAN_TOL = 0.05    # refuse the Lagrangian angle beyond this |a3|
FRAME_VERIFY_TOL = 1e-6


@dataclass
class PhaseField:
    a: np.ndarray                 # (nu, nv, 3) unit phase vectors
    grad_a: np.ndarray            # (nu, nv, 2, 3) central parameter gradients
    energy_density: np.ndarray    # (nu, nv) edge-form |grad a|^2


def _central_grad(fld, cache):
    hu, hv = cache.hu, cache.hv
    du = (np.roll(fld, -1, axis=0) - np.roll(fld, 1, axis=0)) / (2 * hu)
    dv = (np.roll(fld, -1, axis=1) - np.roll(fld, 1, axis=1)) / (2 * hv)
    return np.stack([du, dv], axis=2)


def field_from_array(a, cache):
    """PhaseField from a raw per-node direction field (renormalized first)."""
    a = np.asarray(a, float)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    return PhaseField(a, _central_grad(a, cache), dirichlet_energy_density(a, cache))


def phase_field(cache, triple):
    """Canonical phase of every node frame, with the defining relations
    verified in bulk (mirrors kernel.canonical_phase_from_frame)."""
    js = triple.as_stack()
    e1, e2, e3, e4 = cache.e1, cache.e2, cache.e3, cache.e4
    a = np.einsum("dkl,ijl,ijk->ijd", js, e1, e2, optimize=True)
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    jpsi_e1 = np.einsum("ijd,dkl,ijl->ijk", a, js, e1, optimize=True)
    jpsi_e3 = np.einsum("ijd,dkl,ijl->ijk", a, js, e3, optimize=True)
    residual = np.linalg.norm(jpsi_e1 - e2, axis=-1) + np.linalg.norm(
        jpsi_e3 + e4, axis=-1
    )
    worst = float(residual.max())
    if worst > FRAME_VERIFY_TOL:
        ij = np.unravel_index(np.argmax(residual), residual.shape)
        raise FrameError(
            f"node frame at {ij} violates the twistor relations: residual {worst:.3e}"
        )
    return PhaseField(a, _central_grad(a, cache), dirichlet_energy_density(a, cache))


def twistor_energy(pf, cache):
    return surface_integral(pf.energy_density, cache)


def tension_field(pf, cache):
    """Delta a + |grad a|^2 a, the sphere-projected driving term."""
    return laplace_beltrami(pf.a, cache) + pf.energy_density[..., None] * pf.a


def kahler_angle(pf):
    return np.arccos(np.clip(pf.a[..., 2], -1.0, 1.0))


def phi_field(a):
    """Deterministic companion phase b(x) orthogonal to a(x).

    z x a away from the poles of the third axis, x x a near them; both
    branches are normalized cross products so b is unit and b . a = 0.
    """
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    zxa = np.stack([-a2, a1, np.zeros_like(a1)], axis=-1)
    xxa = np.stack([np.zeros_like(a1), -a3, a2], axis=-1)
    use_z = np.linalg.norm(zxa, axis=-1) > PHI_SWAP_TOL
    b = np.where(use_z[..., None], zxa, xxa)
    return b / np.linalg.norm(b, axis=-1, keepdims=True)


def _wrap_angle(t):
    return (t + np.pi) % (2 * np.pi) - np.pi


def _angle_grad(theta, cache):
    """Central gradient of an angle field with 2 pi jumps removed."""
    hu, hv = cache.hu, cache.hv
    du = _wrap_angle(np.roll(theta, -1, axis=0) - np.roll(theta, 1, axis=0)) / (2 * hu)
    dv = _wrap_angle(np.roll(theta, -1, axis=1) - np.roll(theta, 1, axis=1)) / (2 * hv)
    return np.stack([du, dv], axis=2)


def _winding(theta, axis):
    jumps = _wrap_angle(np.roll(theta, -1, axis=axis) - theta)
    total = jumps.sum(axis=axis)
    return int(np.round(np.mean(total) / (2 * np.pi)))


LagrangianAngle = namedtuple("LagrangianAngle", "theta residual winding")


def lagrangian_angle(pf, cache):
    """Unwrapped Lagrangian angle and the L2 exactness residual.

    theta = atan2(a2, a1).  For a Lagrangian surface the contraction of
    the mean curvature with omega_{J3} is an exact form; under the pinned
    triple the identity reads i_H omega + d theta = 0, and the residual
    is the L2 norm of that combination.  Only claimed for surfaces that
    are Lagrangian to begin with, hence the a3 gate.
    """
    max_a3 = float(np.abs(pf.a[..., 2]).max())
    if max_a3 >= LAGRANGIAN_TOL:
        raise PreconditionError(
            f"not-lagrangian: max |a3| = {max_a3:.3f} exceeds {LAGRANGIAN_TOL}"
        )
    raw = np.arctan2(pf.a[..., 1], pf.a[..., 0])
    rows = np.unwrap(raw, axis=1)
    col0 = np.unwrap(raw[:, 0])
    theta = rows + (col0 - raw[:, 0])[:, None]

    # omega_{J3}(H, f_i) in the pinned convention; J3 H spelled out
    H = _cachefield(cache, "H")
    j3h = np.stack([H[..., 3], -H[..., 2], H[..., 1], -H[..., 0]], axis=-1)
    r_u = (j3h * cache.f_u).sum(-1)
    r_v = (j3h * cache.f_v).sum(-1)
    dth = _angle_grad(theta, cache)
    res_u = r_u + dth[..., 0]
    res_v = r_v + dth[..., 1]
    ginv = cache.ginv
    sq = (
        ginv[..., 0, 0] * res_u**2
        + 2 * ginv[..., 0, 1] * res_u * res_v
        + ginv[..., 1, 1] * res_v**2
    )
    residual = float(np.sqrt(max(surface_integral(sq, cache), 0.0)))
    winding = (_winding(raw, 0), _winding(raw, 1))
    return LagrangianAngle(theta, residual, winding)


def _cachefield(cache, name):
    return getattr(cache, name)


def _apply_phase(coeff, vec, triple):
    """(sum_d coeff_d J_d) vec for per-node coefficient and vector fields."""
    js = triple.as_stack()
    return np.einsum("ijd,dkl,ijl->ijk", coeff, js, vec, optimize=True)


def _to_frame(comp_u, comp_v, cache):
    """Convert 1-form components on (f_u, f_v) to the orthonormal frame
    using the metric Gram-Schmidt rows."""
    gs = cache.gs
    c1 = gs[..., 0, 0] * comp_u
    c2 = gs[..., 1, 0] * comp_u + gs[..., 1, 1] * comp_v
    return c1, c2


def plf_residual(cache, pf, triple, companion=None):
    """Pointwise defect of the mean-curvature formula.

    With J = J_a, K = J_b for the companion b, the surface satisfies
    i_H Omega + 2 dbar(a'_2 + i a'_3) = 0, where the primes are the
    coefficients of nearby phases in the basis adapted at the node and
    dbar f = (df - i df(J .))/2 along the surface.  Returns the norm of
    the defect 1-form per node; both terms are assembled in parameter
    indices and pushed to the orthonormal frame together.

    companion overrides the default b field; the result is independent
    of that choice, which the tests exercise.
    """
    a = pf.a
    b = phi_field(a) if companion is None else companion
    axb = np.cross(a, b)

    kh = _apply_phase(b, cache.H, triple)          # J_b H
    jkh = _apply_phase(a, kh, triple)              # J_a J_b H
    p_u = (jkh * cache.f_u).sum(-1) - 1j * (kh * cache.f_u).sum(-1)
    p_v = (jkh * cache.f_v).sum(-1) - 1j * (kh * cache.f_v).sum(-1)

    # w(y) = <b(x), a(y)> + i <a x b(x), a(y)>, differentiated at y = x
    dw_u = (b * pf.grad_a[..., 0, :]).sum(-1) + 1j * (axb * pf.grad_a[..., 0, :]).sum(-1)
    dw_v = (b * pf.grad_a[..., 1, :]).sum(-1) + 1j * (axb * pf.grad_a[..., 1, :]).sum(-1)

    p1, p2 = _to_frame(p_u, p_v, cache)
    dw1, dw2 = _to_frame(dw_u, dw_v, cache)
    rho = p1 + (dw1 - 1j * dw2)                    # P(e1) + 2 dbar w (e1)
    return np.sqrt(2.0) * np.abs(rho)


BjaResult = namedtuple("BjaResult", "lhs rhs ratio")


def bja_identity(cache, pf, triple):
    """Both sides of the frame identity for |nabla J_a|^2.

    lhs = 4 |grad a|^2; rhs is the curvature expression in the frame
    adapted to (a, b): tangent (e1, e2), normals (J_b e1, J_b e2).
    Also returns the pointwise ratio |grad a| / |A|.
    """
    a = pf.a
    b = phi_field(a)
    n3 = _apply_phase(b, cache.e1, triple)
    n4 = _apply_phase(b, cache.e2, triple)

    hp = np.empty(a.shape[:2] + (2, 2, 2))
    for alpha, n in enumerate((n3, n4)):
        hp[..., alpha, 0, 0] = (cache.f_uu * n).sum(-1)
        hp[..., alpha, 0, 1] = hp[..., alpha, 1, 0] = (cache.f_uv * n).sum(-1)
        hp[..., alpha, 1, 1] = (cache.f_vv * n).sum(-1)
    horth = np.einsum("...ik,...jl,...akl->...aij", cache.gs, cache.gs, hp, optimize=True)

    x = horth[..., 0, 1, :] - horth[..., 1, 0, :]      # h3_{2i} - h4_{1i}
    y = horth[..., 0, 0, :] + horth[..., 1, 1, :]      # h3_{1i} + h4_{2i}
    rhs = 4.0 * ((x**2).sum(-1) + (y**2).sum(-1))
    lhs = 4.0 * pf.energy_density
    # ratio only means something where A is above noise level; 0/0 nodes
    # (flat spots of analytic scenarios) would otherwise dominate the max
    floor = 1e-12 * max(float(cache.norm_A_sq.max()), 1e-300)
    meaningful = cache.norm_A_sq > floor
    ratio = np.zeros_like(lhs)
    ratio[meaningful] = np.sqrt(
        pf.energy_density[meaningful] / cache.norm_A_sq[meaningful]
    )
    return BjaResult(lhs, rhs, ratio)


def polar_identity_check(pf, cache):
    """Residual of |grad a|^2 = sin^2(phi) |grad theta|^2 + |grad phi|^2
    in the polar chart around the third axis; refuses fields that touch
    the chart poles."""
    a3 = pf.a[..., 2]
    closeness = float((1.0 - np.abs(a3)).min())
    if closeness <= POLE_TOL:
        raise PreconditionError(
            f"pole-proximity: min(1 - |a3|) = {closeness:.3f} is inside {POLE_TOL}"
        )
    theta = np.arctan2(pf.a[..., 1], pf.a[..., 0])
    phi = np.arccos(np.clip(a3, -1.0, 1.0))
    dth = _angle_grad(theta, cache)
    dph = _central_grad(phi, cache)

    def sq_norm(d):
        return (
            cache.ginv[..., 0, 0] * d[..., 0] ** 2
            + 2 * cache.ginv[..., 0, 1] * d[..., 0] * d[..., 1]
            + cache.ginv[..., 1, 1] * d[..., 1] ** 2
        )

    rhs = np.sin(phi) ** 2 * sq_norm(dth) + sq_norm(dph)
    return np.abs(pf.energy_density - rhs)


def hyper_lagrangian_residual(cache, pf, triple):
    """Max modulus of Omega_{a(x)} on the tangent pair, per node.

    Identically zero in the continuum for any surface with its canonical
    phase; here it meters frame and phase self-consistency."""
    a = pf.a
    b = phi_field(a)
    kb_e1 = _apply_phase(b, cache.e1, triple)
    real = (_apply_phase(a, kb_e1, triple) * cache.e2).sum(-1)
    imag = -(kb_e1 * cache.e2).sum(-1)
    return np.maximum(np.abs(real), np.abs(imag))
