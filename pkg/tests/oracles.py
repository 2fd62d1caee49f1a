"""Independent reference computations used to derive frozen test values.

Nothing here imports the package's geometry or assembly code; each oracle
recomputes its quantity from raw coordinates, closed forms or a different
numerical route.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize
from scipy.special import jn_zeros

TETRA = np.array([[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]])


# ------------------------------------------------------------ cone areas
def sector_angles_t() -> list:
    """Opening angle of each of the six T sectors, from the raw edge directions."""
    out = []
    for i, j in itertools.combinations(range(4), 2):
        a, b = TETRA[i], TETRA[j]
        out.append(math.acos(float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))))
    return out


def unit_ball_area(sector_angles) -> float:
    """Area of a union of planar sectors with apex at the center of the unit ball."""
    return float(sum(a / 2.0 for a in sector_angles))


def link_length(sector_angles) -> float:
    """Length of the intersection with the unit sphere."""
    return float(sum(sector_angles))


PLANE_SECTORS = [2 * math.pi]
Y_SECTORS = [math.pi, math.pi, math.pi]


# ------------------------------------------------------------- spectra
def disk_dirichlet_lambda1(R: float) -> float:
    """First Dirichlet eigenvalue of the Laplacian on a disk of radius R."""
    return float(jn_zeros(0, 1)[0] / R) ** 2


def catenoid_critical_half_height() -> float:
    """Half-height where the waist-1 catenoid loses stability: t tanh t = 1."""
    return float(brentq(lambda t: t * math.tanh(t) - 1.0, 0.5, 2.0))


def catenoid_jacobi_lambda1(half_height: float, n: int = 2000) -> float:
    """Smallest rotationally symmetric Jacobi eigenvalue on r = cosh z, |z| <= H.

    With the conformal coordinates (z, theta) the area element is cosh^2 z,
    |A|^2 = 2 / cosh^4 z, and the Dirichlet problem reads
    -phi'' - 2 phi / cosh^2 z = lambda cosh^2 z phi. Second-order finite
    differences; the lowest mode is rotationally symmetric.
    """
    z = np.linspace(-half_height, half_height, n + 2)[1:-1]
    dz = 2 * half_height / (n + 1)
    main = 2.0 / dz**2 - 2.0 / np.cosh(z) ** 2
    off = -np.ones(n - 1) / dz**2
    A = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    B = np.diag(np.cosh(z) ** 2)
    return float(sla.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])


# ---------------------------------------------------------- force balance
def planar_conormal_sum(angles_deg, weights=None) -> float:
    """|sum_i w_i tau_i| for half-planes hinged on a line at the given angles.

    The conormal of a half-plane points from the hinge away from the sheet.
    """
    w = np.ones(len(angles_deg)) if weights is None else np.asarray(weights, float)
    u = np.array([[math.cos(math.radians(a)), math.sin(math.radians(a))] for a in angles_deg])
    return float(np.linalg.norm((w[:, None] * -u).sum(axis=0)))


def fermat_point(points, weights=None) -> np.ndarray:
    """Minimizer of sum_i w_i |x - p_i| in the plane."""
    P = np.asarray(points, float)
    w = np.ones(len(P)) if weights is None else np.asarray(weights, float)
    res = minimize(lambda x: float(np.sum(w * np.linalg.norm(P - x, axis=1))), P.mean(axis=0), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    return res.x


def weighted_junction_angles(theta) -> tuple:
    """Angles between the conormals (1,2), (2,3), (3,1) balancing weights theta.

    Closing the triangle of forces: the angle between tau_i and tau_j is pi
    minus the triangle angle opposite the third side.
    """
    a, b, c = (float(x) for x in theta)
    opp = lambda x, y, z: math.acos((y * y + z * z - x * x) / (2 * y * z))  # angle opposite side x
    return math.pi - opp(c, a, b), math.pi - opp(a, b, c), math.pi - opp(b, c, a)


# ------------------------------------------------------- direct quadrature
# degree-5 symmetric rule on the triangle (barycentric points, weights sum to 1)
_A1, _B1 = 0.059715871789769820, 0.470142064105115090
_A2, _B2 = 0.797426985353087322, 0.101286507323456339
_W0, _W1, _W2 = 0.225, 0.132394152788506181, 0.125939180544827153
TRI_RULE = (
    [(1 / 3, 1 / 3, 1 / 3, _W0)]
    + [(p[0], p[1], p[2], _W1) for p in set(itertools.permutations((_A1, _B1, _B1)))]
    + [(p[0], p[1], p[2], _W2) for p in set(itertools.permutations((_A2, _B2, _B2)))]
)


def _grad_linear(P, vals):
    """Gradient of the linear interpolant on the triangle P (3, 3) in R^3."""
    e1, e2 = P[1] - P[0], P[2] - P[0]
    G = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    rhs = np.array([vals[1] - vals[0], vals[2] - vals[0]])
    a, b = np.linalg.solve(G, rhs)
    return a * e1 + b * e2


def quadrature_second_variation(vertices, triangles, tri_values, tri_a2, curves) -> float:
    """Integrate |grad phi|^2 - |A|^2 phi^2 per triangle, minus the curve terms.

    ``tri_values`` / ``tri_a2`` hold the corner values (M, 3) of phi and |A|^2.
    ``curves`` is a list of (points (n, 3), phi (n, 3), g (n, 3)) with
    g = curvature vector . conormal per patch column; both phi and g are
    linear on each segment and the segment integral uses Gauss-Legendre.
    """
    total = 0.0
    for t, tri in enumerate(triangles):
        P = vertices[tri]
        area = 0.5 * np.linalg.norm(np.cross(P[1] - P[0], P[2] - P[0]))
        phi = tri_values[t]
        g = _grad_linear(P, phi)
        total += float(g @ g) * area
        pot = 0.0
        for l0, l1, l2, w in TRI_RULE:
            lam = np.array([l0, l1, l2])
            pot += w * float(lam @ tri_a2[t]) * float(lam @ phi) ** 2
        total -= pot * area
    xg, wg = np.polynomial.legendre.leggauss(4)
    s = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    for pts, phi, gv in curves:
        for k in range(len(pts) - 1):
            seg = float(np.linalg.norm(pts[k + 1] - pts[k]))
            for i in range(phi.shape[1]):
                f = (1 - s) * phi[k, i] + s * phi[k + 1, i]
                gg = (1 - s) * gv[k, i] + s * gv[k + 1, i]
                total -= seg * float(np.sum(wg * gg * f * f))
    return total


# ------------------------------------------------------ normal Gram tables
def t_cone_normals() -> dict:
    """Unit normal of the sector spanned by p_i, p_j (orientation p_i x p_j)."""
    out = {}
    for i, j in itertools.combinations(range(4), 2):
        n = np.cross(TETRA[i], TETRA[j])
        out[(i, j)] = n / np.linalg.norm(n)
    return out


def t_cone_abs_gram() -> tuple:
    """|nu_ij . nu_kl| for the six sectors: 1, 1/2 when one index is shared, 0 otherwise."""
    nrm = t_cone_normals()
    pairs = sorted(nrm)
    G = np.array([[abs(float(nrm[a] @ nrm[b])) for b in pairs] for a in pairs])
    return pairs, G


def t_point_compatible_dimension() -> int:
    """Dimension of {(V . nu_ij)_ij : V in R^3} at the T-point (rank of the normal matrix)."""
    N = np.array(list(t_cone_normals().values()))
    return int(np.linalg.matrix_rank(N))


# ------------------------------------------------------------ cutoff energy
def cone_cutoff_energy(sector_angles, n: int) -> float:
    """int |grad zeta|^2 over flat sectors at the apex, zeta = 1 - log(rho)/n on 1 <= rho <= e^n.

    |grad zeta| = 1/(n rho); the radial integral is done by quadrature in
    log(rho) rather than in closed form.
    """
    x, w = np.polynomial.legendre.leggauss(8)
    # substitute rho = e^s: int_0^n (1/(n^2 e^{2s})) e^{2s} ds per unit angle
    s = 0.5 * n * (x + 1.0)
    per_angle = float(np.sum(0.5 * n * w * np.ones_like(s) / n**2))
    return link_length(sector_angles) * per_angle
