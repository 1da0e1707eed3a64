"""Nonlinear problem plumbing: assembly, static condensation, Newton iteration.

The discrete nonlinear form and its fully discrete linearization are
assembled cell by cell; congruent cells are processed in vectorized
batches.  Global solves eliminate the cell blocks per cell (static
condensation) and factor the remaining interior-face system directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .hho import HHOSpace, HybridVector

__all__ = [
    "SolverError",
    "ProblemDefinitionError",
    "EvaluationError",
    "CondensationError",
    "NewtonDivergedError",
    "NonlinearProblem",
    "NewtonReport",
    "mean_curvature_problem",
    "register_problem",
    "get_problem",
    "problem_names",
    "residual",
    "jacobian",
    "static_condense",
    "solve_linear_hho",
    "newton_solve",
]


class SolverError(Exception):
    """Base class for assembly and solve failures."""


class ProblemDefinitionError(SolverError):
    """Problem callbacks are inconsistent (shapes, symmetry, or derivatives)."""


class EvaluationError(SolverError):
    """A problem callback failed at a quadrature point."""


class CondensationError(SolverError):
    """A cell block of the Jacobian is singular."""


class NewtonDivergedError(SolverError):
    """The Newton iteration did not reach the tolerance; carries the report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class NewtonReport:
    """Iteration count, per-iteration relative increments, and convergence flag."""

    iterations: int
    increments: list
    converged: bool


@dataclass
class NonlinearProblem:
    """Callbacks defining -div a(x, u, grad u) + f(x, u, grad u) = 0.

    All callbacks are vectorized over points: ``x`` is (n, 2), ``y`` is (n,),
    ``z`` is (n, 2).  ``a`` returns (n, 2), ``a_z`` returns (n, 2, 2) and must
    be symmetric, ``a_y`` returns (n, 2), ``f`` returns (n,), ``f_z`` returns
    (n, 2), ``f_y`` returns (n,).  ``exact_solution`` and ``exact_gradient``
    are optional fields used by error studies.
    """

    a: callable
    a_z: callable
    a_y: callable
    f: callable
    f_z: callable
    f_y: callable
    exact_solution: callable = None
    exact_gradient: callable = None
    name: str = ""
    _checked: bool = field(default=False, init=False, repr=False)

    def check(self, rng=None, samples=16):
        """Sample-based guard on user callbacks.

        Verifies output shapes, symmetry of ``a_z``, and that the supplied
        derivatives match central finite differences of ``a`` and ``f``.
        Raises :class:`ProblemDefinitionError` on the first violation.
        """
        rng = np.random.default_rng(1905) if rng is None else rng
        n = samples
        x = rng.random((n, 2))
        y = rng.standard_normal(n)
        z = rng.standard_normal((n, 2))
        az = np.asarray(self.a_z(x, y, z), dtype=float)
        if az.shape != (n, 2, 2):
            raise ProblemDefinitionError("a_z must return an (n, 2, 2) array")
        scale = 1.0 + np.abs(az).max()
        if np.abs(az - np.transpose(az, (0, 2, 1))).max() > 1e-9 * scale:
            raise ProblemDefinitionError("a_z is not symmetric at sampled points")
        eps = 1e-6
        for j in range(2):
            dz = np.zeros_like(z)
            dz[:, j] = eps
            fd = (np.asarray(self.a(x, y, z + dz)) - np.asarray(self.a(x, y, z - dz))) / (2 * eps)
            if np.abs(fd - az[:, :, j]).max() > 1e-4 * scale:
                raise ProblemDefinitionError("a_z disagrees with finite differences of a")
            fdf = (np.asarray(self.f(x, y, z + dz)) - np.asarray(self.f(x, y, z - dz))) / (2 * eps)
            fz = np.asarray(self.f_z(x, y, z), dtype=float)
            if fz.shape != (n, 2):
                raise ProblemDefinitionError("f_z must return an (n, 2) array")
            if np.abs(fdf - fz[:, j]).max() > 1e-4 * (1.0 + np.abs(fz).max()):
                raise ProblemDefinitionError("f_z disagrees with finite differences of f")
        fd = (np.asarray(self.a(x, y + eps, z)) - np.asarray(self.a(x, y - eps, z))) / (2 * eps)
        ay = np.asarray(self.a_y(x, y, z), dtype=float)
        if np.abs(fd - ay).max() > 1e-4 * (1.0 + np.abs(ay).max()):
            raise ProblemDefinitionError("a_y disagrees with finite differences of a")
        fdf = (np.asarray(self.f(x, y + eps, z)) - np.asarray(self.f(x, y - eps, z))) / (2 * eps)
        fy = np.asarray(self.f_y(x, y, z), dtype=float)
        if np.abs(fdf - fy).max() > 1e-4 * (1.0 + np.abs(fy).max()):
            raise ProblemDefinitionError("f_y disagrees with finite differences of f")
        self._checked = True
        return self


def mean_curvature_problem():
    """Prescribed-mean-curvature flux a(z) = z (1+|z|^2)^(-1/2) on the unit square.

    The source is manufactured so the exact solution is
    u(x, y) = x (1 - x) y (1 - y); the reaction callback stores the negated
    source, f(x, y, z) = -f_src(x).
    """

    def exact(x):
        X, Y = x[:, 0], x[:, 1]
        return X * (1.0 - X) * Y * (1.0 - Y)

    def exact_grad(x):
        X, Y = x[:, 0], x[:, 1]
        return np.column_stack(((1.0 - 2.0 * X) * Y * (1.0 - Y),
                                X * (1.0 - X) * (1.0 - 2.0 * Y)))

    def source(x):
        X, Y = x[:, 0], x[:, 1]
        ux = (1.0 - 2.0 * X) * Y * (1.0 - Y)
        uy = X * (1.0 - X) * (1.0 - 2.0 * Y)
        uxx = -2.0 * Y * (1.0 - Y)
        uyy = -2.0 * X * (1.0 - X)
        uxy = (1.0 - 2.0 * X) * (1.0 - 2.0 * Y)
        Q = 1.0 + ux**2 + uy**2
        div = ((uxx + uyy) * Q - (ux**2 * uxx + 2.0 * ux * uy * uxy + uy**2 * uyy)) * Q**-1.5
        return -div

    def a(x, y, z):
        Q = 1.0 + (z**2).sum(axis=1)
        return z / np.sqrt(Q)[:, None]

    def a_z(x, y, z):
        z1, z2 = z[:, 0], z[:, 1]
        Q = 1.0 + z1**2 + z2**2
        R = Q**-1.5
        out = np.empty((len(z), 2, 2))
        out[:, 0, 0] = R * (1.0 + z2**2)
        out[:, 0, 1] = -R * z1 * z2
        out[:, 1, 0] = out[:, 0, 1]
        out[:, 1, 1] = R * (1.0 + z1**2)
        return out

    def zero_vec(x, y, z):
        return np.zeros((len(x), 2))

    def zero_scal(x, y, z):
        return np.zeros(len(x))

    return NonlinearProblem(
        a=a, a_z=a_z, a_y=zero_vec,
        f=lambda x, y, z: -source(x), f_z=zero_vec, f_y=zero_scal,
        exact_solution=exact, exact_gradient=exact_grad,
        name="mean-curvature")


_REGISTRY = {"mean-curvature": mean_curvature_problem}


def register_problem(name, factory):
    """Register a problem factory under ``name`` for lookup by the harness."""
    _REGISTRY[name] = factory


def get_problem(name):
    """Instantiate the registered problem ``name``."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; registered: {sorted(_REGISTRY)}") from None


def problem_names():
    return sorted(_REGISTRY)


# -- assembly ----------------------------------------------------------------


def _call(problem, attr, x, y, z, cells):
    fn = getattr(problem, attr)
    try:
        return np.asarray(fn(x, y, z), dtype=float)
    except Exception as exc:
        raise EvaluationError(
            f"problem callback {attr!r} failed on cells {cells[0]}..{cells[-1]}: {exc}"
        ) from exc


def _assemble(space, problem, w, need_jacobian, fields=None, restrict=False, chunk=4096):
    """Residual (and optionally Jacobian) of the discrete nonlinear form at ``w``.

    With ``fields=(u, grad_u)`` the Jacobian coefficients are evaluated at the
    given fields instead of the discrete iterate (semi-discrete linearization).
    With ``restrict`` the output lives on the free dofs (cells plus interior
    faces) in condensation-ready layout.
    """
    space._ensure_classes()
    Nk = space.Nk
    if restrict:
        fmap = _free_map(space)
        ndofs = len(space.free_dofs())
    else:
        ndofs = space.num_dofs
    res = np.zeros(ndofs)
    rows_all, cols_all, data_all = [], [], []

    for cls in space._classes:
        Gx, Gy = cls.G[:Nk], cls.G[Nk:]
        G2 = cls.G.reshape(2, Nk, cls.nloc)
        phi_k = cls.phi[:, :Nk]
        wq = cls.weights
        nq = len(wq)
        for lo in range(0, len(cls.cells), chunk):
            ids = cls.cell_ids[lo:lo + chunk]
            m = len(ids)
            gidx = cls.gidx[lo:lo + chunk]
            loc = np.empty((m, cls.nloc))
            loc[:, :Nk] = w.cell_blocks[ids]
            loc[:, Nk:] = w.face_blocks[cls.face_ids[lo:lo + chunk]].reshape(m, -1)
            pts = space.mesh.cell_centroids[ids][:, None, :] + cls.offsets[None]
            flat = pts.reshape(-1, 2)
            q = loc @ cls.G.T
            zq = np.empty((m * nq, 2))
            zq[:, 0] = (q[:, :Nk] @ phi_k.T).ravel()
            zq[:, 1] = (q[:, Nk:] @ phi_k.T).ravel()
            yq = (loc[:, :Nk] @ phi_k.T).ravel()
            if fields is None:
                y_c, z_c = yq, zq
            else:
                y_c = np.asarray(fields[0](flat), dtype=float)
                z_c = np.asarray(fields[1](flat), dtype=float)

            aval = _call(problem, "a", flat, yq, zq, ids).reshape(m, nq, 2)
            fval = _call(problem, "f", flat, yq, zq, ids).reshape(m, nq)
            aw = aval * wq[None, :, None]
            r_loc = (aw[:, :, 0] @ phi_k) @ Gx + (aw[:, :, 1] @ phi_k) @ Gy
            r_loc += loc @ cls.S
            r_loc[:, :Nk] += (fval * wq) @ phi_k

            if restrict:
                ridx = fmap[gidx]
                keep = ridx >= 0
                res += np.bincount(ridx[keep], weights=r_loc[keep], minlength=ndofs)
            else:
                res += np.bincount(gidx.ravel(), weights=r_loc.ravel(), minlength=ndofs)

            if not need_jacobian:
                continue
            az = _call(problem, "a_z", flat, y_c, z_c, ids).reshape(m, nq, 2, 2)
            azw = az * wq[None, :, None, None]
            M = np.einsum("mqab,qi,qj->mabij", azw, phi_k, phi_k, optimize=True)
            tmp = np.einsum("mabij,bjn->main", M, G2, optimize=True)
            J_loc = np.einsum("aip,main->mpn", G2, tmp, optimize=True)
            J_loc += cls.S

            ay = _call(problem, "a_y", flat, y_c, z_c, ids)
            if np.any(ay):
                ayw = ay.reshape(m, nq, 2) * wq[None, :, None]
                W = np.einsum("mqa,qi,qj->maij", ayw, phi_k, phi_k, optimize=True)
                J_loc[:, :, :Nk] += np.einsum("aip,maij->mpj", G2, W, optimize=True)
            fz = _call(problem, "f_z", flat, y_c, z_c, ids)
            if np.any(fz):
                fzw = fz.reshape(m, nq, 2) * wq[None, :, None]
                W = np.einsum("mqa,qi,qj->maij", fzw, phi_k, phi_k, optimize=True)
                J_loc[:, :Nk, :] += np.einsum("maij,ajn->min", W, G2, optimize=True)
            fy = _call(problem, "f_y", flat, y_c, z_c, ids)
            if np.any(fy):
                fyw = fy.reshape(m, nq) * wq
                J_loc[:, :Nk, :Nk] += np.einsum("mq,qi,qj->mij", fyw, phi_k, phi_k,
                                                optimize=True)

            if restrict:
                sidx = ridx
            else:
                sidx = gidx
            rows = np.repeat(sidx, cls.nloc, axis=1).ravel()
            cols = np.tile(sidx, (1, cls.nloc)).ravel()
            data = J_loc.reshape(-1)
            if restrict:
                keep = (rows >= 0) & (cols >= 0)
                rows, cols, data = rows[keep], cols[keep], data[keep]
            rows_all.append(rows.astype(np.int32, copy=False))
            cols_all.append(cols.astype(np.int32, copy=False))
            data_all.append(data)

    if not need_jacobian:
        return res, None
    J = sparse.coo_matrix(
        (np.concatenate(data_all),
         (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(ndofs, ndofs)).tocsr()
    return res, J


def _free_map(space):
    if getattr(space, "_free_map_cache", None) is None:
        fmap = np.full(space.num_dofs, -1, dtype=np.int64)
        free = space.free_dofs()
        fmap[free] = np.arange(len(free))
        space._free_map_cache = fmap
    return space._free_map_cache


def residual(problem, w):
    """Vector of the discrete nonlinear form at ``w`` against every test dof."""
    res, _ = _assemble(w.space, problem, w, need_jacobian=False)
    return res


def jacobian(problem, w, fields=None):
    """Sparse matrix of the fully discrete linearized form at ``w``.

    ``fields=(u, grad_u)`` freezes the linearization coefficients at the
    given fields instead of ``w`` (the semi-discrete variant used in
    verification studies); the solve path never sets it.
    """
    _, J = _assemble(w.space, problem, w, need_jacobian=True, fields=fields)
    return J


# -- linear algebra ----------------------------------------------------------


def static_condense(J, r, num_cells, block_size):
    """Eliminate the leading per-cell blocks of the system ``J x = r``.

    ``J`` must carry the cell dofs first, coupled only within each cell.
    Returns the Schur system ``(S, g)`` on the remaining dofs plus a
    ``recover`` callback mapping a face solution to the cell dof values.
    """
    ncd = num_cells * block_size
    J = sparse.csr_matrix(J)
    A = J[:ncd, :ncd].tobsr(blocksize=(block_size, block_size))
    A.sort_indices()
    if not (np.array_equal(A.indptr, np.arange(num_cells + 1))
            and np.array_equal(A.indices, np.arange(num_cells))):
        raise CondensationError("cell-cell coupling is not block diagonal")
    try:
        inv = np.linalg.inv(A.data)
    except np.linalg.LinAlgError:
        for ci in range(num_cells):
            try:
                np.linalg.inv(A.data[ci])
            except np.linalg.LinAlgError:
                raise CondensationError(f"cell {ci}: singular cell block") from None
        raise
    Ainv = sparse.bsr_matrix((inv, A.indices, A.indptr), shape=(ncd, ncd)).tocsr()
    B = J[:ncd, ncd:].tocsr()
    C = J[ncd:, :ncd].tocsr()
    D = J[ncd:, ncd:].tocsr()
    AinvB = Ainv @ B
    S = (D - C @ AinvB).tocsc()
    rc, rf = r[:ncd], r[ncd:]
    Ainv_rc = Ainv @ rc
    g = rf - C @ Ainv_rc

    def recover(uf):
        return Ainv_rc - AinvB @ uf

    return S, g, recover


def _solve_restricted(space, J, rhs):
    """Solve the free-dof system by condensation plus a sparse direct factor."""
    S, g, recover = static_condense(J, rhs, space.mesh.num_cells, space.Nk)
    try:
        lu = splu(S)
    except RuntimeError as exc:
        raise SolverError(f"condensed face system is singular: {exc}") from exc
    uf = lu.solve(g)
    uc = recover(uf)
    x = np.zeros(space.num_dofs)
    x[space.free_dofs()] = np.concatenate((uc, uf))
    return space.vector_from_flat(x)


def solve_linear_hho(space, source, diffusion=None):
    """HHO solution of -div(A grad u) = source with zero Dirichlet data.

    ``diffusion`` is an optional constant SPD 2x2 matrix A (identity by
    default, the Poisson bootstrap).  The discretization (reconstructions
    and stabilization) is the same one the nonlinear solve uses.
    """
    A = np.eye(2) if diffusion is None else np.asarray(diffusion, dtype=float)

    def lin_a(x, y, z):
        return z @ A.T

    def lin_az(x, y, z):
        return np.broadcast_to(A, (len(x), 2, 2))

    lin = NonlinearProblem(
        a=lin_a, a_z=lin_az, a_y=lambda x, y, z: np.zeros((len(x), 2)),
        f=lambda x, y, z: -np.asarray(source(x), dtype=float),
        f_z=lambda x, y, z: np.zeros((len(x), 2)),
        f_y=lambda x, y, z: np.zeros(len(x)))
    zero = HybridVector(space)
    r, J = _assemble(space, lin, zero, need_jacobian=True, restrict=True)
    return _solve_restricted(space, J, -r)


def newton_solve(problem, mesh, k, tol=1e-8, max_iter=25, quad_degree=None,
                 initial_guess=None, line_search=False):
    """Newton iteration for the discrete nonlinear problem on ``mesh``.

    Starts from ``initial_guess`` or the Poisson bootstrap (the linear HHO
    solve with the problem's source).  Each step solves the condensed
    linearized system for an increment; the iteration stops once the
    reconstructed-gradient norm of the increment, relative to the new
    iterate, drops to ``tol``.

    Returns ``(solution, NewtonReport)``; raises
    :class:`NewtonDivergedError` after ``max_iter`` steps without
    convergence.
    """
    if initial_guess is not None:
        space = initial_guess.space
        if space.mesh is not mesh or space.k != k:
            raise ValueError("initial guess must live on the same mesh and degree")
    else:
        space = HHOSpace(mesh, k, quad_degree)
    if not problem._checked:
        problem.check()
    if initial_guess is None:
        def bootstrap_source(x):
            n = len(x)
            return -np.asarray(problem.f(x, np.zeros(n), np.zeros((n, 2))), dtype=float)

        u = solve_linear_hho(space, bootstrap_source)
    else:
        u = initial_guess.with_zero_boundary()

    increments = []
    for it in range(1, max_iter + 1):
        r, J = _assemble(space, problem, u, need_jacobian=True, restrict=True)
        delta = _solve_restricted(space, J, -r)
        if line_search:
            rnorm = np.linalg.norm(r)
            alpha = 1.0
            while alpha > 1.0 / 256.0:
                trial, _ = _assemble(space, problem, u + alpha * delta,
                                     need_jacobian=False, restrict=True)
                if np.linalg.norm(trial) <= (1.0 - 0.25 * alpha) * rnorm:
                    break
                alpha *= 0.5
            delta = alpha * delta
        u = u + delta
        denom = space.gradient_norm(u)
        inc = space.gradient_norm(delta) / denom if denom > 0 else space.gradient_norm(delta)
        increments.append(inc)
        if inc <= tol:
            return u, NewtonReport(iterations=it, increments=increments, converged=True)
    report = NewtonReport(iterations=max_iter, increments=increments, converged=False)
    raise NewtonDivergedError(
        f"no convergence to {tol:g} within {max_iter} iterations "
        f"(last increment {increments[-1]:.3e})", report)
