"""Hybrid high-order operator layer on a polytopal mesh.

Unknowns are polynomial blocks of degree k on cells and faces.  Per cell
the layer builds the gradient reconstruction G_T into P_k(T)^2, the
potential reconstruction R_T into P_{k+1}(T), and the stabilization S_T
penalizing the face/cell mismatch left after reconstruction.  Cells with
congruent geometry (translates with the same face orientations) share one
set of operator matrices, which keeps uniform meshes cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .basis import CellBasis, FaceBasis, face_mass_matrix, space_dimension
from .quadrature import cell_quadrature, face_quadrature

__all__ = [
    "HHOError",
    "OperatorBuildError",
    "LocalOperators",
    "HybridVector",
    "HHOSpace",
    "PiecewisePolynomial",
    "PiecewiseVectorPolynomial",
    "interpolate",
    "discrete_norm_1h",
    "discrete_norm_1ph",
]


class HHOError(Exception):
    """Base class for operator-layer failures."""


class OperatorBuildError(HHOError):
    """A local reconstruction system could not be solved."""


@dataclass(frozen=True)
class LocalOperators:
    """Per-cell operator matrices acting on the local block (v_T, v_F1, ...).

    ``G`` stacks the x and y coefficient maps of the gradient reconstruction,
    ``R`` maps into the degree-(k+1) cell basis, and ``S`` is the symmetric
    positive semidefinite stabilization bilinear form.
    """

    G: np.ndarray
    R: np.ndarray
    S: np.ndarray


@dataclass
class _FaceData:
    """Geometry and coupling matrices for one face slot of a cell class."""

    length: float
    normal: np.ndarray
    MF: np.ndarray            # face mass, (k+1, k+1)
    TF1: np.ndarray           # cell(k+1) x face couplings on F
    TC1: np.ndarray           # cell(k+1) x cell(k+1) products on F
    rel_start: np.ndarray     # owner-direction endpoints relative to the centroid
    rel_end: np.ndarray


@dataclass
class _CellClass:
    """Cells sharing one congruent geometry, and their shared matrices."""

    rep: int
    cells: list = field(default_factory=list)
    # filled by the operator build
    h: float = 0.0
    nloc: int = 0
    Mk: np.ndarray = None
    Mk_chol: tuple = None
    M1: np.ndarray = None
    G: np.ndarray = None
    R: np.ndarray = None
    S: np.ndarray = None
    faces: list = None
    offsets: np.ndarray = None     # assembly quadrature points minus the centroid
    weights: np.ndarray = None
    phi: np.ndarray = None         # degree-(k+1) basis values at assembly points
    phi_grad: np.ndarray = None    # degree-k basis gradients, built on demand
    face_trace: list = None        # per slot (offsets, weights, phiF, psiF), on demand
    cell_ids: np.ndarray = None
    face_ids: np.ndarray = None    # (ncells, nfaces) global face ids per slot
    gidx: np.ndarray = None        # (ncells, nloc) global dof indices


class HybridVector:
    """Hybrid coefficient vector: one degree-k block per cell and per face."""

    __slots__ = ("space", "cell_blocks", "face_blocks")

    def __init__(self, space, cell_blocks=None, face_blocks=None):
        self.space = space
        self.cell_blocks = (np.zeros((space.mesh.num_cells, space.Nk))
                            if cell_blocks is None else np.asarray(cell_blocks, float))
        self.face_blocks = (np.zeros((space.mesh.num_faces, space.k + 1))
                            if face_blocks is None else np.asarray(face_blocks, float))
        if self.cell_blocks.shape != (space.mesh.num_cells, space.Nk):
            raise ValueError("cell block array has the wrong shape")
        if self.face_blocks.shape != (space.mesh.num_faces, space.k + 1):
            raise ValueError("face block array has the wrong shape")

    @property
    def k(self):
        return self.space.k

    def copy(self):
        return HybridVector(self.space, self.cell_blocks.copy(), self.face_blocks.copy())

    def with_zero_boundary(self):
        """Copy with all boundary face blocks zeroed."""
        out = self.copy()
        out.face_blocks[self.space.mesh.boundary_faces] = 0.0
        return out

    def to_flat(self):
        """Flatten to the global layout: all cell blocks, then all face blocks."""
        return np.concatenate((self.cell_blocks.ravel(), self.face_blocks.ravel()))

    def _binary(self, other, op):
        if not isinstance(other, HybridVector) or other.space is not self.space:
            raise ValueError("operands must share one space")
        return HybridVector(self.space, op(self.cell_blocks, other.cell_blocks),
                            op(self.face_blocks, other.face_blocks))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return HybridVector(self.space, self.cell_blocks * scalar, self.face_blocks * scalar)

    __rmul__ = __mul__


class PiecewisePolynomial:
    """Cellwise scalar polynomial field (coefficients per cell)."""

    def __init__(self, space, degree, coefficients):
        self.space = space
        self.degree = degree
        self.coefficients = coefficients

    def evaluate(self, cell_index, points):
        basis = self.space.cell_basis(cell_index, self.degree)
        return basis.evaluate(points) @ self.coefficients[cell_index]


class PiecewiseVectorPolynomial:
    """Cellwise vector polynomial field, coefficients shaped (ncells, 2, dim)."""

    def __init__(self, space, degree, coefficients):
        self.space = space
        self.degree = degree
        self.coefficients = coefficients

    def evaluate(self, cell_index, points):
        basis = self.space.cell_basis(cell_index, self.degree)
        vals = basis.evaluate(points)
        return np.stack((vals @ self.coefficients[cell_index, 0],
                         vals @ self.coefficients[cell_index, 1]), axis=1)


def _derivative_matrices(exponents, diameter):
    """Coefficient maps of d/dx and d/dy in one graded scaled-monomial basis."""
    n = len(exponents)
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(exponents)}
    Dx = np.zeros((n, n))
    Dy = np.zeros((n, n))
    for j, (a, b) in enumerate(exponents):
        if a > 0:
            Dx[index[(a - 1, b)], j] = a / diameter
        if b > 0:
            Dy[index[(a, b - 1)], j] = b / diameter
    return Dx, Dy


class HHOSpace:
    """Degree-k hybrid space over a mesh, with cached local operators.

    Parameters
    ----------
    mesh : PolytopalMesh
    k : int
        Polynomial degree of the cell and face unknowns, 0 to 3 supported
        by the shipped studies (higher degrees work but are untested).
    quad_degree : int, optional
        Quadrature exactness used when integrating nonlinear coefficients;
        defaults to 2(k+1)+2.
    """

    def __init__(self, mesh, k, quad_degree=None):
        if k < 0:
            raise ValueError("k must be nonnegative")
        self.mesh = mesh
        self.k = int(k)
        self.quad_degree = 2 * (self.k + 1) + 2 if quad_degree is None else int(quad_degree)
        self.Nk = space_dimension(self.k)
        self.Nk1 = space_dimension(self.k + 1)
        self.nF = self.k + 1
        self.num_cell_dofs = mesh.num_cells * self.Nk
        self.num_face_dofs = mesh.num_faces * self.nF
        self.num_dofs = self.num_cell_dofs + self.num_face_dofs
        self._classes = None
        self._cell_class = None
        self._free_dofs = None

    # -- bases --------------------------------------------------------------

    def cell_basis(self, ci, degree=None):
        """Scaled monomial basis of ``degree`` (default k+1) on cell ``ci``."""
        degree = self.k + 1 if degree is None else degree
        return CellBasis(self.mesh.cell_vertices(ci), degree,
                         center=self.mesh.cell_centroids[ci],
                         diameter=self.mesh.cell_diameters[ci], cell_index=ci)

    def face_basis(self, fi):
        """Degree-k basis on face ``fi`` in the owner cell's direction."""
        return FaceBasis(self.mesh.vertices[self.mesh.faces[fi]], self.k, face_index=fi)

    # -- congruence classes -------------------------------------------------

    def _ensure_classes(self):
        if self._classes is not None:
            return
        mesh = self.mesh
        table = {}
        classes = []
        cell_class = np.empty(mesh.num_cells, dtype=np.int64)
        for ci in range(mesh.num_cells):
            rel = (mesh.cell_vertices(ci) - mesh.cell_centroids[ci]) / mesh.cell_diameters[ci]
            key = (np.round(rel, 12).tobytes(),
                   mesh.cell_face_signs[ci].tobytes(),
                   round(float(mesh.cell_diameters[ci]), 12))
            idx = table.get(key)
            if idx is None:
                idx = len(classes)
                table[key] = idx
                classes.append(_CellClass(rep=ci))
            classes[idx].cells.append(ci)
            cell_class[ci] = idx
        for cls in classes:
            self._build_class(cls)
        self._classes = classes
        self._cell_class = cell_class

    def _build_class(self, cls):
        mesh = self.mesh
        k, Nk, Nk1, nF = self.k, self.Nk, self.Nk1, self.nF
        ci = cls.rep
        verts = mesh.cell_vertices(ci)
        center = mesh.cell_centroids[ci]
        h = float(mesh.cell_diameters[ci])
        cb = CellBasis(verts, k + 1, center=center, diameter=h, cell_index=ci)
        deg_op = 2 * (k + 1)

        rule = cell_quadrature(verts, deg_op)
        phi = cb.evaluate(rule.points)
        M1 = phi.T @ (rule.weights[:, None] * phi)
        M1 = 0.5 * (M1 + M1.T)
        grad = cb.gradient(rule.points)
        K1 = np.einsum("qid,q,qjd->ij", grad, rule.weights, grad, optimize=True)
        K1 = 0.5 * (K1 + K1.T)
        Mk = M1[:Nk, :Nk]
        Dx1, Dy1 = _derivative_matrices(cb.exponents, h)

        fids = mesh.cell_faces[ci]
        signs = mesh.cell_face_signs[ci]
        faces = []
        for fi, sign in zip(fids, signs):
            fb = FaceBasis(mesh.vertices[mesh.faces[fi]], k, face_index=fi)
            frule = face_quadrature((fb.start, fb.end), deg_op)
            phiF = cb.evaluate(frule.points)
            psiF = fb.evaluate(frule.points)
            TF1 = phiF.T @ (frule.weights[:, None] * psiF)
            TC1 = phiF.T @ (frule.weights[:, None] * phiF)
            faces.append(_FaceData(
                length=float(fb.length), normal=sign * mesh.face_normals[fi],
                MF=face_mass_matrix(fb), TF1=TF1, TC1=0.5 * (TC1 + TC1.T),
                rel_start=fb.start - center, rel_end=fb.end - center))

        nloc = Nk + len(faces) * nF
        try:
            Mk_chol = cho_factor(Mk)
        except np.linalg.LinAlgError as exc:
            raise OperatorBuildError(f"cell {ci}: singular cell mass matrix") from exc

        # Gradient reconstruction: (G v, tau)_T = (grad v_T, tau)_T
        #                                        + sum_F (v_F - v_T, tau.n)_F.
        Bx = np.zeros((Nk, nloc))
        By = np.zeros((Nk, nloc))
        Bx[:, :Nk] = Mk @ Dx1[:Nk, :Nk]
        By[:, :Nk] = Mk @ Dy1[:Nk, :Nk]
        col = Nk
        for fd in faces:
            nx, ny = fd.normal
            Bx[:, :Nk] -= nx * fd.TC1[:Nk, :Nk]
            By[:, :Nk] -= ny * fd.TC1[:Nk, :Nk]
            Bx[:, col:col + nF] = nx * fd.TF1[:Nk]
            By[:, col:col + nF] = ny * fd.TF1[:Nk]
            col += nF
        G = np.vstack((cho_solve(Mk_chol, Bx), cho_solve(Mk_chol, By)))

        # Potential reconstruction: Neumann-type system in P_{k+1} closed by
        # the mean constraint (R v, 1)_T = (v_T, 1)_T via one multiplier row.
        BR = np.zeros((Nk1, nloc))
        BR[:, :Nk] = K1[:, :Nk]
        col = Nk
        for fd in faces:
            A = fd.normal[0] * Dx1 + fd.normal[1] * Dy1
            BR[:, :Nk] -= (A.T @ fd.TC1)[:, :Nk]
            BR[:, col:col + nF] = A.T @ fd.TF1
            col += nF
        Kaug = np.zeros((Nk1 + 1, Nk1 + 1))
        Kaug[:Nk1, :Nk1] = K1
        Kaug[:Nk1, Nk1] = M1[:, 0]
        Kaug[Nk1, :Nk1] = M1[:, 0]
        Baug = np.zeros((Nk1 + 1, nloc))
        Baug[:Nk1] = BR
        Baug[Nk1, :Nk] = M1[0, :Nk]
        try:
            R = np.linalg.solve(Kaug, Baug)[:Nk1]
        except np.linalg.LinAlgError as exc:
            raise OperatorBuildError(
                f"cell {ci}: singular potential reconstruction system") from exc

        # Stabilization: face projections of v_F - v_T - (R v - pi_T^k R v),
        # squared against the face mass and scaled by 1/h_T.
        Pk = cho_solve(Mk_chol, M1[:Nk, :])
        S = np.zeros((nloc, nloc))
        col = Nk
        for fd in faces:
            PT1 = np.linalg.solve(fd.MF, fd.TF1.T)
            delta = np.zeros((nF, nloc))
            delta[:, col:col + nF] = np.eye(nF)
            delta[:, :Nk] -= PT1[:, :Nk]
            delta -= PT1 @ R
            delta += PT1[:, :Nk] @ (Pk @ R)
            S += delta.T @ fd.MF @ delta
            col += nF
        S /= h
        S = 0.5 * (S + S.T)

        rule_asm = cell_quadrature(verts, self.quad_degree)

        cls.h = h
        cls.nloc = nloc
        cls.Mk = Mk
        cls.Mk_chol = Mk_chol
        cls.M1 = M1
        cls.G = G
        cls.R = R
        cls.S = S
        cls.faces = faces
        cls.offsets = rule_asm.points - center
        cls.weights = rule_asm.weights
        cls.phi = cb.evaluate(rule_asm.points)
        cls.cell_ids = np.asarray(cls.cells, dtype=np.int64)
        cls.face_ids = np.vstack([mesh.cell_faces[c] for c in cls.cells])
        base = cls.cell_ids[:, None] * Nk + np.arange(Nk)
        fdofs = (self.num_cell_dofs + cls.face_ids[:, :, None] * nF
                 + np.arange(nF)).reshape(len(cls.cells), -1)
        cls.gidx = np.hstack((base, fdofs))

    def _class_of(self, ci):
        self._ensure_classes()
        return self._classes[self._cell_class[ci]]

    def _local_values(self, cls, v):
        """Local dof blocks of ``v`` for every cell of a class, (ncells, nloc)."""
        loc = np.empty((len(cls.cells), cls.nloc))
        loc[:, :self.Nk] = v.cell_blocks[cls.cell_ids]
        loc[:, self.Nk:] = v.face_blocks[cls.face_ids].reshape(len(cls.cells), -1)
        return loc

    def _face_trace_data(self, cls):
        """Assembly-degree trace values on each face slot of a class."""
        if cls.face_trace is None:
            ci = cls.rep
            center = self.mesh.cell_centroids[ci]
            cb = self.cell_basis(ci)
            data = []
            for fd in cls.faces:
                start, end = center + fd.rel_start, center + fd.rel_end
                frule = face_quadrature((start, end), self.quad_degree)
                fb = FaceBasis((start, end), self.k)
                data.append((frule.points - center, frule.weights,
                             cb.evaluate(frule.points)[:, :self.Nk],
                             fb.evaluate(frule.points)))
            cls.face_trace = data
        return cls.face_trace

    # -- public operator access ---------------------------------------------

    def local_operators(self, ci):
        """Cached (G_T, R_T, S_T) for cell ``ci``."""
        cls = self._class_of(ci)
        return LocalOperators(G=cls.G, R=cls.R, S=cls.S)

    def build_gradient_reconstruction(self, ci):
        """Matrix of G_T: local dof block to P_k(T)^2 coefficients (x block, then y)."""
        return self._class_of(ci).G

    def build_potential_reconstruction(self, ci):
        """Matrix of R_T: local dof block to P_{k+1}(T) coefficients."""
        return self._class_of(ci).R

    def build_stabilization(self, ci):
        """Stabilization bilinear form s_T on the local dof block."""
        return self._class_of(ci).S

    def local_dof_indices(self, ci):
        """Global dof indices of cell ``ci``'s local block."""
        cls = self._class_of(ci)
        return cls.gidx[cls.cells.index(ci)]

    # -- interpolation -------------------------------------------------------

    def interpolate(self, v, zero_boundary=False):
        """Blockwise L^2 projection of the field ``v`` onto the hybrid space.

        ``v`` takes an (n, 2) array of points and returns n values.  With
        ``zero_boundary`` the boundary face blocks are forced to zero.
        """
        self._ensure_classes()
        mesh = self.mesh
        cell_blocks = np.empty((mesh.num_cells, self.Nk))
        for cls in self._classes:
            pts = mesh.cell_centroids[cls.cell_ids][:, None, :] + cls.offsets[None]
            vals = np.asarray(v(pts.reshape(-1, 2)), dtype=float)
            vals = vals.reshape(len(cls.cells), -1) * cls.weights
            rhs = vals @ cls.phi[:, :self.Nk]
            cell_blocks[cls.cell_ids] = cho_solve(cls.Mk_chol, rhs.T).T

        n1 = max(1, (self.quad_degree + 2) // 2)
        xg, wg = np.polynomial.legendre.leggauss(n1)
        t = 0.5 * (xg + 1.0)
        u = t - 0.5
        psi = np.ones((n1, self.nF))
        for j in range(1, self.nF):
            psi[:, j] = psi[:, j - 1] * u
        i = np.arange(self.nF)
        p = i[:, None] + i[None, :]
        mref = np.where(p % 2 == 0, 1.0 / (2.0**p * (p + 1)), 0.0)
        p0 = mesh.vertices[mesh.faces[:, 0]]
        p1 = mesh.vertices[mesh.faces[:, 1]]
        pts = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
        vals = np.asarray(v(pts.reshape(-1, 2)), dtype=float).reshape(mesh.num_faces, n1)
        rhs = (vals * (0.5 * wg)) @ psi
        face_blocks = np.linalg.solve(mref, rhs.T).T
        if zero_boundary:
            face_blocks[mesh.boundary_faces] = 0.0
        return HybridVector(self, cell_blocks, face_blocks)

    # -- norms and reconstructions -------------------------------------------

    def gradient_norm(self, v):
        """Broken L^2 norm of the reconstructed gradient, (sum_T ||G_T v||^2)^(1/2)."""
        self._ensure_classes()
        total = 0.0
        for cls in self._classes:
            loc = self._local_values(cls, v)
            q = loc @ cls.G.T
            qx, qy = q[:, :self.Nk], q[:, self.Nk:]
            total += np.einsum("mi,ij,mj->", qx, cls.Mk, qx)
            total += np.einsum("mi,ij,mj->", qy, cls.Mk, qy)
        return float(np.sqrt(max(total, 0.0)))

    def discrete_norm_1h(self, v):
        """Energy-type seminorm: gradient reconstructions plus scaled face jumps."""
        self._ensure_classes()
        total = 0.0
        for cls in self._classes:
            loc = self._local_values(cls, v)
            q = loc @ cls.G.T
            qx, qy = q[:, :self.Nk], q[:, self.Nk:]
            total += np.einsum("mi,ij,mj->", qx, cls.Mk, qx)
            total += np.einsum("mi,ij,mj->", qy, cls.Mk, qy)
            vT = loc[:, :self.Nk]
            for s, fd in enumerate(cls.faces):
                vF = v.face_blocks[cls.face_ids[:, s]]
                jump = (np.einsum("mi,ij,mj->m", vF, fd.MF, vF)
                        - 2.0 * np.einsum("mi,ij,mj->m", vT, fd.TF1[:self.Nk], vF)
                        + np.einsum("mi,ij,mj->m", vT, fd.TC1[:self.Nk, :self.Nk], vT))
                total += jump.sum() / fd.length
        return float(np.sqrt(max(total, 0.0)))

    def discrete_norm_1ph(self, v, p):
        """W^{1,p}-type norm from broken cell gradients and scaled face jumps."""
        if p < 1:
            raise ValueError("p must be at least 1")
        self._ensure_classes()
        total = 0.0
        for cls in self._classes:
            if cls.phi_grad is None:
                cb = self.cell_basis(cls.rep)
                pts = self.mesh.cell_centroids[cls.rep] + cls.offsets
                cls.phi_grad = cb.gradient(pts)[:, :self.Nk, :]
            loc = self._local_values(cls, v)
            vT = loc[:, :self.Nk]
            g = np.einsum("mi,qid->mqd", vT, cls.phi_grad)
            mag = np.sqrt((g**2).sum(axis=2))
            total += float((mag**p @ cls.weights).sum())
            for s, (foff, fw, phiF, psiF) in enumerate(self._face_trace_data(cls)):
                vF = v.face_blocks[cls.face_ids[:, s]]
                d = vF @ psiF.T - vT @ phiF.T
                total += cls.faces[s].length ** (1.0 - p) * float(
                    (np.abs(d)**p @ fw).sum())
        return float(total ** (1.0 / p))

    def reconstruct_gradient_global(self, v):
        """Cellwise G_T v as a piecewise vector polynomial of degree k."""
        self._ensure_classes()
        coeffs = np.empty((self.mesh.num_cells, 2, self.Nk))
        for cls in self._classes:
            q = self._local_values(cls, v) @ cls.G.T
            coeffs[cls.cell_ids, 0] = q[:, :self.Nk]
            coeffs[cls.cell_ids, 1] = q[:, self.Nk:]
        return PiecewiseVectorPolynomial(self, self.k, coeffs)

    def reconstruct_potential_global(self, v):
        """Cellwise R_T v as a piecewise polynomial of degree k+1."""
        self._ensure_classes()
        coeffs = np.empty((self.mesh.num_cells, self.Nk1))
        for cls in self._classes:
            coeffs[cls.cell_ids] = self._local_values(cls, v) @ cls.R.T
        return PiecewisePolynomial(self, self.k + 1, coeffs)

    # -- iteration helpers ----------------------------------------------------

    def quadrature_batches(self, chunk=8192):
        """Yield (cell ids, points, weights, degree-(k+1) basis values) batches.

        Points have shape (ncells, nq, 2); values are shared within a batch
        because all its cells are congruent.
        """
        self._ensure_classes()
        for cls in self._classes:
            for lo in range(0, len(cls.cells), chunk):
                ids = cls.cell_ids[lo:lo + chunk]
                pts = self.mesh.cell_centroids[ids][:, None, :] + cls.offsets[None]
                yield ids, pts, cls.weights, cls.phi

    def free_dofs(self):
        """All cell dofs plus interior face dofs, in global layout order."""
        if self._free_dofs is None:
            interior = self.mesh.interior_faces
            fdofs = (self.num_cell_dofs + interior[:, None] * self.nF
                     + np.arange(self.nF)).ravel()
            self._free_dofs = np.concatenate(
                (np.arange(self.num_cell_dofs), fdofs))
        return self._free_dofs

    def vector_from_flat(self, x):
        """Rebuild a HybridVector from the flat global layout."""
        x = np.asarray(x, dtype=float)
        cells = x[:self.num_cell_dofs].reshape(self.mesh.num_cells, self.Nk)
        faces = x[self.num_cell_dofs:].reshape(self.mesh.num_faces, self.nF)
        return HybridVector(self, cells, faces)


def interpolate(v, mesh, k, zero_boundary=False):
    """Interpolate the field ``v`` on a fresh degree-k space over ``mesh``.

    Convenience wrapper; reuse an :class:`HHOSpace` when interpolating more
    than once on the same mesh.
    """
    return HHOSpace(mesh, k).interpolate(v, zero_boundary=zero_boundary)


def discrete_norm_1h(v):
    """Discrete H^1-like norm of a hybrid vector (gradient + scaled jumps)."""
    return v.space.discrete_norm_1h(v)


def discrete_norm_1ph(v, p):
    """Discrete W^{1,p}-like norm of a hybrid vector for 1 < p < inf."""
    return v.space.discrete_norm_1ph(v, p)
