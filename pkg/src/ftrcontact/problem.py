"""Two-body hyperelastic contact problem on a mesh."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .hyperelastic import DirichletData, Elasticity, h1_matrix
from .mesh import Mesh
from .mortar import ContactLinearisation, ContactPair


class ContactProblem:
    """Energy, derivatives and mortar constraints of a two-body mesh.

    ``prolongations`` are block prolongations (coarse to fine, native DOF
    numbering) used by the multigrid inner solver; ``None`` gives a
    single-level solver.
    """

    def __init__(self, mesh: Mesh, params: dict, dirichlet: DirichletData,
                 prolongations=None, loads=None, fd_step: float = 1e-7,
                 basis: str = "lagrange"):
        self.mesh = mesh
        self.dirichlet = dirichlet
        self.elasticity = Elasticity(mesh, params, loads, dirichlet)
        self.pair = ContactPair(mesh, fd_step, basis)
        self.fixed = dirichlet.mask(mesh.n_dofs)
        self.h1 = h1_matrix(mesh)
        self.prolongations = prolongations

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_dofs

    def energy(self, z) -> float:
        return self.elasticity.energy(z)

    def gradient(self, z) -> np.ndarray:
        return self.elasticity.gradient(z)

    def hessian(self, z) -> sp.csr_matrix:
        return self.elasticity.hessian(z)

    def gap(self, z) -> np.ndarray:
        return self.pair.gap(z)

    def linearise(self, z) -> ContactLinearisation:
        return self.pair.linearise(z)

    def pointwise_gap(self, z, samples: int = 16) -> np.ndarray:
        return self.pair.pointwise_gap(z, samples)
