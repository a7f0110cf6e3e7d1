"""Filter trust-region solver for large-deformation frictionless contact."""

from .artifacts import read_vtk, write_csv, write_vtk
from .benchmark import ZONES, IroningBenchmark, restrict_nonmortar
from .config import ConfigError, RunConfig, load_config, parse_config
from .filter import Filter, FtrConfig, FtrResult, IterationRecord, ftr_solve
from .gmsh import read_msh, write_msh
from .hyperelastic import DirichletData, Elasticity, MaterialParams
from .mesh import Mesh, MeshHierarchy
from .mortar import ContactPair
from .problem import ContactProblem
from .qpsolve import QuadraticModel, tnnmg_solve, trqp_solve
from .transform import DecouplingTransform

__all__ = [
    "ConfigError", "ContactPair", "ContactProblem", "DecouplingTransform", "DirichletData", "Elasticity",
    "Filter", "FtrConfig", "FtrResult", "IroningBenchmark", "IterationRecord", "MaterialParams", "Mesh",
    "MeshHierarchy", "QuadraticModel", "RunConfig", "ZONES", "ftr_solve", "load_config", "parse_config",
    "read_msh", "read_vtk", "restrict_nonmortar", "tnnmg_solve", "trqp_solve", "write_csv", "write_msh",
    "write_vtk",
]
