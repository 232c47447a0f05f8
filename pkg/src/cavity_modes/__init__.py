"""Resonant modes of closed cavities filled with anisotropic media.

Edge-element discretisation on tetrahedral meshes and three constrained
eigen-solvers (penalty, augmented, projection) that remove the spurious
gradient modes.
"""
from .assembly import (AssembledSystem, IdentityReport, assemble_constraint_direct,
                       assemble_system, check_identities, read_triplets, write_triplets)
from .eigensolvers import (PHYSICAL, SPURIOUS, UNCLASSIFIED, DenseLimitError, EigenSolution,
                           Mode, SolverConfig, SolverError, count_zero_eigenvalues,
                           nullspace_basis, solve, solve_augmented, solve_penalty,
                           solve_projection, solve_unconstrained, zero_tolerance)
from .materials import (PRESETS, VACUUM, MaterialError, MaterialTensors, MediumCase,
                        classify_medium, preset, resonant_frequency)
from .mesh import (EdgeNumbering, MeshError, TetMesh, build_connectivity_matrix,
                   extract_edges, generate_ball_mesh, generate_box_mesh,
                   generate_cylinder_mesh, parse_mesh, read_mesh, write_mesh)
from .modes import (ReferenceSpectrum, analytic_box_eigenvalues, classify_by_alpha_sweep,
                    classify_by_residual, compare_to_reference, default_tau,
                    paper_reference, sets_agree)

__version__ = "0.1.0"

__all__ = [name for name in dir()
           if not name.startswith("_")
           and name not in {"assembly", "eigensolvers", "materials", "mesh", "modes"}]
