"""Planning with partially ordered preferences over temporal goals.

The package models terminating labeled MDPs, preference DFAs over their
traces, and computes nondominated policies for the weak-stochastic order
via a product construction and scalarized multi-objective value
iteration.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .mdp import (
    ImproperPolicyError,
    MdpError,
    MemorylessPolicy,
    Tlmdp,
    ValidationReport,
)
from .modelfile import (
    ModelFileError,
    SolutionReport,
    load_model,
    load_product,
    load_report,
    write_model,
    write_product,
    write_report,
)
from .momdp import (
    Momdp,
    MomdpError,
    MomdpSolution,
    WeightVector,
    evaluate_policy,
    pareto_dominates,
    pareto_front,
    sample_weights,
    solve_scalarized,
)
from .oracle import (
    CapError,
    OracleError,
    PolicyEnumeration,
    Theorem1Report,
    check_theorem1,
    enumerate_solutions,
    random_instance,
)
from .order import (
    Comparison,
    Dominance,
    OrderError,
    PartialOrder,
    UpperSet,
    WeakOrderFamily,
    dominates_weak_stochastic,
)
from .pdfa import Pdfa, PdfaError, PreferenceCycleWarning
from .product import ProductError, ProductMdp, build_product
from .scenarios import (
    MINI_PRESETS,
    GardenConfig,
    ScenarioError,
    build_garden,
    build_garden_mini,
    garden_pdfa,
    large_garden_config,
)

__all__ = [
    "CapError",
    "Comparison",
    "Dominance",
    "GardenConfig",
    "ImproperPolicyError",
    "KERNEL_BACKEND",
    "MINI_PRESETS",
    "MdpError",
    "MemorylessPolicy",
    "ModelFileError",
    "Momdp",
    "MomdpError",
    "MomdpSolution",
    "OracleError",
    "OrderError",
    "PartialOrder",
    "Pdfa",
    "PdfaError",
    "PolicyEnumeration",
    "PreferenceCycleWarning",
    "ProductError",
    "ProductMdp",
    "ScenarioError",
    "SolutionReport",
    "Theorem1Report",
    "Tlmdp",
    "UpperSet",
    "ValidationReport",
    "WeakOrderFamily",
    "WeightVector",
    "__version__",
    "build_garden",
    "build_garden_mini",
    "build_product",
    "check_theorem1",
    "dominates_weak_stochastic",
    "enumerate_solutions",
    "evaluate_policy",
    "garden_pdfa",
    "load_model",
    "load_product",
    "load_report",
    "pareto_dominates",
    "pareto_front",
    "large_garden_config",
    "random_instance",
    "sample_weights",
    "solve_scalarized",
    "write_model",
    "write_product",
    "write_report",
]
