"""bellscope: exact Bell polytopes, their symmetries, and quantum bounds.

Subpackages are importable directly (``bellscope.poly``, ``bellscope.ineq``,
...); the most commonly used names are re-exported here.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BellscopeError,
    CatalogError,
    CompositeModulusError,
    EigenConvergenceError,
    ResourceCapError,
    ScenarioMismatchError,
    UnboundedPolytopeError,
)
from .ffun import FiniteFunction, Scenario  # noqa: F401
from .poly import (  # noqa: F401
    LinearInequality,
    RationalPolytope,
    enumerate_vertices,
    hull_facets,
    is_facet_defining,
)
from .sym import canonical_form, orbit_of, orbit_partition  # noqa: F401
from .ineq import BellInequality, catalog, nontrivial_from_function  # noqa: F401
from .qopt import GhzConfig, MbsConfig, mbs_bound, ww_bound  # noqa: F401
from .nmbqc import PMatrix, decide_deterministic, ghz_paradox, minimal_n  # noqa: F401
from .nosig import genbox, ns_vertices, svetlichny_hull, unique_ns_box_check  # noqa: F401
from .loophole import (  # noqa: F401
    PostSelectionRule,
    classify_rule,
    gm_threshold,
    lhv_space_under_rule,
    mk_threshold,
    postselected_lhv_points,
)
