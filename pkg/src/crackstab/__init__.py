"""Stability of the Mumford-Shah functional at a straight crack in a rectangle.

The package computes the second variation of the Mumford-Shah energy at the
critical pair ``u = x`` (upper half) / ``u = -x`` (lower half) on the
rectangle ``(x0, x0 + l) x (-y0, y0)`` cut by the segment ``y = 0``, the
largest eigenvalue ``lambda1`` of the associated nonlocal operator, the dual
capacity ``mu``, and the closed form ``lambda1 = (2 l / pi) tanh(2 pi y0 / l)``
against which all numerics are checked.
"""

from crackstab.errors import (
    CrackstabError,
    OperatorNotPositiveError,
    OutOfRangeError,
    PoleProximityError,
    SolverError,
)
from crackstab.geometry import (
    CrackFunction,
    CrackedRectangle,
    Flow,
    PullbackMetric,
    build_flow,
    crack_length,
    graph_mean_curvature,
    pullback_metric,
)
from crackstab.elliptic import (
    Half,
    HalfField,
    PairField,
    SlopeConfig,
    crack_traces,
    dirichlet_energy,
    solve_half,
    solve_state,
)
from crackstab.secondvar import (
    Classification,
    CoefficientA,
    SecondVariationReport,
    classify,
    FDCheckReport,
    fd_check,
    fd_energy_derivatives,
    fd_richardson,
    first_variation,
    quadratic_form,
    solve_v_phi,
)
from crackstab.spectral import (
    EigenReport,
    apply_T,
    dual_mu,
    lambda1_analytic,
    lambda1_grid,
    lambda1_modes,
    resolvent,
    sim_inner,
)
from crackstab.closedform import (
    analytic_lambda1,
    exact_eigenpair,
    inequality_witness,
    is_stable,
    no_root_check,
    series_g,
    threshold_length,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
