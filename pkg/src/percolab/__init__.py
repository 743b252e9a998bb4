"""Bond percolation at criticality on finite transitive graphs.

Submodules: ``graphs`` (vertex-transitive families), ``perc`` (coupled
percolation and cluster exploration), ``oracle`` (exact enumeration on tiny
graphs), ``estimators`` (Monte Carlo estimators and the p_c solver),
``geometry`` (diameter and mixing time of clusters) and ``lab`` (sweeps,
fits and the command line).
"""

from .graphs import Complete, Explicit, GraphError, Hamming, Torus, TransitiveGraph
from .perc import CouplingSeed, explore_cluster, grow_ball, largest_cluster, largest_component

__version__ = "0.1.0"

__all__ = ["Complete", "CouplingSeed", "Explicit", "GraphError", "Hamming", "Torus",
           "TransitiveGraph", "explore_cluster", "grow_ball", "largest_cluster",
           "largest_component"]
