"""Simulation and numerical verification of self-normalized partial sum limits
for regularly varying stationary sequences.

Submodules
----------
models        innovation laws, MA filters, normalizing sequences
tail_cluster  tail process, extremal index, spectral cluster sampling
paths         cadlag path representation and CSV I/O
m1_metric     Skorokhod M1 distances and path operations
limit_sim     Poisson cluster series for the limits ``V`` and ``W``
triples       characteristic triples, characteristic functions, stable sampling
verify        Monte Carlo comparison of finite-n statistics with the limits
"""

__version__ = "0.1.0"

from .models import InnovationLaw, ModelSpec, NormSeq, norm_seq, sample_path
from .paths import CadlagPath
from .tail_cluster import ClusterLaw, TailProcessModel, build_cluster_law, extremal_index
from .m1_metric import d_m1, d_m1_exact, d_p, divide_paths, freeze_terminal, uniform_dist
from .limit_sim import build_limit_V, build_limit_W, sample_limit_terminals, sample_poisson_series
from .triples import CharTriple, char_function, stable_params, triple_V, triple_W
from .verify import ExperimentConfig, TestReport, fclt_experiment

__all__ = [
    "__version__",
    "InnovationLaw", "ModelSpec", "NormSeq", "norm_seq", "sample_path",
    "CadlagPath",
    "ClusterLaw", "TailProcessModel", "build_cluster_law", "extremal_index",
    "d_m1", "d_m1_exact", "d_p", "divide_paths", "freeze_terminal", "uniform_dist",
    "build_limit_V", "build_limit_W", "sample_limit_terminals", "sample_poisson_series",
    "CharTriple", "char_function", "stable_params", "triple_V", "triple_W",
    "ExperimentConfig", "TestReport", "fclt_experiment",
]
