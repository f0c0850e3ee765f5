"""stcov: separability and full-symmetry diagnostics for space-time covariances.

Simulate Gaussian space-time fields from parametric covariance models,
estimate per-site-pair separability/symmetry test functions, summarize them
with functional boxplots, and assess significance with a depth-rank
bootstrap test.
"""

__version__ = "0.1.0"

from .dataset import SpaceTimeDataset, read_dataset_csv, write_dataset_csv
from .depth import DepthRanking, band_depth, modified_band_depth, rank_curves
from .errors import (
    ConfigError,
    DegeneratePairError,
    ModelDomainError,
    NotPSDError,
    SingularModelError,
    StcovError,
)
from .estimate import (
    CurveSet,
    all_pairs_test_fns,
    cross_cov_hat,
    sep_test_fn_hat,
    sym_test_fn_hat,
)
from .fbplot import BoxplotSummary, functional_boxplot, render_svg
from .models import (
    Cesare,
    CovarianceSpec,
    Cov1D,
    CressieHuangNonsep,
    CressieHuangSep,
    EmpiricalSeparable,
    EmpiricalSymmetrized,
    GneitingAsym,
    GneitingSep,
    SeparableProduct,
    analytic_sep_test_fn,
    analytic_sym_test_fn,
    build_covariance_matrix,
    evaluate,
    spec_from_json,
    spec_to_json,
)
from .ranktest import (
    RankTestConfig,
    RankTestReport,
    build_h0_spec,
    rank_scores,
    rank_test,
    w_statistic,
)
from .simulate import (
    TriangularFactor,
    chol_psd,
    repair_psd,
    simulate_block_sequential,
    simulate_exact,
    simulate_separable_kron,
)

__all__ = [
    "__version__",
    "SpaceTimeDataset",
    "read_dataset_csv",
    "write_dataset_csv",
    "DepthRanking",
    "band_depth",
    "modified_band_depth",
    "rank_curves",
    "StcovError",
    "ConfigError",
    "ModelDomainError",
    "SingularModelError",
    "DegeneratePairError",
    "NotPSDError",
    "CurveSet",
    "cross_cov_hat",
    "sep_test_fn_hat",
    "sym_test_fn_hat",
    "all_pairs_test_fns",
    "BoxplotSummary",
    "functional_boxplot",
    "render_svg",
    "CovarianceSpec",
    "GneitingSep",
    "CressieHuangSep",
    "CressieHuangNonsep",
    "Cesare",
    "GneitingAsym",
    "Cov1D",
    "SeparableProduct",
    "EmpiricalSeparable",
    "EmpiricalSymmetrized",
    "evaluate",
    "analytic_sep_test_fn",
    "analytic_sym_test_fn",
    "build_covariance_matrix",
    "spec_to_json",
    "spec_from_json",
    "RankTestConfig",
    "RankTestReport",
    "build_h0_spec",
    "rank_scores",
    "rank_test",
    "w_statistic",
    "TriangularFactor",
    "chol_psd",
    "repair_psd",
    "simulate_exact",
    "simulate_block_sequential",
    "simulate_separable_kron",
]
