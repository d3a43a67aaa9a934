"""Photonic quantum circuit Born machine with photon-loss mitigation.

Submodules: ``fock`` (exact linear optics), ``mesh`` (the interferometer
ansatz), ``noise`` (uniform loss, threshold detection), ``mitigation``
(post-selection and recycling estimators), ``training`` (targets, losses,
SPSA), ``permbench`` (additive-error permanent estimation) and ``cli``.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateInputError,
    InputError,
    InsufficientDataError,
    NumericalError,
    QCBMError,
    ResourceError,
)
from .fock import (
    DistributionTable,
    FockState,
    enumerate_fock,
    ideal_distribution,
    output_probability,
    permanent,
    sample_categorical,
)
from .mesh import MeshParams, MzElement, clements_layout, compose, t_matrix
from .metrics import kl_divergence, tvd
from .mitigation import (
    EstimatorOutput,
    RecycledDecomposition,
    estimator_errors,
    ideal_reference,
    mitigate,
    postselect,
    recycle,
)
from .noise import (
    ClickPattern,
    LossModel,
    LossyCounts,
    exact_lossy_distribution,
    lossy_sample,
    stratify,
    threshold_map,
)
