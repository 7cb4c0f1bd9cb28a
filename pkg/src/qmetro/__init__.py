"""Tight multi-parameter quantum estimation tradeoff bounds and the
projective measurements that attain them."""

from .errors import (InputError, NumericalInconsistencyError, QMetroError, SaturationError,
                     SingularFisherError, SingularOutcomeError)
from .fisher import FisherBundle, cfim, fisher_bundle, mixed_bundle, pure_bundle, sld_vectors
from .linalg import (BlockForm, complete_basis, dense_first_column_orthogonal, gram_schmidt,
                     skew_block_diagonalize)
from .measurement import (Measurement, OptimalObservables, build_measurement, canonical_parametrization,
                          optimal_measurement, optimal_observables, verify_saturation)
from .states import (MixedState, PureState, SubspaceEmbedding, custom_state, purify, qubit_fixture,
                     qutrit_fixture, squeezed_fixture)
from .tradeoff import (TradeoffReport, chen_bound, gill_massar_bound, matsumoto_lower, report,
                       tight_bound, validate_report)

__version__ = "0.1.0"
