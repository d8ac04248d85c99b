"""Reed-Solomon gradient codes for straggler-tolerant distributed gradient descent."""

from .construction import CodeParams, MaskMatrix, mask_matrix, row_balanced_mask, straggler_budget
from .delay import (
    DelayParams,
    TimeModel,
    f_of_alpha,
    optimal_alpha_offline,
    optimal_f,
    order_stat_asymptotic,
    order_stat_exact,
    sample_delay,
    total_time,
)
from .encoding import (
    DecodingError,
    DecodingVector,
    EncodingMatrix,
    InverseTable,
    build_code,
    decoding_vector,
    encoding_matrix,
    inverse_table,
    primitive_root,
    recover_gradient,
)

__version__ = "0.1.0"
