from .cube import Measurement, MeasurementMeta, VideoCube
from .encoder import encode, encode_stacked, normalize_and_add_noise
from .masks import MaskSet, generate_masks
from .operator import SensingOperator, adjoint_apply, forward_apply, phi_phit_diagonal
