from .dual import Dual, jvp
from .lie import (FD_STEP, JET_CAP, NESTING_CAP, RESIDUAL_BAND, Jet, ad_fn,
                  ad_iterate, bracket_fn, flow_jet, gradient, in_s, in_s_prime,
                  iterated_lie_scalar, jacobian, jet, gradient_batch, lie_batch, lie_bracket, lie_fn,
                  lie_scalar, s_prime_residual, s_residual,
                  s_residual_is_approximate)
from .taylor import Taylor

__all__ = [
    "Dual", "jvp", "lie_batch", "gradient_batch", "Taylor", "Jet", "gradient", "jacobian", "lie_scalar",
    "lie_fn", "bracket_fn", "ad_fn", "lie_bracket", "ad_iterate", "flow_jet",
    "jet", "iterated_lie_scalar", "s_prime_residual", "s_residual",
    "s_residual_is_approximate", "in_s", "in_s_prime", "JET_CAP",
    "NESTING_CAP", "FD_STEP", "RESIDUAL_BAND",
]
