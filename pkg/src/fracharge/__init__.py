"""Fractional-charge calculus on dyadic cubical grids.

Currents are discretized as sparse cubical chains; charges act on them by
midpoint quadrature, by boundary duality, or through truncated paraproduct
series, which specialize to the Young and Zust integrals of Hoelder data.
"""

__version__ = "0.1.0"

from .cubical import (
    Cell,
    CubicalChain,
    DyadicGrid,
    boundary,
    box_chain,
    contract,
    cube_chain,
    density_chain,
    density_current,
    interval_chain,
    mass,
    normal_mass,
    point_chain,
    translate,
)
from .charges import (
    Charge,
    DerivativeCharge,
    FormCharge,
    HolderChargeFn,
    LayerCakeCharge,
    TestCurrentFamily,
    exterior_derivative,
    fractional_norm_lb,
    gamma_eval,
    gamma_inverse,
    holder_fractionality_bound,
    interpolation_check,
    layer_cake_eval,
    mcshane_approx,
    plain_norm_lb,
    theta_profile,
)
from .errors import (
    BoxOverflowError,
    CriticalExponentError,
    DimensionError,
    FrachargeError,
    GridMismatchError,
    ResolutionExhaustedError,
    SolverError,
    ValidationError,
)
from .flatnorm import FlatNormCert, flat_norm, flat_norm_lower_bound_pair
from .forms import SampledForm, d_samples, extend_by_clamping, load_form, pointwise_wedge, save_form
from .genfun import (
    WeierstrassSpec,
    holder_exponent_estimate,
    spec_for_alpha,
    weierstrass_sample,
)
from .mollify import Mollifier, dyadic_ladder, mollify_chain, smooth_charge
from .paraproduct import (
    ConvergenceReport,
    DerivativeFactor,
    FormFactor,
    ParaproductState,
    WedgeCharge,
    WedgeFactor,
    lp_sum_bound,
    wedge_charge,
    wedge_eval,
    wedge_stability,
    young_integral,
    zust_integral,
)
