from ._version import __version__
from .errors import ThermocatError
from .gaussian import (StateSum, mean_photon, normalize, partial_trace, purity,
                       trace, wigner_eval)
from .states import (KerrInteractionSpec, bs_split_superposition,
                     displaced_thermal, lossy_split_cat, lossy_split_superposition,
                     measure_qubit_superposed_basis, micro_macro_entangled,
                     probability_report, pure_cat, thermal_superposition,
                     two_mode_thermal_entangled)
from .observables import (bell_chsh, fringe_spacing, marginal, parity_correlation,
                          visibility)
from .bell import (BellOptimizer, SurvivalSearch, maximize_bell, survival_time,
                   bell_curve_vs_d, bell_curve_vs_V_split)
from .oracle import FockOracle, oracle_check
