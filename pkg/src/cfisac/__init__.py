"""Cell-free massive MIMO ISAC simulator and URLLC power-allocation toolkit."""

from .allocator import (AllocationMode, ConstraintReport, PowerAllocation,
                        fpp_sca, verify_allocation)
from .harness import (AvailabilityReport, SweepGrid, run_availability,
                      run_ee_sweep, trial_statistics)
from .scenario import (ConfigError, ScaParams, Scenario, SystemConfig,
                       build_scenario, load_config, substream)
from .socp import SocConstraint, SocProblem, SocSolution, solve_socp
from .stats import (CommStatistics, SensingQuadratics, comm_sinr, comm_stats,
                    scale_to_data_len, sensing_matrices, sensing_sinr)
from .urllc import (UrllcTargets, delay_upper_bound, dep_upper_bound,
                    energy_efficiency, max_blocklength, q_function, q_inverse,
                    sinr_threshold)

__version__ = "0.1.0"
