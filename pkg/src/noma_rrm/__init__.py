"""Energy-efficient resource allocation for downlink NOMA heterogeneous networks.

Classical oracles (dual-decomposition user association, two-sided subchannel
matching, gradient power control) label data for small numpy networks, one of
them trained by co-training on unlabeled scenarios.
"""
from .errors import (CapacityError, ChecksumError, ConfigError, FormatError,
                     InfeasibleAssociationError, InfeasibleError, NomaError,
                     TruncatedFileError, UndefinedLoadError, VersionMismatchError)
from .netmodel import (DESK_SCALE, REFERENCE, Scenario, ScenarioConfig,
                       check_constraints, energy_efficiency, generate_scenario,
                       sum_rate)

__version__ = "0.1.0"
