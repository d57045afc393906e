"""wdistill: exact and sampled simulation of round-based EPR extraction
from a shared three-party W state via weak ancilla couplings.

The package is organised by task:

- :mod:`wdistill.qstate` — state containers (statevectors, density
  matrices), tensor products, partial trace, fidelity.
- :mod:`wdistill.circuit` — state preparation and the gate layer
  (controlled partial rotations, measurement, branch enumeration).
- :mod:`wdistill.protocol` — exact branch-enumeration drivers for the
  random-party protocol, its deferred-measurement variant, and the
  specific-party baseline, plus the coupling-strength schedule.
- :mod:`wdistill.measures` — entanglement accounting: concurrence,
  entanglement of formation, a fully-entangled-fraction lower bound,
  success-probability and expected-entanglement assembly.
- :mod:`wdistill.noise` — depolarizing preparation/degradation models
  and readout-error modelling and mitigation.
- :mod:`wdistill.stats` — Monte Carlo trajectory sampling with
  reproducible per-trial random streams and rate estimation.
- :mod:`wdistill.cli` — the ``wdistill`` command-line tool.
"""

from .circuit import (MeasurementBranch, couple_all, measure, prepare_w,
                      strong_measure_party)
from .errors import (ConfigError, DataError, InvalidArgumentError,
                     InvalidStateError, NumericalDomainError,
                     PreconditionError, UnsupportedError)
from .measures import (PSI_PLUS, StrongConvention,
                       assemble_expected_entanglement,
                       assemble_success_probability, bennett_lower_bound,
                       binary_entropy, brute_force_mixed_eof, concurrence,
                       eof_from_concurrence, expected_entanglement,
                       fully_entangled_fraction, pure_eof,
                       success_probability)
from .noise import (CountsTable, NoisyWParams, ReadoutModel,
                    default_ancilla_model, degrade_between_rounds,
                    degrade_to_fidelity, depolarizing_weight_for_fidelity,
                    load_readout_model, make_depolarizing_schedule,
                    make_fidelity_ramp, mitigate_readout, noisy_w,
                    save_readout_model)
from .protocol import (EpsilonSchedule, ProtocolConfig, ProtocolResult,
                       RoundRecord, StrongRecord, Variant, classify_outcome,
                       optimal_epsilon, pair_parties, run_no_mcm,
                       run_random_party, run_specific_party)
from .qstate import (DensityMatrix, Statevector, as_density_matrix, fidelity,
                     partial_trace, tensor)
from .stats import (EstimateWithError, RateEstimates, SampledTrial, ShotPlan,
                    conditioned_fidelity, estimate_rate, sample_protocol)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # qstate
    "Statevector", "DensityMatrix", "as_density_matrix", "tensor",
    "partial_trace", "fidelity",
    # circuit
    "prepare_w", "couple_all", "measure", "strong_measure_party",
    "MeasurementBranch",
    # protocol
    "optimal_epsilon", "EpsilonSchedule", "Variant", "ProtocolConfig",
    "RoundRecord", "StrongRecord", "ProtocolResult", "classify_outcome",
    "pair_parties", "run_random_party", "run_specific_party", "run_no_mcm",
    # measures
    "PSI_PLUS", "StrongConvention", "success_probability",
    "expected_entanglement", "assemble_success_probability",
    "assemble_expected_entanglement", "concurrence", "eof_from_concurrence",
    "binary_entropy", "pure_eof", "bennett_lower_bound",
    "fully_entangled_fraction", "brute_force_mixed_eof",
    # noise
    "NoisyWParams", "ReadoutModel", "CountsTable", "noisy_w",
    "depolarizing_weight_for_fidelity", "degrade_to_fidelity",
    "degrade_between_rounds", "make_depolarizing_schedule",
    "make_fidelity_ramp", "mitigate_readout", "default_ancilla_model",
    "save_readout_model", "load_readout_model",
    # stats
    "ShotPlan", "EstimateWithError", "SampledTrial", "RateEstimates",
    "sample_protocol", "estimate_rate", "conditioned_fidelity",
    # errors
    "InvalidArgumentError", "PreconditionError", "InvalidStateError",
    "NumericalDomainError", "ConfigError", "DataError", "UnsupportedError",
]
