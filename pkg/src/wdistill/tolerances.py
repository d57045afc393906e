"""Central numeric tolerances.

Every module takes its thresholds from here so that operations and the
test suite can never drift apart on what "equal" means.
"""

# State normalisation / hermiticity checks
ATOL_NORM = 1e-12
ATOL_HERM = 1e-12
ATOL_TRACE = 1e-12

# Probability bookkeeping
ATOL_BRANCH_SUM = 1e-10       # measurement branch probabilities must sum to 1
PRUNE_PROBABILITY = 1e-14     # branches below this weight are dropped
ATOL_ZERO_STATE = 1e-14       # squared norm below this means "no state left"
ATOL_ANCILLA_GROUND = 1e-10   # ancilla population allowed outside |0...0>

# Eigenvalue handling
EIG_CLAMP = 1e-10             # |negative eigenvalue| below this is float noise
JACOBI_SWEEP_TOL = 1e-14      # relative off-diagonal mass at convergence
JACOBI_MAX_SWEEPS = 60
# Eigenvalues below this fraction of the largest one are zeroed before a
# matrix square root: sqrt turns O(machine-eps) noise into O(1e-8) error
# unless the noise floor is cut first.
SQRT_SPECTRAL_FLOOR = 1e-13

# Fidelity clamping: values this close to [0, 1] are snapped onto the interval
ATOL_FIDELITY_CLAMP = 1e-10

# Readout mitigation bookkeeping
ATOL_MITIGATION_WEIGHT = 1e-6

# Entanglement measures
ATOL_CONCURRENCE_INPUT = 1e-10
