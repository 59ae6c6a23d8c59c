"""Index layout of the packed channel-parameter vector passed to kernels.

The compiled extension (``_core.pyx``) mirrors this layout with a cdef enum;
any change here must be replicated there (the backend parity tests catch
drift functionally).
"""

# Air-to-ground sub-6GHz model: p = clamp(c * (theta - theta0)^d),
# PL = 20log10(d) + 20log10(f_MHz) - 27.55 + Normal(mu_l, sigma_l)
P_SUB6_C = 0
P_SUB6_D = 1
P_SUB6_THETA0_DEG = 2
P_SUB6_MU_LOS_DB = 3
P_SUB6_MU_NLOS_DB = 4
P_SUB6_SIG_LOS_DB = 5
P_SUB6_SIG_NLOS_DB = 6

# Air-to-ground mm-wave model: building-crossing LoS product,
# PL = alpha_l + 10 beta_l log10(d) + Normal(0, sigma_l)
P_MM_EPSILON = 7
P_MM_DENSITY_PER_M = 8
P_MM_ALPHA_LOS_DB = 9
P_MM_BETA_LOS = 10
P_MM_ALPHA_NLOS_DB = 11
P_MM_BETA_NLOS = 12
P_MM_SIG_LOS_DB = 13
P_MM_SIG_NLOS_DB = 14

# Ground-to-ground ABG model: PL = 10 a log10(d) + b + 10 g log10(f_GHz) + chi
P_GND_ALPHA = 15
P_GND_BETA_DB = 16
P_GND_GAMMA = 17
P_GND_SIG_DB = 18

P_NOISE_DBM_HZ = 19

N_PARAMS = 20

# Access-point kind / band codes shared with the scenario module.
KIND_MBS = 0
KIND_MAP = 1
BAND_SUB6 = 0
BAND_MMWAVE = 1

# Serving index used for unassociated users.
UNSERVED = -1

# Finite sentinel reported as the SINR of an unassociated user.
SINR_DB_UNSERVED = -300.0
