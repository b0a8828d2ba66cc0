"""Frozen reference values.

DERIVED values were computed once with mpmath at 50 significant digits from
the closed-form relations, independently of the package, and pasted here.
REPORTED values are figures from the published case study that the
synthetic network is meant to echo.
"""

# DERIVED (mpmath, dps=50)
AREA_D03 = 0.070685834705770347865  # pi * 0.3**2 / 4
PIPE_T_OUT = 397.65025091777103738  # T_in 398.15, T_ext 298.15, L 100, gamma 0.1, c 1996, f 1
HEAT_LOSS_GAMMA = 1.0499456393981361646  # layered wall example
STEAM_P_OUT = 246468.65525142663344  # p_in 275790 Pa, f 5, d 0.3, L 500, lambda 0.01, gamma 0.1
STEAM_PIPE_T_OUT = 397.65025091777106012  # outlet temperature of that steam pipe
WATER_DROP = 63.325739776461107152  # f 5, lambda 0.002, L 500, d 0.2, rho 1000
WATER_RISE_WITH_PUMP = 34410.674260223538893  # same pipe with a 34474 Pa boost
LOAD_SUPPLIED = 2363620.0  # f 1, T_in 398.15, T_out 353.15
STEAM_DENSITY = 1.5009287945915623573  # p 275790, T 398.15, R_s 461.5
PLANT_POWER_BASELINE = 15196279.8008  # f 6.43, T_in 353.15, T_out 398.01
DEMAND_FLOW = 6.7892376681614349776  # 15.14 MW / latent heat

# REPORTED
REPORTED_SUPPLIED_MW = 15.2
REPORTED_TOTAL_DEMAND = 15.14e6
REPORTED_OUTAGE_DEMAND = 27.43e6
REPORTED_OUTAGE_CAPACITY = 20e6
REPORTED_UNMET_PCT = 27.28
