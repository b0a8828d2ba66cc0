"""Recompute the frozen reference values with mpmath, independently of tnfo."""

import mpmath as mp
import oracles as o

mp.mp.dps = 50
c_s, c_w, c_L, R_s = mp.mpf(1996), mp.mpf(4186), mp.mpf("2.23e6"), mp.mpf("461.5")
T_C = mp.mpf("373.15")
T_EXT = mp.mpf("298.15")


def area(d):
    return mp.pi * d * d / 4


def decay(T_in, f, L, gamma, c):
    return T_EXT + (T_in - T_EXT) * mp.exp(-L * gamma / (c * f))


def close(frozen, exact):
    return abs(mp.mpf(frozen) - exact) <= mp.mpf("1e-15") * abs(exact)


def test_area():
    assert close(o.AREA_D03, area(mp.mpf("0.3")))


def test_outlet_temperature():
    assert close(o.PIPE_T_OUT, decay(mp.mpf("398.15"), 1, 100, mp.mpf("0.1"), c_s))


def test_layered_wall():
    a_a, a_bc, K_a, K_b = 100, 15, 45, mp.mpf("0.05")
    d_a, d_b, d_c = mp.mpf("0.3"), mp.mpf("0.31"), mp.mpf("0.41")
    inv = (1 / (a_a * mp.pi * d_a) + mp.log(d_b / d_a) / (2 * mp.pi * K_a)
           + mp.log(d_c / d_b) / (2 * mp.pi * K_b) + 1 / (mp.pi * d_c * a_bc))
    assert close(o.HEAT_LOSS_GAMMA, 1 / inv)


def test_steam_pipe():
    f, d, L, lam, gamma = 5, mp.mpf("0.3"), 500, mp.mpf("0.01"), mp.mpf("0.1")
    T_in = mp.mpf("398.15")
    T_out = decay(T_in, f, L, gamma, c_s)
    drop = lam * R_s / (area(d) ** 2 * d) * f * f * (T_EXT * L + c_s * f / gamma * (T_in - T_out))
    assert close(o.STEAM_PIPE_T_OUT, T_out)
    assert close(o.STEAM_P_OUT, mp.sqrt(mp.mpf(275790) ** 2 - drop))


def test_water_pipe():
    d = mp.mpf("0.2")
    drop = 25 * mp.mpf("0.002") * 500 / (2 * area(d) ** 2 * d * 1000)
    assert close(o.WATER_DROP, drop)
    assert close(o.WATER_RISE_WITH_PUMP, 34474 - drop)


def test_powers():
    assert close(o.LOAD_SUPPLIED, c_s * (mp.mpf("398.15") - T_C) + c_L + c_w * (T_C - mp.mpf("353.15")))
    plant = mp.mpf("6.43") * (c_w * (T_C - mp.mpf("353.15")) + c_L + c_s * (mp.mpf("398.01") - T_C))
    assert close(o.PLANT_POWER_BASELINE, plant)
    assert close(o.DEMAND_FLOW, mp.mpf("15.14e6") / c_L)


def test_density():
    assert close(o.STEAM_DENSITY, mp.mpf(275790) / (R_s * mp.mpf("398.15")))

