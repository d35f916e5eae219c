"""Frozen reference values (computed once with mpmath at 30 digits) and small
independent re-implementations used as test oracles."""

import mpmath
import numpy as np

# E_n(x) at (n, x)
EXPINT_FROZEN = {
    (1, 1e-6): 13.238295893062491,
    (1, 0.5): 0.55977359477616081,
    (1, 1.0): 0.21938393439552027,
    (1, 4.0): 0.0037793524098489065,
    (1, 25.0): 5.3488997553402166e-13,
    (2, 1e-6): 0.99998576170460694,
    (2, 0.5): 0.32664386232455302,
    (2, 1.0): 0.14849550677592205,
    (2, 4.0): 0.0031982292493385544,
    (2, 25.0): 5.1569447661347899e-13,
    (3, 1e-6): 0.49999900000736915,
    (3, 0.5): 0.22160436427517846,
    (3, 1.0): 0.10969196719776014,
    (3, 4.0): 0.0027613609456899814,
    (3, 25.0): 4.9779097481352287e-13,
    (5, 1e-6): 0.24999966666691667,
    (5, 0.5): 0.13097731169586485,
    (5, 1.0): 0.070454237461720398,
    (5, 4.0): 0.0021555113535254602,
    (5, 25.0): 4.6538285243694528e-13,
}

# 1 - E_2(1/2): contraction bound for kappa = 0.1, Z = 10
C1_LAKE = 0.67335613767544698
# (1 - E_2(1)) / 2: order-1 kernel applied to H = 1 at the lake surface
KERNEL_EDGE_LAKE = 0.42575224661203898
# peak of x^3 / (e^x - 1): 3 + W(-3 e^-3)
WIEN_X = 2.8214393721220789


def kernel_direct(tau, kappa, H, order=1, albedo=0.0):
    """(kappa/2) int_0^Z [E_n(kappa|tau_i - t|) + albedo E_n(kappa(tau_i + t))] H(t) dt
    for piecewise-linear H, segment by segment in closed form at 40 digits.

    Uses int E_n(u) du = -E_{n+1}(u) and int u E_n(u) du = -u E_{n+1}(u) - E_{n+2}(u).
    The extra digits absorb the cancellation on short segments.
    """
    mp = mpmath.mp
    E = mpmath.expint
    tau = np.asarray(tau, dtype=float)
    H = np.asarray(H, dtype=float)
    out = np.zeros(tau.size)

    def piece(ua, ub, ha, hb):
        # int over u in [ua, ub] (ua < ub) of E_n(u) h(u), h linear with h(ua)=ha, h(ub)=hb
        if ub == ua:
            return 0.0
        ua, ub, ha, hb = (mp.mpf(float(v)) for v in (ua, ub, ha, hb))
        m0 = E(order + 1, ua) - E(order + 1, ub)
        m1 = (ua * E(order + 1, ua) + E(order + 2, ua)
              - ub * E(order + 1, ub) - E(order + 2, ub))
        slope = (hb - ha) / (ub - ua)
        return ha * m0 + slope * (m1 - ua * m0)

    with mpmath.workdps(40):
        for i, ti in enumerate(tau):
            acc = mp.mpf(0)
            for j in range(tau.size - 1):
                a, b = tau[j], tau[j + 1]
                ha, hb = H[j], H[j + 1]
                if b <= ti:
                    acc += piece(kappa * (ti - b), kappa * (ti - a), hb, ha)
                else:
                    acc += piece(kappa * (a - ti), kappa * (b - ti), ha, hb)
                if albedo:
                    acc += albedo * piece(kappa * (ti + a), kappa * (ti + b), ha, hb)
            out[i] = float(acc / 2)
    return out
