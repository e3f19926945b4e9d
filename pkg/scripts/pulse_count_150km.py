"""Minimal pulse count at 150 km for three parties, 0.5% misalignment, 1e-7 dark counts."""

import json

from mqds.params import ChannelParams
from mqds.rate import optimize

if __name__ == "__main__":
    pt = optimize(3, ChannelParams(150.0, e_mis=0.005))
    p = pt.params
    print(json.dumps({
        "N_min": pt.N_min, "R": pt.R,
        "mu": p.mu, "nu": p.nu, "p_mu": p.p_mu, "p_nu": p.p_nu, "t": p.t, "T_a": p.T_a, "T_v": p.T_v_min,
        **pt.budget.as_dict(),
    }, indent=2))
