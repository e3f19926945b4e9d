"""Three-party rate versus distance at 0.5% misalignment for several dark-count rates."""

from _common import parser, sweep

from mqds.params import ChannelParams

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    for pd in (1e-7, 1e-6, 1e-5):
        sweep(args, 3, ChannelParams(e_mis=0.005, p_dark=pd), f"rate_M3_pd{pd:.0e}.csv")
