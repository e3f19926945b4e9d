"""Three-party rate versus distance at 0.25%, 0.50% and 0.75% misalignment."""

from _common import parser, sweep

from mqds.params import ChannelParams

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    for e in (0.0025, 0.005, 0.0075):
        sweep(args, 3, ChannelParams(e_mis=e), f"rate_M3_ed{100 * e:.2f}.csv")
