"""Rate versus distance for three, four and five parties at 0.1% misalignment."""

from _common import parser, sweep

from mqds.params import ChannelParams

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    for M in (3, 4, 5):
        sweep(args, M, ChannelParams(e_mis=0.001), f"rate_M{M}_ed0.10.csv")
