"""Run the three built-in experiment presets into ./out/<preset>/."""

import sys

from dqdsim import cli


def main() -> int:
    out_root = sys.argv[1] if len(sys.argv) > 1 else "out"
    worst = cli.EXIT_OK
    for preset in (cli.PRESET_FIG2, cli.PRESET_FIG3, cli.PRESET_FIG4):
        rc = cli.run(cli.preset_config(preset), output_dir=f"{out_root}/{preset}")
        print(f"{preset}: exit {rc}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
