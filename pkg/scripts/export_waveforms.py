#!/usr/bin/env python3
"""Export the gate waveforms of the bundled device as CSV + JSON.

Writes the pi/2 two-axis composite pulse and the SWIPHT envelope
into the chosen directory, using the same artifact formats as the CLI.
"""

import argparse

from zzforge import cli


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="waveforms")
    parser.add_argument("--config", default=None)
    args = parser.parse_args()

    base = ["--out", args.out] + (["--config", args.config] if args.config else [])
    for workflow in (
        ["pulse-tag", "--angle", "pi/2"],
        ["pulse-swipht"],
        ["derive"],
    ):
        code = cli.main(workflow + base)
        if code != 0:
            raise SystemExit(code)
    print(f"waveform artifacts written to {args.out}/")


if __name__ == "__main__":
    main()
