#!/usr/bin/env python3
"""Build the `sbd` extension module and drop it next to this script.

Usage: python3 python/build_ext.py [--debug]
"""

import argparse
import pathlib
import shutil
import subprocess
import sys
import sysconfig

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--debug", action="store_true", help="build without --release")
    args = parser.parse_args()

    cmd = ["cargo", "build", "-p", "sbd-py"]
    profile = "debug" if args.debug else "release"
    if not args.debug:
        cmd.append("--release")
    subprocess.run(cmd, cwd=ROOT, check=True)

    built = ROOT / "target" / profile / "libsbd.so"
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    dest = ROOT / "python" / f"sbd{suffix}"
    shutil.copy2(built, dest)
    print(f"installed {dest.relative_to(ROOT)}", file=sys.stderr)


if __name__ == "__main__":
    main()
