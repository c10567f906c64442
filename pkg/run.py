#!/usr/bin/env python
"""
bubblescope launcher

Runs the bubblescope command line from a source checkout, forwarding all
arguments, e.g. ``python run.py scan --input hsi.csv --out report.json``.
"""
import os
import platform
import subprocess
import sys


def main():
    """Main entry point for the launcher."""
    script_dir = os.path.dirname(os.path.abspath(__file__))
    src_dir = os.path.join(script_dir, "src")

    if not os.path.isdir(os.path.join(src_dir, "bubblescope")):
        print(f"Error: Could not find the bubblescope package under {src_dir}", file=sys.stderr)
        return 1

    # Check if running in a virtual environment
    in_venv = hasattr(sys, 'real_prefix') or (hasattr(sys, 'base_prefix') and sys.base_prefix != sys.prefix)

    python_exe = sys.executable
    if not in_venv:
        venv_bin_dir = os.path.join(script_dir, "venv", "Scripts" if platform.system() == "Windows" else "bin")
        venv_python = os.path.join(venv_bin_dir, "python" + (".exe" if platform.system() == "Windows" else ""))
        if os.path.exists(venv_python):
            python_exe = venv_python

    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(filter(None, [src_dir, env.get("PYTHONPATH")]))

    try:
        return subprocess.run([python_exe, "-m", "bubblescope", *sys.argv[1:]], env=env).returncode
    except KeyboardInterrupt:
        return 130  # Standard UNIX exit code for SIGINT


if __name__ == "__main__":
    sys.exit(main())
