#!/usr/bin/env python3

import sys

from src.cli import run

if __name__ == "__main__":
    # Parse arguments, set the logger and run the requested command
    sys.exit(run(sys.argv[1:]))
