#!/usr/bin/env python3
"""Run the full operator verification suites from the command line.

Equivalent to ``dsheaf verify``; exits nonzero if any suite fails.
"""

import sys

from dsheaf.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify"] + sys.argv[1:]))
