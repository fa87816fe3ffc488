#!/usr/bin/env python3
"""
Standalone launcher for the neural-ctmc toolkit.
This is a convenience wrapper around src/cli.py.
"""

import sys
from pathlib import Path

# Add the repository root so src/ imports as a package
sys.path.append(str(Path(__file__).parent))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
