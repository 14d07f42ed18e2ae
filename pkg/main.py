#!/usr/bin/env python3
"""
rnest - Main Entry Point
------------------------
Runs the rnest command line from a source checkout:

    python main.py estimate --problem gaussian-sine --reps 1e5 --workers 4
"""

import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from rnest.cli import main

if __name__ == "__main__":
    sys.exit(main())
