#!/usr/bin/env python3
"""
Entry point script for the Off-PAC experiment harness.

This script provides a command-line interface for running single configurations,
parameter sweeps, reports and the tabular verification suite.
"""

import sys
import os

# Add src to Python path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from offpac.cli import main

if __name__ == '__main__':
    sys.exit(main())
