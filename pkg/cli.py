#!/usr/bin/env python3
"""
CLI interface for the Geodesic Lab

Thin wrapper so the lab runs from a checkout without installation.
"""

import os
import sys

# Add repo root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli import main


if __name__ == '__main__':
    sys.exit(main())
