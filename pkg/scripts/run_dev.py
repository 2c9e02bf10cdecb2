#!/usr/bin/env python3
"""
Run the API locally with auto-reload.
"""

import sys
from pathlib import Path

# Add the project directory to the Python path
sys.path.append(str(Path(__file__).parent.parent))

from app.main import run_dev

if __name__ == "__main__":
    run_dev()
