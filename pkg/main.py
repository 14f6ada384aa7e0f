#!/usr/bin/env python3
"""
Entry point for the relation extraction toolkit.

Usage:
    python main.py prepare --corpus train.jsonl --out runs/prep
    python main.py cv --corpus train.jsonl --filters 4,6 --seed 7
    python main.py sweep --corpus train.jsonl --jobs 5
    python main.py baseline --corpus train.jsonl --with-cnn
    python main.py --help
"""

import logging
import os
import sys

from relex.cli import run

# Configure logging
logging.basicConfig(
    level=os.getenv("RELEX_LOG_LEVEL", "INFO"),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
