#!/usr/bin/env python3
"""
Script to verify that all required imports work correctly.
Run it after installing requirements.txt, before the test suite.
"""

import sys
from pathlib import Path

sys.path.append(str(Path(__file__).parent.parent))

try:
    import numpy
    import scipy.sparse
    import sklearn
    import pandas
    import dotenv
    import relex.cli
    print(f'SUCCESS: numpy {numpy.__version__}, scikit-learn {sklearn.__version__}, pandas {pandas.__version__} and the relex package imported successfully')
except ImportError as e:
    print(f'ERROR: Import error: {e}')
    exit(1)
