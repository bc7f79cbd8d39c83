import os
import sys

# packages are imported from the repository root, as Experiments.py does
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
