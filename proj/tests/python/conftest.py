import os
import sys

core_dir = os.environ.get("SASIM_CORE_DIR")
if core_dir and core_dir not in sys.path:
    sys.path.insert(0, core_dir)
