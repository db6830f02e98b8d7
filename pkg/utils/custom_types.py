from typing import TypeAlias, Tuple

import numpy as np

Array: TypeAlias = np.ndarray

# classifier inputs
FeatureMatrix = Array['N,D', np.float64]
FeatureVector = Array['D', np.float64]
LabelArray = Array['N', np.int8]      # 0 = NORMAL, 1 = ABNORMAL
ScoreArray = Array['N', np.float64]

MonotonicNs = int      # time.perf_counter_ns / time.monotonic_ns
EpochMs = int
EpochUs = int

Endpoint = Tuple[str, int]   # address, port
