"""
Shared typing aliases for mxm-frontlab.

Numerical arrays are float64 throughout; JSON-shaped aliases describe the
report documents. Centralizing them avoids circular imports between the
solver modules and the reporting layer.
"""

from collections.abc import Callable, Mapping, Sequence
from pathlib import Path

import numpy as np
import numpy.typing as npt

type JSONScalar = str | int | float | bool | None
type JSONLike = JSONScalar | Mapping[str, "JSONLike"] | Sequence["JSONLike"]

type FloatArray = npt.NDArray[np.float64]

# Scalar or array argument accepted by the vectorized evaluators
type ArrayLike = float | FloatArray

type ScalarFn = Callable[[FloatArray], FloatArray]

type PathLike = str | Path
