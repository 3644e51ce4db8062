"""JSON conversion for report dataclasses.

Field names are kept verbatim.  Crack functions become their nodal values
(endpoints included) with the matching abscissae; non-finite floats become
the strings ``"inf"``, ``"-inf"`` and ``"nan"`` so the output is strict JSON.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math

import numpy as np

from crackstab.geometry import CrackedRectangle, CrackFunction


def _float(v: float):
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, CrackFunction):
        return {"x": to_jsonable(obj.domain.x), "values": to_jsonable(obj.nodal)}
    if isinstance(obj, CrackedRectangle):
        return to_jsonable(dataclasses.asdict(obj))
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"
