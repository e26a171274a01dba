"""Serializable preprocessing pipelines over CSI tensors.

Trace filters (smoothing, outlier removal, low-pass, wavelet denoising) act on
the amplitude of every (subcarrier, rx, tx) trace over time and keep the phase.
``phase_diff`` and ``pca`` turn the tensor into a plain real array, so only
``pca`` may follow them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..core import CsiTensor
from ..errors import ValidationError
from ..transforms import wavelet
from . import filters, phase, reduce

# kind -> {param: (default, validator)}; None default means required
_POS = lambda v: v > 0  # noqa: E731
_ODD = lambda v: float(v).is_integer() and v >= 1 and int(v) % 2 == 1  # noqa: E731
_COUNT = lambda v: float(v).is_integer() and v >= 1  # noqa: E731
_INDEX = lambda v: float(v).is_integer() and v >= 0  # noqa: E731

STAGE_PARAMS = {
    "moving_average": {"w": (None, _ODD)},
    "weighted_ma": {"weights": (None, lambda v: isinstance(v, list) and len(v) >= 1)},
    "ewma": {"alpha": (None, lambda v: 0 < v <= 1)},
    "median": {"w": (None, _ODD)},
    "hampel": {"w": (5, lambda v: _ODD(v) and v >= 3), "n_sigma": (3.0, _POS)},
    "lof": {"k": (10, lambda v: _COUNT(v) and v >= 2), "threshold": (1.5, _POS), "drop": (0, lambda v: v in (0, 1))},
    "lowpass": {"cutoff_hz": (None, _POS)},
    "dwt_denoise": {
        "wavelet": ("db4", lambda v: v in wavelet.LOWPASS),
        "levels": (3, _COUNT),
        "threshold": ("universal", lambda v: v == "universal" or (not isinstance(v, str) and v >= 0)),
    },
    "cpe": {},
    "phase_diff": {"axis": ("subcarrier", lambda v: v in phase.AXES)},
    "csi_ratio": {"rx_i": (0, _INDEX), "rx_j": (1, _INDEX), "tx": (0, _INDEX)},
    "pca": {"k": (None, _COUNT)},
    "lrf": {"r": (None, _COUNT)},
}
ARRAY_STAGES = ("phase_diff", "pca")


@dataclass(frozen=True)
class Stage:
    kind: str
    params: dict

    def resolved(self):
        if self.kind not in STAGE_PARAMS:
            raise ValidationError(f"unknown stage kind {self.kind!r}", "kind")
        schema = STAGE_PARAMS[self.kind]
        unknown = set(self.params) - set(schema)
        if unknown:
            raise ValidationError(f"{self.kind}: unknown params {sorted(unknown)}", sorted(unknown)[0])
        out = {}
        for name, (default, ok) in schema.items():
            if name not in self.params:
                if default is None:
                    raise ValidationError(f"{self.kind}: missing required param {name!r}", name)
                out[name] = default
                continue
            v = self.params[name]
            try:
                good = ok(v)
            except TypeError:
                good = False
            if not good:
                raise ValidationError(f"{self.kind}: invalid value {v!r} for {name!r}", name)
            out[name] = v
        return out


@dataclass(frozen=True)
class PipelineSpec:
    stages: tuple

    def __post_init__(self):
        stages = tuple(s if isinstance(s, Stage) else Stage(s["kind"], dict(s.get("params", {}))) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        self.validate()

    def validate(self):
        array_mode = False
        for s in self.stages:
            s.resolved()
            if array_mode and s.kind != "pca":
                raise ValidationError(f"stage {s.kind!r} cannot follow an array-producing stage", "stages")
            array_mode = array_mode or s.kind in ARRAY_STAGES

    def to_dict(self):
        return {"stages": [{"kind": s.kind, "params": dict(s.params)} for s in self.stages]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or not isinstance(d.get("stages"), list):
            raise ValidationError("pipeline JSON needs a 'stages' list", "stages")
        for s in d["stages"]:
            if not isinstance(s, dict) or "kind" not in s:
                raise ValidationError("every stage needs a 'kind'", "kind")
        return cls(tuple(d["stages"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _map_traces(csi: CsiTensor, fn):
    """Apply ``fn(Series) -> Series`` to every amplitude trace, keeping phases."""
    amp = np.abs(csi.data)
    unit = np.where(amp > 0, csi.data / np.where(amp > 0, amp, 1.0), 1.0)
    T = amp.shape[0]
    flat = amp.reshape(T, -1)
    out = np.empty_like(flat)
    for j in range(flat.shape[1]):
        out[:, j] = fn(filters.Series(flat[:, j], csi.sample_interval)).values
    return csi.replace(data=out.reshape(amp.shape) * unit)


def _apply(stage: Stage, state):
    kind, p = stage.kind, stage.resolved()
    if isinstance(state, np.ndarray):
        if kind == "pca":
            x = state.reshape(state.shape[0], -1)
            return reduce.pca_fit(x, int(p["k"])).transform(x)
        raise ValidationError(f"stage {kind!r} needs CSI input", "stages")
    csi = state
    if kind == "moving_average":
        return _map_traces(csi, lambda s: filters.moving_average(s, int(p["w"])))
    if kind == "weighted_ma":
        return _map_traces(csi, lambda s: filters.weighted_ma(s, p["weights"]))
    if kind == "ewma":
        return _map_traces(csi, lambda s: filters.ewma(s, p["alpha"]))
    if kind == "median":
        return _map_traces(csi, lambda s: filters.median_filter(s, int(p["w"])))
    if kind == "hampel":
        count = [0]

        def run(s):
            out, mask = filters.hampel(s, int(p["w"]), p["n_sigma"])
            count[0] += int(mask.sum())
            return out

        out = _map_traces(csi, run)
        return out.replace(meta={**out.meta, "hampel_replaced": out.meta.get("hampel_replaced", 0) + count[0]})
    if kind == "lowpass":
        return _map_traces(csi, lambda s: filters.lowpass(s, p["cutoff_hz"]))
    if kind == "dwt_denoise":
        return _map_traces(csi, lambda s: filters.dwt_denoise(s, p["wavelet"], int(p["levels"]), p["threshold"]))
    if kind == "lof":
        pts = np.abs(csi.data).reshape(csi.shape[0], -1)
        scores = filters.lof_scores(pts, int(p["k"]))
        outliers = np.flatnonzero(scores > p["threshold"])
        meta = {**csi.meta, "lof_outliers": outliers.tolist()}
        if p["drop"] and outliers.size:
            keep = np.setdiff1d(np.arange(csi.shape[0]), outliers)
            return csi.replace(data=csi.data[keep], meta=meta)
        return csi.replace(meta=meta)
    if kind == "cpe":
        return phase.cpe_compensate(csi)
    if kind == "phase_diff":
        return phase.phase_diff(csi, p["axis"])
    if kind == "csi_ratio":
        ratio, flagged = phase.csi_ratio(csi, int(p["rx_i"]), int(p["rx_j"]), int(p["tx"]))
        meta = {**csi.meta, "ratio_flagged": int(flagged.sum())}
        return csi.replace(data=ratio[:, :, None, None], meta=meta)
    if kind == "pca":
        x = np.abs(csi.data).reshape(csi.shape[0], -1)
        return reduce.pca_fit(x, int(p["k"])).transform(x)
    if kind == "lrf":
        amp = np.abs(csi.data)
        x = amp.reshape(csi.shape[0], -1)
        u, v = reduce.lrf(x, int(p["r"]))
        unit = np.where(amp > 0, csi.data / np.where(amp > 0, amp, 1.0), 1.0)
        return csi.replace(data=(u @ v.T).reshape(amp.shape) * unit)
    raise ValidationError(f"unknown stage kind {kind!r}", "kind")  # pragma: no cover


def run_pipeline(spec: PipelineSpec, csi: CsiTensor):
    """Run the stages in order. Returns a CsiTensor, or a real array after phase_diff/pca."""
    spec.validate()
    state = csi
    for stage in spec.stages:
        state = _apply(stage, state)
    return state
