import json

import numpy as np
import pytest

from csisense import sim
from csisense.core import CsiTensor
from csisense.errors import ValidationError
from csisense.preprocess import PipelineSpec, Stage, filters, run_pipeline


def scene_csi(T=64, S=8, num_rx=2, noise=0.05):
    rng = np.random.default_rng(0)
    n = S * num_rx
    sc = sim.Scatterer(0.5, rng.normal(size=n) + 1j * rng.normal(size=n) + 3.0)
    return sim.generate(sim.ScattererScene([sc], sim.subcarrier_grid(count=S), 1e-3, T, noise_std=noise, num_rx=num_rx, seed=1))


FULL = {
    "stages": [
        {"kind": "hampel", "params": {"w": 5, "n_sigma": 3}},
        {"kind": "median", "params": {"w": 3}},
        {"kind": "moving_average", "params": {"w": 3}},
        {"kind": "weighted_ma", "params": {"weights": [0.25, 0.5, 0.25]}},
        {"kind": "ewma", "params": {"alpha": 0.7}},
        {"kind": "lowpass", "params": {"cutoff_hz": 200}},
        {"kind": "dwt_denoise", "params": {"wavelet": "haar", "levels": 2}},
        {"kind": "lrf", "params": {"r": 3}},
        {"kind": "cpe", "params": {}},
        {"kind": "lof", "params": {"k": 5}},
        {"kind": "phase_diff", "params": {"axis": "subcarrier"}},
        {"kind": "pca", "params": {"k": 2}},
    ]
}


def test_json_roundtrip(tmp_path):
    spec = PipelineSpec.from_dict(FULL)
    assert PipelineSpec.from_json(spec.to_json()) == spec
    path = tmp_path / "p.json"
    path.write_text(json.dumps(FULL))
    assert PipelineSpec.load(path) == spec


def test_referentially_transparent():
    spec = PipelineSpec.from_dict(FULL)
    csi = scene_csi()
    a, b = run_pipeline(spec, csi), run_pipeline(spec, csi)
    assert a.shape == (64, 2) and np.array_equal(a, b)


def test_trace_stage_matches_direct_filter():
    csi = scene_csi()
    out = run_pipeline(PipelineSpec(({"kind": "median", "params": {"w": 5}},)), csi)
    trace = np.abs(csi.data[:, 3, 1, 0])
    assert np.allclose(np.abs(out.data[:, 3, 1, 0]), filters.median_filter(trace, 5).values, atol=1e-12)
    assert np.allclose(np.angle(out.data), np.angle(csi.data), atol=1e-12)
    assert out.shape == csi.shape


def test_stage_metadata():
    csi = scene_csi()
    spiky = csi.data.copy()
    spiky[10, 2, 0, 0] *= 50
    csi = csi.replace(data=spiky)
    out = run_pipeline(PipelineSpec(({"kind": "hampel", "params": {}}, {"kind": "csi_ratio", "params": {}})), csi)
    assert out.meta["hampel_replaced"] >= 1 and out.meta["ratio_flagged"] == 0
    assert out.shape == (64, 8, 1, 1)
    dropped = run_pipeline(PipelineSpec(({"kind": "lof", "params": {"k": 5, "drop": 1}},)), csi)
    assert 10 in dropped.meta["lof_outliers"]
    assert dropped.shape[0] == 64 - len(dropped.meta["lof_outliers"])


@pytest.mark.parametrize(
    "stage, field",
    [
        ({"kind": "blur", "params": {}}, "kind"),
        ({"kind": "moving_average", "params": {}}, "w"),
        ({"kind": "moving_average", "params": {"w": 4}}, "w"),
        ({"kind": "ewma", "params": {"alpha": 0}}, "alpha"),
        ({"kind": "hampel", "params": {"w": 5, "sigma": 3}}, "sigma"),
        ({"kind": "dwt_denoise", "params": {"wavelet": "sym8"}}, "wavelet"),
        ({"kind": "phase_diff", "params": {"axis": "rx"}}, "axis"),
        ({"kind": "lowpass", "params": {"cutoff_hz": "10"}}, "cutoff_hz"),
    ],
)
def test_stage_validation_names_param(stage, field):
    with pytest.raises(ValidationError) as exc:
        PipelineSpec((stage,))
    assert exc.value.field == field


def test_array_stage_ordering():
    with pytest.raises(ValidationError):
        PipelineSpec(({"kind": "phase_diff", "params": {}}, {"kind": "median", "params": {"w": 3}}))
    with pytest.raises(ValidationError):
        PipelineSpec.from_dict({"stages": [{"params": {}}]})
    with pytest.raises(ValidationError):
        PipelineSpec.from_dict({"steps": []})


def test_empty_pipeline_is_identity():
    csi = scene_csi()
    assert run_pipeline(PipelineSpec(()), csi) is csi


def test_input_left_untouched():
    csi = scene_csi()
    before = csi.data.copy()
    run_pipeline(PipelineSpec.from_dict(FULL), csi)
    assert np.array_equal(csi.data, before)
    assert isinstance(run_pipeline(PipelineSpec((Stage("cpe", {}),)), csi), CsiTensor)
