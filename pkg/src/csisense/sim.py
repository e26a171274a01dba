"""Synthetic CSI from moving point scatterers.

Each scatterer i contributes h_i(f) * exp(-j 4 pi k f v_i dt / c) at sample k,
so a scene with L scatterers observed for M samples is h = D a + n with D the
M x L matrix of velocity steering vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .core import CsiTensor
from .errors import ValidationError

SPEED_OF_LIGHT = 299_792_458.0


def phase_increment(v, f_c, dt):
    """Per-sample phase rotation (rad) of a path whose length changes at speed ``v``."""
    return -4.0 * np.pi * f_c * v * dt / SPEED_OF_LIGHT


def steering_vector(v, f_c, dt, m):
    """Velocity steering vector d(v) = [1, e^{j phi}, ..., e^{j (m-1) phi}]."""
    if m < 1:
        raise ValidationError("steering vector length must be >= 1", "m")
    return np.exp(1j * np.arange(m) * phase_increment(v, f_c, dt))


@dataclass
class Scatterer:
    velocity: float
    initial_csi: np.ndarray
    amplitude_decay: float = 1.0

    def __post_init__(self):
        self.initial_csi = np.atleast_1d(np.asarray(self.initial_csi, dtype=np.complex128))
        if not np.isfinite(self.velocity) or abs(self.velocity) >= SPEED_OF_LIGHT:
            raise ValidationError("scatterer velocity must be finite and below c", "velocity")
        if not np.all(np.isfinite(self.initial_csi)) or not np.any(self.initial_csi != 0):
            raise ValidationError("initial_csi must be finite and not all zero", "initial_csi")
        if not np.isfinite(self.amplitude_decay) or self.amplitude_decay <= 0:
            raise ValidationError("amplitude_decay must be positive", "amplitude_decay")


@dataclass
class ScattererScene:
    scatterers: list
    carrier_freqs: np.ndarray
    sample_interval: float
    num_samples: int
    noise_std: float = 0.0
    cpe_offsets: np.ndarray | None = None
    label: int = 0
    seed: int = 0
    num_rx: int = 1
    rx_phase_offsets: np.ndarray | None = None

    def __post_init__(self):
        self.carrier_freqs = np.atleast_1d(np.asarray(self.carrier_freqs, dtype=np.float64))
        if self.cpe_offsets is not None:
            self.cpe_offsets = np.asarray(self.cpe_offsets, dtype=np.float64)
        if self.rx_phase_offsets is not None:
            self.rx_phase_offsets = np.asarray(self.rx_phase_offsets, dtype=np.float64)

    def validate(self):
        S = self.carrier_freqs.shape[0]
        if not self.scatterers:
            raise ValidationError("scene needs at least one scatterer", "scatterers")
        if S < 1 or np.any(self.carrier_freqs <= 0) or np.any(np.diff(self.carrier_freqs) <= 0):
            raise ValidationError("carrier_freqs must be positive and strictly increasing", "carrier_freqs")
        if not self.sample_interval > 0:
            raise ValidationError("sample_interval must be > 0", "sample_interval")
        if int(self.num_samples) < 1:
            raise ValidationError("num_samples must be >= 1", "num_samples")
        if not self.noise_std >= 0:
            raise ValidationError("noise_std must be >= 0", "noise_std")
        if self.cpe_offsets is not None and self.cpe_offsets.shape != (self.num_samples,):
            raise ValidationError("cpe_offsets length must equal num_samples", "cpe_offsets")
        if self.num_rx < 1:
            raise ValidationError("num_rx must be >= 1", "num_rx")
        if self.rx_phase_offsets is not None and self.rx_phase_offsets.shape != (self.num_rx,):
            raise ValidationError("rx_phase_offsets length must equal num_rx", "rx_phase_offsets")
        for i, sc in enumerate(self.scatterers):
            n = sc.initial_csi.shape[0]
            if n not in (1, S) and n != S * self.num_rx:
                raise ValidationError(
                    f"scatterer {i}: initial_csi has {n} entries, expected 1, S or S*num_rx", "scatterers"
                )
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer", "seed")


def _initial(sc, S, M):
    h0 = sc.initial_csi
    if h0.shape[0] == 1:
        return np.broadcast_to(h0, (S, M))
    if h0.shape[0] == S:
        return np.broadcast_to(h0[:, None], (S, M))
    return h0.reshape(S, M)


def generate(scene: ScattererScene) -> CsiTensor:
    """Render a scene into a (T, S, num_rx, 1) tensor, deterministic given ``scene.seed``."""
    scene.validate()
    T = int(scene.num_samples)
    S = scene.carrier_freqs.shape[0]
    M = scene.num_rx
    k = np.arange(T)[:, None, None]
    f = scene.carrier_freqs[None, :, None]
    h = np.zeros((T, S, M), dtype=np.complex128)
    for sc in scene.scatterers:
        rot = np.exp(1j * k * phase_increment(sc.velocity, f, scene.sample_interval))
        if sc.amplitude_decay != 1.0:
            rot = rot * sc.amplitude_decay ** k
        h += _initial(sc, S, M)[None] * rot
    if scene.noise_std > 0:
        rng = np.random.default_rng(scene.seed)
        h += scene.noise_std * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))
    if scene.rx_phase_offsets is not None:
        h *= np.exp(1j * scene.rx_phase_offsets)[None, None, :]
    if scene.cpe_offsets is not None:
        h *= np.exp(1j * scene.cpe_offsets)[:, None, None]
    meta = {
        "label": int(scene.label),
        "seed": int(scene.seed),
        "velocities": [float(sc.velocity) for sc in scene.scatterers],
    }
    return CsiTensor(h[..., None], scene.sample_interval, scene.carrier_freqs, meta)


def subcarrier_grid(center=5.8e9, spacing=312.5e3, count=8):
    """Evenly spaced OFDM subcarrier frequencies around ``center``."""
    offs = (np.arange(count) - (count - 1) / 2) * spacing
    return center + offs


def make_activity_dataset(classes, per_class, seed, jitter=0.1):
    """Draw ``per_class`` perturbed renderings of every template scene.

    Each sample jitters every scatterer velocity by a uniform factor in
    [1 - jitter, 1 + jitter], rotates each scatterer's initial CSI by a random
    phase and draws fresh noise. Sample ``i`` uses its own RNG stream spawned
    from ``seed`` so that the output does not depend on the generation order.
    """
    if len(classes) < 2:
        raise ValidationError("need at least two class templates", "classes")
    labels = [int(c.label) for c in classes]
    if len(set(labels)) != len(labels):
        raise ValidationError(f"duplicate class ids in {labels}", "classes")
    if per_class < 1:
        raise ValidationError("per_class must be >= 1", "per_class")
    if not 0 <= jitter <= 0.1:
        raise ValidationError("velocity jitter must lie in [0, 0.1]", "jitter")
    out = []
    streams = np.random.SeedSequence(seed).spawn(len(classes) * per_class)
    idx = 0
    for template in classes:
        for _ in range(per_class):
            rng = np.random.default_rng(streams[idx])
            idx += 1
            scatterers = []
            for sc in template.scatterers:
                factor = 1.0 + rng.uniform(-jitter, jitter)
                rot = np.exp(1j * rng.uniform(-np.pi, np.pi))
                scatterers.append(replace(sc, velocity=sc.velocity * factor, initial_csi=sc.initial_csi * rot))
            scene = replace(template, scatterers=scatterers, seed=int(rng.integers(0, 2**63 - 1)))
            out.append((generate(scene), int(template.label)))
    return out


# -- JSON scene templates ---------------------------------------------------------


def _complex_list(z):
    return [[float(v.real), float(v.imag)] for v in np.atleast_1d(z)]


def scene_to_dict(scene: ScattererScene) -> dict:
    return {
        "scatterers": [
            {"velocity": sc.velocity, "initial_csi": _complex_list(sc.initial_csi), "amplitude_decay": sc.amplitude_decay}
            for sc in scene.scatterers
        ],
        "carrier_freqs": scene.carrier_freqs.tolist(),
        "sample_interval": scene.sample_interval,
        "num_samples": int(scene.num_samples),
        "noise_std": scene.noise_std,
        "cpe_offsets": None if scene.cpe_offsets is None else scene.cpe_offsets.tolist(),
        "label": int(scene.label),
        "seed": int(scene.seed),
        "num_rx": int(scene.num_rx),
        "rx_phase_offsets": None if scene.rx_phase_offsets is None else scene.rx_phase_offsets.tolist(),
    }


def _parse_complex(v):
    if isinstance(v, (int, float)):
        return np.array([complex(v)])
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr[None]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("initial_csi must be a number or a list of [re, im] pairs", "initial_csi")
    return arr[:, 0] + 1j * arr[:, 1]


def scene_from_dict(d: dict) -> ScattererScene:
    try:
        scatterers = [
            Scatterer(float(s["velocity"]), _parse_complex(s["initial_csi"]), float(s.get("amplitude_decay", 1.0)))
            for s in d["scatterers"]
        ]
        if "carrier_freqs" in d:
            freqs = d["carrier_freqs"]
        else:
            freqs = subcarrier_grid(d.get("center_freq", 5.8e9), d.get("subcarrier_spacing", 312.5e3), d["num_subcarriers"])
        return ScattererScene(
            scatterers=scatterers,
            carrier_freqs=freqs,
            sample_interval=float(d["sample_interval"]),
            num_samples=int(d["num_samples"]),
            noise_std=float(d.get("noise_std", 0.0)),
            cpe_offsets=d.get("cpe_offsets"),
            label=int(d.get("label", 0)),
            seed=int(d.get("seed", 0)),
            num_rx=int(d.get("num_rx", 1)),
            rx_phase_offsets=d.get("rx_phase_offsets"),
        )
    except KeyError as exc:
        raise ValidationError(f"scene is missing field {exc.args[0]!r}", exc.args[0]) from exc


def load_scenes(path):
    """Read one scene or a list of scenes from a JSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "classes" in doc:
        doc = doc["classes"]
    if isinstance(doc, dict):
        doc = [doc]
    return [scene_from_dict(d) for d in doc]


def activity_templates(
    num_classes=6,
    v_min=0.2,
    v_max=1.2,
    num_subcarriers=8,
    num_samples=64,
    sample_interval=4e-3,
    noise_std=0.05,
    seed=0,
):
    """Desk-scale HAR stand-in: one static path plus one mover whose speed sets the class.

    Each class c has a moving reflector at speed linearly spaced in [v_min, v_max]
    and a weaker counter-moving reflector at -v/2. Per-subcarrier initial CSI
    comes from random path delays, fixed by ``seed``.
    """
    rng = np.random.default_rng(seed)
    freqs = subcarrier_grid(count=num_subcarriers)
    delays = rng.uniform(10e-9, 80e-9, size=3)
    gains = [1.0, 0.6, 0.3]

    def path(i):
        return gains[i] * np.exp(-2j * np.pi * freqs * delays[i])

    speeds = np.linspace(v_min, v_max, num_classes)
    return [
        ScattererScene(
            scatterers=[Scatterer(0.0, path(0)), Scatterer(float(v), path(1)), Scatterer(float(-v / 2), path(2))],
            carrier_freqs=freqs,
            sample_interval=sample_interval,
            num_samples=num_samples,
            noise_std=noise_std,
            label=c,
        )
        for c, v in enumerate(speeds)
    ]


def occupancy_templates(num_classes=3, num_subcarriers=8, num_samples=64, sample_interval=4e-3, noise_std=0.05, seed=1):
    """Transfer target task: the class is the number of moving reflectors (1..num_classes)."""
    rng = np.random.default_rng(seed)
    freqs = subcarrier_grid(count=num_subcarriers)
    static = np.exp(-2j * np.pi * freqs * rng.uniform(10e-9, 80e-9))
    movers = [0.5 * np.exp(-2j * np.pi * freqs * d) for d in rng.uniform(10e-9, 80e-9, size=num_classes)]
    speeds = [0.35, 0.8, 1.15, 0.6, 1.0][:num_classes]
    templates = []
    for c in range(num_classes):
        scs = [Scatterer(0.0, static)] + [Scatterer(speeds[i], movers[i]) for i in range(c + 1)]
        templates.append(
            ScattererScene(scs, freqs, sample_interval, num_samples, noise_std=noise_std, label=c)
        )
    return templates
