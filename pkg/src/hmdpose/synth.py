"""Synthetic keypoint cohorts with known phenotype ground truth.

Each patient carries one or more movement archetypes on target landmarks.
The archetype signal is added along the landmark's radial direction, so the
displacement channel receives it unchanged; everything else is Gaussian
jitter around a fixed skeleton.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import PoseSeries, write_pose_csv
from .taxonomy import LANDMARKS, PHENOTYPES, Condition, Landmark, Phenotype

# COCO skeleton of a seated subject in a 640x480 frame (pixels)
TEMPLATE = np.array([
    [320, 100], [332, 90], [308, 90], [348, 96], [292, 96],
    [370, 160], [270, 160], [395, 230], [245, 230], [405, 295], [235, 295],
    [350, 300], [290, 300], [355, 390], [285, 390], [358, 460], [282, 460],
], dtype=float)


class ArchetypeKind(str, Enum):
    OSCILLATORY = "oscillatory"
    SPIKE = "spike"
    DRIFT_REVERSAL = "drift_reversal"
    QUIESCENT = "quiescent"


DEFAULT_PHENOTYPE = {
    ArchetypeKind.OSCILLATORY: Phenotype.TREMOR,
    ArchetypeKind.SPIKE: Phenotype.MYOCLONUS,
    ArchetypeKind.DRIFT_REVERSAL: Phenotype.ATHETOSIS,
}


@dataclass(frozen=True)
class ArchetypeSpec:
    """One movement pattern on a set of landmarks.

    ``freq`` (Hz) drives Oscillatory, ``rate`` (events/s) drives Spike and
    ``period`` (s) drives DriftReversal; ``amp`` is in pixels.
    """

    kind: ArchetypeKind
    amp: float = 10.0
    freq: float = 5.0
    rate: float = 2.0
    period: float = 3.0
    noise_std: float = 1.0
    target_landmarks: tuple = (Landmark.RIGHT_WRIST,)
    phenotype: Phenotype | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ArchetypeKind(self.kind))
        object.__setattr__(self, "target_landmarks", tuple(Landmark(l) for l in self.target_landmarks))
        if self.phenotype is None and self.kind is not ArchetypeKind.QUIESCENT:
            object.__setattr__(self, "phenotype", DEFAULT_PHENOTYPE[self.kind])
        if self.phenotype is not None:
            object.__setattr__(self, "phenotype", Phenotype(self.phenotype))
        if self.kind is not ArchetypeKind.QUIESCENT and not self.amp > 0:
            raise ValueError("archetype amplitude must be positive")

    @property
    def label_bits(self) -> np.ndarray:
        bits = np.zeros(len(PHENOTYPES), dtype=np.int8)
        if self.kind is not ArchetypeKind.QUIESCENT:
            bits[self.phenotype.index] = 1
        return bits

    def validate(self, fs: float) -> None:
        if self.kind is ArchetypeKind.OSCILLATORY and not self.freq < fs / 2:
            raise ValueError(f"oscillation at {self.freq} Hz is above Nyquist for fs={fs}")

    def signal(self, n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
        """Zero-baseline displacement offset for one window of n samples."""
        t = np.arange(n) / fs
        if self.kind is ArchetypeKind.OSCILLATORY:
            return self.amp * np.sin(2 * np.pi * self.freq * t + rng.uniform(0, 2 * np.pi))
        if self.kind is ArchetypeKind.SPIKE:
            return spike_train(n, fs, self.rate, self.amp, rng)
        if self.kind is ArchetypeKind.DRIFT_REVERSAL:
            return self.amp * triangle_wave(t + rng.uniform(0, self.period), self.period)
        return np.zeros(n)


def triangle_wave(t, period: float) -> np.ndarray:
    """Unit triangle in [-1, 1] with reversals every half period."""
    phase = np.mod(np.asarray(t, dtype=float) / period, 1.0)
    return 4.0 * np.abs(phase - 0.5) - 1.0


def spike_train(n: int, fs: float, rate: float, amp: float, rng: np.random.Generator,
                width_s: float = 0.1) -> np.ndarray:
    """Poisson event times convolved with a half-cosine pulse of ``width_s`` seconds."""
    out = np.zeros(n)
    width = max(2, int(round(width_s * fs)))
    pulse = amp * np.sin(np.pi * (np.arange(width) + 0.5) / width)
    n_events = rng.poisson(rate * n / fs)
    for onset in np.sort(rng.integers(0, n, size=n_events)):
        seg = out[onset:onset + width]
        seg += pulse[:seg.size]
    return out


@dataclass
class SubjectPlan:
    subject_id: str
    is_control: bool
    archetypes: list[ArchetypeSpec]

    @property
    def label_bits(self) -> np.ndarray:
        bits = np.zeros(len(PHENOTYPES), dtype=np.int8)
        for a in self.archetypes:
            bits |= a.label_bits
        return bits


@dataclass
class CohortConfig:
    """Cohort layout, background movement model and archetype strengths.

    Every landmark carries fine jitter (``jitter_std`` px, band-limited to
    ``jitter_band`` Hz or white when None) and slow postural sway
    band-limited to ``sway_band`` Hz.  Both levels are scaled per window by
    independent log-uniform factors from ``sway_scale`` and
    ``jitter_scale``.
    The whole skeleton is also shifted by ``posture_shift`` px per window,
    so mean positions do not identify a subject.  Each archetype kind drives
    its own landmark, so co-occurring archetypes do not mask each other.
    """

    n_patients: int = 20
    n_controls: int = 5
    windows_per_subject: int = 60
    window_s: float = 10.0
    fs: float = 30.0
    jitter_std: float = 1.5
    jitter_band: tuple | None = (3.0, 8.0)
    jitter_scale: tuple = (1.0, 4.0)
    sway_std: float = 2.7
    sway_scale: tuple = (1.0, 1.2)
    sway_band: tuple = (0.2, 1.0)
    posture_shift: float = 6.0
    negative_fraction: float = 0.3
    uncertain_fraction: float = 0.0
    seed: int = 42
    tremor_target: str = "right_wrist"
    spike_target: str = "left_elbow"
    drift_target: str = "left_wrist"
    tremor_amp: float = 4.5
    spike_amp: float = 25.0
    drift_amp: float = 10.0
    cooccurrence: bool = True

def default_assignments(cfg: CohortConfig) -> list[SubjectPlan]:
    """Patients cycle through single and paired archetypes; controls are quiescent.

    Per-subject parameters (tone frequency, event rate, drift period,
    amplitude) are drawn from the cohort seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    targets = {ArchetypeKind.OSCILLATORY: (Landmark(cfg.tremor_target),),
               ArchetypeKind.SPIKE: (Landmark(cfg.spike_target),),
               ArchetypeKind.DRIFT_REVERSAL: (Landmark(cfg.drift_target),)}
    singles = [[ArchetypeKind.OSCILLATORY], [ArchetypeKind.SPIKE], [ArchetypeKind.DRIFT_REVERSAL]]
    pairs = [[ArchetypeKind.OSCILLATORY, ArchetypeKind.SPIKE],
             [ArchetypeKind.OSCILLATORY, ArchetypeKind.DRIFT_REVERSAL],
             [ArchetypeKind.SPIKE, ArchetypeKind.DRIFT_REVERSAL]]
    patterns = singles + pairs if cfg.cooccurrence else singles
    plans = []
    for i in range(cfg.n_patients):
        kinds = patterns[i % len(patterns)]
        specs = []
        for kind in kinds:
            scale = rng.uniform(0.8, 1.25)
            if kind is ArchetypeKind.OSCILLATORY:
                specs.append(ArchetypeSpec(kind, amp=cfg.tremor_amp * scale, freq=rng.uniform(4.0, 7.0),
                                           noise_std=cfg.jitter_std, target_landmarks=targets[kind]))
            elif kind is ArchetypeKind.SPIKE:
                specs.append(ArchetypeSpec(kind, amp=cfg.spike_amp * scale, rate=rng.uniform(1.5, 3.0),
                                           noise_std=cfg.jitter_std, target_landmarks=targets[kind]))
            else:
                specs.append(ArchetypeSpec(kind, amp=cfg.drift_amp * scale, period=rng.uniform(2.0, 4.0),
                                           noise_std=cfg.jitter_std, target_landmarks=targets[kind]))
        plans.append(SubjectPlan(f"P{i + 1:03d}", False, specs))
    for i in range(cfg.n_controls):
        plans.append(SubjectPlan(f"C{i + 1:03d}", True, []))
    return plans


def band_noise(rng: np.random.Generator, shape, fs: float, band) -> np.ndarray:
    """Unit-variance Gaussian noise along axis 0, optionally restricted to a frequency band."""
    white = rng.normal(0.0, 1.0, size=shape)
    if band is None:
        return white
    spec = np.fft.rfft(white, axis=0)
    freqs = np.fft.rfftfreq(shape[0], 1.0 / fs)
    spec[(freqs < band[0]) | (freqs > band[1])] = 0.0
    out = np.fft.irfft(spec, n=shape[0], axis=0)
    return out / out.std(axis=0, keepdims=True)


def generate_subject(plan: SubjectPlan, cfg: CohortConfig, rng: np.random.Generator) -> PoseSeries:
    n_win = cfg.windows_per_subject
    per = int(round(cfg.window_s * cfg.fs))
    T = n_win * per
    base = TEMPLATE + rng.normal(0, 5.0, size=TEMPLATE.shape)
    radial = base / np.linalg.norm(base, axis=1, keepdims=True)
    shape = (T, len(LANDMARKS), 2)
    lo, hi = np.log(cfg.sway_scale[0]), np.log(cfg.sway_scale[1])
    level = cfg.sway_std * np.exp(rng.uniform(lo, hi, size=n_win))
    sway = band_noise(rng, shape, cfg.fs, cfg.sway_band) * np.repeat(level, per)[:, None, None]
    shift = np.repeat(rng.normal(0.0, cfg.posture_shift, size=(n_win, 1, 2)), per, axis=0)
    jlo, jhi = np.log(cfg.jitter_scale[0]), np.log(cfg.jitter_scale[1])
    jlevel = cfg.jitter_std * np.exp(rng.uniform(jlo, jhi, size=n_win))
    jitter = band_noise(rng, shape, cfg.fs, cfg.jitter_band) * np.repeat(jlevel, per)[:, None, None]
    coords = base[None] + shift + sway + jitter
    ann = np.zeros((T, len(PHENOTYPES)), dtype=np.int8)
    conds = np.empty(T, dtype=object)
    cycle = [Condition.REST, Condition.POSTURE, Condition.ACTION]

    symptomatic = np.ones(n_win, dtype=bool)
    if plan.archetypes:
        n_neg = int(round(cfg.negative_fraction * n_win))
        n_neg = min(n_neg, n_win - 1)
        symptomatic[rng.choice(n_win, size=n_neg, replace=False)] = False
    else:
        symptomatic[:] = False
    uncertain = np.zeros(n_win, dtype=bool)
    if cfg.uncertain_fraction > 0 and plan.archetypes:
        pool = np.flatnonzero(symptomatic)
        n_unc = min(int(round(cfg.uncertain_fraction * n_win)), pool.size - 1)
        if n_unc > 0:
            uncertain[rng.choice(pool, size=n_unc, replace=False)] = True

    for w in range(n_win):
        sl = slice(w * per, (w + 1) * per)
        conds[sl] = cycle[w % 3].value
        if not symptomatic[w]:
            continue
        for spec in plan.archetypes:
            spec.validate(cfg.fs)
            offset = spec.signal(per, cfg.fs, rng)
            for lm in spec.target_landmarks:
                coords[sl, lm.index, :] += offset[:, None] * radial[lm.index]
            ann[sl, spec.phenotype.index] = 2 if uncertain[w] else 1
    coords = np.maximum(coords, 0.0)
    t = np.arange(T) / cfg.fs
    bounds = [(w * per / cfg.fs, (w + 1) * per / cfg.fs) for w in range(n_win)]
    return PoseSeries(f"{plan.subject_id}_v1", plan.subject_id, plan.is_control, cfg.fs, t,
                      np.arange(T), coords, conds, ann, bounds)


def generate_cohort(cfg: CohortConfig = CohortConfig(), plans: Sequence[SubjectPlan] | None = None
                    ) -> tuple[list[PoseSeries], dict]:
    """Series per subject plus a manifest of the ground-truth assignments."""
    plans = list(plans) if plans is not None else default_assignments(cfg)
    children = np.random.SeedSequence([cfg.seed, 1]).spawn(len(plans))
    series = [generate_subject(p, cfg, np.random.default_rng(c)) for p, c in zip(plans, children)]
    return series, cohort_manifest(cfg, plans)


def cohort_manifest(cfg: CohortConfig, plans: Sequence[SubjectPlan]) -> dict:
    subjects = []
    for p in plans:
        subjects.append({
            "subject_id": p.subject_id,
            "is_control": p.is_control,
            "labels": [ph.value for ph, b in zip(PHENOTYPES, p.label_bits) if b],
            "archetypes": [{"kind": a.kind.value, "phenotype": a.phenotype.value, "amp": a.amp, "freq": a.freq,
                            "rate": a.rate, "period": a.period,
                            "target_landmarks": [l.value for l in a.target_landmarks]}
                           for a in p.archetypes],
        })
    return {"config": asdict(cfg), "subjects": subjects}


def write_cohort(series: Sequence[PoseSeries], manifest: dict, directory, digits: int = 3) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in series:
        p = d / f"{s.video_id}.csv"
        write_pose_csv(s, p, digits=digits)
        paths.append(p)
    (d / "cohort.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
