# apps/pipeline/report.py
"""
RunReport: the JSON record a pipeline run leaves behind.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder

from apps.core.exceptions import ArgumentError, FormatError

NMI_FIELDS = ('teacher_train_nmi', 'teacher_test_nmi', 'student_train_nmi', 'student_test_nmi')


@dataclass(frozen=True)
class Timing:
    """Order statistics of repeated wall-clock measurements, in seconds"""

    median: float
    min: float
    max: float
    samples: List[float] = field(default_factory=list)
    threads: int = 1

    def __post_init__(self):
        if min(self.median, self.min, self.max) < 0:
            raise ArgumentError("timings cannot be negative")
        if not self.min <= self.median <= self.max:
            raise ArgumentError("timings must satisfy min <= median <= max")
        if self.threads < 1:
            raise ArgumentError(f"threads must be at least 1, got {self.threads}")

    @classmethod
    def from_samples(cls, samples, threads=1):
        values = [float(value) for value in samples]
        if not values:
            raise ArgumentError("at least one timing sample is required")
        return cls(median=float(np.median(values)), min=min(values), max=max(values), samples=values, threads=threads)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True)
class RunReport:
    mode: str
    seed: int
    threads: int
    n_train: int
    n_test: int
    teacher_timing: Timing
    student_timing: Timing
    config: Dict[str, Any]
    started_at: str
    finished_at: str
    teacher_train_nmi: Optional[float] = None
    teacher_test_nmi: Optional[float] = None
    student_train_nmi: Optional[float] = None
    student_test_nmi: Optional[float] = None
    embedding_alignment_error: Optional[float] = None
    student_epoch_losses: List[float] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def teacher_predict_seconds(self):
        return self.teacher_timing.median

    @property
    def student_predict_seconds(self):
        return self.student_timing.median

    @property
    def speedup_factor(self):
        """Teacher median over student median; None when the student time rounds to zero"""
        if self.student_predict_seconds <= 0:
            return None
        return self.teacher_predict_seconds / self.student_predict_seconds

    def nmi_fields(self):
        return {name: getattr(self, name) for name in NMI_FIELDS}

    def to_dict(self):
        data = {
            'mode': self.mode,
            'seed': self.seed,
            'threads': self.threads,
            'n_train': self.n_train,
            'n_test': self.n_test,
            'teacher_predict_seconds': self.teacher_predict_seconds,
            'student_predict_seconds': self.student_predict_seconds,
            'speedup_factor': self.speedup_factor,
            'teacher_timing': self.teacher_timing.to_dict(),
            'student_timing': self.student_timing.to_dict(),
            'embedding_alignment_error': self.embedding_alignment_error,
            'student_epoch_losses': list(self.student_epoch_losses),
            'config': self.config,
            'started_at': self.started_at,
            'finished_at': self.finished_at,
            'artifacts': dict(self.artifacts),
        }
        # Missing labels leave the NMI fields out entirely
        data.update({name: value for name, value in self.nmi_fields().items() if value is not None})
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                mode=data['mode'],
                seed=data['seed'],
                threads=data['threads'],
                n_train=data['n_train'],
                n_test=data['n_test'],
                teacher_timing=Timing.from_dict(data['teacher_timing']),
                student_timing=Timing.from_dict(data['student_timing']),
                config=data['config'],
                started_at=data['started_at'],
                finished_at=data['finished_at'],
                embedding_alignment_error=data.get('embedding_alignment_error'),
                student_epoch_losses=list(data.get('student_epoch_losses', [])),
                artifacts=dict(data.get('artifacts', {})),
                **{name: data.get(name) for name in NMI_FIELDS},
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"Malformed run report: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict(), cls=DjangoJSONEncoder, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise FormatError(f"Run report is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def write(self, path):
        Path(path).write_text(self.to_json() + '\n', encoding='utf-8')

    @classmethod
    def read(cls, path):
        return cls.from_json(Path(path).read_text(encoding='utf-8'))


@dataclass(frozen=True)
class RunSummary:
    """Mean, standard deviation and maximum of each NMI field over repeated runs"""

    n_runs: int
    seeds: List[int]
    nmi: Dict[str, Dict[str, float]]
    mean_speedup: Optional[float]

    def to_dict(self):
        return dataclasses.asdict(self)


def summarize_runs(reports):
    if not reports:
        raise ArgumentError("summarize_runs needs at least one report")
    nmi = {}
    for name in NMI_FIELDS:
        values = [getattr(report, name) for report in reports if getattr(report, name) is not None]
        if values:
            nmi[name] = {
                'mean': float(np.mean(values)),
                'std': float(np.std(values)),
                'max': float(np.max(values)),
            }
    speedups = [report.speedup_factor for report in reports if report.speedup_factor is not None]
    mean_speedup = float(np.mean(speedups)) if speedups else None
    if mean_speedup is not None and not math.isfinite(mean_speedup):
        mean_speedup = None
    return RunSummary(
        n_runs=len(reports),
        seeds=[report.seed for report in reports],
        nmi=nmi,
        mean_speedup=mean_speedup,
    )
