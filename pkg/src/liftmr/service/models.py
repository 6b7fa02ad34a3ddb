"""Request/response models for the lifting service.

The CLI builds these same models and either calls the handlers in-process or
posts them to a remote service instance.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class SynthSettings(BaseModel):
    bmc_max_len: int = 4
    bmc_int_range: Tuple[int, int] = (-2, 2)
    bmc_alphabet: int = 3
    recursion_bound: Optional[int] = None
    max_emits: Optional[int] = None
    timeout_s: Optional[float] = 600.0
    workers: int = 1
    seed: int = 0
    max_iterations: Optional[int] = None


class LiftRequest(BaseModel):
    source: str
    filename: str = "<input>"
    settings: SynthSettings = Field(default_factory=SynthSettings)
    emit_spec: bool = False


class FragmentSummary(BaseModel):
    fragment: str
    iterations: int
    candidates_examined: int
    wall_ms: int
    doc: str
    sketch: str
    spec_text: Optional[str] = None


class RejectionInfo(BaseModel):
    fragment: str
    reason: str
    detail: str = ""


class LiftResponse(BaseModel):
    ok: bool
    summaries: List[FragmentSummary] = []
    rejections: List[RejectionInfo] = []
    diagnostics: List[str] = []
    error: Optional[str] = None


class RunRequest(BaseModel):
    doc: str
    data_path: Optional[str] = None  # server-local dataset file
    data: Optional[List[str]] = None  # inline lines, alternative to the path
    bindings: Dict[str, str] = {}
    workers: int = 1
    partition_size: int = 65536
    combiner: bool = True


class RunResponse(BaseModel):
    ok: bool
    lines: List[str] = []
    error: Optional[str] = None


class CheckRequest(BaseModel):
    source: str
    doc: str
    trials: int = 1000
    seed: int = 0
    max_len: int = 1000
    workers: int = 1


class MismatchInfo(BaseModel):
    trial: int
    data: List[str]
    bindings: Dict[str, str] = {}
    detail: str


class CheckResponse(BaseModel):
    ok: bool
    verdict: str  # 'pass' | 'mismatch' | 'vacuous'
    trials_run: int = 0
    skipped_traps: int = 0
    diagnostics: List[str] = []
    mismatch: Optional[MismatchInfo] = None
    error: Optional[str] = None


class BenchRowSpec(BaseModel):
    name: str
    size: int
    seed: int = 0


class BenchRequest(BaseModel):
    specs: List[BenchRowSpec]
    workers: List[int] = [1, 4]
    repeats: int = 3
    settings: SynthSettings = Field(default_factory=SynthSettings)


class BenchRow(BaseModel):
    name: str
    size: int
    lift_ms: Optional[int] = None
    iterations: Optional[int] = None
    candidates_examined: Optional[int] = None
    seq_ms: Optional[float] = None
    job_ms: Dict[str, float] = {}
    equivalence: Optional[str] = None  # 'pass' | 'mismatch'
    error: Optional[str] = None


class BenchResponse(BaseModel):
    rows: List[BenchRow]


class HealthResponse(BaseModel):
    status: str
    version: str
