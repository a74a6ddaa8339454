"""WAV, parameter-file and CSV input/output."""

from __future__ import annotations

import base64
import csv
import json
import wave
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .signal import AudioBuffer

PCM_SCALE = 32767.0
PARAMS_VERSION = 1


class FormatError(ValueError):
    """Input file is readable but violates a format or schema constraint."""


# WAV ------------------------------------------------------------------------


def read_wav(path: str | Path, sample_rate: int | None = None) -> AudioBuffer:
    """Read 16-bit PCM mono WAV; samples are scaled by 1/32767.

    Raises FormatError for stereo, non-16-bit data, or a rate different from
    ``sample_rate`` (no resampling is done). Missing files raise OSError.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a PCM WAV file ({exc})") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV file") from exc
    if channels != 1:
        raise FormatError(f"{path}: expected mono audio, got {channels} channels")
    if width != 2:
        raise FormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if sample_rate is not None and rate != sample_rate:
        raise FormatError(f"{path}: sample rate {rate} Hz does not match configured {sample_rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    if samples.size == 0:
        raise FormatError(f"{path}: no audio frames")
    return AudioBuffer(samples, rate)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    scaled = np.clip(np.round(np.asarray(samples) * PCM_SCALE), -32768, 32767)
    return scaled.astype("<i2")


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate)
        wf.writeframes(to_pcm16(audio.samples).tobytes())


# parameter files ------------------------------------------------------------

_number = {"type": "number"}
_vector = {"type": "array", "items": _number}

PARAMS_SCHEMA = {
    "type": "object",
    "required": ["version", "sample_rate", "n_samples", "f0", "amplitude_raw", "harmonic_raw", "noise_raw"],
    "properties": {
        "version": {"const": PARAMS_VERSION},
        "sample_rate": {"type": "integer", "minimum": 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "hop": {"type": "integer", "minimum": 1},
        "noise_seed": {"type": "integer"},
        "f0": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "amplitude_raw": _vector,
        "harmonic_raw": {"type": "array", "items": {"type": "array", "items": _number, "minItems": 1}},
        "noise_raw": {"type": "array", "items": {"type": "array", "items": _number, "minItems": 1}},
        "reverb_ir_path": {"type": "string"},
        "reverb_ir_b64": {"type": "string"},
    },
    "not": {"required": ["reverb_ir_path", "reverb_ir_b64"]},
}


def encode_floats(values: np.ndarray) -> str:
    return base64.b64encode(np.asarray(values, dtype="<f8").tobytes()).decode("ascii")


def decode_floats(text: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    if len(raw) % 8:
        raise FormatError("reverb_ir_b64: byte length is not a multiple of 8")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def _field_path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "/".join(parts) if parts else "<root>"


def params_to_dict(params, ir_path: str | None = None) -> dict:
    doc = {
        "version": PARAMS_VERSION,
        "sample_rate": params.sample_rate,
        "n_samples": params.n_samples,
        "hop": params.harmonic.hop,
        "noise_seed": params.noise_seed,
        "f0": params.harmonic.f0.tolist(),
        "amplitude_raw": params.harmonic.amplitude_raw.tolist(),
        "harmonic_raw": params.harmonic.harmonic_raw.tolist(),
        "noise_raw": params.noise.magnitudes_raw.tolist(),
    }
    if params.reverb_ir is not None:
        if ir_path is not None:
            doc["reverb_ir_path"] = ir_path
        else:
            doc["reverb_ir_b64"] = encode_floats(params.reverb_ir.taps)
    return doc


def params_from_dict(doc: dict, base_dir: Path | None = None):
    from .fitting import SynthParams
    from .filters import ImpulseResponse, NoiseParams
    from .synth import HarmonicParams

    try:
        jsonschema.validate(doc, PARAMS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise FormatError(f"parameter file field {_field_path(exc)}: {exc.message}") from exc

    hop = doc.get("hop", 64)
    ir = None
    if "reverb_ir_b64" in doc:
        ir = ImpulseResponse(decode_floats(doc["reverb_ir_b64"]))
    elif "reverb_ir_path" in doc:
        ir_path = Path(doc["reverb_ir_path"])
        if base_dir is not None and not ir_path.is_absolute():
            ir_path = base_dir / ir_path
        if ir_path.suffix.lower() == ".wav":
            ir = ImpulseResponse(read_wav(ir_path).samples)
        else:
            ir = ImpulseResponse(np.fromfile(ir_path, dtype="<f8"))
    try:
        harmonic = HarmonicParams(
            np.array(doc["f0"], dtype=np.float64),
            np.array(doc["amplitude_raw"], dtype=np.float64),
            np.array(doc["harmonic_raw"], dtype=np.float64),
            hop=hop,
        )
        noise = NoiseParams(np.array(doc["noise_raw"], dtype=np.float64), hop=hop)
        return SynthParams(
            harmonic,
            noise,
            reverb_ir=ir,
            sample_rate=doc["sample_rate"],
            n_samples=doc["n_samples"],
            noise_seed=doc.get("noise_seed", 0),
        )
    except ValueError as exc:
        raise FormatError(f"parameter file: {exc}") from exc


def save_params(path: str | Path, params, ir_path: str | None = None) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, ir_path)))


def load_params(path: str | Path):
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return params_from_dict(doc, base_dir=path.parent)


# CSV ------------------------------------------------------------------------


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
