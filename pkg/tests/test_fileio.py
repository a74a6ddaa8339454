import base64
import wave

import numpy as np
import pytest

from conftest import SR, buffer
from diffdsp.filters import ImpulseResponse, NoiseParams
from diffdsp.fileio import (
    FormatError,
    decode_floats,
    encode_floats,
    load_params,
    params_from_dict,
    params_to_dict,
    read_wav,
    save_params,
    write_csv,
    write_wav,
)
from diffdsp.fitting import SynthParams
from diffdsp.synth import HarmonicParams


def write_raw_wav(path, frames, channels=1, width=2, rate=SR):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(frames)


def make_params(rng, frames=6, ir=None):
    harmonic = HarmonicParams(rng.uniform(100, 500, frames), rng.normal(size=frames), rng.normal(size=(frames, 4)))
    return SynthParams(harmonic, NoiseParams(rng.normal(size=(frames, 3))), ir, SR, noise_seed=7)


class TestWav:
    def test_round_trip_within_quantization(self, tmp_path, rng):
        x = rng.uniform(-1, 1, 1000)
        write_wav(tmp_path / "a.wav", buffer(x))
        back = read_wav(tmp_path / "a.wav", sample_rate=SR)
        assert back.sample_rate == SR
        assert np.max(np.abs(back.samples - x)) <= 0.5 / 32767 + 1e-12

    def test_clamps(self, tmp_path):
        write_wav(tmp_path / "a.wav", buffer(np.array([2.0, -2.0, 0.5])))
        back = read_wav(tmp_path / "a.wav").samples
        assert back[0] == 1.0 and back[1] == pytest.approx(-32768 / 32767)

    def test_stereo_rejected(self, tmp_path):
        write_raw_wav(tmp_path / "s.wav", np.zeros(20, "<i2").tobytes(), channels=2)
        with pytest.raises(FormatError, match="mono"):
            read_wav(tmp_path / "s.wav")

    def test_8bit_rejected(self, tmp_path):
        write_raw_wav(tmp_path / "b.wav", bytes(20), width=1)
        with pytest.raises(FormatError, match="16-bit"):
            read_wav(tmp_path / "b.wav")

    def test_rate_mismatch(self, tmp_path):
        write_raw_wav(tmp_path / "r.wav", np.zeros(20, "<i2").tobytes(), rate=44100)
        with pytest.raises(FormatError, match="44100"):
            read_wav(tmp_path / "r.wav", sample_rate=SR)

    def test_not_a_wav(self, tmp_path):
        (tmp_path / "x.wav").write_bytes(b"hello world")
        with pytest.raises(FormatError):
            read_wav(tmp_path / "x.wav")

    def test_missing(self, tmp_path):
        with pytest.raises(OSError):
            read_wav(tmp_path / "nope.wav")


class TestParams:
    def test_round_trip_inline_ir(self, tmp_path, rng):
        params = make_params(rng, ir=ImpulseResponse(rng.normal(size=50)))
        save_params(tmp_path / "p.json", params)
        back = load_params(tmp_path / "p.json")
        assert np.array_equal(back.harmonic.f0, params.harmonic.f0)
        assert np.array_equal(back.harmonic.harmonic_raw, params.harmonic.harmonic_raw)
        assert np.array_equal(back.noise.magnitudes_raw, params.noise.magnitudes_raw)
        assert np.array_equal(back.reverb_ir.taps, params.reverb_ir.taps)
        assert back.noise_seed == 7 and back.n_samples == 6 * 64

    def test_ir_by_relative_path(self, tmp_path, rng):
        taps = rng.normal(size=40)
        taps.astype("<f8").tofile(tmp_path / "ir.f64")
        save_params(tmp_path / "p.json", make_params(rng, ir=ImpulseResponse(taps)), ir_path="ir.f64")
        assert np.array_equal(load_params(tmp_path / "p.json").reverb_ir.taps, taps)

    def test_ir_from_wav(self, tmp_path, rng):
        write_wav(tmp_path / "ir.wav", buffer(np.r_[1.0, np.zeros(9)]))
        doc = params_to_dict(make_params(rng))
        doc["reverb_ir_path"] = "ir.wav"
        ir = params_from_dict(doc, base_dir=tmp_path).reverb_ir
        assert ir.taps[0] == 1.0 and len(ir) == 10

    def test_base64_is_little_endian_f8(self):
        values = np.array([1.5, -2.25])
        assert np.frombuffer(base64.b64decode(encode_floats(values)), "<f8").tolist() == [1.5, -2.25]
        assert np.array_equal(decode_floats(encode_floats(values)), values)

    @pytest.mark.parametrize(
        "mutate, where",
        [
            (lambda d: d.pop("f0"), "<root>"),
            (lambda d: d.__setitem__("version", 2), "version"),
            (lambda d: d["harmonic_raw"][2].__setitem__(1, "x"), "harmonic_raw/2/1"),
            (lambda d: d["f0"].__setitem__(0, -5.0), "f0/0"),
            (lambda d: d.__setitem__("sample_rate", 1.5), "sample_rate"),
        ],
    )
    def test_schema_errors_name_field(self, rng, mutate, where):
        doc = params_to_dict(make_params(rng))
        mutate(doc)
        with pytest.raises(FormatError, match=where):
            params_from_dict(doc)

    def test_both_ir_forms_rejected(self, rng):
        doc = params_to_dict(make_params(rng, ir=ImpulseResponse(np.ones(3))))
        doc["reverb_ir_path"] = "x.f64"
        with pytest.raises(FormatError):
            params_from_dict(doc)

    def test_inconsistent_lengths(self, rng):
        doc = params_to_dict(make_params(rng))
        doc["n_samples"] = 1000
        with pytest.raises(FormatError, match="n_samples"):
            params_from_dict(doc)

    def test_invalid_json(self, tmp_path):
        (tmp_path / "p.json").write_text("{not json")
        with pytest.raises(FormatError):
            load_params(tmp_path / "p.json")


def test_csv(tmp_path):
    write_csv(tmp_path / "h.csv", ["step", "loss"], [(0, 1.5), (1, 0.25)])
    assert (tmp_path / "h.csv").read_text().splitlines() == ["step,loss", "0,1.5", "1,0.25"]
