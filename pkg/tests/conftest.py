import sys
from pathlib import Path

import numpy as np
import pytest

from df_arena.wavio import AudioBuffer, write_wav

TESTS_DIR = Path(__file__).resolve().parent

# Reference per-dataset EER grid (percent) for 15 known detection systems,
# and the matching parameter-count / average-EER / pooled-EER summary rows.
REFERENCE_GRID_CSV = TESTS_DIR / "data" / "reference_eer_grid.csv"

OPEN_SOURCE_SYSTEMS = [
    "XLSR+SLS",
    "TCM",
    "Nes2NetX",
    "Wav2Vec2-AASIST",
    "XLSR-Mamba",
    "Whisper-Mesonet",
    "Wav2Vec2-ECAPA",
    "AASIST",
    "WavLM-ECAPA",
    "RawGatST",
    "Rawnet2",
    "Hubert-ECAPA",
]

# system -> (param_count_millions, average EER %, pooled EER %)
REFERENCE_SUMMARY = {
    "Whispeak": (98.90, 3.05, 3.00),
    "SyntraDetector": (584.00, 5.76, 11.29),
    "ResembleDetect": (2112.00, 10.69, 12.37),
    "XLSR+SLS": (340.00, 13.84, 15.68),
    "TCM": (319.00, 15.77, 16.35),
    "Nes2NetX": (317.90, 16.11, 17.04),
    "Wav2Vec2-AASIST": (317.84, 18.02, 19.47),
    "XLSR-Mamba": (319.00, 14.21, 20.12),
    "Whisper-Mesonet": (7.60, 28.69, 23.76),
    "Wav2Vec2-ECAPA": (324.00, 38.58, 28.81),
    "AASIST": (0.30, 34.49, 33.16),
    "WavLM-ECAPA": (102.00, 28.74, 33.48),
    "RawGatST": (0.44, 34.92, 33.93),
    "Rawnet2": (17.60, 35.75, 35.66),
    "Hubert-ECAPA": (102.00, 33.19, 43.03),
}


@pytest.fixture
def reference_grid_path():
    return REFERENCE_GRID_CSV


@pytest.fixture
def echo_scorer():
    """Command prefix running the fixture scorer with this interpreter."""
    script = TESTS_DIR / "fixtures" / "echo_scorer.py"
    return [sys.executable, str(script)]


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def protocol_text(bona_ids, spoof_ids):
    lines = [f"{t} bonafide" for t in bona_ids] + [f"{t} spoof" for t in spoof_ids]
    return "\n".join(lines) + "\n"


def scores_text(mapping):
    return "".join(f"{k} {v}\n" for k, v in mapping.items())


# Synthetic 3-system x 3-dataset arena. Scores are built so that:
#   sysA: per-dataset EERs 0/0/0 but wildly different score scales, so its
#         pooled EER is 1/3 (pooling penalizes the scale mismatch);
#   sysB: EER 0.25 on every dataset with one consistent scale, pooled 0.25
#         (stored negated, declared higher-is-spoof in the manifest);
#   sysC: complete overlap, EER 0.5 everywhere.
# Ranking by average EER gives A < B < C; by pooled EER, B < A < C.
ARENA_BONA = {
    ("sysA", "d1"): [10.0, 9.0, 11.0, 12.0],
    ("sysA", "d2"): [0.5, 0.6, 0.55, 0.65],
    ("sysA", "d3"): [100.0, 90.0, 110.0, 120.0],
    ("sysB", "d1"): [0.6, 0.7, 0.8, 0.9],
    ("sysB", "d2"): [0.6, 0.7, 0.8, 0.9],
    ("sysB", "d3"): [0.6, 0.7, 0.8, 0.9],
    ("sysC", "d1"): [0.5, 0.6, 0.7, 0.8],
    ("sysC", "d2"): [0.5, 0.6, 0.7, 0.8],
    ("sysC", "d3"): [0.5, 0.6, 0.7, 0.8],
}
ARENA_SPOOF = {
    ("sysA", "d1"): [1.0, 2.0, 3.0, 4.0],
    ("sysA", "d2"): [0.3, 0.35, 0.4, 0.45],
    ("sysA", "d3"): [10.0, 20.0, 30.0, 40.0],
    ("sysB", "d1"): [0.1, 0.2, 0.3, 0.75],
    ("sysB", "d2"): [0.1, 0.2, 0.3, 0.75],
    ("sysB", "d3"): [0.1, 0.2, 0.3, 0.75],
    ("sysC", "d1"): [0.5, 0.6, 0.7, 0.8],
    ("sysC", "d2"): [0.5, 0.6, 0.7, 0.8],
    ("sysC", "d3"): [0.5, 0.6, 0.7, 0.8],
}

ARENA_EXPECTED_EER = {"sysA": 0.0, "sysB": 0.25, "sysC": 0.5}
ARENA_EXPECTED_POOLED = {"sysA": 1.0 / 3.0, "sysB": 0.25, "sysC": 0.5}


def build_arena(root: Path) -> Path:
    """Write the synthetic arena fixture under root; returns the manifest path."""
    datasets = ["d1", "d2", "d3"]
    bona_ids = [f"b{i}" for i in range(1, 5)]
    spoof_ids = [f"s{i}" for i in range(1, 5)]
    for ds in datasets:
        write_text(root / "protocols" / f"{ds}.txt", protocol_text(bona_ids, spoof_ids))
    for (system, ds), bona in ARENA_BONA.items():
        spoof = ARENA_SPOOF[(system, ds)]
        sign = -1.0 if system == "sysB" else 1.0  # sysB ships higher-is-spoof scores
        mapping = {t: sign * v for t, v in zip(bona_ids, bona)}
        mapping.update({t: sign * v for t, v in zip(spoof_ids, spoof)})
        write_text(root / "scores" / f"{system}_{ds}.txt", scores_text(mapping))
    manifest = {
        "manifest_version": 1,
        "options": {"default_polarity": "higher-is-bonafide"},
        "datasets": [
            {"dataset_id": ds, "protocol_path": f"protocols/{ds}.txt"} for ds in datasets
        ],
        "systems": [
            {
                "system_id": "sysA",
                "param_count_millions": 1.5,
                "category": "open-source",
                "scores": {ds: f"scores/sysA_{ds}.txt" for ds in datasets},
            },
            {
                "system_id": "sysB",
                "param_count_millions": 98.9,
                "category": "proprietary",
                "polarity": "higher-is-spoof",
                "scores": {ds: f"scores/sysB_{ds}.txt" for ds in datasets},
            },
            {
                "system_id": "sysC",
                "scores": {ds: f"scores/sysC_{ds}.txt" for ds in datasets},
            },
        ],
    }
    import json

    return write_text(root / "manifest.json", json.dumps(manifest, indent=2))


@pytest.fixture
def arena_manifest_path(tmp_path):
    return build_arena(tmp_path)


def make_tone(seconds=1.0, freq=440.0, amplitude=0.5, rate=16000):
    t = np.arange(int(seconds * rate)) / rate
    return AudioBuffer(amplitude * np.sin(2.0 * np.pi * freq * t), rate)


def make_noise(seconds=1.0, amplitude=0.1, seed=0, rate=16000):
    rng = np.random.default_rng(seed)
    return AudioBuffer(amplitude * rng.standard_normal(int(seconds * rate)), rate)


def build_wav_corpus(root: Path, n_files=3, seconds=1.0, amplitude=0.05, seed=100):
    """Clean sine corpus: n_files WAVs with distinct frequencies."""
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n_files):
        write_wav(root / f"utt{i:03d}.wav", make_tone(seconds, 200.0 + 60.0 * i, amplitude))
    return root


def build_interferer_dir(root: Path, n_files=2, seconds=0.6, amplitude=0.1, seed=7):
    """Noise source directory, nested one level like a MUSAN category folder."""
    sub = root / "free-sound"
    sub.mkdir(parents=True, exist_ok=True)
    for i in range(n_files):
        write_wav(sub / f"noise{i:03d}.wav", make_noise(seconds, amplitude, seed + i))
    return root
