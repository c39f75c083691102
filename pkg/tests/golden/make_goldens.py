"""Regenerate the frozen golden artifacts.

Run only when an output change is intended:

    python tests/golden/make_goldens.py

then review the diff of tests/golden/ before committing.
"""
import shutil
import sys
import tempfile
from pathlib import Path

from strainflow.cli import main

HERE = Path(__file__).parent

# name in tests/golden -> (generate argv, run argv, artifact produced by the run)
CASES = {
    "two_blobs": (
        ["generate", "two-blobs-merge", "--grid", "120x80", "--frames", "60"],
        ["pipeline", "--it", "2", "--ih", "1", "--lic-frames", "last"],
        ["sankey_it2_ih1.svg", "lic_f059.pgm", "lic_f059.ppm"],
    ),
    "uniaxial": (
        ["generate", "uniaxial", "--grid", "24x16", "--frames", "8"],
        ["lic", "--frame", "7", "--seed", "7"],
        ["lic_f007.pgm", "lic_f007.ppm"],
    ),
}


def build(name: str, work: Path) -> dict[str, Path]:
    gen, run, artifacts = CASES[name]
    data, out = work / name / "data", work / name / "out"
    if main([*gen, "--out", str(data)]) != 0:
        raise RuntimeError(f"generate failed for {name}")
    if main([*run, "--input", str(data / "manifest.json"), "--out", str(out)]) != 0:
        raise RuntimeError(f"run failed for {name}")
    return {f"{name}_{a}": out / a for a in artifacts}


def main_() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        for name in CASES:
            for golden, produced in build(name, Path(tmp)).items():
                shutil.copyfile(produced, HERE / golden)
                print(f"wrote {HERE / golden}")
    return 0


if __name__ == "__main__":
    sys.exit(main_())
