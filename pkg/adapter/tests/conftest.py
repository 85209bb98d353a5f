import shutil
import subprocess
from pathlib import Path

import pytest


def toolkit_available() -> bool:
    return shutil.which("adaptbench") is not None


requires_toolkit = pytest.mark.skipif(
    not toolkit_available(), reason="adaptbench CLI not on PATH"
)


@pytest.fixture(scope="session")
def plan_dir(tmp_path_factory) -> Path:
    """A toolkit run directory with manifests and plan.json, built once."""
    if not toolkit_available():
        pytest.skip("adaptbench CLI not on PATH")
    out = tmp_path_factory.mktemp("toolkit-run")
    synth = (
        subprocess.run(
            [
                "python3",
                "-c",
                "import adaptbench, pathlib;"
                "print(pathlib.Path(adaptbench.__file__).parent / 'data' / 'synthetic')",
            ],
            capture_output=True,
            text=True,
            check=True,
        ).stdout.strip()
    )
    subprocess.run(
        [
            "adaptbench", "plan",
            "--config", f"{synth}/chat_run.toml",
            "--out-dir", str(out),
        ],
        check=True,
        capture_output=True,
    )
    return out
