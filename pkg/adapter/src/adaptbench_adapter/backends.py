"""Backend registry and the GPU-free mock backend.

A backend trains from manifests into checkpoint files and transcribes
manifest entries given a checkpoint. The mock backend "learns" by decaying
its corruption rates each epoch and echoes references once the rates reach
zero, so full plans run anywhere in seconds. A checkpoint file may instead
carry scripted per-utterance hypotheses, which makes checkpoint-selection
behavior exactly controllable in tests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

from .errors import AudioMissing, BackendUnavailable
from .plans import AdapterRunSpec

MOCK_ENCODER_LAYERS = 4

_VOCAB = (
    "apple", "river", "stone", "yellow", "quiet", "window", "garden",
    "candle", "mirror", "button", "pillow", "thunder", "violet", "marble",
    "copper", "lantern",
)


def _unit(*parts: str) -> float:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _pick(*parts: str) -> str:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return _VOCAB[digest[0] % len(_VOCAB)]


class Backend(Protocol):
    backend_id: str

    def encoder_layers(self) -> int: ...

    def train(
        self, spec: AdapterRunSpec, init_checkpoint: Optional[Path], run_dir: Path
    ) -> list[Path]: ...

    def transcribe(self, checkpoint: Path, entry: dict) -> str: ...


@dataclass
class MockBackend:
    """Reference-echo backend with optional decaying corruption.

    ``require_audio`` makes transcription check audio paths on disk, which
    exercises the missing-audio contract without any real audio handling.
    """

    backend_id: str = "mock"
    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    decay: float = 0.5
    require_audio: bool = False

    def encoder_layers(self) -> int:
        return MOCK_ENCODER_LAYERS

    def _frozen_layers(self, spec: AdapterRunSpec) -> list[int]:
        if not spec.job.freeze_lower_half:
            return []
        return list(range(MOCK_ENCODER_LAYERS // 2))

    def train(
        self, spec: AdapterRunSpec, init_checkpoint: Optional[Path], run_dir: Path
    ) -> list[Path]:
        """Write one checkpoint per epoch with geometrically decaying noise."""
        epochs = spec.require_epochs()
        init_rates = (self.sub_rate, self.del_rate, self.ins_rate)
        if init_checkpoint is not None:
            parent = json.loads(Path(init_checkpoint).read_text(encoding="utf-8"))
            rates = parent.get("rates")
            if rates:
                init_rates = (rates["sub"], rates["del"], rates["ins"])
        run_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for epoch in range(epochs):
            factor = self.decay ** (epoch + 1)
            payload = {
                "backend": self.backend_id,
                "job_id": spec.job.job_id,
                "epoch": epoch,
                "device": spec.device,
                "init_checkpoint": str(init_checkpoint) if init_checkpoint else None,
                "frozen_encoder_layers": self._frozen_layers(spec),
                "encoder_layers": MOCK_ENCODER_LAYERS,
                "rates": {
                    "sub": init_rates[0] * factor,
                    "del": init_rates[1] * factor,
                    "ins": init_rates[2] * factor,
                },
            }
            path = run_dir / f"epoch_{epoch:03d}.json"
            path.write_text(
                json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            paths.append(path)
        return paths

    def transcribe(self, checkpoint: Path, entry: dict) -> str:
        state = json.loads(Path(checkpoint).read_text(encoding="utf-8"))
        if self.require_audio:
            audio = entry.get("audio_path", "")
            if not Path(audio).exists():
                raise AudioMissing(entry["utt_id"], audio)
        scripted = state.get("scripted")
        if scripted is not None and entry["utt_id"] in scripted:
            return scripted[entry["utt_id"]]
        rates = state.get("rates") or {}
        sub = rates.get("sub", 0.0)
        drop = rates.get("del", 0.0)
        ins = rates.get("ins", 0.0)
        if not any((sub, drop, ins)):
            return entry["text"]
        key = "\x1f".join([state.get("job_id", ""), str(state.get("epoch", 0)), entry["utt_id"]])
        out = []
        for i, word in enumerate(entry["text"].split()):
            pos = str(i)
            if _unit(key, pos, "del") < drop:
                pass
            elif _unit(key, pos, "sub") < sub:
                out.append(_pick(key, pos, "subword"))
            else:
                out.append(word)
            if _unit(key, pos, "ins") < ins:
                out.append(_pick(key, pos, "insword"))
        return " ".join(out)


def get_backend(backend_id: str, **options) -> Backend:
    if backend_id in ("mock", "echo"):
        return MockBackend(backend_id=backend_id, **options)
    raise BackendUnavailable(
        f"backend {backend_id!r} is not available; known backends: mock, echo"
    )
