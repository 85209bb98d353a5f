"""Adapter error hierarchy; the CLI maps these to exit codes 2/3/4."""


class AdapterError(Exception):
    pass


class AdapterUsageError(AdapterError):
    """Bad invocation or configuration (exit 2)."""


class BackendUnavailable(AdapterError):
    """The requested backend id is unknown or cannot run here."""


class CheckpointMissing(AdapterError):
    """A required initialization checkpoint does not exist."""


class UnknownTrainHint(AdapterError):
    """The plan carries a training hint this adapter does not implement.

    Unknown hints abort instead of being ignored: silently dropping one
    would change the training contract behind the experimenter's back.
    """


class AudioMissing(AdapterError):
    def __init__(self, utt_id: str, path: str):
        super().__init__(f"audio missing for {utt_id}: {path}")
        self.utt_id = utt_id
        self.path = path
