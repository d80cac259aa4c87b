"""Exception hierarchy shared across the package."""


class TrajbenchError(Exception):
    """Base class for all errors raised by this package."""


class CorruptFileError(TrajbenchError):
    """A trajectory file failed a structural check (bad magic, bad CRC, ...)."""


class TruncatedRecordError(CorruptFileError):
    """A trajectory record ended prematurely.

    ``byte_position`` is the file offset of the record that could not be
    read completely.
    """

    def __init__(self, path, byte_position: int, detail: str = ""):
        self.path = str(path)
        self.byte_position = byte_position
        msg = f"{path}: truncated record at byte {byte_position}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BlockReadError(TrajbenchError):
    """A frame read failed while processing a block.

    Carries the owning rank, the global frame index, and the root cause.
    """

    def __init__(self, rank: int, frame_index: int, cause: Exception | str):
        self.rank = rank
        self.frame_index = frame_index
        self.cause = cause
        super().__init__(f"rank {rank}: failed to read frame {frame_index}: {cause}")


class WorkerError(TrajbenchError):
    """A worker process failed; carries the rank and the reported cause."""

    def __init__(self, rank: int, cause: str):
        self.rank = rank
        self.cause = cause
        super().__init__(f"worker rank {rank} failed: {cause}")


class RunTimeoutError(TrajbenchError):
    """A parallel run exceeded its configured wall-clock limit."""
