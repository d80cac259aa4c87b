"""Minimal text topology format.

Line 1: total atom count.  Line 2: whitespace-separated mobile atom indices
(0-based, strictly increasing).  Lines 3..: one ``index name x y z``
reference row per mobile atom, coordinates in nanometers.  Floats are
written with 17 significant digits so reference positions round-trip
exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import CorruptFileError
from .model import System

__all__ = ["write_topology", "read_topology", "TOPOLOGY_SUFFIX"]

TOPOLOGY_SUFFIX = ".topo"


def write_topology(path, system: System) -> None:
    lines = [str(system.n_atoms)]
    lines.append(" ".join(str(int(i)) for i in system.mobile_indices))
    for idx, name, xyz in zip(
        system.mobile_indices, system.atom_names, system.reference_positions
    ):
        lines.append(
            f"{int(idx)} {name} {xyz[0]:.17g} {xyz[1]:.17g} {xyz[2]:.17g}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_topology(path) -> System:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise CorruptFileError(f"{path}: topology needs at least two lines")
    try:
        n_atoms = int(lines[0])
        mobile = np.array([int(tok) for tok in lines[1].split()], dtype=np.int64)
    except ValueError as exc:
        raise CorruptFileError(f"{path}: unparsable header: {exc}") from exc
    rows = lines[2:]
    if len(rows) != len(mobile):
        raise CorruptFileError(
            f"{path}: expected {len(mobile)} reference rows, found {len(rows)}"
        )
    names = []
    ref = np.zeros((len(mobile), 3))
    for k, row in enumerate(rows):
        parts = row.split()
        if len(parts) != 5:
            raise CorruptFileError(f"{path}: malformed reference row {k + 3}")
        idx = int(parts[0])
        if idx != mobile[k]:
            raise CorruptFileError(
                f"{path}: reference row {k + 3} lists atom {idx}, "
                f"selection says {mobile[k]}"
            )
        names.append(parts[1])
        ref[k] = [float(parts[2]), float(parts[3]), float(parts[4])]
    return System(
        n_atoms=n_atoms,
        atom_names=tuple(names),
        mobile_indices=mobile,
        reference_positions=ref,
    )
