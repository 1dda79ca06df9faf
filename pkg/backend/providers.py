"""
BD providers — where a worker keeps its BD[s] blocks.

  - MemoryProvider → blocks held as SourceData objects (MO mode)
  - StoreProvider  → blocks in an SBC1 file (DO mode)

Both stage updated blocks during an event and apply them on commit().
"""

from typing import Optional

import numpy as np

from bd_store import BdStore
from brandes import SourceData


class MemoryProvider:
    def __init__(self, blocks: list[SourceData], lo: int = 0):
        self.lo = lo
        self.hi = lo + len(blocks)
        self.blocks = blocks
        self._staged: dict[int, SourceData] = {}

    def read_distances(self, s: int) -> np.ndarray:
        return self.blocks[s - self.lo].d

    def load(self, s: int, d: Optional[np.ndarray] = None) -> SourceData:
        return self.blocks[s - self.lo]

    def stage(self, s: int, data: SourceData) -> None:
        self._staged[s] = data

    def commit(self) -> None:
        for s, data in self._staged.items():
            self.blocks[s - self.lo] = data
        self._staged.clear()

    def rollback(self) -> None:
        self._staged.clear()

    def grow(self, n: int, new_source: Optional[SourceData] = None) -> None:
        self.blocks = [block.grown(n) for block in self.blocks]
        if new_source is not None:
            self.blocks.append(new_source)
            self.hi += 1

    def close(self) -> None:
        pass


class StoreProvider:
    def __init__(self, store: BdStore):
        self.store = store

    @property
    def lo(self) -> int:
        return self.store.lo

    @property
    def hi(self) -> int:
        return self.store.hi

    def read_distances(self, s: int) -> np.ndarray:
        return self.store.read_distances_only(s)

    def load(self, s: int, d: Optional[np.ndarray] = None) -> SourceData:
        return self.store.load_source(s, d)

    def stage(self, s: int, data: SourceData) -> None:
        self.store.stage_source(s, data)

    def commit(self) -> None:
        self.store.commit()

    def rollback(self) -> None:
        self.store.rollback()

    def grow(self, n: int, new_source: Optional[SourceData] = None) -> None:
        self.store.grow(n, new_source)

    def close(self) -> None:
        self.store.close()
