"""
State directory — what `init` writes and `apply` / `verify` / `top` / `gn` read back.

    <state>/graph.txt      edges as dense ids, one `u v` per line
    <state>/labels.txt     external label of vertex i on line i
    <state>/manifest.txt   `worker_id lo hi store_path` (paths relative to <state>)
    <state>/scores.npz     exact VBC/EBC (float64), reloaded by later commands
    <state>/scores.csv     `v,<label>,<vbc>` then `e,<u>,<v>,<ebc>` rows
    <state>/latency.csv    per-event timings appended by `apply`
    <state>/stores/        one SBC1 file per partition
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from brandes import CentralityScores
from config import format_score
from errors import EventError, StoreFormatError
from graph_core import DynamicGraph
from incremental import EventKind, EventReport
from partition_engine import Partition, read_manifest, write_manifest

log = logging.getLogger("state")

GRAPH_FILE = "graph.txt"
LABELS_FILE = "labels.txt"
MANIFEST_FILE = "manifest.txt"
SCORES_NPZ = "scores.npz"
SCORES_CSV = "scores.csv"
LATENCY_CSV = "latency.csv"
STORES_DIR = "stores"


# ─── Scores ──────────────────────────────────────────────────

def save_scores(path: str | Path, scores: CentralityScores) -> None:
    edges = sorted(scores.ebc)
    np.savez(
        path,
        vbc=scores.vbc,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        ebc=np.array([scores.ebc[e] for e in edges], dtype=np.float64),
    )


def load_scores(path: str | Path) -> CentralityScores:
    with np.load(path) as data:
        vbc = data["vbc"].astype(np.float64)
        edges = data["edges"]
        ebc = data["ebc"]
        return CentralityScores(
            vbc=vbc,
            ebc={(int(u), int(v)): float(x) for (u, v), x in zip(edges, ebc)},
        )


def write_scores_csv(path: str | Path, scores: CentralityScores, labels: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for v, value in enumerate(scores.vbc):
            writer.writerow(["v", labels[v], format_score(float(value))])
        for (u, v) in sorted(scores.ebc):
            writer.writerow(["e", labels[u], labels[v], format_score(scores.ebc[(u, v)])])


# ─── State directory ─────────────────────────────────────────

@dataclass
class EngineState:
    root: Path
    graph: DynamicGraph
    labels: list[str]
    partitions: list[Partition]
    scores: CentralityScores

    @property
    def stores_dir(self) -> Path:
        return self.root / STORES_DIR

    def label_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    def save(self) -> None:
        """Write graph, labels, manifest and both score files."""
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / GRAPH_FILE, "w", encoding="utf-8") as f:
            for u, v in self.graph.edges():
                f.write(f"{u} {v}\n")
        with open(self.root / LABELS_FILE, "w", encoding="utf-8") as f:
            for label in self.labels:
                f.write(f"{label}\n")
        relative = []
        for part in self.partitions:
            path = part.store_path
            if path and Path(path).is_absolute():
                path = str(Path(path).relative_to(self.root.resolve()))
            relative.append(part.model_copy(update={"store_path": path}))
        write_manifest(self.root / MANIFEST_FILE, relative)
        save_scores(self.root / SCORES_NPZ, self.scores)
        write_scores_csv(self.root / SCORES_CSV, self.scores, self.labels)

    @classmethod
    def load(cls, root: str | Path) -> "EngineState":
        root = Path(root)
        for name in (GRAPH_FILE, LABELS_FILE, MANIFEST_FILE, SCORES_NPZ):
            if not (root / name).exists():
                raise FileNotFoundError(f"State directory {root} is missing {name} (run init first)")
        with open(root / LABELS_FILE, "r", encoding="utf-8") as f:
            labels = [line.rstrip("\n") for line in f]
        pairs = []
        with open(root / GRAPH_FILE, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    u, v = line.split()
                    pairs.append((int(u), int(v)))
        graph = DynamicGraph.from_edges(len(labels), pairs)
        partitions = [
            p.model_copy(update={"store_path": str((root / p.store_path).resolve())}) if p.store_path else p
            for p in read_manifest(root / MANIFEST_FILE)
        ]
        scores = load_scores(root / SCORES_NPZ)
        if len(scores.vbc) != graph.n or len(scores.ebc) != graph.m:
            raise StoreFormatError(f"{root / SCORES_NPZ} does not match the graph (n={graph.n}, m={graph.m})")
        return cls(root=root, graph=graph, labels=labels, partitions=partitions, scores=scores)


def append_latency(path: str | Path, rows: list[tuple[int, EventReport]]) -> None:
    """line,op,u,v,elapsed_ms,processed,skipped,touched"""
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(["line", "op", "u", "v", "elapsed_ms", "processed", "skipped", "touched"])
        for line, r in rows:
            writer.writerow([
                line, r.event.kind.value, r.event.u1, r.event.u2,
                f"{r.elapsed * 1000:.3f}", r.processed, r.skipped, r.touched,
            ])


# ─── Event streams ───────────────────────────────────────────

ISOLATE = "x"


@dataclass(frozen=True)
class StreamLine:
    line: int
    op: str                      # "+", "-" or "x"
    u: str
    v: Optional[str]
    timestamp: Optional[float]

    @property
    def kind(self) -> Optional[EventKind]:
        return None if self.op == ISOLATE else EventKind(self.op)


def parse_stream(path: str | Path) -> Iterator[StreamLine]:
    """
    Yield `op u v [timestamp]` lines (`x v [timestamp]` isolates a vertex).

    Blank lines and `#` comments are skipped. The first malformed line or
    decreasing timestamp raises EventError carrying its line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Event stream not found: {path}")
    last_ts: Optional[float] = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            op = parts[0]
            if op in ("+", "-"):
                if len(parts) not in (3, 4):
                    raise EventError(f"expected '{op} u v [timestamp]', got {text!r}", lineno)
                u, v = parts[1], parts[2]
                ts_text = parts[3] if len(parts) == 4 else None
            elif op == ISOLATE:
                if len(parts) not in (2, 3):
                    raise EventError(f"expected 'x v [timestamp]', got {text!r}", lineno)
                u, v = parts[1], None
                ts_text = parts[2] if len(parts) == 3 else None
            else:
                raise EventError(f"unknown operation {op!r} (use +, - or x)", lineno)

            timestamp = None
            if ts_text is not None:
                try:
                    timestamp = float(ts_text)
                except ValueError:
                    raise EventError(f"bad timestamp {ts_text!r}", lineno) from None
                if last_ts is not None and timestamp < last_ts:
                    raise EventError(f"timestamp {timestamp} earlier than previous {last_ts}", lineno)
                last_ts = timestamp
            yield StreamLine(lineno, op, u, v, timestamp)
