"""Grid-function files: a 32-byte text header plus little-endian doubles, or CSV."""

import csv

import numpy as np

from .grid import Grid, GridFunction

MAGIC = b"RLGF"
HEADER_SIZE = 32


def _header(grid):
    text = f"{grid.d} {grid.n} {grid.side!r}".encode("ascii")
    if len(text) > HEADER_SIZE - len(MAGIC):
        raise ValueError(f"grid parameters too long for the header: {text!r}")
    return MAGIC + text.ljust(HEADER_SIZE - len(MAGIC), b" ")


def to_bytes(f):
    return _header(f.grid) + np.asarray(f.values, dtype="<f8").tobytes()


def from_bytes(data):
    if len(data) < HEADER_SIZE or data[:4] != MAGIC:
        raise ValueError("not an RLGF grid-function file")
    fields = data[4:HEADER_SIZE].decode("ascii").split()
    if len(fields) != 3:
        raise ValueError(f"malformed RLGF header: {data[:HEADER_SIZE]!r}")
    grid = Grid(int(fields[0]), int(fields[1]), float(fields[2]))
    values = np.frombuffer(data[HEADER_SIZE:], dtype="<f8")
    if values.size != grid.size:
        raise ValueError(f"RLGF payload has {values.size} values, header implies {grid.size}")
    return GridFunction(grid, values.astype(float))


def write_rlgf(f, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(f))


def read_rlgf(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def write_csv(f, path):
    grid = f.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"# d={grid.d} n={grid.n} side={grid.side!r}"])
        writer.writerow([f"i{a}" for a in range(grid.d)] + ["value"])
        for idx, v in zip(grid.index_coords, f.values):
            writer.writerow([*map(int, idx), repr(float(v))])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    meta = dict(item.split("=") for item in rows[0][0].lstrip("# ").split())
    grid = Grid(int(meta["d"]), int(meta["n"]), float(meta["side"]))
    values = np.zeros(grid.size)
    body = np.array([[float(x) for x in row] for row in rows[2:]])
    values[grid.ravel(body[:, :-1].astype(int))] = body[:, -1]
    return GridFunction(grid, values)
