"""Vectorized rendering of result lines into byte buffers.

Formatting millions of ``seq.off`` tokens one Python string at a time is the
bottleneck of large runs.  Instead every record's ``seq.off,`` token is
rendered once into a zero padded cell, lines are assembled by gathering whole
cells, and a single pass drops the padding.  Zero never occurs in the text.
"""

from typing import NamedTuple

import numpy as np

_POW10 = 10 ** np.arange(19, dtype=np.int64)


def n_digits(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return np.searchsorted(_POW10, values, side="right").clip(min=1)


def put_ints(buf: np.ndarray, start: np.ndarray, values: np.ndarray, nd: np.ndarray) -> None:
    """Write decimal ``values`` into ``buf`` so that value ``i`` occupies ``start[i]:start[i]+nd[i]``."""
    values = np.asarray(values, dtype=np.int64)
    end = start + nd - 1
    for d in range(int(nd.max(initial=0))):
        live = nd > d
        if live.all():
            buf[end - d] = 48 + (values // _POW10[d]) % 10
        else:
            buf[end[live] - d] = 48 + (values[live] // _POW10[d]) % 10


def segments(starts: np.ndarray, lens: np.ndarray) -> np.ndarray:
    """Flat index of the concatenated ranges ``starts[i]:starts[i]+lens[i]``."""
    lens = np.asarray(lens, dtype=np.int64)
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    before = np.cumsum(lens) - lens
    return np.repeat(np.asarray(starts, dtype=np.int64) - before, lens) + np.arange(total)


def squeeze(cells: np.ndarray) -> np.ndarray:
    flat = cells.reshape(-1)
    return flat[flat != 0]


# "0000".."9999" as one 4-byte word each, so a lookup is a single gather
_QUADS = np.array([list(f"{i:04d}".encode()) for i in range(10000)], dtype=np.uint8).view(np.uint32).ravel()


def digit_matrix(values: np.ndarray, width: int):
    """Right aligned decimals, one row per value, leading zeros blanked to 0 bytes.

    Returns the ``(len(values), width)`` matrix and the digit counts.
    """
    values = np.asarray(values, dtype=np.int64)
    quads = -(-width // 4)
    words = np.empty((len(values), quads), dtype=np.uint32)
    v = values
    for q in range(quads - 1, -1, -1):
        v, low = np.divmod(v, 10000)
        words[:, q] = _QUADS[low]
    out = words.view(np.uint8)[:, 4 * quads - width :]
    nd = np.ones(len(values), dtype=np.int64)
    for p in range(1, width):
        real = values >= _POW10[p]
        out[:, width - 1 - p] *= real
        nd += real
    return out, nd


class Tokens(NamedTuple):
    """``seq.off,`` for every record, one zero padded row each."""

    cells: np.ndarray
    size: np.ndarray


def render_tokens(seq: np.ndarray, off: np.ndarray) -> Tokens:
    ws = int(n_digits(np.max(seq, initial=0)))
    wo = int(n_digits(np.max(off, initial=0)))
    cells = np.empty((len(seq), ws + wo + 2), dtype=np.uint8)
    cells[:, :ws], nd_seq = digit_matrix(seq, ws)
    cells[:, ws] = 46
    cells[:, ws + 1 : ws + 1 + wo], nd_off = digit_matrix(off, wo)
    cells[:, -1] = 44
    return Tokens(cells, nd_seq + nd_off + 2)


def render_lines(texts: np.ndarray, first, pat_len, counts, members, tokens: Tokens):
    """Render ``<pattern>\\t<count>\\t<seq>.<off>,...\\n`` per group.

    Pattern ``i`` is the first ``pat_len[i]`` bytes of row ``first[i]`` of
    ``texts``; its occurrences are the next ``counts[i]`` entries of
    ``members``, which index ``tokens``.  Returns the buffer and the G + 1
    line boundaries.
    """
    counts = np.asarray(counts, dtype=np.int64)
    pat_len = np.asarray(pat_len, dtype=np.int64)
    n_lines = len(counts)
    width = tokens.cells.shape[1]
    lerp = texts.shape[1]
    nd_cnt = n_digits(counts)
    # each head takes hc whole cells so heads and tokens share one row layout
    hc = -(-(lerp + 2 + int(nd_cnt.max(initial=1))) // width)
    head = np.zeros((n_lines, hc * width), dtype=np.uint8)
    head[:, :lerp] = np.where(np.arange(lerp) < pat_len[:, None], texts[first], 0)
    hflat = head.reshape(-1)
    row = np.arange(n_lines, dtype=np.int64) * (hc * width) + pat_len
    hflat[row] = 9
    put_ints(hflat, row + 1, counts, nd_cnt)
    hflat[row + 1 + nd_cnt] = 9

    rows = hc + counts
    line_row = np.cumsum(rows) - rows
    is_token = np.ones(int(rows.sum()), dtype=bool)
    head_rows = (line_row[:, None] + np.arange(hc)).reshape(-1)
    is_token[head_rows] = False
    grid = np.empty((len(is_token), width), dtype=np.uint8)
    grid[head_rows] = head.reshape(-1, width)
    grid[is_token] = tokens.cells[members]
    buf = squeeze(grid)

    tok_cs = np.concatenate([[0], np.cumsum(tokens.size[members])])
    mstart = np.cumsum(counts) - counts
    body = tok_cs[mstart + counts] - tok_cs[mstart]
    lines = np.concatenate([[0], np.cumsum(pat_len + nd_cnt + 2 + body)])
    buf[lines[1:] - 1] = 10
    return buf, lines


def render_positions(seq: np.ndarray, off: np.ndarray) -> bytes:
    """``seq.off,seq.off,...\\n`` for one occurrence list."""
    buf = squeeze(render_tokens(seq, off).cells)
    if len(buf):
        buf[-1] = 10
    return buf.tobytes()
