"""Snapshot files for fields and state pairs.

Field file layout: one JSON header line
    {"dim": d, "M": modes, "P": points, "kind": "spectral", "endianness": "little"}
followed by a newline and the coefficient array as interleaved (re, im)
IEEE-754 binary64, little endian, row-major over the mode box with each
axis ordered 0..M/2-1, -M/2..-1.

State-pair files use kind "state_pair", carry SHA-256 digests of both
payload blocks in the header, and concatenate the u and v blocks.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, FormatVersionMismatch
from .spectral import ModeGrid, SpectralField, StatePair

__all__ = ["write_field", "read_field", "write_state", "read_state"]

_FIELD_KIND = "spectral"
_PAIR_KIND = "state_pair"


def _coeff_bytes(f: SpectralField) -> bytes:
    inter = np.empty(f.coeffs.shape + (2,), dtype="<f8")
    inter[..., 0] = f.coeffs.real
    inter[..., 1] = f.coeffs.imag
    return inter.tobytes()


def _field_header(f: SpectralField) -> dict:
    g = f.grid
    return {"dim": g.dim, "M": g.modes_per_axis, "P": g.physical_points_per_axis,
            "kind": _FIELD_KIND, "endianness": "little"}


def _validate_header(h: dict, expect_kind: str) -> None:
    kind = h.get("kind")
    if kind != expect_kind:
        raise FormatVersionMismatch(f"unexpected kind {kind!r}")
    if h.get("endianness") != "little":
        raise FormatVersionMismatch(f"unsupported endianness {h.get('endianness')!r}")
    dim = h.get("dim")
    if dim not in (1, 2, 3):
        raise FormatVersionMismatch(f"unsupported dim {dim!r}")
    M = h.get("M")
    if not isinstance(M, int) or M <= 0 or M % 2:
        raise FormatVersionMismatch(f"invalid mode count {M!r}")
    P = h.get("P")
    if not isinstance(P, int) or P < M:
        raise FormatVersionMismatch(f"invalid physical point count {P!r}")


def write_field(f: SpectralField, path) -> None:
    header = json.dumps(_field_header(f), sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(_coeff_bytes(f))


def _read_header_line(fh) -> dict:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise FormatVersionMismatch("missing header line")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatVersionMismatch(f"unparseable header: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatVersionMismatch("header is not a JSON object")
    return header


def _payload_to_field(header: dict, raw: bytes) -> SpectralField:
    dim, M, P = header["dim"], header["M"], header["P"]
    expected = M ** dim * 16
    if len(raw) != expected:
        raise ChecksumMismatch(f"payload has {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f8").reshape((M,) * dim + (2,))
    coeffs = (flat[..., 0] + 1j * flat[..., 1]).astype(np.complex128)
    grid = ModeGrid(dim, M, P, dealias=(2 * P >= 3 * M))
    return SpectralField(grid, coeffs, enforce=False)


def read_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        header = _read_header_line(fh)
        _validate_header(header, _FIELD_KIND)
        raw = fh.read()
    return _payload_to_field(header, raw)


def write_state(state: StatePair, path) -> None:
    u_bytes = _coeff_bytes(state.u)
    v_bytes = _coeff_bytes(state.v)
    header = dict(_field_header(state.u))
    header["kind"] = _PAIR_KIND
    header["sha256"] = {"u": hashlib.sha256(u_bytes).hexdigest(),
                        "v": hashlib.sha256(v_bytes).hexdigest()}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(u_bytes)
        fh.write(v_bytes)


def read_state(path) -> StatePair:
    with open(path, "rb") as fh:
        header = _read_header_line(fh)
        _validate_header(header, _PAIR_KIND)
        digests = header.get("sha256")
        if not isinstance(digests, dict) or set(digests) != {"u", "v"}:
            raise FormatVersionMismatch("state header lacks payload digests")
        block = header["M"] ** header["dim"] * 16
        u_raw = fh.read(block)
        v_raw = fh.read(block)
        if fh.read(1):
            raise ChecksumMismatch("trailing bytes after state payload")
    for name, raw in (("u", u_raw), ("v", v_raw)):
        if len(raw) != block:
            raise ChecksumMismatch(f"{name} payload truncated")
        if hashlib.sha256(raw).hexdigest() != digests[name]:
            raise ChecksumMismatch(f"{name} payload digest mismatch")
    u = _payload_to_field(header, u_raw)
    v = _payload_to_field(dict(header, kind=_FIELD_KIND), v_raw)
    return StatePair(u, SpectralField(u.grid, v.coeffs, enforce=False))
