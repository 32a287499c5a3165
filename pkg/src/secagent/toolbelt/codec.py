"""Decoders and string extraction for payload analysis.

The base64 and hex decoders are implemented from first principles on
purpose: the test suite cross-checks them against the standard library,
which keeps the two routes independent.
"""

from __future__ import annotations

from pathlib import Path

_B64_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"
_B64_INDEX = {ch: i for i, ch in enumerate(_B64_ALPHABET)}

_PRINTABLE = set(range(0x20, 0x7F))


class DecodeError(ValueError):
    """Malformed encoded input; message names the offending offset."""


def base64_to_bytes(input: str) -> bytes:
    """Decode base64 text (whitespace ignored) to raw bytes."""
    compact = "".join(input.split())
    padding = 0
    while compact.endswith("="):
        compact = compact[:-1]
        padding += 1
    if padding > 2:
        raise DecodeError(f"invalid padding: {padding} '=' characters")
    for offset, ch in enumerate(compact):
        if ch not in _B64_INDEX:
            raise DecodeError(f"invalid base64 character {ch!r} at offset {offset}")
    if compact and (len(compact) + padding) % 4 != 0:
        raise DecodeError(f"invalid base64 length {len(compact) + padding}")
    if len(compact) % 4 == 1:
        raise DecodeError(f"truncated base64 quantum at offset {len(compact) - 1}")

    out = bytearray()
    acc = 0
    bits = 0
    for ch in compact:
        acc = (acc << 6) | _B64_INDEX[ch]
        bits += 6
        if bits >= 8:
            bits -= 8
            out.append((acc >> bits) & 0xFF)
    return bytes(out)


def decode64(input: str) -> str:
    """Decode base64 to text; non-printable bytes render as \\xHH escapes."""
    return render_bytes(base64_to_bytes(input))


def hex_tokens_to_bytes(input: str) -> bytes:
    """Decode whitespace-separated 0xHH tokens to raw bytes."""
    out = bytearray()
    for index, token in enumerate(input.split()):
        if (
            len(token) != 4
            or not token.startswith("0x")
            or any(c not in "0123456789abcdefABCDEF" for c in token[2:])
        ):
            raise DecodeError(f"malformed token {token!r} at index {index}")
        high = "0123456789abcdef".index(token[2].lower())
        low = "0123456789abcdef".index(token[3].lower())
        out.append(high * 16 + low)
    return bytes(out)


def decode_hex_bytes(input: str) -> str:
    """Decode "0x48 0x69" style byte listings to text."""
    return render_bytes(hex_tokens_to_bytes(input))


def render_bytes(data: bytes) -> str:
    """Render bytes as text, escaping non-printables as \\xHH."""
    parts = []
    for byte in data:
        if byte in _PRINTABLE or byte in (0x09, 0x0A, 0x0D):
            parts.append(chr(byte))
        else:
            parts.append(f"\\x{byte:02x}")
    return "".join(parts)


def strings_extract(path: str | Path, min_length: int = 4) -> list[str]:
    """Maximal printable runs of length >= min_length, in file order."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    data = path.read_bytes()
    results: list[str] = []
    run: list[str] = []
    for byte in data:
        if byte in _PRINTABLE:
            run.append(chr(byte))
        else:
            if len(run) >= min_length:
                results.append("".join(run))
            run = []
    if len(run) >= min_length:
        results.append("".join(run))
    return results
