"""Independent reference for the local hashing embedder.

Prints golden vectors (IEEE-754 bit patterns) frozen into test_embed.cpp.
"""
import math
import struct
import sys

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK
    return h


def tokens(text: str):
    out, cur = [], bytearray()
    for b in text.encode("utf-8"):
        if (48 <= b <= 57) or (97 <= b <= 122) or (65 <= b <= 90) or b >= 0x80:
            cur.append(b + 32 if 65 <= b <= 90 else b)
        elif cur:
            out.append(bytes(cur))
            cur = bytearray()
    if cur:
        out.append(bytes(cur))
    return out


def embed(text: str, dim: int):
    acc = [0.0] * dim
    for tok in tokens(text):
        h = fnv1a64(tok)
        acc[h % dim] += 1.0 if ((h >> 32) & 1) == 0 else -1.0
    sq = 0.0
    for x in acc:
        sq += x * x
    norm = math.sqrt(sq)
    if norm == 0.0:
        return [1.0] + [0.0] * (dim - 1)
    return [x / norm for x in acc]


def bits(x: float) -> str:
    return "0x%016x" % struct.unpack("<Q", struct.pack("<d", x))[0]


if __name__ == "__main__":
    cases = [
        ("Text written in Russian, provided as a sentence, paragraph, or document.", 16),
        ("Hello hello HELLO world", 8),
        ("Übersetzung: Hände hoch! 123 abc_def", 16),
        ("", 8),
        ("a b c d e f g h i j k l m n o p", 32),
    ]
    for text, dim in cases:
        print(repr(text), dim)
        print("  ", ", ".join(bits(x) for x in embed(text, dim)))
    print("fnv1a64('') =", hex(fnv1a64(b"")), " fnv1a64('a') =", hex(fnv1a64(b"a")),
          " fnv1a64('foobar') =", hex(fnv1a64(b"foobar")))
