"""Independent reference implementations used to check the package.

Nothing here imports anonkit.
"""

from __future__ import annotations

import hashlib
import xml.etree.ElementTree as ET


def hmac_sha256_oracle(key: bytes, message: bytes) -> str:
    """HMAC-SHA256 written out from the definition (ipad/opad), hex digest."""
    block = 64
    if len(key) > block:
        key = hashlib.sha256(key).digest()
    key = key.ljust(block, b"\x00")
    inner = hashlib.sha256(bytes(b ^ 0x36 for b in key) + message).digest()
    return hashlib.sha256(bytes(b ^ 0x5C for b in key) + inner).hexdigest()


def canonical_bytes(type_name: str, value: str) -> bytes:
    return type_name.encode() + b"\x1f" + value.encode()


# RFC 4231 test cases 1-7: (key, data, expected hex, truncate-to-hex-chars)
RFC4231_VECTORS = [
    (b"\x0b" * 20, b"Hi There",
     "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7", 64),
    (b"Jefe", b"what do ya want for nothing?",
     "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843", 64),
    (b"\xaa" * 20, b"\xdd" * 50,
     "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe", 64),
    (bytes(range(1, 26)), b"\xcd" * 50,
     "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b", 64),
    (b"\x0c" * 20, b"Test With Truncation",
     "a3b6167473100ee06e0c796c2955552b", 32),
    (b"\xaa" * 131, b"Test Using Larger Than Block-Size Key - Hash Key First",
     "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54", 64),
    (b"\xaa" * 131,
     b"This is a test using a larger than block-size key and a larger than block-size data. "
     b"The key needs to be hashed before being used by the HMAC algorithm.",
     "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2", 64),
]


def xml_shape(data: bytes):
    """Preorder (tag, sorted attribute names) sequence via the stdlib parser."""
    root = ET.fromstring(data)
    return [(el.tag, tuple(sorted(el.attrib))) for el in root.iter()]


def xml_element_stats(data: bytes) -> tuple[int, int]:
    """(element count, max depth) by explicit stack walk."""
    root = ET.fromstring(data)
    count, depth = 0, 0
    stack = [(root, 1)]
    while stack:
        el, d = stack.pop()
        count += 1
        depth = max(depth, d)
        stack.extend((c, d + 1) for c in el)
    return count, depth


def xml_tree(data: bytes):
    """Full comparable tree: tag, attributes, text, tail, children (comments dropped)."""
    def walk(el):
        return (el.tag, dict(el.attrib), el.text or "", el.tail or "", [walk(c) for c in el])
    return walk(ET.fromstring(data))


def json_shape(node):
    """Structure with every string leaf replaced by a marker."""
    if isinstance(node, dict):
        return {k: json_shape(v) for k, v in node.items()}
    if isinstance(node, list):
        return [json_shape(v) for v in node]
    if isinstance(node, str):
        return "<str>"
    return node


def splice_check(original: str, anonymized: str, spans_and_tokens) -> bool:
    """Rebuild ``anonymized`` from ``original`` by splicing tokens at byte spans."""
    raw = original.encode()
    out = []
    cursor = 0
    for (start, end), token in sorted(spans_and_tokens):
        out.append(raw[cursor:start])
        out.append(token.encode())
        cursor = end
    out.append(raw[cursor:])
    return b"".join(out).decode() == anonymized
