#!/usr/bin/env python3
"""Independent reference for wire format, checksum and TTL packing.

Writes frozen fixtures under tests/data. Re-running with the same seed must
reproduce the files byte for byte.
"""
import random
import struct
import sys
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"


def rfc1071(data: bytes) -> int:
    if len(data) % 2:
        data += b"\0"
    total = 0
    for (word,) in struct.iter_unpack("!H", data):
        total += word
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def ip_bytes(a: str) -> bytes:
    return bytes(int(x) for x in a.split("."))


def build(src, dst, sport, dport, seq, ack, flags, window, urg, options=b"", payload=b"",
          reserved=0, ttl=64, ident=0, tos=0, bad_checksum=None):
    while len(options) % 4:
        options += b"\0"
    doff = 5 + len(options) // 4
    tcp = struct.pack("!HHIIBBHHH", sport, dport, seq, ack, (doff << 4) | reserved, flags, window, 0, urg)
    tcp += options + payload
    pseudo = ip_bytes(src) + ip_bytes(dst) + struct.pack("!BBH", 0, 6, len(tcp))
    csum = rfc1071(pseudo + tcp)
    if csum == 0:
        csum = 0xFFFF
    if bad_checksum is not None:
        csum = bad_checksum
    tcp = tcp[:16] + struct.pack("!H", csum) + tcp[18:]
    total = 20 + len(tcp)
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, tos, total, ident, 0, ttl, 6, 0, ip_bytes(src), ip_bytes(dst))
    ip = ip[:10] + struct.pack("!H", rfc1071(ip)) + ip[12:]
    return ip + tcp, csum


def pack16(v):
    return (v << 10) | (v << 5) | v


def pack32(v):
    out = 0
    for i in range(6):
        out |= v << (5 * i)
    return out


def random_options(rng):
    opts = b""
    budget = rng.randint(0, 40)
    while True:
        kind = rng.choice(["noop", "mss", "kv", "stop"])
        if kind == "stop":
            break
        if kind == "noop" and len(opts) + 1 <= budget:
            opts += b"\x01"
        elif kind == "mss" and len(opts) + 4 <= budget:
            opts += b"\x02\x04" + struct.pack("!H", rng.randint(0, 0xFFFF))
        elif kind == "kv":
            n = rng.randint(0, 6)
            if len(opts) + 2 + n > budget:
                break
            k = rng.choice([3, 4, 5, 8, 30, 158, 200])
            opts += bytes([k, 2 + n]) + bytes(rng.randint(0, 255) for _ in range(n))
        else:
            break
    if len(opts) % 4:
        # an explicit end-of-list keeps the zero padding unambiguous
        opts += b"\x00"
    return opts


def main(seed=20261016):
    rng = random.Random(seed)
    DATA.mkdir(parents=True, exist_ok=True)

    golden = []
    syn, c = build("10.0.0.1", "10.0.0.2", 40000, 80, 0, 0, 0x02, 65535, 0)
    golden.append(("minimal_syn", syn.hex(), f"{c:04x}"))
    syn_mss, c = build("10.0.0.1", "10.0.0.2", 40000, 80, 0, 0, 0x02, 65535, 0, options=b"\x02\x04\x02\x03")
    golden.append(("syn_mss_515", syn_mss.hex(), f"{c:04x}"))
    opt_syn, c = build("10.0.0.1", "10.0.0.2", 40000, 80, 1, 0, 0x02, 65535, 0, options=b"\x01\x01\x00")
    golden.append(("syn_noop_noop_eool", opt_syn.hex(), f"{c:04x}"))
    unk_syn, c = build("10.0.0.1", "10.0.0.2", 40000, 80, 1, 0, 0x02, 65535, 0, options=b"\x9e\x04\xde\xad")
    golden.append(("syn_option_158", unk_syn.hex(), f"{c:04x}"))
    rsv_syn, c = build("10.0.0.1", "10.0.0.2", 40000, 80, 1, 0, 0x02, 65535, 0, reserved=0b0100)
    golden.append(("syn_reserved_flag2", rsv_syn.hex(), f"{c:04x}"))
    with open(DATA / "golden_segments.txt", "w") as f:
        f.write("# name hex tcp_checksum\n")
        for row in golden:
            f.write(" ".join(row) + "\n")

    with open(DATA / "ttl_packing.txt", "w") as f:
        f.write("# value pack16 pack32\n")
        for v in range(1, 31):
            f.write(f"{v} {pack16(v):04x} {pack32(v):08x}\n")

    with open(DATA / "random_segments.txt", "w") as f:
        f.write("# hex tcp_checksum\n")
        for _ in range(500):
            src = ".".join(str(rng.randint(1, 254)) for _ in range(4))
            dst = ".".join(str(rng.randint(1, 254)) for _ in range(4))
            payload = bytes(rng.randint(0, 255) for _ in range(rng.choice([0, 0, 1, 7, 64, 515, 1000])))
            pkt, c = build(src, dst, rng.randint(1, 65535), rng.randint(1, 65535), rng.getrandbits(32),
                           rng.getrandbits(32), rng.getrandbits(8), rng.getrandbits(16), rng.getrandbits(16),
                           options=random_options(rng), payload=payload, reserved=rng.getrandbits(4),
                           ttl=rng.randint(1, 255), ident=rng.getrandbits(16), tos=rng.getrandbits(8))
            f.write(f"{pkt.hex()} {c:04x}\n")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
