#!/usr/bin/env python3
"""Build the kernel fixtures under crates/core/tests/fixtures.

Each fixture directory gets:
  Image          flat little-endian image loaded at 0xC0008000 (text, rodata, data)
  symbols.json   the oracle taken from the unstripped ELF: functions and objects
  build.json     how it was built

Needs clang and ld.lld. Output is deterministic for a given toolchain.
"""

import argparse
import json
import os
import struct
import subprocess
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_OUT = os.path.join(HERE, "..", "..", "crates", "core", "tests", "fixtures")

FIXTURES = [
    # name, release, version code, target, opt, filler seed, filler count
    ("linux-2.6.36", "2.6.36", 0x020624, "armv5te-none-eabi", "-O2", 1, 1400),
    ("linux-3.18.20", "3.18.20", 0x031214, "armv7a-none-eabi", "-O2", 2, 1600),
    ("linux-4.4.52", "4.4.52", 0x040434, "armv7a-none-eabi", "-Os", 3, 1800),
    ("linux-4.14.98", "4.14.98", 0x040e62, "armv5te-none-eabi", "-Os", 4, 2000),
]

CFLAGS = ["-marm", "-mno-movt", "-ffreestanding", "-fno-builtin", "-nostdlib",
          "-fno-optimize-sibling-calls", "-fno-unwind-tables", "-fno-asynchronous-unwind-tables",
          "-fno-common", "-mllvm", "-enable-shrink-wrap=false", "-w"]

SHT_SYMTAB = 2
SHT_NOBITS = 8
SHF_ALLOC = 2
STT_OBJECT = 1
STT_FUNC = 2


def sections(elf):
    (e_shoff,) = struct.unpack_from("<I", elf, 0x20)
    e_shentsize, e_shnum, e_shstrndx = struct.unpack_from("<HHH", elf, 0x2E)
    raw = []
    for i in range(e_shnum):
        raw.append(struct.unpack_from("<IIIIIIIIII", elf, e_shoff + i * e_shentsize))
    strtab = raw[e_shstrndx]
    out = []
    for s in raw:
        name_off = strtab[4] + s[0]
        name = elf[name_off:elf.index(b"\0", name_off)].decode()
        out.append({"name": name, "type": s[1], "flags": s[2], "addr": s[3], "offset": s[4],
                    "size": s[5], "link": s[6], "entsize": s[9]})
    return out


def flat_image(elf, secs, base):
    loaded = [s for s in secs if s["flags"] & SHF_ALLOC and s["type"] != SHT_NOBITS and s["size"]]
    end = max(s["addr"] + s["size"] for s in loaded)
    img = bytearray(end - base)
    for s in loaded:
        img[s["addr"] - base:s["addr"] - base + s["size"]] = elf[s["offset"]:s["offset"] + s["size"]]
    return bytes(img)


def symbols(elf, secs):
    symtab = next(s for s in secs if s["type"] == SHT_SYMTAB)
    strtab = secs[symtab["link"]]
    funcs, objects = {}, {}
    for off in range(symtab["offset"], symtab["offset"] + symtab["size"], 16):
        st_name, st_value, st_size, st_info, _, _ = struct.unpack_from("<IIIBBH", elf, off)
        kind = st_info & 0xF
        if kind not in (STT_FUNC, STT_OBJECT) or not st_name:
            continue
        p = strtab["offset"] + st_name
        name = elf[p:elf.index(b"\0", p)].decode()
        entry = {"addr": st_value & ~1, "size": st_size}
        # static locals share names across functions; keep the first
        (funcs if kind == STT_FUNC else objects).setdefault(name, entry)
    return funcs, objects


def run(cmd):
    r = subprocess.run(cmd, capture_output=True, text=True)
    if r.returncode != 0:
        sys.stderr.write(" ".join(cmd) + "\n" + r.stderr)
        sys.exit(1)


def build(fx, out_root, work):
    name, release, code, target, opt, seed, count = fx
    d = os.path.join(work, name)
    os.makedirs(d, exist_ok=True)
    filler = os.path.join(d, "filler.c")
    run([sys.executable, os.path.join(HERE, "gen_filler.py"), "--seed", str(seed), "--count", str(count), "-o", filler])
    flags = ["--target=" + target, opt] + CFLAGS
    objs = []
    for src, defs in [(os.path.join(HERE, "kernel.c"), ["-DLINUX_VERSION_CODE=%d" % code, '-DUTS_RELEASE="%s"' % release]),
                      (filler, [])]:
        obj = os.path.join(d, os.path.basename(src) + ".o")
        run(["clang"] + flags + defs + ["-I", HERE, "-c", src, "-o", obj])
        objs.append(obj)
    elf_path = os.path.join(d, "vmlinux")
    run(["ld.lld", "-T", os.path.join(HERE, "kernel.ld"), "--no-undefined", "-o", elf_path] + objs)
    with open(elf_path, "rb") as f:
        elf = f.read()
    secs = sections(elf)
    base = 0xC0008000
    image = flat_image(elf, secs, base)
    funcs, objects = symbols(elf, secs)
    out = os.path.join(out_root, name)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "Image"), "wb") as f:
        f.write(image)
    with open(os.path.join(out, "symbols.json"), "w") as f:
        json.dump({"load_base": base, "functions": funcs, "objects": objects}, f, indent=1, sort_keys=True)
    with open(os.path.join(out, "build.json"), "w") as f:
        json.dump({"release": release, "version_code": code, "target": target, "opt": opt,
                   "cflags": CFLAGS, "filler_seed": seed, "filler_count": count}, f, indent=1)
    print("%s: %d bytes, %d functions" % (name, len(image), len(funcs)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-o", "--out", default=DEFAULT_OUT)
    ap.add_argument("--only", help="build a single fixture by name")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as work:
        for fx in FIXTURES:
            if args.only and fx[0] != args.only:
                continue
            build(fx, os.path.abspath(args.out), work)


if __name__ == "__main__":
    main()
