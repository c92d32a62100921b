"""Generate the codepoint range tables used by the GPT-2 pre-tokenizer."""
import pathlib

import regex

ROOT = pathlib.Path(__file__).resolve().parent.parent

def ranges(pattern):
    rx = regex.compile(pattern)
    out, start = [], None
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            hit = False
        else:
            hit = rx.fullmatch(chr(cp)) is not None
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out

def emit(name, rs):
    body = ",\n".join(f"    {{0x{a:X}, 0x{b:X}}}" for a, b in rs)
    return f"inline constexpr CodepointRange {name}[] = {{\n{body}\n}};\n"

def main():
    text = "// Generated by scripts/gen_unicode_tables.py. Do not edit.\n#pragma once\n\n"
    text += "namespace ooc::bpe::detail {\n\n"
    text += emit("kLetterRanges", ranges(r"\p{L}"))
    text += "\n" + emit("kNumberRanges", ranges(r"\p{N}"))
    text += "\n" + emit("kSpaceRanges", ranges(r"\s"))
    text += "\n}  // namespace ooc::bpe::detail\n"
    (ROOT / "src/bpe/unicode_tables.inc").write_text(text)

if __name__ == "__main__":
    main()
