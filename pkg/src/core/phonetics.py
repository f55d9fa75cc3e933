"""
Cologne phonetics (Kölner Phonetik) encoder and phonetic distance

Rule table (letters are case-folded; context refers to the neighbouring letters
after every non-letter has been removed):

    A, E, I, J, O, U, Y, Ä, Ö, Ü   -> 0
    B                              -> 1
    P                              -> 1  (3 before H)
    D, T                           -> 2  (8 before C, S, Z)
    F, V, W                        -> 3
    G, K, Q                        -> 4
    C                              -> 4  word-initially before A, H, K, L, O, Q, R, U, X
                                     4  non-initially before A, H, K, O, Q, U, X unless after S, Z
                                     8  otherwise
    X                              -> 48 (8 after C, K, Q)
    L                              -> 5
    M, N                           -> 6
    R                              -> 7
    S, Z, ß                        -> 8
    H                              -> no code

Post-processing: collapse runs of equal digits, delete every '0' that is not
the first character, then collapse again so no two adjacent digits are equal.
"""

from typing import List

from rapidfuzz.distance import Levenshtein

VOWELS = frozenset("aeijouyäöü")
ENCODABLE = frozenset("abcdefghijklmnopqrstuvwxyzäöüß")

_SIMPLE_CODES = {
    "b": "1",
    "f": "3", "v": "3", "w": "3",
    "g": "4", "k": "4", "q": "4",
    "l": "5",
    "m": "6", "n": "6",
    "r": "7",
    "s": "8", "z": "8", "ß": "8",
}

_C_INITIAL_HARD = frozenset("ahkloqrux")
_C_HARD = frozenset("ahkoqux")


def _letters(s: str) -> str:
    """Case-folded letters the rule table knows; everything else is skipped"""
    return "".join(ch for ch in s.lower() if ch in ENCODABLE)


def _letter_code(letters: str, i: int) -> str:
    """Raw code of the letter at position i, given its neighbours"""
    ch = letters[i]
    prev = letters[i - 1] if i > 0 else ""
    nxt = letters[i + 1] if i + 1 < len(letters) else ""

    if ch in VOWELS:
        return "0"
    if ch == "h":
        return ""
    if ch == "p":
        return "3" if nxt == "h" else "1"
    if ch in "dt":
        return "8" if nxt in ("c", "s", "z") else "2"
    if ch == "c":
        if i == 0:
            return "4" if nxt in _C_INITIAL_HARD else "8"
        if prev in ("s", "z"):
            return "8"
        return "4" if nxt in _C_HARD else "8"
    if ch == "x":
        return "8" if prev in ("c", "k", "q") else "48"
    return _SIMPLE_CODES[ch]


def collapse_repeats(code: str) -> str:
    """Merge runs of equal digits into one"""
    out: List[str] = []
    for digit in code:
        if not out or out[-1] != digit:
            out.append(digit)
    return "".join(out)


def strip_zeros(code: str) -> str:
    """Delete every '0' except a leading one"""
    if not code:
        return code
    return code[0] + code[1:].replace("0", "")


def postprocess(raw: str) -> str:
    """Collapse, strip non-leading zeros, collapse again"""
    return collapse_repeats(strip_zeros(collapse_repeats(raw)))


def cologne_encode(s: str) -> str:
    """Cologne phonetic code of s; empty when s holds no encodable letter"""
    letters = _letters(s)
    raw = "".join(_letter_code(letters, i) for i in range(len(letters)))
    return postprocess(raw)


def phonetic_dist(x: str, y: str) -> float:
    """Length-normalized edit distance between the phonetic codes of x and y"""
    cx = cologne_encode(x)
    cy = cologne_encode(y)
    if cx == cy:
        return 0.0
    if not cx or not cy:
        return 1.0
    return Levenshtein.normalized_distance(cx, cy)
