#!/usr/bin/env python3
"""Regenerate data/typology/*.csv from URIEL vectors (pip install lang2vec).

syntactic / phonological: cosine similarity of the kNN-imputed URIEL vectors.
genetic: cosine similarity of the family-membership vectors.
geographic: great-circle distance in km between the profile coordinates.
"""
import csv
import itertools
import math
import os
import sys

import numpy as np
import lang2vec.lang2vec as l2v

ISO3 = {
    "en": "eng", "de": "deu", "fr": "fra", "es": "spa", "ja": "jpn", "zh": "cmn",
    "ar": "arb", "ko": "kor", "ru": "rus", "it": "ita", "pt": "por", "nl": "nld",
    "pl": "pol", "vi": "vie", "fi": "fin", "hu": "hun", "cs": "ces", "tr": "tur",
    "hi": "hin", "fa": "pes", "ca": "cat", "eu": "eus", "bg": "bul", "el": "ell",
    "th": "tha", "id": "ind", "ms": "zsm", "he": "heb", "uk": "ukr", "ro": "ron",
    "ur": "urd", "bn": "ben", "ta": "tam", "ka": "kat", "et": "est", "lv": "lav",
    "lt": "lit", "kk": "kaz", "uz": "uzn", "tl": "tgl", "af": "afr", "sw": "swh",
    "mr": "mar", "yo": "yor", "pa": "pan", "is": "isl", "te": "tel", "hy": "hye",
    "jv": "jav", "ne": "nep", "gu": "guj", "kn": "kan", "ml": "mal", "my": "mya",
    "cy": "cym",
}


def cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(min(1.0, max(0.0, np.dot(a, b) / (na * nb))))


def haversine_km(p, q):
    lat1, lon1, lat2, lon2 = map(math.radians, (*p, *q))
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def main(root):
    with open(os.path.join(root, "profiles.csv")) as f:
        rows = list(csv.DictReader(f))
    codes = [r["code"] for r in rows]
    coords = {r["code"]: (float(r["lat"]), float(r["lon"])) for r in rows}
    iso = [ISO3[c] for c in codes]

    out = os.path.join(root, "typology")
    os.makedirs(out, exist_ok=True)
    for facet, fs in (("syntactic", "syntax_knn"), ("phonological", "phonology_knn"), ("genetic", "fam")):
        vecs = l2v.get_features(iso, fs)
        with open(os.path.join(out, facet + ".csv"), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["lang_a", "lang_b", "value"])
            for a, b in itertools.combinations(range(len(codes)), 2):
                s = cosine(np.asarray(vecs[iso[a]], float), np.asarray(vecs[iso[b]], float))
                w.writerow([codes[a], codes[b], f"{s:.6f}"])
    with open(os.path.join(out, "geographic.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["lang_a", "lang_b", "value"])
        for a, b in itertools.combinations(codes, 2):
            w.writerow([a, b, f"{haversine_km(coords[a], coords[b]):.1f}"])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data"))
