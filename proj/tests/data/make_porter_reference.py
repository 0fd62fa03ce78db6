"""Regenerates porter_reference.tsv from NLTK's original-algorithm Porter stemmer.

Words are harvested from the Python standard library sources, then a fixed
stride sample is taken so the list is stable across regenerations.
"""
import pathlib
import re
import sysconfig

from nltk.stem.porter import PorterStemmer

CLASSIC = """caresses ponies ties caress cats feed agreed plastered bled motoring sing
conflated troubled sized hopping tanned falling hissing fizzed failing filing happy sky
relational conditional rational valenci hesitanci digitizer conformabli radicalli
differentli vileli analogousli vietnamization predication operator feudalism
decisiveness hopefulness callousness formaliti sensitiviti sensibiliti triplicate
formative formalize electriciti electrical hopeful goodness revival allowance inference
airliner gyroscopic adjustable defensible irritant replacement adjustment dependent
adoption homologou communism activate angulariti homologous effective bowdlerize
probate rate cease controll roll generalizations oscillators denoising clustering
learning semantic models topic""".split()


def main():
    words = set()
    lib = pathlib.Path(sysconfig.get_paths()["stdlib"])
    for path in sorted(lib.glob("*.py")):
        text = path.read_text(errors="ignore").lower()
        words.update(w for w in re.findall(r"\b[a-z]{3,}\b", text))
    pool = sorted(words - set(CLASSIC))
    stride = max(1, len(pool) // (1000 - len(CLASSIC)))
    sample = CLASSIC + pool[::stride][: 1000 - len(CLASSIC)]
    stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
    out = pathlib.Path(__file__).with_name("porter_reference.tsv")
    with out.open("w") as f:
        for w in sample:
            f.write(f"{w}\t{stemmer.stem(w)}\n")


if __name__ == "__main__":
    main()


def idempotence_sample():
    """Writes porter_double.tsv: word, stem(word), stem(stem(word)) for ~10k words."""
    words = set()
    lib = pathlib.Path(sysconfig.get_paths()["stdlib"])
    for path in sorted(lib.rglob("*.py")):
        text = path.read_text(errors="ignore").lower()
        words.update(re.findall(r"\b[a-z]{3,}\b", text))
    pool = sorted(words)
    stride = max(1, len(pool) // 10000)
    stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
    out = pathlib.Path(__file__).with_name("porter_double.tsv")
    with out.open("w") as f:
        for w in pool[::stride][:10000]:
            s = stemmer.stem(w)
            f.write(f"{w}\t{s}\t{stemmer.stem(s)}\n")


if __name__ == "__main__":
    idempotence_sample()
