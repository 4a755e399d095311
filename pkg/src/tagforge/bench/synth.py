"""Synthetic corpora and needle sets for tests, fixtures, and smoke runs.

Filler vocabulary and needle names are drawn from disjoint word lists, so a
synthetic needle can never collide with filler text.
"""

from __future__ import annotations

import random

from ..core import Document
from .haystack import NeedleSpec

_FILLER_WORDS = (
    "the old mill stood beside a quiet river while grey clouds drifted over "
    "distant hills and the town below kept its slow habits through every "
    "season traders carried grain along the road and children counted boats "
    "from the stone bridge evening light settled on rooftops as lamps were "
    "lit one by one and somewhere a bell marked the hour for those still "
    "working fields stretched north under long rows of poplars their leaves "
    "turning with the wind rain came often in spring filling cisterns and "
    "softening paths between gardens travellers rested at the inn telling "
    "small stories of markets and weather none of which changed anything "
    "important yet all of which were remembered for a while"
).split()

_NAME_STEMS = ("Vel", "Bran", "Cor", "Dal", "Fen", "Gar", "Hol", "Jas", "Kel",
               "Lor", "Mar", "Nor", "Pel", "Quin", "Ras", "Sol", "Tam", "Ul",
               "Van", "Wen", "Xan", "Yor", "Zel", "Ald", "Ber", "Cas", "Dor",
               "Eir", "Fal")
_NAME_ENDS = ("a", "ik", "or", "en", "ura", "is", "an", "elle", "o", "eth")

_OBJECTS = ("bronze sextant", "glass terrarium", "walnut chessboard",
            "copper astrolabe", "woven hammock", "silver tuning fork",
            "ceramic kiln", "leather satchel", "marble sundial",
            "brass telescope", "oak barometer", "velvet armchair",
            "tin weathervane", "ivory metronome", "pewter lantern")

_PLACES = ("Semper Opera House", "Harbor Lighthouse", "Grand Conservatory",
           "Old Observatory", "North Aqueduct", "Clocktower Archive",
           "River Bathhouse", "Salt Market Hall", "Glass Foundry",
           "Stone Amphitheatre", "Botanical Rotunda", "Customs House")


def synthetic_sentence(rng: random.Random, min_words: int = 6, max_words: int = 14) -> str:
    n = rng.randint(min_words, max_words)
    words = [rng.choice(_FILLER_WORDS) for _ in range(n)]
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def synthetic_entity_sentence(rng: random.Random) -> str:
    """Filler that mentions a place or object, so gazetteers find spans."""
    lead = [rng.choice(_FILLER_WORDS) for _ in range(rng.randint(3, 7))]
    lead[0] = lead[0].capitalize()
    if rng.random() < 0.5:
        return " ".join(lead) + f" near the {rng.choice(_PLACES)}."
    return " ".join(lead) + f" beside a {rng.choice(_OBJECTS)}."


def synthetic_corpus(n_docs: int = 20, sentences_per_doc: int = 40,
                     seed: int = 97, shared_pool: int = 120) -> list[Document]:
    """Documents assembled from a shared sentence pool, so exact duplicate
    sentences occur across (and within) documents. Roughly a quarter of the
    pool mentions gazetteer-taggable places or objects."""
    rng = random.Random(seed)
    pool = [synthetic_entity_sentence(rng) if i % 4 == 0 else synthetic_sentence(rng)
            for i in range(shared_pool)]
    docs = []
    for d in range(n_docs):
        sentences = [pool[rng.randrange(len(pool))] for _ in range(sentences_per_doc)]
        docs.append(Document(id=f"book-{d:03d}", text=" ".join(sentences),
                             meta={"source": "synthetic", "seed": str(seed)}))
    return docs


def synthetic_needles(n: int = 58, seed: int = 11) -> list[NeedleSpec]:
    rng = random.Random(seed)
    names: list[str] = []
    while len(names) < n:
        name = rng.choice(_NAME_STEMS) + rng.choice(_NAME_ENDS)
        if name not in names:
            names.append(name)
    needles = []
    for i, name in enumerate(names):
        # Object/place pairs stay unique while i < lcm(15, 12) = 60, so every
        # question is unambiguous across the standard 58-needle set.
        obj = _OBJECTS[i % len(_OBJECTS)]
        place = _PLACES[i % len(_PLACES)]
        needles.append(NeedleSpec(
            id=f"needle-{i:03d}",
            needle_text=f"{name} keeps a {obj} next to the {place}.",
            question=f"Which character keeps a {obj} near the {place}?",
            gold_answers=(name,),
            keywords=(obj, place),
        ))
    if len({n.question for n in needles}) != len(needles):
        raise ValueError("synthetic needle questions must be unique")
    return needles
