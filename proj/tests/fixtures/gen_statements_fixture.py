#!/usr/bin/env python3
"""Writes 200 statement word lists with mixed case and edge punctuation."""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent / "features" / "statements.jsonl"
WORDS = ("the city was founded in by river trade Roman empire church built century later "
         "population grew census council mayor railway station opened bridge war "
         "destroyed rebuilt museum university quark").split()


def main(seed=17):
    rng = random.Random(seed)
    with open(OUT, "w", encoding="utf-8") as f:
        for _ in range(200):
            words = []
            for _ in range(rng.randint(0, 45)):
                w = rng.choice(WORDS)
                if rng.random() < 0.2:
                    w = w.capitalize()
                if rng.random() < 0.1:
                    w = rng.choice(['"', "(", ""]) + w + rng.choice([",", ".", ")", ";"])
                words.append(w)
            f.write(json.dumps(words) + "\n")


if __name__ == "__main__":
    main()
