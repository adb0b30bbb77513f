#!/usr/bin/env python3
"""Generates data/topics.jsonl: 1,000 short news-style sentences in 4 topics.

Most examples draw their content words from one topic. About 15% mix in
words from a second topic and 4% carry a flipped label, so the corpus has
easy, ambiguous and mislabeled regions.
"""

import json
import random
import sys

TOPICS = {
    "sports": "match goal team coach season league striker keeper tournament final score referee stadium "
              "player injury transfer champion medal race victory defeat fans pitch".split(),
    "politics": "senate vote election minister parliament law policy campaign mayor governor debate bill "
                "party reform budget tax coalition ballot court treaty diplomat president".split(),
    "tech": "software chip startup laptop network server cloud app robot algorithm data device "
            "processor code update battery browser security encryption smartphone platform launch".split(),
    "health": "doctor hospital vaccine patient virus clinic therapy disease nurse symptoms diet "
              "surgery trial medicine cancer fitness sleep infection study heart protein".split(),
}
FILLER = ("the a an of to in on for with and but after before today yesterday new big small "
          "report says said local national week year first last more most early late").split()
LABELS = list(TOPICS)


def sentence(rng, topic, other):
    n = rng.randint(8, 30)
    words = []
    for _ in range(n):
        r = rng.random()
        if r < 0.45:
            words.append(rng.choice(FILLER))
        elif other is not None and r < 0.7:
            words.append(rng.choice(TOPICS[other]))
        else:
            words.append(rng.choice(TOPICS[topic]))
    text = " ".join(words)
    text = text[0].upper() + text[1:]
    if rng.random() < 0.3:
        cut = rng.randint(2, len(words) - 2)
        text = " ".join(text.split()[:cut]) + ", " + " ".join(text.split()[cut:])
    return text + rng.choice([".", ".", ".", "!", "?"])


def main(out_path, n=1000, seed=1234):
    rng = random.Random(seed)
    with open(out_path, "w", encoding="utf-8") as f:
        for i in range(n):
            topic = LABELS[i % len(LABELS)]
            other = None
            if rng.random() < 0.15:
                other = rng.choice([t for t in LABELS if t != topic])
            label = topic
            if rng.random() < 0.04:
                label = rng.choice([t for t in LABELS if t != topic])
            rec = {"id": f"topics-{i:04d}", "text": sentence(rng, topic, other), "label": label}
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "topics.jsonl")
