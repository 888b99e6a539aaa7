"""Random JSON document pairs for patch round-trip checks."""

import random

KEYS = ["a", "b", "c", "labels", "claims", "x/y", "t~0", "", "P31", "0"]


def random_scalar(rng: random.Random):
    return rng.choice([
        None, True, False, rng.randint(-5, 5), rng.random() * 10, rng.choice(["", "s", "é", "Q5"]),
    ])


def random_json(rng: random.Random, depth: int = 3):
    r = rng.random()
    if depth == 0 or r < 0.3:
        return random_scalar(rng)
    if r < 0.65:
        return {k: random_json(rng, depth - 1) for k in rng.sample(KEYS, rng.randint(0, 4))}
    return [random_json(rng, depth - 1) for _ in range(rng.randint(0, 4))]


def mutate(rng: random.Random, doc, depth: int = 3):
    """A document sharing structure with ``doc`` so diffs recurse."""
    if rng.random() < 0.2 or depth == 0:
        return random_json(rng, depth)
    if isinstance(doc, dict):
        out = {}
        for k, v in doc.items():
            roll = rng.random()
            if roll < 0.15:
                continue
            out[k] = mutate(rng, v, depth - 1) if roll < 0.5 else v
        if rng.random() < 0.3:
            out[rng.choice(KEYS)] = random_json(rng, depth - 1)
        return out
    if isinstance(doc, list):
        out = [mutate(rng, v, depth - 1) if rng.random() < 0.4 else v for v in doc]
        if out and rng.random() < 0.3:
            out.pop(rng.randrange(len(out)))
        if rng.random() < 0.3:
            out.append(random_json(rng, depth - 1))
        return out
    return random_scalar(rng)


def random_pair(rng: random.Random):
    a = random_json(rng, 4)
    return a, mutate(rng, a, 4)
