import random

import hypothesis
import numpy as np

from dcmndp.instance import make_instance

hypothesis.settings.register_profile("ci", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("ci")


def small_instance(seed: int, n: int, m: int, L: int, k: int | None = None):
    """Random connected instance with a random subset of commodities."""
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    pairs = set()
    for i in range(1, n):
        a, b = order[i], order[rng.randrange(i)]
        pairs.add((min(a, b), max(a, b)))
    free = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in pairs]
    pairs.update(rng.sample(free, min(len(free), m - (n - 1))))
    edges = []
    for u, v in sorted(pairs):
        cap, cost, menu = 0, 0, []
        for _ in range(rng.randint(1, L)):
            cap += rng.randint(1, 20)
            cost += rng.randint(1, 30)
            menu.append((cap, cost))
        edges.append((u, v, menu))
    all_pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    k = rng.randint(1, min(len(all_pairs), 6)) if k is None else k
    coms = [(s, t, rng.randint(1, 15)) for s, t in rng.sample(all_pairs, k)]
    return make_instance(n, edges, coms, name=f"small-{seed}", seed=seed)


def random_multipliers(inst, rng: np.random.Generator, scale: float = 3.0) -> np.ndarray:
    w = rng.uniform(0, scale, inst.m)
    w[rng.random(inst.m) < 0.3] = 0.0
    return w


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
