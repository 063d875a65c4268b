"""Seeded generator for benchmark-format test files.

Produces text in the paired pickup-and-delivery layout so the parser, the
augmentation path and the solvers can be exercised without shipping any
third-party data files.
"""

from .util import rng_for


def synthetic_lilim(customers: int, seed: int = 0, capacity: int = 200, vehicle_header: int = 10, span: int = 100) -> str:
    """Text of a random paired instance with `customers` customer rows (must be even)."""
    if customers < 2 or customers % 2:
        raise ValueError("customers must be a positive even number")
    rng = rng_for(seed, "synth", customers)
    lines = [f"{vehicle_header}\t{capacity}\t1"]
    coords = [(rng.randint(0, span), rng.randint(0, span)) for _ in range(customers + 1)]
    ids = list(range(1, customers + 1))
    rng.shuffle(ids)
    demand = {}
    sibling = {}
    for i in range(0, customers, 2):
        p, d = ids[i], ids[i + 1]
        q = rng.randint(5, min(40, capacity))
        demand[p], demand[d] = q, -q
        sibling[p], sibling[d] = (0, d), (p, 0)
    for node in range(customers + 1):
        x, y = coords[node]
        if node == 0:
            lines.append(f"0\t{x}\t{y}\t0\t0\t10000\t0\t0\t0")
        else:
            pk, dl = sibling[node]
            lines.append(f"{node}\t{x}\t{y}\t{demand[node]}\t0\t10000\t90\t{pk}\t{dl}")
    return "\n".join(lines) + "\n"
