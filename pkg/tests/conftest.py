"""Shared helpers: randomized general models, ledger replay reference."""

import numpy as np

from latgas import Extraction, ResidenceLedger, TableModel, validate_model


def _rate(rng):
    return float(np.exp(rng.uniform(np.log(0.2), np.log(2.0))))


def _draw_table_model(size, rng, p_keep=0.85):
    candidates = [frozenset({x}) for x in range(size)]
    for _ in range(2):
        k = int(rng.integers(2, min(3, size) + 1))
        sites = rng.choice(size, size=k, replace=False)
        candidates.append(frozenset(int(s) for s in sites))
    injections, diffusions, extractions = [], [], []
    for mask in range(1 << size):
        occ = [(mask >> x) & 1 for x in range(size)]
        for x in range(size):
            if not occ[x] and rng.random() < p_keep:
                injections.append((mask, x, _rate(rng)))
        for x in range(size):
            if not occ[x]:
                continue
            for y in range(size):
                if y != x and not occ[y] and rng.random() < 0.5:
                    diffusions.append((mask, x, y, _rate(rng)))
        for v in candidates:
            if all(occ[x] for x in v) and rng.random() < p_keep:
                extractions.append((mask, tuple(v), _rate(rng)))
    return TableModel(size, injections, diffusions, extractions)


def random_table_model(size, seed, p_keep=0.85):
    """A random general model (sparse rates, multi-site extractions), irreducible.

    Candidates failing the irreducibility audit are rejected and redrawn, so
    the returned model is always valid; the draw is deterministic in seed.
    """
    for attempt in range(50):
        rng = np.random.default_rng((seed, attempt))
        model = _draw_table_model(size, rng, p_keep)
        if validate_model(model).ok:
            return model
    raise RuntimeError(f"no irreducible random model found for seed {seed}")


def ledger_reference(records):
    """Replay records through a ledger, collecting owner snapshots per jump
    and the exit jump index of every particle id."""
    ledger = ResidenceLedger(records[0].config)
    owners = [list(ledger._owner)]
    exit_index = {}
    for rec in records[1:]:
        if isinstance(rec.event, Extraction):
            for x in rec.event.sites:
                exit_index[ledger._owner[x]] = rec.index
        ledger.observe(rec)
        owners.append(list(ledger._owner))
    return owners, exit_index
