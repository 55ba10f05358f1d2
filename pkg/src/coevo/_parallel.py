from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, jobs=1):
    """Order-preserving map, across ``jobs`` worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]
