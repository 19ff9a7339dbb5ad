import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


@dataclass(frozen=True)
class ExecutionOptions:
    threads: int = 1
    progress: bool = False


def blocks(count: int, size: int) -> List[slice]:
    """
    Splits range(count) into consecutive slices of `size`.
    The split never depends on the worker count.
    """
    return [slice(start, min(start + size, count)) for start in range(0, count, size)]


def ordered_map(fn: Callable[[T], R], items: Sequence[T], options: ExecutionOptions,
                desc: Optional[str] = None) -> Iterator[R]:
    """
    Yields fn(item) in submission order. With more than one thread, at most
    2 * threads jobs are in flight at a time.
    """
    pbar = tqdm(total=len(items), desc=desc, unit="block", leave=False, disable=not options.progress)
    try:
        if options.threads <= 1:
            for item in items:
                yield fn(item)
                pbar.update(1)
            return

        window = 2 * options.threads
        with ThreadPoolExecutor(max_workers=options.threads) as executor:
            pending = deque()
            queue = iter(items)
            for item in queue:
                pending.append(executor.submit(fn, item))
                if len(pending) >= window:
                    break
            while pending:
                result = pending.popleft().result()
                nxt = next(queue, None)
                if nxt is not None:
                    pending.append(executor.submit(fn, nxt))
                yield result
                pbar.update(1)
    finally:
        pbar.close()


def parallel_map(fn: Callable[[T], R], items: Sequence[T], options: ExecutionOptions,
                 desc: Optional[str] = None) -> List[R]:
    return list(ordered_map(fn, items, options, desc))


def tree_reduce(values: Iterable[T]) -> T:
    """
    Pairwise sum whose tree shape depends only on how many values arrive:
    ((v0 + v1) + (v2 + v3)) + ... built with a binary carry stack.
    """
    stack = []  # (level, partial sum)
    for value in values:
        level = 0
        while stack and stack[-1][0] == level:
            _, left = stack.pop()
            value = left + value
            level += 1
        stack.append((level, value))
    if not stack:
        raise ValueError("tree_reduce needs at least one value")
    total = stack.pop()[1]
    while stack:
        total = stack.pop()[1] + total
    return total
