from typing import Any, Callable, Sequence


def find(parent: list[int], i: int) -> int:
    if parent[i] == i:
        return i
    else:
        parent[i] = find(parent, parent[i])
        return parent[i]


def union(parent: list[int], rank: list[int], x: int, y: int):
    root_x = find(parent, x)
    root_y = find(parent, y)

    if root_x != root_y:
        # union by rank keeps the tree flat
        if rank[root_x] > rank[root_y]:
            parent[root_y] = root_x
        elif rank[root_x] < rank[root_y]:
            parent[root_x] = root_y
        else:
            parent[root_y] = root_x
            rank[root_x] += 1


def merge_objects(objects: Sequence[Any], can_merge: Callable[[Any, Any], bool]) -> list[list[int]]:
    """
    group objects into the connected components of a pairwise relation

    Parameters:
    - objects: items to group
    - can_merge: symmetric predicate linking two items

    Returns:
        index groups, each sorted, ordered by their smallest index

    """
    n = len(objects)
    parent = list(range(n))
    rank = [0] * n

    for i in range(n):
        for j in range(i + 1, n):
            if can_merge(objects[i], objects[j]):
                union(parent, rank, i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        root = find(parent, i)
        groups.setdefault(root, []).append(i)

    return sorted(groups.values(), key=lambda group: group[0])
