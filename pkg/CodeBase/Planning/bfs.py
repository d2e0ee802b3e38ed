"""
Breadth-First Search (BFS) Distance Map

This module implements a multi-source BFS over the grid cells. Starting from
the goal cells (the stag), it labels every cell with its number of steps to
the nearest goal, which is what the deterministic shortest-path baseline
needs. BFS uses a FIFO queue and a closed set, so each cell is expanded once.
"""

from collections import deque

from CodeBase.errors import ModelError


class BFSDistanceMap:
    """
    Shortest 4-connected step counts from every cell to a set of goal cells.

    The map is built once in the constructor; ``next_step`` and ``plan`` then
    read it. Ties between equidistant moves go to the lowest-indexed cell.
    """

    def __init__(self, grid_spec, goals):
        """
        Run BFS from the goal cells.

        Args:
            grid_spec: GridSpec providing geometry and neighbours
            goals: Iterable of goal cell indices
        """
        self.grid_spec = grid_spec
        self.goals = sorted(set(int(g) for g in goals))
        if not self.goals:
            raise ModelError("BFS needs at least one goal cell")
        # Statistics
        self.expanded_count = 0
        self.distances = self._search()

    def _search(self):
        dist = {g: 0 for g in self.goals}
        open_queue = deque(self.goals)
        closed = set()

        while open_queue:
            current = open_queue.popleft()
            self.expanded_count += 1
            closed.add(current)
            for nxt in self.grid_spec.neighbors(current):
                if nxt not in closed and nxt not in dist:
                    dist[nxt] = dist[current] + 1
                    open_queue.append(nxt)
        return dist

    def distance(self, cell):
        """
        Steps from ``cell`` to the nearest goal.

        Raises:
            ModelError: If no goal is reachable from ``cell``
        """
        if cell not in self.distances:
            raise ModelError(f"No goal cell reachable from cell {cell}")
        return self.distances[cell]

    def next_step(self, cell):
        """
        One move along a shortest path; goal cells stay put.

        Args:
            cell: Current cell

        Returns:
            Next cell (lowest index among equally good moves)
        """
        d = self.distance(cell)
        if d == 0:
            return cell
        for nxt in self.grid_spec.neighbors(cell):
            if self.distances.get(nxt) == d - 1:
                return nxt
        raise ModelError(f"BFS distance map inconsistent at cell {cell}")

    def plan(self, start):
        """
        Full shortest path from ``start`` to the nearest goal.

        Returns:
            List of cells from start to goal, both included
        """
        path = [start]
        current = start
        while self.distance(current) > 0:
            current = self.next_step(current)
            path.append(current)
        return path
