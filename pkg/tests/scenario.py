"""Hand-built worlds for scenario tests."""
import numpy as np

from gridpursuit.world import Role, WorldState


def make_world(height, width, pursuers=(), evaders=(), obstacles=(), captured=(), dead=()):
    """Pursuers get ids 0..P-1 and evaders P.. in the order given."""
    cells = list(pursuers) + list(evaders)
    n = len(cells)
    grid = np.zeros((height, width), bool)
    for r, c in obstacles:
        grid[r, c] = True
    alive = np.ones(n, bool)
    cap = np.zeros(n, bool)
    for i in captured:
        cap[i] = True
    for i in dead:
        alive[i] = False
    return WorldState(
        width=width, height=height, obstacles=grid,
        positions=np.array(cells, dtype=np.int64).reshape(n, 2),
        roles=np.array([Role.PURSUER] * len(pursuers) + [Role.EVADER] * len(evaders), dtype=np.int8),
        alive=alive, captured=cap,
    )
