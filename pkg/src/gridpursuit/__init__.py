"""Grid-world pursuit-evasion with explicit collision semantics."""
from .world import Action, Position, Role, WorldState, new_world
from .collision import CollisionType, Outcome, OutcomeMatrix, classify, resolve
from .tasks import CaptureMode, GameStatus, TaskSpec, TASK_NAMES, task_spec
from .env import EnvConfig, PursuitEvasionEnv, RewardTable, StepOutcome

__version__ = "0.1.0"
