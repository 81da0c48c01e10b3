from pohozaev.solver.energy import action_I, pohozaev_J, project, project_t
from pohozaev.solver.mmap import SolveResult, solve

__all__ = ["action_I", "pohozaev_J", "project", "project_t", "SolveResult", "solve"]
