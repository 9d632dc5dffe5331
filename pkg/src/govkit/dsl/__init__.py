"""Policy language: parser and capability-sandboxed interpreter."""

from .parser import PolicyProgram, parse_policy_source
from .interpreter import ExecutionBudget, FunctionOutcome, evaluate_policy_function
from .host import SandboxEnvironment, host_api_surface

__all__ = [
    "PolicyProgram",
    "parse_policy_source",
    "ExecutionBudget",
    "FunctionOutcome",
    "evaluate_policy_function",
    "SandboxEnvironment",
    "host_api_surface",
]
