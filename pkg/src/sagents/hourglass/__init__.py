"""The hourglass agent: monitor, plan state and the step loop."""

from .agent import (
    COMMISSIONER, AgentEnv, AuthorityViolation, HourglassAgent, Role, StepOutcome, agent_step, monitor_progress,
    plan_actions, plan_tasks,
)
from .monitor import EmptyTask, ProgressJudgment, TaskStatus, judge_progress, parse_judgment
from .plan import ActionQueue, Assignment, MalformedPlan, PlanState, Stage, UnparseableTodoList, parse_plan

__all__ = [
    "COMMISSIONER", "AgentEnv", "AuthorityViolation", "HourglassAgent", "Role", "StepOutcome", "agent_step",
    "monitor_progress", "plan_actions", "plan_tasks", "EmptyTask", "ProgressJudgment", "TaskStatus",
    "judge_progress", "parse_judgment", "ActionQueue", "Assignment", "MalformedPlan", "PlanState", "Stage",
    "UnparseableTodoList", "parse_plan",
]
