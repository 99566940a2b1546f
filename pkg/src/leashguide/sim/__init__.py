from .agents import (HumanAgentModel, LeashModel, RobotResponseModel, step_human, step_robot,
                     synthetic_subjects)
from .collection import (MODES, Track, collect_human_data, collect_robot_data,
                         run_collection_protocol)
from .episode import TRACE_COLUMNS, EpisodeTrace, GuidanceConfig, PlanStep, plan_step, run_guided_episode
from .scenario import BUILTIN_MAPS, ScenarioError, ScenarioSpec, plan_route, walled_map
