from .export import PLAN_COLUMNS, plan_to_csv
from .human import (TERMS, HumanPlanProblem, HumanPlanSolution, Infeasible, constraint_violation,
                    decode, encode, human_cost, human_value_grad, rollout_human, shift_plan,
                    solve_human_plan)
from .oracles import LinearLawModel, human_recursion_law, tension_law, tracking_law, vdcm_law
from .robot import (RobotPlanProblem, RobotPlanSolution, robot_cost, robot_value_grad, rollout_robot,
                    shift_commands, solve_robot_plan)
from .shooting import ShootingConfig, ShootingResult, cem_minimize, lbfgsb_refine, projected_gradient, refine
