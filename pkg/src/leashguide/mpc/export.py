"""CSV dump of one solved planning cycle."""

from __future__ import annotations

import csv
import io

PLAN_COLUMNS = ["k", "F_x", "F_y", "F", "l", "theta", "xh_x", "xh_y", "xr_x", "xr_y", "u_x", "u_y", "u_w"]


def plan_to_csv(waypoints, human, robot=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLAN_COLUMNS)
    for k in range(len(waypoints)):
        u = robot.u[k] if robot is not None and k < len(robot.u) else (float("nan"),) * 3
        w.writerow([k] + [repr(float(v)) for v in (
            human.F[k, 0], human.F[k, 1], human.magnitude[k], human.l[k], human.theta[k],
            waypoints[k][0], waypoints[k][1], human.robot_targets[k, 0], human.robot_targets[k, 1],
            u[0], u[1], u[2])])
    return buf.getvalue()
