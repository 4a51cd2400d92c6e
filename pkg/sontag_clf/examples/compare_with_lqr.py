"""
Example: Sontag Feedback vs LQR on the Double Integrator
---------------------------------------------------------
This script builds Sontag's formula from two CLFs of the catalog entry
"double_integrator" (the Riccati solution and a non-optimal quadratic),
simulates both next to the LQR baseline from the same initial states and
prints the distorted cost J4, the classical cost J5 and the λ range of each
run. With the Riccati CLF λ stays at 1 and all three costs coincide.
"""

import sys
from pathlib import Path

# Add the parent directory to the path so Python can find 'sontag_clf'
sys.path.append(str(Path(__file__).resolve().parents[2]))
from sontag_clf import LinearFeedback, SontagController, get_entry, simulate, solve_care
from sontag_clf.sim import costs

INITIAL_STATES = [(1.0, 0.0), (0.0, 1.0), (-2.0, 1.5)]


def main():
    entry = get_entry("double_integrator")
    solution = solve_care(entry.linear, entry.weights)
    controllers = {
        "sontag/riccati": SontagController(entry.system, entry.clf("riccati"), entry.weights),
        "sontag/quadratic_alt": SontagController(entry.system, entry.clf("quadratic_alt"), entry.weights),
        "lqr": LinearFeedback(solution.K, clf=entry.clf("riccati")),
    }

    print(f"{'controller':<22}{'x0':<14}{'J4':>12}{'J5':>12}{'min λ':>10}{'max λ':>10}")
    for x0 in INITIAL_STATES:
        for name, ctrl in controllers.items():
            traj = simulate(ctrl, entry.system, x0, weights=entry.weights, label=name)
            j4, j5 = costs(traj, tail_corrected=True)
            lam = traj.lambda_stats()
            print(f"{name:<22}{str(x0):<14}{j4:>12.6f}{j5:>12.6f}{lam['min']:>10.4f}{lam['max']:>10.4f}")


if __name__ == "__main__":
    main()
