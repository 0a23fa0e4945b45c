"""Low-frequency h-trends for the Gaussian preset: fitted beta per norm.

    python3 scripts/h_trends.py
"""

from displab.config import ExperimentConfig
from displab.suites import task_trends


def main():
    for rep in task_trends(ExperimentConfig()):
        vals = ", ".join(f"{v:.4g}" for v in rep.values)
        print(f"{rep.bound_id:<6} beta={rep.beta:7.3f} monotone={rep.monotone!s:<5} "
              f"ok={rep.ok!s:<5} values(h={', '.join(f'{h:g}' for h in rep.h)}): {vals}")


if __name__ == "__main__":
    main()
