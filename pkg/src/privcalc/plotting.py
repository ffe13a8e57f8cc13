"""Figures for tester reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_test_report(report: dict, path) -> str:
    """Plot the most suspicious pair of a stochastic-test report.

    Left: estimated event probabilities under x and e^eps times those
    under x' across thresholds.  Right: -log10 p-values of every test with
    the Bonferroni rejection line.
    """
    tests = report.get("tests") or []
    eps = report["claimed_epsilon"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    if tests:
        worst = min(tests, key=lambda r: r["pvalue"])
        sel = sorted(
            (r for r in tests if r["pair"] == worst["pair"] and r["direction"] == worst["direction"]
             and r["event"] == worst["event"]),
            key=lambda r: r["threshold"],
        )
        ts = [r["threshold"] for r in sel]
        ax1.plot(ts, [r["p1"] for r in sel], "o-", label=r"$\hat p_1$ = Pr[M(x) in E]")
        ax1.plot(ts, [min(1.0, math.exp(eps) * r["p2"]) for r in sel], "s--",
                 label=r"$e^{\varepsilon}\,\hat p_2$")
        ax1.set_xlabel(f"threshold t (event: output {worst['event']} t)")
        ax1.set_ylabel("probability")
        ax1.set_title(f"pair {worst['pair']}, direction {worst['direction']}")
        ax1.legend(frameon=False)

        scores = [-math.log10(max(r["pvalue"], 1e-300)) for r in tests]
        ax2.plot(range(len(scores)), scores, ".", color="0.3")
        level = report.get("bonferroni_level")
        if level:
            ax2.axhline(-math.log10(level), color="C3", lw=1, label="Bonferroni level")
            ax2.legend(frameon=False)
        ax2.set_xlabel("test index")
        ax2.set_ylabel(r"$-\log_{10}$ p-value")
    else:
        ax1.text(0.5, 0.5, "no tests run", ha="center", va="center", transform=ax1.transAxes)
        ax2.axis("off")

    fig.suptitle(f"{report['verdict']}  (claimed epsilon = {eps:g}, n = {report['samples']})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
