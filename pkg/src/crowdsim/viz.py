"""Scene and report rendering.

Trajectory frames render to standalone SVG (dependency-free, diffable);
evaluation reports and value maps also get matplotlib figures written next
to their delimited outputs.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import EpisodeRecord, Vec2

PX_PER_M = 40.0


def _star_points(center: Vec2, outer: float, inner: float, n: int = 5) -> str:
    pts = []
    for k in range(2 * n):
        r = outer if k % 2 == 0 else inner
        a = math.pi / 2 + k * math.pi / n
        pts.append(f"{center.x + r * math.cos(a):.3f},{center.y + r * math.sin(a):.3f}")
    return " ".join(pts)


def frame_svg(rec: EpisodeRecord, frame_index: int) -> str:
    """One frame as an SVG scene: humans white, robot gold, goals as stars.

    The viewBox is in meters, so circle radii in the file equal the recorded
    agent radii; width/height set the pixel scale.
    """
    if not 0 <= frame_index < len(rec.frames):
        raise IndexError(f"frame {frame_index} out of range (record has {len(rec.frames)} frames)")
    from .environments import CrossingType

    frame = rec.frames[frame_index]
    extent = rec.scenario.preset.extent
    half = extent if rec.scenario.preset.crossing is CrossingType.CIRCLE else extent / 2.0
    margin = 1.5
    # y grows upward in world coordinates; flip via a group transform
    lo, hi = -half - margin, half + margin
    size = hi - lo
    px = size * PX_PER_M

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{px:.0f}" height="{px:.0f}" '
        f'viewBox="{lo:.3f} {lo:.3f} {size:.3f} {size:.3f}">',
        f'<rect x="{lo:.3f}" y="{lo:.3f}" width="{size:.3f}" height="{size:.3f}" fill="#fafafa"/>',
        '<g transform="scale(1,-1)">',
    ]
    # goal stars first so agents draw on top
    for i, h in enumerate(rec.scenario.humans):
        parts.append(
            f'<polygon points="{_star_points(h.goal, 0.25, 0.1)}" '
            f'fill="#c8c8c8" stroke="#888888" stroke-width="0.03"/>'
        )
    parts.append(
        f'<polygon points="{_star_points(rec.scenario.robot_goal, 0.35, 0.14)}" '
        f'fill="#e3342f" stroke="#7a1c17" stroke-width="0.04"/>'
    )
    robot = frame.agents[0]
    for i, agent in enumerate(frame.agents[1:], start=1):
        parts.append(
            f'<circle cx="{agent.position.x!r}" cy="{agent.position.y!r}" '
            f'r="{agent.radius!r}" fill="#ffffff" stroke="#333333" stroke-width="0.04"/>'
        )
        parts.append(
            f'<text x="{agent.position.x!r}" y="{-agent.position.y!r}" font-size="0.3" '
            f'text-anchor="middle" dominant-baseline="central" transform="scale(1,-1)">{i}</text>'
        )
    parts.append(
        f'<circle cx="{robot.position.x!r}" cy="{robot.position.y!r}" '
        f'r="{robot.radius!r}" fill="#ffd43b" stroke="#996b00" stroke-width="0.05"/>'
    )
    parts.append(
        f'<text x="{lo + 0.3:.3f}" y="{-(hi - 0.55):.3f}" font-size="0.45" transform="scale(1,-1)">'
        f"t = {frame.t:.2f} s</text>"
    )
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"


def save_report_figure(per_env: dict, pooled, path: str, policy_label: str) -> None:
    """Grouped outcome-rate bars per environment plus the pooled column."""
    names = list(per_env) + ["pooled"]
    reports = list(per_env.values()) + [pooled]
    x = np.arange(len(names))
    width = 0.27
    fig, ax = plt.subplots(figsize=(1.8 + 1.3 * len(names), 3.6))
    ax.bar(x - width, [r.success_rate for r in reports], width, label="success", color="#2b8a3e")
    ax.bar(x, [r.collision_rate for r in reports], width, label="collision", color="#c92a2a")
    ax.bar(x + width, [r.timeout_rate for r in reports], width, label="timeout", color="#868e96")
    ax.set_xticks(x, names, rotation=20, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("rate")
    ax.set_title(f"{policy_label}: outcome rates")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_valuemap_figure(rows: list[tuple[float, float, float]], path: str,
                         best_index: int | None = None) -> None:
    """Action fan colored by estimated value; speed is radial, heading angular."""
    speeds = np.asarray([r[0] for r in rows])
    angles = np.asarray([r[1] for r in rows])
    values = np.asarray([r[2] for r in rows])
    xs = speeds * np.cos(angles)
    ys = speeds * np.sin(angles)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    sc = ax.scatter(xs, ys, c=values, cmap="viridis", s=110, edgecolors="k", linewidths=0.4)
    if best_index is not None:
        ax.scatter([xs[best_index]], [ys[best_index]], marker="*", s=260,
                   facecolors="none", edgecolors="#e3342f", linewidths=1.6)
    ax.set_aspect("equal")
    ax.set_xlabel("vx (m/s)")
    ax.set_ylabel("vy (m/s)")
    ax.set_title("action values")
    fig.colorbar(sc, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_figure(episodes: list[int], successes: list[float], losses: list[float],
                         path: str, window: int = 50) -> None:
    """Rolling success rate and TD loss over training episodes."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 4.8), sharex=True)
    if episodes:
        rolled = [
            float(np.mean(successes[max(0, i - window + 1):i + 1]))
            for i in range(len(successes))
        ]
        ax1.plot(episodes, rolled, color="#2b8a3e")
    ax1.set_ylabel(f"success rate (window {window})")
    ax1.set_ylim(-0.02, 1.02)
    finite = [(e, l) for e, l in zip(episodes, losses) if not math.isnan(l)]
    if finite:
        ax2.plot([e for e, _ in finite], [l for _, l in finite], color="#1864ab", lw=0.8)
    ax2.set_ylabel("TD loss")
    ax2.set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
