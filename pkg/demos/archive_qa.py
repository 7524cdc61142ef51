"""Turn a timestamped personal archive into a pseudo-trajectory and query it like any episode."""

from __future__ import annotations

from scenemem import answer_current, extract_anchors, pack_evidence, retrieve, write_trajectory
from scenemem.traj_model import ArchiveItem, convert_archive_to_pseudo_trajectory

ARCHIVE = [
    ArchiveItem("m3", 1700000300, "email", "Flight moved to Friday morning."),
    ArchiveItem("p1", 1700000100, "image", "Photo of the whiteboard after the planning meeting."),
    ArchiveItem("m1", 1700000200, "email", "Draft budget attached for review."),
    ArchiveItem("v1", 1700000200, "video", "Recording of the design review."),
    ArchiveItem("m2", 1700000400, "email", "Budget approved."),
]

QUESTIONS = [
    "At which step did the 1st observe(m2) occur?",
    "Where was the agent when the 1st observe(v1) occurred?",
    "What action was executed 1 step after the 1st observe(p1)?",
    "Which happened first: the 1st observe(m3) or the 1st observe(m1)?",
    "How many observe events occurred in total?",
]


def main() -> None:
    traj = convert_archive_to_pseudo_trajectory(ARCHIVE, episode_id="inbox")
    for s in traj.steps:
        print(f"step {s.index}: {s.location:<6} {s.observation}")
    store = write_trajectory(traj, "full")
    print()
    for q in QUESTIONS:
        anchors = extract_anchors(q)
        pack = pack_evidence(retrieve(store, anchors, q), anchors)
        print(f"{q}\n  -> {answer_current(pack, anchors).text}  ({pack.token_cost} evidence tokens)")


if __name__ == "__main__":
    main()
