"""Simulate one episode, write structured memory, and answer a few questions end to end."""

from __future__ import annotations

from scenemem import (
    RetrievalConfig,
    answer_current,
    extract_anchors,
    generate_questions,
    pack_evidence,
    retrieve,
    simulate,
    write_trajectory,
)


def main() -> None:
    traj = simulate("textadv", seed=3)
    store = write_trajectory(traj, "full")
    print(f"episode {traj.episode_id}: {len(traj.steps)} steps, {len(store)} memory units")

    wanted = ("occurrence", "temporal_offset", "inventory", "event_ordering", "adversarial")
    items = [q for q in generate_questions(traj, per_family=1, seed=0) if q.family in wanted]
    for q in items:
        anchors = extract_anchors(q.question)
        ranked = retrieve(store, anchors, q.question, RetrievalConfig(top_k=24))
        pack = pack_evidence(ranked, anchors, budget=192)
        pred = answer_current(pack, anchors)
        print()
        print(f"[{q.family}] {q.question}")
        print(f"  anchors: {anchors.to_json()}")
        for _, line in pack.lines:
            print(f"  | {line}")
        print(f"  answer={pred.text!r} gold={q.gold_answer!r} tokens={pack.token_cost}")


if __name__ == "__main__":
    main()
