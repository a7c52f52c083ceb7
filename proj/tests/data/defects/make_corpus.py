#!/usr/bin/env python3
"""Regenerates the planted-defect traces from the conforming traces.

Each defect edits a copy of a conforming trace, re-sorts it by (time, seq)
and renumbers seq so the file stays well-formed. Run from this directory.
"""

from pathlib import Path

HERE = Path(__file__).resolve().parent
CONFORMING = HERE.parent / "conforming"


def load(name):
    rows = []
    for line in (CONFORMING / name).read_text().splitlines():
        cols = line.split("\t")
        rows.append([int(cols[0]), int(cols[1]), cols[2], cols[3:]])
    return rows


def find(rows, category, **fields):
    want = [f"{k}={v}" for k, v in fields.items()]
    hits = [r for r in rows if r[2] == category and all(w in r[3] for w in want)]
    assert len(hits) == 1, (category, fields, len(hits))
    return hits[0]


def insert(rows, after, time, category, *fields):
    """New entry at `time`, ordered just after `after` when times tie."""
    rows.append([time, after[1] + 0.5, category, list(fields)])


def save(rows, name):
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(HERE / name, "w") as f:
        for seq, r in enumerate(rows, 1):
            f.write("\t".join([str(r[0]), str(seq), r[2], *r[3]]) + "\n")


def late_removal():
    # Session end releases lease 9 but leaves its steering entry for 50 ms.
    rows = load("aipaging_mobility.trace")
    find(rows, "steer_remove", entry=5, lease=9)[0] += 50_000
    save(rows, "late_removal.trace")


def early_release():
    # Old lease 3 and its entry go away 2.5 ms before the flip to lease 4.
    rows = load("aipaging_mobility.trace")
    for r in (find(rows, "lease_release", lease=3), find(rows, "steer_remove", entry=1)):
        r[0] = 2_048_000
    save(rows, "early_release.trace")


def flip_before_install():
    # Priority flip to entry 2 is logged ahead of the entry's install.
    rows = load("aipaging_mobility.trace")
    inst = find(rows, "steer_install", entry=2)
    flip = find(rows, "steer_flip", entry=2)
    inst[1], flip[1] = flip[1], inst[1]
    save(rows, "flip_before_install.trace")


def double_terminal():
    # Lease 3, already released at the end of relocation 1, also expires.
    rows = load("aipaging_mobility.trace")
    rel = find(rows, "lease_release", lease=3)
    insert(rows, rel, 6_050_509, "lease_expire", "lease=3", "aisi=1", "anchor=edge-a")
    save(rows, "double_terminal.trace")


def post_tc_attempt():
    # Relocation txn 2 (started 2045509, T_C 100 ms) retries at start + T_C.
    rows = load("aipaging_mobility.trace")
    start = find(rows, "txn_start", txn=2)
    insert(rows, start, start[0] + 100_000, "admit_attempt", "txn=2", "aisi=1", "anchor=cloud", "tier=large")
    save(rows, "post_tc_attempt.trace")


def aisi_reissue():
    # Session 1 is handed a second identity after its first relocation.
    rows = load("aipaging_mobility.trace")
    done = find(rows, "reloc_done", job=1)
    insert(rows, done, done[0], "identity", "session=1", "aisi=90", "aist=91")
    save(rows, "aisi_reissue.trace")


def late_expiry():
    # Lease 32 expires 1 ms after its expires_at.
    rows = load("aipaging_failures_short_leases.trace")
    find(rows, "lease_expire", lease=32)[0] += 1_000
    save(rows, "late_expiry.trace")


def lease_gate():
    # Request 4 is routed on lease 3, released 0.7 s earlier.
    rows = load("aipaging_mobility.trace")
    out = find(rows, "outcome", req=4)
    out[3] = [f if not f.startswith("lease=") else "lease=3" for f in out[3]]
    save(rows, "lease_gate.trace")


def overlap_bound():
    # Old path of relocation 1 drains for 300 ms instead of T_D = 200 ms.
    rows = load("aipaging_mobility.trace")
    for r in (find(rows, "lease_release", lease=3), find(rows, "steer_remove", entry=1)):
        r[0] += 100_000
    save(rows, "overlap_bound.trace")


def truncated():
    # Not a defect class: the file is cut mid-run and must be rejected as malformed.
    text = (CONFORMING / "aipaging_mobility.trace").read_text()
    (HERE / "truncated.trace").write_text(text[: len(text) // 2].rsplit("\n", 1)[0])


if __name__ == "__main__":
    for make in (late_removal, early_release, flip_before_install, double_terminal, post_tc_attempt,
                 aisi_reissue, late_expiry, lease_gate, overlap_bound, truncated):
        make()
