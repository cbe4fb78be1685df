"""Regenerates the bundled example data. Output is deterministic."""

import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))
PERIODS = 48


def bump(t, centre, width):
    return math.exp(-(((t - centre) / width) ** 2))


def plateau(t, start, end):
    return 1.0 if start <= t < end else 0.0


def member_load(n, t):
    if n < 12:
        return (
            0.08
            + 0.01 * (n % 4)
            + 0.25 * (1 + 0.1 * (n % 3)) * bump(t, 14 + n % 3, 2)
            + 0.45 * (1 + 0.05 * (n % 5)) * bump(t, 37 + n % 4, 3)
            + 0.05 * (n % 2) * bump(t, 26, 4)
        )
    if n < 14:
        return 0.10 + 0.60 * plateau(t, 16 + (n - 12), 36) + 0.05 * bump(t, 26, 6)
    return 0.15 + 0.40 * plateau(t, 17, 34)


def timestamp(t):
    return f"2024-06-21T{t // 2:02d}:{30 * (t % 2):02d}:00"


def write(path, lines):
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def example():
    out = os.path.join(HERE, "example")
    ids = [f"m{n + 1:02d}" for n in range(15)]
    rows = ["timestamp," + ",".join(ids)]
    for t in range(PERIODS):
        rows.append(timestamp(t) + "," + ",".join(f"{member_load(n, t):.3f}" for n in range(15)))
    write(os.path.join(out, "load.csv"), rows)

    rows = ["timestamp,pv"]
    for t in range(PERIODS):
        v = 0.42 * math.sin(math.pi * (t - 12) / 28) if 12 <= t <= 40 else 0.0
        rows.append(f"{timestamp(t)},{max(v, 0.0):.4f}")
    write(os.path.join(out, "pv.csv"), rows)

    rows = ["id,category,voting_share,latitude,longitude,admin_region,connection_point,vulnerable"]
    for n, id_ in enumerate(ids):
        category = "natural-person" if n < 12 else ("sme" if n < 14 else "local-authority")
        share = "0.09" if n == 14 else "0.065"
        lat = 48.0 + 0.0004 * (n % 5)
        lon = 2.0 + 0.0006 * (n // 5)
        vulnerable = "true" if n in (3, 10) else "false"
        rows.append(f"{id_},{category},{share},{lat:.4f},{lon:.4f},FR-91,cp{n + 1:02d},{vulnerable}")
    write(os.path.join(out, "members.csv"), rows)

    write(
        os.path.join(out, "assets.csv"),
        ["id,latitude,longitude,admin_region,connection_point", "pv1,48.0010,2.0010,FR-91,cp_pv"],
    )

    rows = ["child_id,parent_id,node_kind", "S,,substation", "T1,S,transformer", "T2,S,transformer"]
    rows += [f"cp{n + 1:02d},T1,connection_point" for n in range(15)]
    rows += ["cp_pv,T1,connection_point", "cp16,T2,connection_point"]
    write(os.path.join(out, "feeder.csv"), rows)


PROJECTS = [
    ("alcolea_del_rio", "Alcolea del Rio", 2100.0, 2_000_000),
    ("fontivsolar", "Fontivsolar", 990.0, 850_000),
    ("la_serra", "La Serra", 2800.0, 1_800_000),
]

LOANS = [1000, 2500, 5000, 10000, 25000, 100, 500]


def investment():
    out = os.path.join(HERE, "investment")
    for k, (slug, name, peak, capex) in enumerate(PROJECTS):
        state = 12345 + k
        rows = ["participant_id,loan_eur"]
        total, i = 0, 0
        while total < capex:
            state = (1103515245 * state + 12345) % 2**31
            loan = min(LOANS[state % len(LOANS)], capex - total)
            if loan < 100:
                break
            i += 1
            total += loan
            rows.append(f"p{i:04d},{loan}")
        write(os.path.join(out, f"{slug}_pool.csv"), rows)
        write(
            os.path.join(out, f"{slug}.toml"),
            [
                f'investment.pool = "{slug}_pool.csv"',
                f'investment.project_name = "{name}"',
                f"investment.peak_kw = {peak}",
                f"investment.capex_eur = {capex}",
                "investment.repayment_years = 25",
                "investment.min_contribution_eur = 100",
            ],
        )


if __name__ == "__main__":
    example()
    investment()
