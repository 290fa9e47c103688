#!/usr/bin/env python3
"""Generate the labeled end-to-end fixture used by the CLI tests.

Writes <out>/fixture.log (HDFS-style headers), <out>/fixture_truth.csv
(LineId,Content,EventTemplate) and <out>/fixture.toml. Deterministic for a
given seed. Every generated line is checked to match its own template and no
other under the anchored wildcard regex.
"""

import argparse
import csv
import random
import re
from pathlib import Path

USERS = ["root", "cyrus", "news", "test", "guest", "admin", "www-data", "postfix", "nobody", "sshd"]
COMPONENTS = ["dfs.DataNode", "dfs.FSNamesystem", "sshd", "kernel", "su", "cron", "nova.compute", "spark.executor"]
LEVELS = ["INFO", "WARN", "ERROR"]


def ip(r):
    return "10.%d.%d.%d" % (r.randint(0, 255), r.randint(0, 255), r.randint(1, 254))


def blk(r):
    return "blk_%d" % r.randint(-(2**62), 2**62)


def num(r):
    return str(r.randint(0, 99999))


def size(r):
    return str(r.choice([67108864, 3553241, 91178, r.randint(1, 10**8)]))


def path(r):
    return "/%s/%s/part-%05d" % (r.choice(["user", "tmp", "data"]), r.choice(USERS), r.randint(0, 999))


def hexid(r):
    return "%08x" % r.getrandbits(32)


def dur(r):
    return "%.3f" % r.uniform(0, 500)


def user(r):
    return r.choice(USERS)


def port(r):
    return str(r.randint(1024, 65535))


def uuid(r):
    return "-".join("%0*x" % (n, r.getrandbits(4 * n)) for n in (8, 4, 4, 4, 12))


# (template, variable generators); each <*> is filled left to right.
TEMPLATES = [
    ("session closed for user <*>", [user]),
    ("session opened for user <*> by (uid=<*>)", [user, num]),
    ("Accepted password for <*> from <*> port <*> ssh2", [user, ip, port]),
    ("Failed password for invalid user <*> from <*> port <*> ssh2", [user, ip, port]),
    ("Received disconnect from <*>: 11: Bye Bye", [ip]),
    ("Receiving block <*> src: /<*>:<*> dest: /<*>:<*>", [blk, ip, port, ip, port]),
    ("Received block <*> of size <*> from /<*>", [blk, size, ip]),
    ("PacketResponder <*> for block <*> terminating", [num, blk]),
    ("BLOCK* NameSystem.addStoredBlock: blockMap updated: <*>:<*> is added to <*> size <*>", [ip, port, blk, size]),
    ("BLOCK* NameSystem.allocateBlock: <*>. <*>", [path, blk]),
    ("Deleting block <*> file <*>", [blk, path]),
    ("Verification succeeded for <*>", [blk]),
    ("Served block <*> to /<*>", [blk, ip]),
    ("<*>:Got exception while serving <*> to /<*>:", [ip, blk, ip]),
    ("Starting thread to transfer block <*> to <*>:<*>", [blk, ip, port]),
    ("Transmitted block <*> to /<*>:<*>", [blk, ip, port]),
    ("writeBlock <*> received exception java.io.IOException: Connection reset by peer", [blk]),
    ("Unexpected error trying to delete block <*>. BlockInfo not found in volumeMap.", [blk]),
    ("BLOCK* ask <*>:<*> to delete <*>", [ip, port, blk]),
    ("Changing ownership of <*> to <*>", [path, user]),
    ("Job <*> completed in <*> seconds", [num, dur]),
    ("Task <*> failed after <*> attempts", [hexid, num]),
    ("Executor <*> lost heartbeat, removing", [num]),
    ("Registered executor <*> with <*> cores", [hexid, num]),
    ("Instance <*> spawned successfully on host <*>", [uuid, ip]),
    ("Terminating instance <*>", [uuid]),
    ("VM <*> took <*> seconds to build", [uuid, dur]),
    ("Out of memory: Kill process <*> (<*>) score <*> or sacrifice child", [num, user, num]),
    ("CPU<*>: Core temperature above threshold, cpu clock throttled", [num]),
    ("eth0: link up, <*> Mbps, full duplex", [num]),
    ("disk <*> is <*> percent full", [path, num]),
    ("connection from <*> refused: too many open files", [ip]),
    ("cron job <*> started by <*>", [hexid, user]),
    ("cron job <*> finished with status <*>", [hexid, num]),
    ("authentication failure; logname= uid=0 euid=0 tty=NODEVssh ruser= rhost=<*> user=<*>", [ip, user]),
    ("check pass; user unknown", []),
    ("ALERT exited abnormally with [1]", []),
    ("Shutting down DataNode at <*>", [ip]),
    ("Reopening log file <*>", [path]),
    ("Cache flush of <*> entries took <*> ms", [num, dur]),
    ("User <*> changed password", [user]),
    ("Invalid request id <*> dropped", [hexid]),
    ("Retrying request to <*> in <*> ms", [ip, num]),
    ("Heartbeat from <*> missed <*> times", [ip, num]),
]


def anchored(template):
    parts = [re.escape(p) for p in template.split("<*>")]
    return re.compile("^" + ".+".join(parts) + "$", re.S)


def zipf_weights(n, s=1.1):
    return [1.0 / (i + 1) ** s for i in range(n)]


def generate(n_lines, seed):
    r = random.Random(seed)
    matchers = [anchored(t) for t, _ in TEMPLATES]
    weights = zipf_weights(len(TEMPLATES))
    rows = []
    t = 0
    for line_id in range(1, n_lines + 1):
        # Cover every template at least once.
        k = line_id - 1 if line_id <= len(TEMPLATES) else r.choices(range(len(TEMPLATES)), weights)[0]
        template, gens = TEMPLATES[k]
        pieces = template.split("<*>")
        content = pieces[0]
        for gen, piece in zip(gens, pieces[1:]):
            content += gen(r) + piece
        for j, m in enumerate(matchers):
            if (j == k) != bool(m.match(content)):
                raise SystemExit(f"line {line_id}: {content!r} ambiguous between {template!r} and {TEMPLATES[j][0]!r}")
        t += r.randint(0, 3)
        header = "081109 %06d %d %s %s" % (203615 + t, r.randint(1, 999), r.choice(LEVELS), r.choice(COMPONENTS))
        rows.append((line_id, header + ": " + content, content, template))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="crates/cli/tests/fixtures")
    ap.add_argument("--lines", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20241)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = generate(args.lines, args.seed)
    with open(out / "fixture.log", "w", newline="\n") as f:
        for _, raw, _, _ in rows:
            f.write(raw + "\n")
    with open(out / "fixture_truth.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["LineId", "Content", "EventTemplate"])
        for line_id, _, content, template in rows:
            w.writerow([line_id, content, template])
    (out / "fixture.toml").write_text(
        'output_dir = "out"\n'
        "seed = 42\n\n"
        "[[datasets]]\n"
        'name = "fixture"\n'
        'log_file_path = "fixture.log"\n'
        "header_pattern = '^(?P<date>\\d{6}) (?P<time>\\d{6}) (?P<pid>\\d+) (?P<level>[A-Z]+) (?P<component>[^:]+): (?P<content>.*)$'\n"
        'ground_truth_path = "fixture_truth.csv"\n\n'
        "[sampler]\n"
        "sample_ratio = 0.05\n"
        "epsilon = 10.0\n"
        "min_pts = 5\n"
    )
    print(f"{len(rows)} lines, {len({r[3] for r in rows})} templates -> {out}")


if __name__ == "__main__":
    main()
