#!/usr/bin/env python3
"""End-to-end checks of the alad command-line tool.

usage: cli_check.py ALAD_BINARY SOURCE_DIR
"""
import filecmp
import json
import os
import shutil
import signal
import socket
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.request

ALAD, SRC = sys.argv[1], sys.argv[2]
failures = []


def run(*args, env=None, cwd=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([ALAD, *args], capture_output=True, text=True, env=e, cwd=cwd)


def check(name, ok, detail=""):
    print(("ok   " if ok else "FAIL ") + name + ("" if ok else "  " + detail))
    if not ok:
        failures.append(name)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def http(method, url, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=120) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def start_server(port, manifest, state):
    p = subprocess.Popen([ALAD, "serve", "--bind", f"127.0.0.1:{port}", "--manifest", manifest, "--state", state],
                         stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    for _ in range(300):
        try:
            if http("GET", f"http://127.0.0.1:{port}/v1/health")[1].get("status") == "ok":
                return p
        except (urllib.error.URLError, ConnectionError):
            time.sleep(0.1)
    p.kill()
    raise RuntimeError("server did not start")


def main():
    tmp = tempfile.mkdtemp(prefix="alad_cli_")
    data = os.path.join(SRC, "data")
    smoke = os.path.join(data, "smoke.json")
    try:
        # exit codes
        check("no subcommand exits 2", run().returncode == 2)
        check("unknown dataset name exits 2", run("prepare", "bogus", "x", os.path.join(tmp, "x.csv")).returncode == 2)
        check("missing run manifest exits 2", run("run", os.path.join(tmp, "none.json")).returncode == 2)
        r = run("run", smoke, env={"ALAD_WORKERS": "many"})
        check("bad ALAD_WORKERS exits 2", r.returncode == 2, r.stderr)
        check("missing results file exits 3", run("selfcheck", os.path.join(tmp, "none.jsonl")).returncode == 3)
        bad = os.path.join(tmp, "bad.jsonl")
        with open(bad, "w") as f:
            f.write('{"dataset": "x"}\n')
        check("corrupt results file exits 3", run("selfcheck", bad).returncode == 3)

        raw = os.path.join(data, "raw", "abalone_subset.data")
        short = os.path.join(tmp, "short.data")
        with open(raw) as f, open(short, "w") as g:
            g.writelines(f.readlines()[:500])
        r = run("prepare", "abalone", short, os.path.join(tmp, "p", "abalone.csv"))
        check("prepare count mismatch exits 3 with a diff report", r.returncode == 3 and "n:" in r.stderr, r.stderr)
        r = run("prepare", "abalone", raw, os.path.join(tmp, "p", "abalone.csv"))
        check("prepare abalone succeeds", r.returncode == 0, r.stderr)
        with open(os.path.join(tmp, "p", "manifest.json")) as f:
            entry = json.load(f)["datasets"][0]
        check("prepare writes a manifest entry", entry["name"] == "abalone" and entry["expected"]["n"] == 1920)
        check("prepared file matches the committed copy",
              filecmp.cmp(os.path.join(tmp, "p", "abalone.csv"), os.path.join(data, "prepared", "abalone.csv"),
                          shallow=False))

        # determinism and overrides
        a, b, c = (os.path.join(tmp, n) for n in ("a", "b", "c"))
        ra = run("run", smoke, "--out", a)
        rb = run("run", smoke, "--out", b, "--workers", "2")
        rc = run("run", smoke, env={"ALAD_OUT_DIR": c, "ALAD_WORKERS": "2"})
        check("smoke runs succeed", ra.returncode == rb.returncode == rc.returncode == 0, ra.stderr + rb.stderr + rc.stderr)
        for name in ("results.jsonl", "results.csv"):
            check(f"{name} byte-identical across reruns and worker counts",
                  filecmp.cmp(os.path.join(a, name), os.path.join(b, name), shallow=False)
                  and filecmp.cmp(os.path.join(a, name), os.path.join(c, name), shallow=False))
        with open(os.path.join(a, "results.jsonl")) as f:
            rows = [json.loads(x) for x in f]
        series = {(r["dataset"], r["strategy"], r["run"]) for r in rows}
        check("smoke grid is 2 strategies x 2 runs of 3 records", len(series) == 4 and len(rows) == 12)
        check("selfcheck accepts jsonl", run("selfcheck", os.path.join(a, "results.jsonl")).returncode == 0)
        check("selfcheck accepts csv", run("selfcheck", os.path.join(a, "results.csv")).returncode == 0)
        check("summary table printed", "mean_prauc" in ra.stdout and "adaptive" in ra.stdout)

        # service: bad manifest, health, kill -9 and restart
        badm = os.path.join(tmp, "badm.json")
        with open(badm, "w") as f:
            f.write("{")
        p = subprocess.run([ALAD, "serve", "--bind", f"127.0.0.1:{free_port()}", "--manifest", badm,
                            "--state", os.path.join(tmp, "s0")], capture_output=True, text=True, timeout=60)
        check("serve refuses an invalid manifest", p.returncode == 2, p.stderr)

        manifest = os.path.join(data, "manifest.json")
        state = os.path.join(tmp, "state")
        port = free_port()
        base = f"http://127.0.0.1:{port}/v1"
        srv = start_server(port, manifest, state)
        try:
            st, s = http("POST", base + "/sessions", {"dataset": "abalone", "mode": "replay", "seed": 5})
            check("create over HTTP", st == 201, str(s))
            sid = s["id"]
            st, batch = http("POST", f"{base}/sessions/{sid}/batch")
            check("first batch allocation (19, 1)", batch.get("allocation") == {"n_repr": 19, "n_info": 1})
        finally:
            srv.send_signal(signal.SIGKILL)
            srv.wait()
        srv = start_server(port, manifest, state)
        try:
            st, s = http("GET", f"{base}/sessions/{sid}")
            check("pending batch survives kill -9",
                  st == 200 and s["status"] == "awaiting_labels" and s["pending"]["entries"] == batch["entries"])
        finally:
            srv.terminate()
            srv.wait(timeout=30)
        check("serve exits cleanly on SIGTERM", srv.returncode == 0, str(srv.returncode))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)

    print(f"{len(failures)} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
