"""Command-line client for the simulation service.

By default the CLI talks to the FastAPI app in-process (no server needed);
pass ``--server http://host:port`` to target a running deployment.
Artifacts (trajectory CSVs, summary JSON) are written atomically under
``--out``.  Exit codes: 0 converged/agreed, 1 error, 2 horizon reached or
agreement tolerance missed.
"""

import argparse
import json
import os
import sys

import httpx

EXIT_OK = 0
EXIT_ERROR = 1


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # no server given: drive the ASGI app directly in this process
    from starlette.testclient import TestClient

    from .service import app
    return TestClient(app, raise_server_exceptions=False)


def _load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        print(f"error: config not found: {path}", file=sys.stderr)
        sys.exit(EXIT_ERROR)
    except json.JSONDecodeError as e:
        print(f"error: {path}: invalid JSON at line {e.lineno}: {e.msg}",
              file=sys.stderr)
        sys.exit(EXIT_ERROR)


def _post(client, endpoint, payload):
    resp = client.post(endpoint, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        sys.exit(EXIT_ERROR)
    return resp.json()


def _write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump_json(doc):
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write_run_artifacts(body, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    name = body["name"]
    paths = []
    for run in body["runs"]:
        csv_path = os.path.join(out_dir, f"{name}_{run['mode']}.csv")
        _write_atomic(csv_path, run["trajectory_csv"])
        paths.append(csv_path)
    summary_path = os.path.join(out_dir, f"{name}_summary.json")
    _write_atomic(summary_path, _dump_json(body["summary_document"]))
    paths.append(summary_path)
    return paths


def cmd_run(args):
    doc = _load_config(args.config)
    with _client(args.server) as client:
        body = _post(client, "/run", {"scenario": doc, "mode": args.mode,
                                      "force": args.force})
    for w in body["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if body["error"]:
        print(f"error: {body['error']}", file=sys.stderr)
    for path in _write_run_artifacts(body, args.out):
        print(f"wrote {path}")
    for run in body["runs"]:
        summ = run["summary"]
        res = summ["final_residuals"]
        print(f"[{run['mode']}] status={run['status']} t_final={summ['t_final']:g} "
              f"F={summ['final_objective']} r_feas={res['r_feas']:.3e} "
              f"r_x={res['r_x']:.3e} r_z={res['r_z']:.3e} r_cons={res['r_cons']:.3e}")
    return body["exit_code"]


def cmd_check(args):
    doc = _load_config(args.config)
    with _client(args.server) as client:
        body = _post(client, "/check", {"scenario": doc})
    if args.dump_normalized:
        sys.stdout.write(_dump_json(body["normalized"]))
        return EXIT_OK
    sp = body["spectral"]
    print(f"scenario: {body['name']}")
    h_text = "[" + ", ".join(f"{v:.6g}" for v in sp["h"]) + "]"
    print(f"left eigenvector h = {h_text}")
    print(f"h_star = {sp['h_star']:.6g}, lambda2 = {sp['lambda2']:.6g}, "
          f"balanced = {sp['balanced']}")
    ass = body["assumptions"]
    print(f"assumptions passed: {ass['passed']} "
          f"(strongly connected: {ass['strongly_connected']})")
    for a in ass["agents"]:
        line = (f"  agent {a['agent']}: c = {a['c']:g}, m = {a['m']}, "
                f"c > m-1: {a['c_exceeds_m_minus_1']}")
        if a["suggested_scaling_K_above"] is not None:
            line += f" (rescale smooth cost by K > {a['suggested_scaling_K_above']:.6g})"
        line += f", spot-check ratio >= {a['spot_check_min_ratio']:.6g}"
        print(line)
    pr = body["params"]
    print(f"params ({pr['source']}): alpha={pr['alpha']:.6g} gamma={pr['gamma']:.6g} "
          f"eta={pr['eta']:.6g} beta={pr['beta']:.6g}")
    print(f"valid: {pr['valid']}, sufficient-condition feasible: {pr['feasible']}")
    for k, v in pr["margins"].items():
        print(f"  margin {k}: {v:.6g}" if isinstance(v, float) else f"  margin {k}: {v}")
    for w in body["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args):
    doc = _load_config(args.config)
    with _client(args.server) as client:
        body = _post(client, "/compare", {"scenario": doc, "force": args.force})
    for w in body["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if body["error"]:
        print(f"error: {body['error']}", file=sys.stderr)
    cmp_doc = body.get("compare")
    if cmp_doc:
        for key, dist in cmp_doc["distances"].items():
            gap = cmp_doc["objective_gaps"].get(key)
            extra = f", objective gap {gap:.6g}" if isinstance(gap, float) else ""
            print(f"{key}: final-x distance {dist:.6g}{extra}")
        print(f"agreement (tol {cmp_doc['tolerance']:g}): {cmp_doc['agreement']}")
        if cmp_doc.get("oracle"):
            print(f"oracle [{cmp_doc['oracle']['method']}] "
                  f"F* = {cmp_doc['oracle']['F_star']}")
    os.makedirs(args.out, exist_ok=True)
    for run in body["runs"]:
        path = os.path.join(args.out, f"{body['name']}_{run['mode']}.csv")
        _write_atomic(path, run["trajectory_csv"])
        print(f"wrote {path}")
    report = os.path.join(args.out, f"{body['name']}_compare.json")
    _write_atomic(report, _dump_json(body["summary_document"]))
    print(f"wrote {report}")
    return body["exit_code"]


def cmd_serve(args):
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="proxalloc",
                                 description="Distributed resource allocation flows")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("config", help="scenario JSON path")
        p.add_argument("--server", default=None,
                       help="service URL (default: in-process)")
        if out:
            p.add_argument("--out", default=".", help="artifact directory")

    p_run = sub.add_parser("run", help="integrate the configured flow(s)")
    common(p_run)
    p_run.add_argument("--mode", choices=["known_h", "estimator", "both"],
                       default=None, help="override the scenario mode")
    p_run.add_argument("--force", action="store_true",
                       help="run even with invalid parameters")
    p_run.set_defaults(fn=cmd_run)

    p_check = sub.add_parser("check", help="validate assumptions and parameters")
    common(p_check, out=False)
    p_check.add_argument("--dump-normalized", action="store_true",
                         help="print the normalized scenario JSON and exit")
    p_check.set_defaults(fn=cmd_check)

    p_cmp = sub.add_parser("compare", help="run variants and compare limits")
    common(p_cmp)
    p_cmp.add_argument("--force", action="store_true")
    p_cmp.set_defaults(fn=cmd_compare)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
