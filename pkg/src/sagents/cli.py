"""Command-line client for the sagents service.

Without ``--server`` the commands talk to an in-process instance of the app.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import httpx

from .config import read_document
from .scheduler import events_to_jsonl, read_events


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client, path: str, body: dict) -> dict:
    resp = client.post(path, json=body)
    doc = resp.json()
    if resp.status_code >= 400:
        raise SystemExit(f"error: {doc.get('error', resp.status_code)}: {doc.get('detail', doc)}")
    return doc


def _read_org(path: str):
    p = Path(path)
    if p.suffix.lower() in (".json", ".toml"):
        doc = read_document(p)
        return doc.get("org", doc)
    return p.read_text().strip()


def cmd_run(args, client) -> int:
    overrides = read_document(args.config) if args.config else {}
    body = {"task": args.task, "org": args.org, "mode": args.mode, "backend": args.backend, "seed": args.seed,
            "overrides": overrides, "include_artifacts": True}
    doc = _post(client, "/runs", body)
    report = doc["report"]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        (out / "events.jsonl").write_text(events_to_jsonl(doc["events"]))
        (out / "pool.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in doc["pool"]))
        (out / "world_final.json").write_text(json.dumps(doc["world_final"], sort_keys=True) + "\n")
    tc = report["time_cost_min"]
    print(f"success={report['success']} tc_min={'NaN' if tc is None else f'{tc:.2f}'} "
          f"mpt={report['mean_prompt_times']:.2f} ticks={report['end_tick']}")
    return 0 if report["success"] else 2


def cmd_experiment(args, client) -> int:
    body = {"matrix": read_document(args.matrix), "output_dir": args.out, "backend": args.backend}
    doc = _post(client, "/experiments", body)
    print(doc["markdown"], end="")
    print(f"artifacts: {doc['dir']}")
    return 0


def cmd_validate_org(args, client) -> int:
    doc = _post(client, "/orgs/validate", {"org": _read_org(args.file)})
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0 if doc["report"]["is_valid"] else 1


def cmd_replay(args, client) -> int:
    events = read_events(Path(args.events).read_text())
    doc = _post(client, "/replay", {"events": events})
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_serve(args, client) -> int:
    import uvicorn

    uvicorn.run("sagents.service:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sagents", description="Run agent organizations in a simulated voxel world.")
    ap.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one organization on one task")
    p.add_argument("--task", required=True, help="collection:ITEM:N or shelter[:WxDxH]")
    p.add_argument("--org", default="toa:4", help="solo, toa:N, goa:N or coa:N")
    p.add_argument("--mode", default="nonobstructive", choices=["nonobstructive", "roundbased", "relay"])
    p.add_argument("--backend", default="oracle")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--config", help="JSON or TOML config overrides")
    p.add_argument("--out", help="directory for report and logs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run an experiment matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", default="runs")
    p.add_argument("--backend", default="oracle")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate-org", help="check an organization file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate_org)

    p = sub.add_parser("replay", help="recompute metrics from an event log")
    p.add_argument("--events", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    client = None if args.command == "serve" else _client(args.server)
    return args.func(args, client)


if __name__ == "__main__":
    sys.exit(main())
