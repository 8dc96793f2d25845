"""Command-line front end.

The CLI parses arguments, loads the JSON config, hands the job to a backend
and writes the returned report to ``--out``.  The default backend calls
:mod:`statgeo.service` in-process; ``--server URL`` sends the same request
to a running ``statgeo serve`` instead.

Exit codes: 0 success, 1 config/usage error, 2 no geodesic found,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from . import schemas, service

EXIT_OK, EXIT_CONFIG = service.EXIT_OK, service.EXIT_CONFIG
TRACE_COLUMNS = ["iteration", "J", "grad_norm", "h1", "boundary_distance"]


class UsageError(Exception):
    pass


# -- backends ---------------------------------------------------------------------


class LocalBackend:
    def __init__(self, deterministic: bool):
        self.deterministic = deterministic

    def _call(self, fn, *args):
        try:
            return fn(*args, self.deterministic)
        except service.ConfigError as exc:
            raise UsageError(str(exc)) from exc

    def solve(self, cfg):
        return self._call(service.solve, cfg)

    def verify(self, cfg, curve):
        return self._call(service.verify, cfg, curve)

    def lightlike(self, cfg, curve):
        return self._call(service.lightlike, cfg, curve)

    def diagnose(self, cfg):
        return self._call(service.diagnose, cfg)

    def spacetimes(self):
        return service.spacetimes()


class RemoteBackend:
    """Talks to the HTTP service.  ``client`` may be any httpx-compatible client."""

    def __init__(self, base_url: str, deterministic: bool, client=None):
        import httpx

        self.client = client or httpx.Client(base_url=base_url, timeout=600.0)
        self.params = {"deterministic": str(deterministic).lower()}

    def _post(self, path, body):
        r = self.client.post(path, json=body, params=self.params)
        data = r.json()
        if r.status_code == 400:
            raise UsageError(data.get("error", "bad request"))
        if r.status_code == 422:
            raise UsageError(_format_detail(data.get("detail", [])))
        r.raise_for_status()
        return data

    def solve(self, cfg):
        return self._post("/solve", cfg.model_dump())

    def verify(self, cfg, curve):
        return self._post("/verify", {"config": cfg.model_dump(), "curve": curve.model_dump()})

    def lightlike(self, cfg, curve):
        return self._post("/lightlike", {"config": cfg.model_dump(), "curve": curve.model_dump() if curve else None})

    def diagnose(self, cfg):
        return self._post("/diagnose", cfg.model_dump())

    def spacetimes(self):
        r = self.client.get("/spacetimes")
        r.raise_for_status()
        return r.json()


def _format_detail(errors) -> str:
    parts = []
    for e in errors:
        loc = ".".join(str(p) for p in e.get("loc", ()))
        parts.append(f"{loc}: {e.get('msg', '')}")
    return "; ".join(parts) or "invalid request"


# -- config and files ----------------------------------------------------------------


def load_config(path: str, n: Optional[int] = None, seed: Optional[int] = None) -> schemas.RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        cfg = schemas.RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise UsageError(f"config {path}: {_format_detail(exc.errors())}") from exc
    if n is not None:
        if n < 1:
            raise UsageError("--n must be positive")
        cfg.solver.n = n
    if seed is not None:
        cfg.solver.seeds.rng_seed = seed
    return cfg


def read_curve_table(path: str) -> schemas.CurveTable:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise UsageError(f"cannot read curve {path}: {exc.strerror}") from exc
    if not rows:
        raise UsageError(f"curve CSV {path} is empty")
    try:
        body = [[float(v) for v in r] for r in rows[1:]]
    except ValueError as exc:
        raise UsageError(f"curve CSV {path}: {exc}") from exc
    if any(len(r) != len(rows[0]) for r in body):
        raise UsageError(f"curve CSV {path} is ragged")
    return schemas.CurveTable(columns=[h.strip() for h in rows[0]], rows=body)


def write_json(path: Path, payload) -> None:
    # sort_keys + fixed indent keep reports byte-stable for golden comparisons
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n")


def write_table(path: Path, table: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table["columns"])
        for row in table["rows"]:
            w.writerow(["" if v is None else repr(float(v)) for v in row])


def write_traces(path: Path, traces: dict) -> None:
    m = len(traces["J"])
    rows = [[i] + [traces[k][i] for k in TRACE_COLUMNS[1:]] for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([r[0]] + ["" if v is None else repr(float(v)) for v in r[1:]])


# -- commands ---------------------------------------------------------------------


def _out_dir(args, cfg: Optional[schemas.RunConfig]) -> Path:
    d = Path(args.out or (cfg.output.dir if cfg else "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_solve(args, backend) -> int:
    cfg = load_config(args.config, args.n, args.seed)
    rep = backend.solve(cfg)
    out = _out_dir(args, cfg)
    write_json(out / "solve_report.json", rep)
    if rep.get("best_curve"):
        write_table(out / "best_curve.csv", rep["best_curve"])
    traces = (rep.get("best") or {}).get("traces")
    if traces:
        write_traces(out / "traces.csv", traces)
    best = rep.get("best") or {}
    print(f"{rep['distinct_geodesics']} distinct geodesic(s); best status={best.get('status')} J={best.get('J')}")
    return rep["exit_code"]


def cmd_verify(args, backend) -> int:
    if not args.curve:
        raise UsageError("verify needs --curve")
    cfg = load_config(args.config, args.n, args.seed)
    rep = backend.verify(cfg, read_curve_table(args.curve))
    write_json(_out_dir(args, cfg) / "verify_report.json", rep)
    print(f"passed={rep['passed']} residual={rep['max_residual']} cz_drift={rep['cz_drift']} "
          f"energy_drift={rep['energy_drift']} causal={rep['causal']['verdict']}")
    return rep["exit_code"]


def cmd_lightlike(args, backend) -> int:
    cfg = load_config(args.config, args.n, args.seed)
    curve_path = args.curve
    if curve_path is None and cfg.lightlike.curve:
        curve_path = str((Path(args.config).parent / cfg.lightlike.curve))
    curve = read_curve_table(curve_path) if curve_path else None
    rep = backend.lightlike(cfg, curve)
    out = _out_dir(args, cfg)
    write_json(out / "lightlike_report.json", rep)
    write_table(out / "lightlike_curve.csv", rep["curve"])
    print(f"T={rep['arrival_time']} T_upper={rep['arrival_upper_bound']}")
    return rep["exit_code"]


def cmd_diagnose(args, backend) -> int:
    cfg = load_config(args.config, args.n, args.seed)
    rep = backend.diagnose(cfg)
    write_json(_out_dir(args, cfg) / "diagnostics.json", rep)
    print(f"quad_ok={rep['quad_ok']} linear_ok={rep['linear_ok']} conformal_complete={rep['conformal_complete']}")
    return rep["exit_code"]


def cmd_list(args, backend) -> int:
    for entry in backend.spacetimes():
        params = ", ".join(f"{k}={v!r}" for k, v in entry["params"].items())
        print(f"{entry['name']}({params}): {entry['description']}")
    return EXIT_OK


def cmd_serve(args, backend) -> int:
    import uvicorn

    uvicorn.run("statgeo.api:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "lightlike": cmd_lightlike,
    "diagnose": cmd_diagnose,
    "list-spacetimes": cmd_list,
    "serve": cmd_serve,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: output.dir from the config)")
    common.add_argument("--curve", help="curve CSV with columns s, x1..xd[, t]")
    common.add_argument("--n", type=int, help="number of segments (overrides solver.n)")
    common.add_argument("--seed", type=int, help="RNG seed for random multistart seeds")
    common.add_argument("--deterministic", action="store_true", help="omit timestamps from reports")
    common.add_argument("--server", help="base URL of a running statgeo service")

    p = argparse.ArgumentParser(prog="statgeo", description="Geodesics in standard stationary spacetimes.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "lightlike", "diagnose"):
        sub.add_parser(name, parents=[common])
    sub.add_parser("list-spacetimes", parents=[common])
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return p


def main(argv: Optional[list[str]] = None, client=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command in ("solve", "verify", "lightlike", "diagnose") and not args.config:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "serve":
        return cmd_serve(args, None)
    deterministic = args.deterministic
    if args.server or client is not None:
        backend = RemoteBackend(args.server or "http://testserver", deterministic, client)
    else:
        backend = LocalBackend(deterministic)
    if os.environ.get("STATGEO_THREADS") and not os.environ["STATGEO_THREADS"].isdigit():
        print("error: STATGEO_THREADS must be a positive integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, backend)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
