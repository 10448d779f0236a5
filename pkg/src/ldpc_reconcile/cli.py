"""Command-line harness.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags of the same names.
"""

from __future__ import annotations

import argparse
import hashlib
import socket
import sys
from pathlib import Path

import numpy as np

from .channel import BscParams, generate_key_pair
from .ldpc_core import DegreeDistribution, ParityCheckMatrix, build_peg_code, load_alist, save_alist
from .metrics import execution_efficiency
from .prng import derive_seed
from .protocol import (
    Alice,
    Bob,
    ConfigurationError,
    ProtocolConfig,
    Status,
    StreamPort,
    run_alice,
    run_bob,
)
from .rate_adapt import ModulationParams, build_schedule, reserved_count
from .simulation import run_sweep, simulate_session, sweep_csv, trial_seed

EXIT_OK = 0
EXIT_TOOL_ERROR = 1
EXIT_PROTOCOL_FAILURE = 2


def _float_list(text: str) -> list[float]:
    """``"0.055,0.06"`` or ``"0.055:0.080:0.005"`` (inclusive stop)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(t) for t in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _crossover_policy(text: str):
    return None if text == "matched" else float(text)


# key -> (parser, default, help)
SETTINGS = {
    "code": (str, None, "alist file of the mother code (else build one from n/lambda/rho)"),
    "n": (int, 2000, "code length"),
    "lambda": (str, "3:1", "variable-node edge distribution, degree:coefficient terms"),
    "rho": (str, "7:7/15 8:8/15", "check-node edge distribution"),
    "code_seed": (int, 7, "code construction seed"),
    "r0": (float, 0.6, "mother-code rate (schedule command without a code file)"),
    "delta": (float, 0.1, "total puncturing + shortening fraction"),
    "rounds": (int, 6, "maximum extra rounds Q"),
    "e0": (float, 0.062, "lowest crossover the session must cover"),
    "e1": (float, 0.092, "highest crossover the session must cover"),
    "grid": (_float_list, _float_list("0.055:0.080:0.005"), "sweep crossovers, list or start:stop:step"),
    "trials": (int, 200, "sessions per grid point"),
    "max_iters": (int, 100, "belief-propagation iteration cap"),
    "crossover": (_crossover_policy, None, "decoder channel model: 'matched' or a fixed value"),
    "verify": (_bool, False, "append a 64-bit key digest check after Ack"),
    "seed": (int, 1, "master seed"),
    "e": (float, 0.07, "true crossover for run/serve/connect simulation"),
    "output": (str, None, "output file (default: standard output)"),
    "workers": (int, 1, "sweep worker processes"),
    "host": (str, "127.0.0.1", "serve/connect address"),
    "port": (int, 9750, "serve/connect TCP port"),
    "key_file": (str, None, "local key as 0/1 text (serve/connect); else simulated from seed and e"),
}


def load_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SETTINGS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def resolve_settings(args: argparse.Namespace) -> dict:
    raw = load_config_file(args.config) if args.config else {}
    for key in SETTINGS:
        flag = getattr(args, key, None)
        if flag is not None:
            raw[key] = flag
    settings = {}
    for key, (parse, default, _) in SETTINGS.items():
        settings[key] = parse(raw[key]) if key in raw else default
    return settings


def load_code(cfg: dict) -> ParityCheckMatrix:
    if cfg["code"]:
        return load_alist(Path(cfg["code"]).read_bytes())
    dist = DegreeDistribution.parse(cfg["lambda"], cfg["rho"])
    return build_peg_code(cfg["n"], dist, cfg["code_seed"])


def protocol_config(cfg: dict) -> ProtocolConfig:
    return ProtocolConfig(
        delta=cfg["delta"],
        q_rounds=cfg["rounds"],
        max_iters=cfg["max_iters"],
        e_range=(cfg["e0"], cfg["e1"]),
        assumed_crossover=cfg["crossover"],
        verify=cfg["verify"],
    )


def _emit(text: str, cfg: dict) -> None:
    if cfg["output"]:
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_build_code(cfg: dict) -> int:
    dist = DegreeDistribution.parse(cfg["lambda"], cfg["rho"])
    code = build_peg_code(cfg["n"], dist, cfg["code_seed"])
    data = save_alist(code)
    if cfg["output"]:
        Path(cfg["output"]).write_bytes(data)
    else:
        sys.stdout.write(data.decode("ascii"))
    cols, rows = code.degree_histograms()
    print(f"n={code.n} m={code.m} realized rate={code.rate:.6f} "
          f"sha256={hashlib.sha256(data).hexdigest()[:16]}", file=sys.stderr)
    print(f"column degrees: {cols}  row degrees: {rows}", file=sys.stderr)
    return EXIT_OK


def cmd_schedule(cfg: dict) -> int:
    if cfg["code"]:
        code = load_alist(Path(cfg["code"]).read_bytes())
        n, r0 = code.n, code.rate
    else:
        n, r0 = cfg["n"], cfg["r0"]
    schedule = build_schedule(ModulationParams(n, r0, cfg["delta"], cfg["rounds"]))
    _emit(schedule.to_csv(), cfg)
    return EXIT_OK


def _report(res, e: float) -> str:
    lines = [
        f"status: {'success' if res.success else 'failure'}",
        f"rounds_used: {res.rounds_used}",
        f"p: {res.p}",
        f"s: {res.s}",
        f"pi: {res.pi:.6f}",
        f"sigma: {res.sigma:.6f}",
        f"pi_plus_sigma: {res.pi + res.sigma:.6f}",
        f"rate: {res.rate:.6f}",
        f"disclosed_bits: {res.disclosed_bits}",
        f"decode_attempts: {res.decode_attempts}",
        f"residual_errors: {res.residual_errors}",
    ]
    if 0.0 < e < 0.5:
        lines.append(f"efficiency: {execution_efficiency(res.r0, res.delta, res.pi, e):.6f}")
    if res.reason:
        lines.append(f"reason: {res.reason}")
    return "\n".join(lines) + "\n"


def cmd_run(cfg: dict) -> int:
    code = load_code(cfg)
    res = simulate_session(code, protocol_config(cfg), cfg["e"], trial_seed(cfg["seed"], cfg["e"], 0))
    _emit(_report(res, cfg["e"]), cfg)
    return EXIT_OK if res.success else EXIT_PROTOCOL_FAILURE


def cmd_sweep(cfg: dict) -> int:
    code = load_code(cfg)
    stats = run_sweep(code, protocol_config(cfg), cfg["grid"], cfg["trials"], cfg["seed"], cfg["workers"])
    _emit(sweep_csv(stats), cfg)
    return EXIT_OK


def _local_keys(cfg: dict, code: ParityCheckMatrix) -> tuple[np.ndarray, np.ndarray]:
    key_len = code.n - reserved_count(code.n, cfg["delta"])
    return generate_key_pair(key_len, BscParams(cfg["e"], derive_seed(cfg["seed"], "endpoint-keys")))


def _read_key_file(path: str) -> np.ndarray:
    text = "".join(Path(path).read_text().split())
    if set(text) - {"0", "1"}:
        raise ValueError(f"{path}: key file must contain only 0 and 1")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def cmd_serve(cfg: dict) -> int:
    code = load_code(cfg)
    observed = _read_key_file(cfg["key_file"]) if cfg["key_file"] else _local_keys(cfg, code)[1]
    bob = Bob(observed, code, protocol_config(cfg))
    with socket.create_server((cfg["host"], cfg["port"])) as server:
        print(f"listening on {cfg['host']}:{cfg['port']}", file=sys.stderr)
        conn, _ = server.accept()
        with conn:
            status = run_bob(bob, StreamPort(conn))
    text = f"status: {status.value}\nrounds_used: {bob.round}\ndisclosed_bits: {bob.disclosed_bits}\n"
    if bob.reason:
        text += f"reason: {bob.reason}\n"
    key = bob.decoded_key()
    if key is not None:
        text += "key: " + "".join(map(str, key)) + "\n"
    _emit(text, cfg)
    return EXIT_OK if status is Status.SUCCESS else EXIT_PROTOCOL_FAILURE


def cmd_connect(cfg: dict) -> int:
    code = load_code(cfg)
    key = _read_key_file(cfg["key_file"]) if cfg["key_file"] else _local_keys(cfg, code)[0]
    alice = Alice(key, code, protocol_config(cfg), derive_seed(cfg["seed"], "endpoint-session"))
    with socket.create_connection((cfg["host"], cfg["port"])) as conn:
        status = run_alice(alice, StreamPort(conn))
    text = f"status: {status.value}\nrounds_used: {alice.round}\ndisclosed_bits: {alice.disclosed_bits}\n"
    if alice.reason:
        text += f"reason: {alice.reason}\n"
    _emit(text, cfg)
    return EXIT_OK if status is Status.SUCCESS else EXIT_PROTOCOL_FAILURE


COMMANDS = {
    "build-code": (cmd_build_code, "construct a PEG mother code and write it as alist"),
    "schedule": (cmd_schedule, "print the per-round puncture/shorten schedule as CSV"),
    "run": (cmd_run, "simulate one reconciliation session"),
    "sweep": (cmd_sweep, "Monte-Carlo sweep over crossover values, CSV output"),
    "serve": (cmd_serve, "Bob endpoint over TCP"),
    "connect": (cmd_connect, "Alice endpoint over TCP"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpc-reconcile", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value settings file")
        for key, (_, default, help_) in SETTINGS.items():
            flags = sorted({f"--{key}", f"--{key.replace('_', '-')}"})
            p.add_argument(*flags, dest=key, default=None,
                           help=f"{help_} (default: {default})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_settings(args)
        return COMMANDS[args.command][0](cfg)
    except (ValueError, OSError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOOL_ERROR


if __name__ == "__main__":
    sys.exit(main())
