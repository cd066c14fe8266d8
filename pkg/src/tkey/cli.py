"""``tkey`` command line.

Default paths live under $TKEY_HOME (or ~/.tkey): ``prover.state`` for the
client and ``credentials.log`` for the server side store.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import experiments, plots
from .chain import HashCounter, Params
from .checkpoints import ExponentialModel, default_q_worst, make_plan
from .encoding import (
    base32_to_password, enrollment_to_uri, password_to_base32, password_to_words, uri_to_enrollment,
)
from .errors import TKeyError, VerificationError
from .prover import PlanConfig, deserialize, gen_password, init, reposition, serialize
from .store import CredentialStore
from .verifier import SkewPolicy, Verifier

SCHEMES = ("naive", "recursive", "optimal", "mixed")


def tkey_home() -> Path:
    return Path(os.environ.get("TKEY_HOME") or Path.home() / ".tkey")


def _state_path(args) -> Path:
    return Path(args.state) if args.state else tkey_home() / "prover.state"


def _store_path(args) -> Path:
    return Path(args.store) if args.store else tkey_home() / "credentials.log"


def save_state(state, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(serialize(state))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_state(path: Path):
    return deserialize(path.read_bytes())


def _now_slot(args, I: int) -> int:
    return args.at if args.at is not None else int(time.time() // I)


def _emit(rows: Sequence[dict], columns: Optional[Sequence[str]] = None) -> None:
    if not rows:
        return
    columns = columns or list(rows[0])
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


# -- subcommands ------------------------------------------------------------------

def cmd_enroll(args) -> int:
    scheme = "expectation_optimal" if args.scheme == "optimal" else args.scheme
    q_worst = default_q_worst(args.checkpoints) if scheme == "mixed" else args.checkpoints
    cfg = PlanConfig(scheme=scheme, q_total=args.checkpoints, q_worst=q_worst, mean_gap=1.0 / args.lam)
    params = Params(k=args.chain_length, I=args.slot_seconds)
    state, enr = init(params, now=_now_slot(args, params.I), plan_config=cfg)
    save_state(state, _state_path(args))
    uri = enrollment_to_uri(enr)
    if args.cred_id:
        with CredentialStore(_store_path(args)) as store:
            Verifier(store).enroll(args.cred_id, enr, replace_existing=args.replace)
    print(uri)
    return 0


def cmd_otp(args) -> int:
    path = _state_path(args)
    state = load_state(path)
    now = _now_slot(args, state.params.I)
    ctr = HashCounter()
    cv = gen_password(state, now, counter=ctr)
    # persist last_emitted before the password leaves the process
    save_state(state, path)
    print(f"slot\t{cv.at}")
    print(f"otp\t{password_to_base32(cv.value)}")
    print(f"words\t{' '.join(password_to_words(cv.value))}")
    if args.verbose:
        print(f"hashes\t{ctr.count}")
    rctr = HashCounter()
    reposition(state, now, counter=rctr)
    save_state(state, path)
    if args.verbose:
        print(f"reposition_hashes\t{rctr.count}")
    return 0


def cmd_verify(args) -> int:
    with CredentialStore(_store_path(args)) as store:
        v = Verifier(store, SkewPolicy(w_back=args.window))
        if args.enroll_uri:
            v.enroll(args.cred_id, uri_to_enrollment(args.enroll_uri), replace_existing=True)
        cred = v.get(args.cred_id)
        t = _now_slot(args, cred.params.I)
        try:
            acc = v.verify(args.cred_id, base32_to_password(args.otp), t)
        except VerificationError as exc:
            print(f"rejected\t{exc.reason}")
            return 1
    print(f"accepted\t{acc.slot}")
    return 0


def cmd_serve(args) -> int:
    from .service import make_server

    host, _, port = args.bind.rpartition(":")
    server = make_server((host or "127.0.0.1", int(port)), _store_path(args), SkewPolicy(w_back=args.window))
    logging.getLogger(__name__).info("listening on %s:%d", *server.server_address[:2])
    print(f"listening\t{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else tkey_home() / "results"


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.what == "lemmas":
        N = args.N or 2 ** 16
        rows = experiments.run_lemmas(N, trials=args.trials or 100, seed=args.seed,
                                      **({"k_image": args.k, "k_collision": args.k, "k_preimage": args.k} if args.k else {}))
        fig = plots.lemma_bands(rows, out / "lemmas.png")
    elif args.what == "attacks":
        budgets = args.T or [1024, 4096, 8192]
        rows = experiments.run_attacks(args.N or 2 ** 20, args.k or 64, budgets, args.trials or 1000, args.seed)
        fig = plots.attack_success(rows, out / "attacks.png")
    else:
        model_lam = args.lam
        qs = args.q or [5, 10, 15, 20, 25]
        rows = experiments.run_checkpoints(args.ell, model_lam, qs, args.trials or 200, args.seed)
        fig = plots.checkpoint_costs(rows, out / "checkpoints.png")
        model = ExponentialModel(model_lam)
        q = args.checkpoints
        plans = {s: make_plan(s, args.ell, q, model, default_q_worst(q)) for s in ("naive", "recursive", "expectation_optimal", "mixed")}
        plots.checkpoint_placement(plans, model, out / "placement.png")
    jsonl, csv_path = experiments.write_results(rows, out, args.what)
    if args.what == "checkpoints":
        _emit(rows, ["q", "scheme", "mean", "se", "max", "cap", "logins"])
    else:
        _emit([{**r, **{f"{k}": v for k, v in r["params"].items()}} for r in rows],
              ["name", *sorted({k for r in rows for k in r["params"]} - {"seed"}), "estimate", "se", "reference", "trials", "ok"])
    print(f"# results {jsonl} {csv_path} figure {fig}", file=sys.stderr)
    return 0 if all(r.get("ok", True) for r in rows) else 2


def cmd_bench(args) -> int:
    ks = args.chain_length_list or [2 ** 20, 2 ** 21, 2 ** 22]
    rows = experiments.run_bench(ks, q=args.checkpoints, scheme=args.scheme, lam=args.lam,
                                 samples=args.samples, seed=args.seed, I=args.slot_seconds)
    out = _out_dir(args)
    jsonl, csv_path = experiments.write_results(rows, out, "bench")
    fig = plots.bench_scaling(rows, out / "bench.png")
    _emit(rows)
    print(f"# results {jsonl} {csv_path} figure {fig}", file=sys.stderr)
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tkey", description="Time-based one-time passwords from hash chains.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="cmd", required=True)

    def chain_opts(sp):
        sp.add_argument("--chain-length", type=int, default=2 ** 21, help="slots in the chain (k)")
        sp.add_argument("--slot-seconds", type=int, default=30, help="slot length I in seconds")
        sp.add_argument("--checkpoints", type=int, default=20)
        sp.add_argument("--scheme", choices=SCHEMES, default="mixed")
        sp.add_argument("--lambda", dest="lam", type=float, default=1 / 20160, help="logins per slot")

    e = sub.add_parser("enroll", help="create a prover state and print its enrollment URI")
    chain_opts(e)
    e.add_argument("--state")
    e.add_argument("--store", help="also register the credential in this store")
    e.add_argument("--cred-id")
    e.add_argument("--replace", action="store_true")
    e.add_argument("--at", type=int, help="override the current slot")
    e.set_defaults(func=cmd_enroll)

    o = sub.add_parser("otp", help="print the password for the current slot")
    o.add_argument("--state")
    o.add_argument("--at", type=int, help="override the current slot")
    o.add_argument("-v", "--verbose", action="store_true")
    o.set_defaults(func=cmd_otp)

    v = sub.add_parser("verify", help="check a password against the credential store")
    v.add_argument("--store")
    v.add_argument("--cred-id", required=True)
    v.add_argument("--otp", required=True)
    v.add_argument("--enroll-uri", help="(re)enroll from this URI before verifying")
    v.add_argument("--window", type=int, default=2)
    v.add_argument("--at", type=int, help="override the server slot")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("serve", help="run the HTTP verification service")
    s.add_argument("--store")
    s.add_argument("--bind", default="127.0.0.1:8470")
    s.add_argument("--window", type=int, default=2)
    s.set_defaults(func=cmd_serve)

    m = sub.add_parser("simulate", help="Monte Carlo experiments")
    m.add_argument("what", choices=("lemmas", "attacks", "checkpoints"))
    m.add_argument("--N", type=int)
    m.add_argument("--k", type=int)
    m.add_argument("--T", type=int, nargs="+")
    m.add_argument("--q", type=int, nargs="+", help="checkpoint counts (checkpoints experiment)")
    m.add_argument("--ell", type=int, default=1_050_000)
    m.add_argument("--lambda", dest="lam", type=float, default=1 / 20160)
    m.add_argument("--checkpoints", type=int, default=20, help="plan size for the placement figure")
    m.add_argument("--trials", type=int, help="trials, function samples or sessions")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="hash counts and timings per chain length")
    chain_opts(b)
    b.add_argument("--chain-lengths", dest="chain_length_list", type=int, nargs="+")
    b.add_argument("--samples", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TKeyError as exc:
        print(f"error\t{type(exc).__name__}\t{exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error\tFileNotFoundError\t{exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
