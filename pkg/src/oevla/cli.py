"""Command-line front end.

Groups:
    forge   demo archives, crop pools, dataset builds, training manifests
    bench   benchmark suite generation
    eval    closed-loop evaluation, replay, re-reporting
    codec   action chunk encode/decode and normalization stats
    env     deterministic rendering and episode replay checks
    rpc     policy protocol servers

Every command that generates artifacts requires an explicit --seed; outputs
are written atomically and contain no timestamps, so identical invocations
produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench, data, forge, harness, raster, rpc, world as W
from .codec import (
    DEFAULT_CONFIG,
    CodecError,
    config_hash,
    decode_chunk,
    denormalize,
    encode_chunk,
    fit_stats,
    load_stats,
    normalize,
    save_stats,
)
from .images import decode_png, encode_png
from .policy import (
    CodecLoopPolicy,
    OraclePolicy,
    ParsingOraclePolicy,
    PolicyError,
    RandomPolicy,
)
from .types import InstructionForm, ValidationError


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib

        with open(path, "rb") as f:
            return tomllib.load(f)
    return data.read_json(path)


def _apply_config(args: argparse.Namespace, keys: list[str]) -> None:
    """Fill still-unset args from --config; CLI flags win."""
    if not getattr(args, "config", None):
        return
    cfg = _load_config_file(args.config)
    for key in keys:
        if getattr(args, key, None) is None and key in cfg:
            setattr(args, key, cfg[key])


def make_policy_factory(
    spec: str,
    seed: int,
    store=None,
    debug_hints: bool = False,
    timeout: float = rpc.DEFAULT_TIMEOUT,
):
    """Resolve a policy spec string to (zero-arg factory, cleanup callable).

    Specs: oracle, parsing-oracle, random, and their -codec variants (chunks
    forced through the token codec); remote:HOST:PORT dials a policy server;
    listen:PORT waits for a policy to dial in.
    """
    simple = {
        "oracle": OraclePolicy,
        "parsing-oracle": ParsingOraclePolicy,
        "random": lambda: RandomPolicy(seed),
        "oracle-codec": lambda: CodecLoopPolicy(OraclePolicy()),
        "parsing-oracle-codec": lambda: CodecLoopPolicy(ParsingOraclePolicy()),
        "random-codec": lambda: CodecLoopPolicy(RandomPolicy(seed)),
    }
    if spec in simple:
        return simple[spec], lambda: None
    if spec.startswith("remote:"):
        _, host, port = spec.split(":")
        return (
            lambda: rpc.connect_policy(host, int(port), store, DEFAULT_CONFIG, debug_hints, timeout),
            lambda: None,
        )
    if spec.startswith("listen:"):
        listener = rpc.PolicyListener(int(spec.split(":")[1]), timeout=timeout)
        print(f"waiting for policy connections on port {listener.port}", file=sys.stderr)
        return (
            lambda: listener.accept_policy(store, DEFAULT_CONFIG, debug_hints),
            listener.close,
        )
    raise ValidationError(f"unknown policy spec {spec!r}")


# ---------------------------------------------------------------- forge


def cmd_forge_demos(args) -> int:
    profiles = args.profiles.split(",")
    ids = forge.generate_archive(
        args.out, profiles, args.count, args.seed, args.resolution, args.min_frames
    )
    print(f"wrote {len(ids)} episodes to {args.out}")
    return 0


def cmd_forge_crops(args) -> int:
    dirs = data.list_episode_dirs(args.archive)
    db = forge.build_crop_db(dirs, detections_override=args.detections)
    if args.ingest:
        n = forge.ingest_external_crops(db, args.ingest)
        print(f"ingested {n} external crops from {args.ingest}")
    db.save(args.out)
    total = sum(len(rows) for rows in db.entries.values())
    print(f"crop db: {total} crops over {len(db.entries)} objects -> {args.out}")
    return 0


def cmd_forge_pool(args) -> int:
    forge.make_external_pool(args.out, args.seed, args.per_object)
    print(f"external pool -> {args.out}")
    return 0


def cmd_forge_build(args) -> int:
    _apply_config(args, ["fraction", "seed", "vgr_seg_len", "vgr_stride"])
    if args.fraction is None or args.seed is None:
        raise ValidationError("forge build needs --fraction and --seed (flag or config)")
    db = forge.CropDB.load(args.crops)
    manifest = forge.build_dataset(
        args.archive,
        args.out,
        float(args.fraction),
        int(args.seed),
        db,
        args.vgr_seg_len if args.vgr_seg_len is not None else forge.VGR_SEG_LEN,
        args.vgr_stride if args.vgr_stride is not None else forge.VGR_STRIDE,
    )
    print(f"dataset: {manifest['n_samples']} samples -> {args.out}")
    return 0


def cmd_forge_manifest(args) -> int:
    doc = forge.stage_manifest(args.stage, args.dataset)
    if args.out:
        data.atomic_write_json(doc, args.out)
        print(f"stage {args.stage} manifest -> {args.out}")
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------- bench


def cmd_bench_gen(args) -> int:
    _apply_config(args, ["profile", "form", "difficulty", "n", "seed", "resolution", "crops"])
    for key in ("profile", "form", "n", "seed"):
        if getattr(args, key) is None:
            raise ValidationError(f"bench gen needs --{key} (flag or config)")
    crop_db = forge.CropDB.load(args.crops) if args.crops else None
    suite = bench.build_suite(
        args.profile,
        InstructionForm(args.form),
        args.difficulty or "base",
        int(args.n),
        int(args.seed),
        args.resolution if args.resolution is not None else 128,
        crop_db,
    )
    bench.save_suite(suite, args.out)
    print(f"suite: {len(suite.sequences)} sequences -> {args.out}")
    return 0


# ---------------------------------------------------------------- eval


def cmd_eval_run(args) -> int:
    import os

    suite = bench.load_suite(args.suite)
    factory, cleanup = make_policy_factory(
        args.policy, args.seed, suite.store, args.debug_hints, args.timeout
    )
    try:
        logs, report = harness.run_suite(
            factory, suite, args.budget, args.replan, args.workers
        )
    finally:
        cleanup()
    os.makedirs(args.out, exist_ok=True)
    harness.save_logs(logs, os.path.join(args.out, "logs.jsonl"))
    data.atomic_write_json(report.to_json(), os.path.join(args.out, "report.json"))
    print(json.dumps(report.display(), indent=2, sort_keys=True))
    return 0


def cmd_eval_replay(args) -> int:
    suite = bench.load_suite(args.suite)
    logs = harness.load_logs(args.logs)
    mismatches = 0
    for log in logs:
        flags = harness.replay_log(suite, log)
        recorded = [r.success for r in log.subtasks]
        if flags != recorded:
            mismatches += 1
            print(f"{log.sequence_id}: recorded {recorded} replayed {flags}")
    if mismatches:
        print(f"{mismatches}/{len(logs)} sequences disagree with their logs")
        return 1
    print(f"replay ok: {len(logs)} sequences verified")
    return 0


def cmd_eval_report(args) -> int:
    logs = harness.load_logs(args.logs)
    report = harness.compute_metrics(logs, args.chain_len)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------- codec


def _read_json_arg(path: str):
    if path == "-":
        return json.load(sys.stdin)
    return data.read_json(path)


def _write_json_arg(doc, path: str) -> None:
    if path == "-":
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        data.atomic_write_json(doc, path)


def cmd_codec_encode(args) -> int:
    chunk = np.asarray(_read_json_arg(args.infile), dtype=np.float64).reshape(5, 7)
    if args.stats:
        stats = load_stats(args.stats)
        chunk = np.stack([normalize(row, stats) for row in chunk])
    tokens = encode_chunk(chunk)
    _write_json_arg(list(tokens), args.out)
    return 0


def cmd_codec_decode(args) -> int:
    tokens = _read_json_arg(args.infile)
    chunk = decode_chunk(tokens)
    if args.stats:
        stats = load_stats(args.stats)
        chunk = np.stack([denormalize(row, stats) for row in chunk])
    _write_json_arg([[float(v) for v in row] for row in chunk], args.out)
    return 0


def cmd_codec_stats(args) -> int:
    actions = []
    for ep_dir in data.list_episode_dirs(args.archive):
        meta = data.read_json(f"{ep_dir}/meta.json")
        actions.extend(meta["actions"])
    stats = fit_stats(np.asarray(actions, dtype=np.float64))
    save_stats(stats, args.out)
    print(f"stats over {stats.n_actions} actions -> {args.out}")
    return 0


def cmd_codec_info(args) -> int:
    doc = {"codec": DEFAULT_CONFIG.to_json(), "codec_hash": config_hash(DEFAULT_CONFIG)}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------- env


def cmd_env_render(args) -> int:
    state = W.reset(args.profile, args.seed)
    img = raster.render(state, args.view, args.resolution)
    with open(args.out, "wb") as f:
        f.write(encode_png(img))
    print(f"{args.view} view of {args.profile} seed {args.seed} -> {args.out}")
    return 0


def cmd_env_replay(args) -> int:
    episode = data.load_episode(args.episode)
    state = W.reset(episode.env_id, episode.reset_seed)
    resolution = episode.frames[0].static_view.shape[0]
    for t, frame in enumerate(episode.frames):
        for view in ("static", "wrist"):
            got = raster.render(state, view, resolution)
            want = frame.static_view if view == "static" else frame.wrist_view
            if not np.array_equal(got, want):
                print(f"frame {t} {view} view does not match the recorded pixels")
                return 1
        if t < len(episode.actions):
            state = W.step(state, episode.actions[t])
    print(f"replay ok: {len(episode.frames)} frames match")
    return 0


# ---------------------------------------------------------------- rpc


def cmd_rpc_serve(args) -> int:
    if args.stdio:
        rpc.serve_stdio(args.policy, args.seed)
        return 0
    if args.connect:
        host, port = args.connect.rsplit(":", 1)
        rpc.dial_out(host, int(port), args.policy, args.seed)
        return 0
    server = rpc.RpcServer(args.policy, args.seed, port=args.port)
    print(f"serving {args.policy} policy on port {server.port}", file=sys.stderr)
    try:
        server.serve(args.max_conns)
    finally:
        server.stop()
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oevla", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="group", required=True)

    forge_p = sub.add_parser("forge", help="data generation").add_subparsers(
        dest="command", required=True
    )
    d = forge_p.add_parser("demos", help="generate a demo episode archive")
    d.add_argument("--out", required=True)
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--n", type=int, required=True, dest="count")
    d.add_argument("--profile", default="A,B,C", dest="profiles",
                   help="comma-separated env profile ids")
    d.add_argument("--resolution", type=int, default=128)
    d.add_argument("--min-frames", type=int, default=0, dest="min_frames")
    d.set_defaults(func=cmd_forge_demos)

    c = forge_p.add_parser("crops", help="harvest an object crop db from an archive")
    c.add_argument("--archive", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--ingest", help="directory of external crops to add")
    c.add_argument("--detections", help="JSON file of boxes overriding the archived ones")
    c.set_defaults(func=cmd_forge_crops)

    e = forge_p.add_parser("pool", help="synthesize an external crop pool")
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--per-object", type=int, default=8, dest="per_object")
    e.set_defaults(func=cmd_forge_pool)

    b = forge_p.add_parser("build", help="build the mixed five-route dataset")
    b.add_argument("--archive", required=True)
    b.add_argument("--crops", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--fraction", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--vgr-seg-len", type=int, dest="vgr_seg_len")
    b.add_argument("--vgr-stride", type=int, dest="vgr_stride")
    b.add_argument("--config", help="JSON or TOML file with default values")
    b.set_defaults(func=cmd_forge_build)

    m = forge_p.add_parser("manifest", help="emit a training-stage manifest")
    m.add_argument("--stage", type=int, choices=(1, 2), required=True)
    m.add_argument("--dataset")
    m.add_argument("--out")
    m.set_defaults(func=cmd_forge_manifest)

    bench_p = sub.add_parser("bench", help="benchmark suites").add_subparsers(
        dest="command", required=True
    )
    g = bench_p.add_parser("gen", help="generate an evaluation suite")
    g.add_argument("--out", required=True)
    g.add_argument("--profile")
    g.add_argument("--form", choices=[f.value for f in InstructionForm])
    g.add_argument("--difficulty", choices=("base", "hard"))
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--resolution", type=int)
    g.add_argument("--crops", help="crop db directory (needed for hard VOS)")
    g.add_argument("--config", help="JSON or TOML file with default values")
    g.set_defaults(func=cmd_bench_gen)

    eval_p = sub.add_parser("eval", help="closed-loop evaluation").add_subparsers(
        dest="command", required=True
    )
    r = eval_p.add_parser("run", help="run a policy over a suite")
    r.add_argument("--suite", required=True)
    r.add_argument("--policy", required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--budget", type=int)
    r.add_argument("--replan", choices=harness.REPLAN_MODES, default="every_chunk")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--debug-hints", action="store_true", dest="debug_hints")
    r.add_argument("--timeout", type=float, default=rpc.DEFAULT_TIMEOUT)
    r.set_defaults(func=cmd_eval_run)

    rp = eval_p.add_parser("replay", help="verify logs against the env")
    rp.add_argument("--suite", required=True)
    rp.add_argument("--logs", required=True)
    rp.set_defaults(func=cmd_eval_replay)

    rr = eval_p.add_parser("report", help="recompute metrics from logs")
    rr.add_argument("--logs", required=True)
    rr.add_argument("--chain-len", type=int, default=5, dest="chain_len")
    rr.set_defaults(func=cmd_eval_report)

    codec_p = sub.add_parser("codec", help="action codec").add_subparsers(
        dest="command", required=True
    )
    ce = codec_p.add_parser("encode", help="chunk JSON -> token ids")
    ce.add_argument("--in", dest="infile", required=True, help="file or - for stdin")
    ce.add_argument("--out", default="-")
    ce.add_argument("--stats", help="normalize with these stats first")
    ce.set_defaults(func=cmd_codec_encode)

    cd = codec_p.add_parser("decode", help="token ids -> chunk JSON")
    cd.add_argument("--in", dest="infile", required=True)
    cd.add_argument("--out", default="-")
    cd.add_argument("--stats", help="denormalize with these stats after")
    cd.set_defaults(func=cmd_codec_decode)

    cs = codec_p.add_parser("stats", help="fit normalization stats from an archive")
    cs.add_argument("--archive", required=True)
    cs.add_argument("--out", required=True)
    cs.set_defaults(func=cmd_codec_stats)

    ci = codec_p.add_parser("info", help="print codec configuration and hash")
    ci.set_defaults(func=cmd_codec_info)

    env_p = sub.add_parser("env", help="environment utilities").add_subparsers(
        dest="command", required=True
    )
    er = env_p.add_parser("render", help="render a fresh reset to PNG")
    er.add_argument("--profile", required=True)
    er.add_argument("--seed", type=int, required=True)
    er.add_argument("--out", required=True)
    er.add_argument("--view", choices=("static", "wrist"), default="static")
    er.add_argument("--resolution", type=int, default=128)
    er.set_defaults(func=cmd_env_render)

    ep = env_p.add_parser("replay", help="re-simulate an archived episode")
    ep.add_argument("--episode", required=True)
    ep.set_defaults(func=cmd_env_replay)

    rpc_p = sub.add_parser("rpc", help="policy protocol").add_subparsers(
        dest="command", required=True
    )
    rs = rpc_p.add_parser("serve", help="run a built-in policy server")
    rs.add_argument("--policy", choices=rpc.SERVER_POLICIES, required=True)
    rs.add_argument("--seed", type=int, required=True)
    rs.add_argument("--port", type=int, default=0)
    rs.add_argument("--stdio", action="store_true")
    rs.add_argument("--connect", help="HOST:PORT of a listening evaluator")
    rs.add_argument("--max-conns", type=int, dest="max_conns")
    rs.set_defaults(func=cmd_rpc_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, CodecError, PolicyError, rpc.ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
