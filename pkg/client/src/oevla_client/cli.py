"""oe-vla-client: connect a policy to a listening evaluator.

    oe-vla-client --connect 127.0.0.1:4242 --policy random --seed 7
    oe-vla-client --connect 127.0.0.1:4242 --policy echo-oracle
"""

from __future__ import annotations

import argparse
import logging
import sys

from .policies import EchoOraclePolicy, RandomPolicy
from .protocol import ClientError, DEFAULT_TIMEOUT, run_client


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oe-vla-client",
                                description=__doc__.splitlines()[0])
    p.add_argument("--connect", required=True, metavar="HOST:PORT",
                   help="address of a listening evaluator")
    p.add_argument("--policy", choices=("random", "echo-oracle"), default="random")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed for the random policy")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("-v", "--verbose", action="store_true",
                   help="log every rejected act")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.verbose else logging.ERROR,
        format="%(name)s: %(message)s",
    )
    policy = RandomPolicy(args.seed) if args.policy == "random" else EchoOraclePolicy()
    try:
        stats = run_client(args.connect, policy, timeout=args.timeout)
    except (ClientError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"session done: {stats.resets} resets, {stats.steps} steps, "
          f"{len(stats.errors)} rejected acts")
    return 0


if __name__ == "__main__":
    sys.exit(main())
