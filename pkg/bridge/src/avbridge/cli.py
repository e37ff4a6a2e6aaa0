"""avbridge: run feature extraction and write AVHF files.

Exit codes mirror the consumer toolkit: 0 success, 1 usage error, 2 data
error, 3 internal error. The batch mode follows the manifest convention of
one JSON record per line with source_id, audio_path, and feature_path.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .backends import FEATURE_DIM, make_backend
from .errors import BridgeError
from .extract import ExtractionJob, extract

log = logging.getLogger("avbridge")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser():
    parser = _Parser(prog="avbridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument(
        "--backend", choices=["deterministic", "avhubert"], default="deterministic"
    )
    common.add_argument("--checkpoint", default=None, help="pretrained model checkpoint")
    common.add_argument("--layer", type=int, default=-1, help="encoder layer to export")
    common.add_argument("--dim", type=int, default=FEATURE_DIM)

    p = sub.add_parser("extract", parents=[common], help="one media file to one AVHF file")
    p.add_argument("--media", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("batch", parents=[common], help="process a manifest of jobs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--media-root", default=None)
    p.add_argument("--out-root", default=None)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _resolve(root, path):
    return path if root is None or os.path.isabs(path) else os.path.join(root, path)


def _cmd_extract(args):
    backend = make_backend(args.backend, args.checkpoint, args.layer, args.dim)
    out = extract(ExtractionJob(media_path=args.media, output_path=args.out), backend)
    log.info("wrote %s", out)
    return 0


def _cmd_batch(args):
    backend = make_backend(args.backend, args.checkpoint, args.layer, args.dim)
    base = os.path.dirname(os.path.abspath(args.manifest))
    media_root = args.media_root or base
    out_root = args.out_root or base
    jobs = []
    with open(args.manifest, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                jobs.append(
                    ExtractionJob(
                        media_path=_resolve(media_root, record["audio_path"]),
                        output_path=_resolve(out_root, record["feature_path"]),
                        source_id=record.get("source_id", ""),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise BridgeError(f"manifest line {line_number}: {exc}") from exc

    def one(job):
        extract(job, backend)
        return job.output_path

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        for out in pool.map(one, jobs):
            log.info("wrote %s", out)
    log.info("%d jobs done", len(jobs))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"avbridge: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "extract":
            return _cmd_extract(args)
        return _cmd_batch(args)
    except BridgeError as exc:
        log.error("%s", exc)
        return 2
    except Exception:
        import traceback

        traceback.print_exc()
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
