"""``adu`` command line: features, train, decode, search, eval, ingest, synth-corpus.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

import argparse
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import AduError, DataError, ModelNotFoundError, NumericError
from .features import (
    corpus_mean_normalize,
    extract_mfcc,
    read_feature_file,
    read_wav,
    utterance_id_for,
    write_feature_file,
    write_wav,
)
from .metrics import (
    GroundTruth,
    PrecisionWarning,
    align_confusion,
    average_keyword_metrics,
    eer,
    keyword_scores,
    precision_at_n,
    write_truth_tsv,
)
from .npb.model import TransducerModel
from .search import format_results, search_keyword
from .synth import make_mini_corpus
from .timit import extract_queries, ingest_timit_layout, phone_transcripts, truth_rows
from .transducer import (
    decode,
    posteriorgram,
    read_posteriorgram,
    read_units,
    train_transducer,
    write_posteriorgram,
    write_units,
)

log = logging.getLogger("adu")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MODEL_FILE = "model.adu"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------

def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, command, cfg, inputs, seed, started):
    manifest = {
        "tool": "adu",
        "version": __version__,
        "command": command,
        "config": cfg.snapshot(),
        "inputs": {str(p): sha256(p) for p in sorted(set(map(Path, inputs)))},
        "seed": seed,
        "started_unix": started,
        "elapsed_s": round(time.time() - started, 3),
    }
    (Path(out_dir) / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _config(args):
    overrides = {}
    for key, attr in (("training.sweeps", "sweeps"), ("training.seed", "seed"),
                      ("model.variant", "variant"), ("model.truncation", "truncation"),
                      ("model.covariance", "covariance"), ("search.threshold", "threshold"),
                      ("search.top", "top"), ("search.combine", "combine"),
                      ("search.posteriorgram_mode", "mode")):
        if hasattr(args, attr):
            overrides[key] = getattr(args, attr)
    return load_config(getattr(args, "config", None), overrides)


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _audio_files(root, split=None):
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"input directory not found: {root}")
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".wav")
    if split:
        files = [p for p in files
                 if split in (q.lower() for q in p.relative_to(root).parent.parts)]
    if not files:
        raise DataError(f"no .wav files under {root}")
    return files


def _load_features(feat_dir):
    feat_dir = Path(feat_dir)
    if not feat_dir.is_dir():
        raise DataError(f"feature directory not found: {feat_dir}")
    paths = sorted(feat_dir.glob("*.feat"))
    if not paths:
        raise DataError(f"no .feat files in {feat_dir}")
    return paths, [read_feature_file(p) for p in paths]


def _model_path(path):
    p = Path(path)
    if p.is_dir():
        p = p / MODEL_FILE
    if not p.is_file():
        raise ModelNotFoundError(f"model not found: {p} (run `adu train` first)")
    return p


# -- commands ----------------------------------------------------------------

def cmd_features(args):
    started = time.time()
    cfg = _config(args)
    out = _out_dir(args.out)
    files = _audio_files(args.inp, args.split)
    ids = [utterance_id_for(p.relative_to(args.inp)) for p in files]
    seqs = [extract_mfcc(read_wav(p, uid), cfg.features) for p, uid in zip(files, ids)]
    if cfg.features.cmn:
        seqs = corpus_mean_normalize(seqs)
    for seq in seqs:
        write_feature_file(seq, out / f"{seq.utterance_id}.feat")
    write_manifest(out, "features", cfg, files, None, started)
    print(f"wrote {len(seqs)} feature files to {out}")


def cmd_train(args):
    started = time.time()
    cfg = _config(args)
    out = _out_dir(args.out)
    paths, corpus = _load_features(args.features)
    m = cfg.model
    model = train_transducer(
        corpus, hyper=cfg.hyperparameters(), variant=m.variant, sweeps=cfg.training.sweeps,
        truncation=m.truncation, components=m.components, pool_size=m.pool_size or None,
        covariance=m.covariance, init_states=m.init_states, share=m.share,
        seed=cfg.training.seed)
    model.save(out / MODEL_FILE)
    lines = ["sweep\tloglik"] + [f"{i + 1}\t{v!r}" for i, v in enumerate(model.trace)]
    (out / "trace.tsv").write_text("\n".join(lines) + "\n")
    write_manifest(out, "train", cfg, paths, cfg.training.seed, started)
    active = model.active_states(m.min_occupancy).size
    print(f"trained {m.variant}: {active} active units after {cfg.training.sweeps} sweeps")


def cmd_decode(args):
    started = time.time()
    cfg = _config(args)
    mpath = _model_path(args.model)
    model = TransducerModel.load(mpath)
    paths, corpus = _load_features(args.features)
    out = _out_dir(args.out)
    for seq in corpus:
        if args.posteriorgram:
            pg = posteriorgram(model, seq, floor=cfg.search.floor,
                               mode=cfg.search.posteriorgram_mode,
                               min_occupancy=cfg.model.min_occupancy)
            write_posteriorgram(pg, out / f"{seq.utterance_id}.pgram")
        else:
            units = decode(model, seq, min_occupancy=cfg.model.min_occupancy)
            write_units(units, out / f"{seq.utterance_id}.units")
    write_manifest(out, "decode", cfg, [mpath] + paths, None, started)
    print(f"decoded {len(corpus)} utterances to {out}")


def _parse_query_specs(specs, query_list):
    """Return [(query_id, path)] from ``[ID=]PATH`` flags and an optional TSV list."""
    out = []
    for item in specs or []:
        qid, _, path = item.rpartition("=")
        path = Path(path)
        if path.is_dir():
            files = sorted(p for p in path.iterdir()
                           if p.suffix.lower() in (".wav", ".pgram", ".feat"))
            out += [(qid or path.name, p) for p in files]
        else:
            out.append((qid or path.stem.split("_")[0], path))
    if query_list:
        qfile = Path(query_list)
        if not qfile.is_file():
            raise DataError(f"query list not found: {qfile}")
        for line in qfile.read_text().splitlines()[1:]:
            if line.strip():
                qid, path = line.split("\t")[:2]
                p = Path(path)
                out.append((qid, p if p.is_absolute() else qfile.parent / p))
    if not out:
        raise UsageError("no queries given (use --query or --query-list)")
    return out


def _query_posteriorgram(path, model, cfg):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"query not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".pgram":
        return read_posteriorgram(path)
    if model is None:
        raise UsageError(f"{path}: audio/feature queries need --model")
    if suffix == ".wav":
        seq = extract_mfcc(read_wav(path), cfg.features)
    elif suffix == ".feat":
        seq = read_feature_file(path)
    else:
        raise DataError(f"{path}: unsupported query type")
    return posteriorgram(model, seq, floor=cfg.search.floor, mode=cfg.search.posteriorgram_mode,
                         min_occupancy=cfg.model.min_occupancy)


def cmd_search(args):
    started = time.time()
    cfg = _config(args)
    specs = _parse_query_specs(args.query, args.query_list)
    model = None
    inputs = []
    if args.model:
        mpath = _model_path(args.model)
        model = TransducerModel.load(mpath)
        inputs.append(mpath)
    corpus_dir = Path(args.corpus)
    if not corpus_dir.is_dir():
        raise DataError(f"corpus directory not found: {corpus_dir}")
    cpaths = sorted(corpus_dir.glob("*.pgram"))
    corpus = [read_posteriorgram(p) for p in cpaths]
    inputs += cpaths
    grouped = {}
    for qid, path in specs:
        grouped.setdefault(qid, []).append(_query_posteriorgram(path, model, cfg))
        inputs.append(path)
    results = [search_keyword(qs, corpus, threshold=cfg.search.threshold,
                              combine=cfg.search.combine, top=cfg.search.top, query_id=qid)
               for qid, qs in sorted(grouped.items())]
    table = format_results(results)
    if args.out:
        out = _out_dir(args.out)
        (out / "results.tsv").write_text(table)
        write_manifest(out, "search", cfg, inputs, None, started)
        print(f"searched {len(corpus)} utterances for {len(results)} queries; "
              f"results in {out / 'results.tsv'}")
    else:
        sys.stdout.write(table)


def cmd_eval(args):
    from .search import read_results

    started = time.time()
    cfg = _config(args)
    out = _out_dir(args.out)
    inputs = []
    if args.results:
        truth_path = Path(args.truth) if args.truth else None
        if truth_path is None or not truth_path.is_file():
            raise DataError(f"ground truth not found: {args.truth}")
        truth = GroundTruth.read_tsv(truth_path)
        results = read_results(args.results)
        inputs += [args.results, truth_path]
        rows = []
        print("query\tP@N\tN\tEER")
        for res in results:
            n = truth.n_occurrences(res.query_id)
            if n == 0:
                print(f"{res.query_id}\tskipped (no test occurrences)")
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PrecisionWarning)
                p = precision_at_n(res, truth, n)
            det = eer(keyword_scores(res, truth))
            (out / f"det_{res.query_id}.tsv").write_text(det.to_tsv())
            rows.append((res.query_id, p, n, det.eer))
            print(f"{res.query_id}\t{p:.4f}\t{n}\t{det.eer:.4f}")
        if not rows:
            raise DataError("no evaluable queries")
        avg_p, avg_e = average_keyword_metrics([(p, e) for _, p, _, e in rows])
        lines = ["query\tp_at_n\tn\teer"] + [f"{q}\t{p!r}\t{n}\t{e!r}" for q, p, n, e in rows]
        lines.append(f"AVERAGE\t{avg_p!r}\t\t{avg_e!r}")
        (out / "summary.tsv").write_text("\n".join(lines) + "\n")
        print(f"average P@N = {100 * avg_p:.2f}%  average EER = {100 * avg_e:.2f}%")
    if args.units:
        if not args.corpus:
            raise UsageError("--units needs --corpus (TIMIT-style root with .phn files)")
        upaths = sorted(Path(args.units).glob("*.units"))
        if not upaths:
            raise DataError(f"no .units files in {args.units}")
        units = [read_units(p) for p in upaths]
        transcripts = phone_transcripts(ingest_timit_layout(args.corpus))
        cm = align_confusion(units, transcripts, cfg.features.frame_shift_ms,
                             cfg.features.frame_length_ms)
        (out / "confusion.tsv").write_text(cm.to_tsv())
        inputs += upaths
        frac = cm.dominant_fraction()
        print(f"confusion matrix {cm.counts.shape[0]} phonemes x {cm.counts.shape[1]} units, "
              f"{cm.total} frames, mean dominant-unit share {frac.mean():.3f}")
    if not args.results and not args.units:
        raise UsageError("nothing to evaluate: give --results/--truth and/or --units/--corpus")
    write_manifest(out, "eval", cfg, inputs, None, started)


def cmd_ingest(args):
    started = time.time()
    cfg = _config(args)
    out = _out_dir(args.out)
    index = ingest_timit_layout(args.corpus)
    lines = ["utterance_id\tsplit\taudio"]
    lines += [f"{u.utterance_id}\t{u.split}\t{u.audio_path}" for u in index.utterances.values()]
    (out / "index.tsv").write_text("\n".join(lines) + "\n")
    write_truth_tsv(truth_rows(index, "test"), out / "truth.tsv")
    inputs = [u.audio_path for u in index.utterances.values()]
    qlines = ["query_id\tpath"]
    for word in args.keywords or []:
        qdir = _out_dir(out / "queries" / word)
        for clip in extract_queries(index, word, args.query_split):
            p = qdir / f"{clip.id}.wav"
            write_wav(clip, p)
            qlines.append(f"{word}\t{p.relative_to(out)}")
    (out / "queries.tsv").write_text("\n".join(qlines) + "\n")
    write_manifest(out, "ingest", cfg, inputs, None, started)
    print(f"indexed {len(index)} utterances; {len(qlines) - 1} query clips")


def cmd_synth(args):
    sc = make_mini_corpus(args.out, seed=args.seed, n_train=args.n_train, n_test=args.n_test)
    (Path(args.out) / "keywords.txt").write_text("\n".join(sc.keywords) + "\n")
    print(f"wrote synthetic corpus to {args.out}; keywords: {' '.join(sc.keywords)}")


# -- parser ------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="adu", description="Acoustic unit discovery and query-by-example search.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"adu {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML pipeline config")
        return sp

    sp = common(sub.add_parser("features", help="WAV directory -> 39-dim MFCC feature files"))
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--split", choices=("train", "test"))
    sp.set_defaults(func=cmd_features)

    sp = common(sub.add_parser("train", help="train an HDPHMM/DHDPHMM transducer"))
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sweeps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--variant", choices=("hdphmm", "dhdphmm"))
    sp.add_argument("--truncation", type=int)
    sp.add_argument("--covariance", choices=("diag", "full"))
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("decode", help="features -> unit sequences or posteriorgrams"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--posteriorgram", action="store_true")
    sp.add_argument("--mode", choices=("posterior", "viterbi"))
    sp.set_defaults(func=cmd_decode)

    sp = common(sub.add_parser("search", help="query-by-example search with subsequence DTW"))
    sp.add_argument("--query", action="append", help="[ID=]PATH to a .pgram, .wav, .feat or dir")
    sp.add_argument("--query-list", help="TSV of query_id, path")
    sp.add_argument("--corpus", required=True, help="directory of .pgram files")
    sp.add_argument("--model", help="model for converting audio/feature queries")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--top", type=int)
    sp.add_argument("--combine", choices=("max", "mean"))
    sp.add_argument("--out", help="output directory (default: TSV to stdout)")
    sp.set_defaults(func=cmd_search)

    sp = common(sub.add_parser("eval", help="P@N / EER summary and confusion matrix"))
    sp.add_argument("--results")
    sp.add_argument("--truth")
    sp.add_argument("--units", help="directory of .units files for the confusion matrix")
    sp.add_argument("--corpus", help="TIMIT-style root providing phone timings")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("ingest", help="index a TIMIT-style corpus, extract queries"))
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--keywords", nargs="*")
    sp.add_argument("--query-split", default="train", choices=("train", "test"))
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("synth-corpus", help="write the synthetic mini corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-train", type=int, default=24)
    sp.add_argument("--n-test", type=int, default=30)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"adu: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"adu: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AduError, OSError) as exc:
        print(f"adu: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
