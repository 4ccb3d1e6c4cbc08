"""Command line entry point: ``randfa <subcommand> ...``.

Exit codes: 0 success (or Certified), 1 NotCertified / a failed check,
2 Unknown / Timeout, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .automata import (
    AutomatonError,
    EAutomaton,
    automaton_from_json,
    automaton_to_json,
    count_cyclically_reduced_words,
    count_reduced_words,
    count_words,
    is_lambda_large,
    largeness,
    popcount,
)
from .blocks import BlockAlphabet, BlockError, associated_presentation, infer_block_alphabet
from .certificate import DEFAULT_BUDGET, Status, fa_certificate, fa_certificate_cyclic
from .experiments import (
    CertificateSummary,
    ExperimentError,
    ExperimentResult,
    IntersectionSummary,
    load_config,
    manifest_path,
    rerun_from_manifest,
    run_and_write,
    run_experiment,
    run_pipeline,
)
from .splittings import (
    build_main_automaton,
    build_main_e_automaton,
    build_reduction_automata,
    check_minimality_bound,
    classify,
    claim_failures,
    kernel_words,
    load_assignment,
    main_largeness,
    reduction_largeness,
)
from .words import MODELS, Alphabet, ModelParams, WordError, as_fraction, load_presentation, sample_relator_set

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NEGATIVE, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 64
VERDICT_EXIT = {Status.CERTIFIED: EXIT_OK, Status.NOT_CERTIFIED: EXIT_NEGATIVE, Status.UNKNOWN: EXIT_UNKNOWN}


class UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _seed_default() -> int | None:
    raw = os.environ.get("RANDFA_SEED")
    if raw is None:
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"RANDFA_SEED must be an integer, got {raw!r}")


def _fraction(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="randfa", description="Random groups, finite automata and property (FA).")
    p.add_argument("--version", action="version", version=f"randfa {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def with_json(sp):
        sp.add_argument("--json", nargs="?", const="-", metavar="PATH",
                        help="machine-readable output (stdout if no path)")

    sp = sub.add_parser("sample", help="draw a random presentation")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--d", type=_fraction, required=True, help="density, e.g. 0.3 or 3/10")
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--model", choices=MODELS, default="reduced")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="write the presentation here (.json for the JSON form)")
    with_json(sp)

    sp = sub.add_parser("count", help="count words of one length in an automaton language")
    sp.add_argument("--automaton", required=True)
    sp.add_argument("--L", type=int, required=True)
    kind = sp.add_mutually_exclusive_group()
    kind.add_argument("--reduced", action="store_true")
    kind.add_argument("--cyclic", action="store_true", help="cyclically reduced words only")
    with_json(sp)

    sp = sub.add_parser("growth", help="language counts up to Lmax and the growth estimate")
    sp.add_argument("--automaton", required=True)
    sp.add_argument("--Lmax", type=_positive, required=True)
    sp.add_argument("--reduced", action="store_true")
    with_json(sp)

    sp = sub.add_parser("certify", help="run the FA certificate on a presentation")
    sp.add_argument("--presentation", required=True)
    sp.add_argument("--cyclic", action="store_true")
    sp.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET)
    sp.add_argument("--method", choices=("enumeration", "search"))
    sp.add_argument("--B", type=_positive, help="block-encode first and report the pipeline conclusion")
    with_json(sp)

    sp = sub.add_parser("encode", help="block-encode a presentation")
    sp.add_argument("--presentation", required=True)
    sp.add_argument("--B", type=_positive, required=True)
    sp.add_argument("--out", help="block presentation path; the pairing log goes to <out>.pairs.csv")
    with_json(sp)

    sp = sub.add_parser("lemmas", help="check the splitting constructions for an assignment")
    sp.add_argument("--assignment", required=True)
    sp.add_argument("--Lmax", type=_positive, default=6)
    with_json(sp)

    sp = sub.add_parser("experiment", help="Monte Carlo experiments")
    sp.add_argument("kind", choices=("intersect", "certify"))
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--manifest", help="re-run the configuration recorded in a manifest")
    sp.add_argument("--out", help="records CSV (overrides output_path)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=_positive)
    with_json(sp)
    return p


# -- output helpers


class _Output:
    """Routes the config echo and human summary to stdout, machine output to --json."""

    def __init__(self, args, config: dict):
        self.json_target = getattr(args, "json", None)
        self.config = config
        self.human = self.json_target != "-"
        if self.human:
            print(f"# randfa {args.command} ({__version__})")
            for key in sorted(config):
                value = config[key]
                if isinstance(value, (dict, list)):
                    value = json.dumps(value, sort_keys=True, separators=(",", ":"))
                print(f"#   {key} = {value}")

    def say(self, line: str = ""):
        if self.human:
            print(line)

    def finish(self, payload: dict):
        if self.json_target is None:
            return
        doc = {"schema_version": SCHEMA_VERSION, "command": self.config.get("command"), "config": self.config}
        doc.update(payload)
        text = json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
        if self.json_target == "-":
            sys.stdout.write(text)
        else:
            Path(self.json_target).write_text(text)


def _config(args, **extra) -> dict:
    cfg = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(args).items() if k != "json"}
    cfg.update(extra)
    return cfg


def _codec_for(n: int, presentation_path: str | None = None):
    if presentation_path and not presentation_path.endswith(".json"):
        body = [ln for ln in Path(presentation_path).read_text().splitlines()[1:] if ln.strip() and not ln.startswith("#")]
        if body and "[" in body[0]:
            return infer_block_alphabet(n, body[0])
    return Alphabet(n) if n <= 26 else None


def _automaton_json(a, codec) -> dict:
    if codec is None:
        base = a.base if isinstance(a, EAutomaton) else a
        out = {"n": base.n, "sigma_empty_mask": base.sigma_empty, "sigma_masks": list(base.sigma)}
        if isinstance(a, EAutomaton):
            out["tau_masks"] = list(a.tau)
        return out
    return automaton_to_json(a, codec)


def _load_automaton(path: str):
    return automaton_from_json(json.loads(Path(path).read_text()))


# -- subcommands


def cmd_sample(args) -> int:
    seed = args.seed if args.seed is not None else (_seed_default() or 0)
    params = ModelParams(args.n, args.d, args.L, args.model, seed)
    out = _Output(args, _config(args, seed=seed, relators=params.relator_count))
    pres = sample_relator_set(params)
    if args.out:
        path = Path(args.out)
        if path.suffix == ".json":
            path.write_text(json.dumps(pres.to_json(), indent=2) + "\n")
        else:
            path.write_text(pres.to_text())
        out.say(f"wrote {len(pres)} relators to {args.out}")
    else:
        out.say(pres.to_text().rstrip("\n"))
    out.finish({"presentation": pres.to_json()})
    return EXIT_OK


def cmd_count(args) -> int:
    a = _load_automaton(args.automaton)
    mode = "cyclic" if args.cyclic else "reduced" if args.reduced else "all"
    out = _Output(args, _config(args, mode=mode))
    if args.cyclic:
        value = count_cyclically_reduced_words(a, args.L)
    elif args.reduced:
        value = count_reduced_words(a, args.L)
    else:
        value = count_words(a, args.L)
    out.say(str(value))
    out.finish({"L": args.L, "mode": mode, "count": str(value)})
    return EXIT_OK


def cmd_growth(args) -> int:
    a = _load_automaton(args.automaton)
    out = _Output(args, _config(args))
    fn = count_reduced_words if args.reduced else count_words
    counts = [fn(a, L) for L in range(1, args.Lmax + 1)]
    out.say("L\tcount\troot")
    for L, c in enumerate(counts, 1):
        out.say(f"{L}\t{c}\t{c ** (1 / L):.6f}")
    ratio = Fraction(counts[-1], counts[-2]) if len(counts) > 1 and counts[-2] else None
    if ratio is not None:
        out.say(f"ratio count({args.Lmax})/count({args.Lmax - 1}) = {float(ratio):.6f}")
    out.finish({
        "counts": [str(c) for c in counts],
        "ratio": None if ratio is None else str(ratio),
        "largeness": str(largeness(a.base if isinstance(a, EAutomaton) else a)),
    })
    return EXIT_OK


def _verdict_payload(verdict, codec) -> dict:
    return {
        "status": verdict.status.value,
        "method": verdict.method,
        "lambda": str(verdict.lam),
        "eps": None if verdict.eps is None else str(verdict.eps),
        "budget_spent": verdict.budget_spent,
        "witness": None if verdict.witness is None else _automaton_json(verdict.witness, codec),
    }


def cmd_certify(args) -> int:
    pres = load_presentation(args.presentation)
    out = _Output(args, _config(args))
    out.say(f"generators: {pres.n}, relators: {len(pres)}")
    if args.B:
        if args.method:
            raise UsageError("--method cannot be combined with --B")
        report = run_pipeline(pres, args.B, args.budget, args.cyclic)
        verdict, codec = report.verdict, report.encoded.block_alphabet
        out.say(f"block alphabet: n_hat = {codec.n_hat}, P = {report.encoded.P}, "
                f"block relators: {len(report.encoded.relators_hat)}")
    else:
        report = None
        codec = _codec_for(pres.n, args.presentation)
        if args.cyclic:
            if args.method == "enumeration":
                raise UsageError("the cyclic certificate has no enumeration route")
            verdict = fa_certificate_cyclic(pres, args.budget)
        else:
            verdict = fa_certificate(pres, args.budget, args.method)
    out.say(f"verdict: {verdict.status.value} (method {verdict.method}, {verdict.budget_spent} nodes)")
    if verdict.witness is not None:
        out.say("witness: " + json.dumps(_automaton_json(verdict.witness, codec), sort_keys=True))
    payload = {"verdict": _verdict_payload(verdict, codec)}
    if report is not None:
        out.say(f"conclusion: {report.conclusion}")
        payload["conclusion"] = report.conclusion
    out.finish(payload)
    return VERDICT_EXIT[verdict.status]


def cmd_encode(args) -> int:
    pres = load_presentation(args.presentation)
    out = _Output(args, _config(args))
    encoded = associated_presentation(pres, BlockAlphabet(pres.n, args.B))
    text = encoded.to_text()
    if args.out:
        Path(args.out).write_text(text)
        pairs = Path(args.out + ".pairs.csv")
        pairs.write_text(encoded.pairing_text())
        out.say(f"wrote {len(encoded.relators_hat)} block relators to {args.out} (pairing log {pairs})")
    else:
        out.say(text.rstrip("\n"))
        if encoded.P:
            out.say("# pairing log")
            out.say(encoded.pairing_text().rstrip("\n"))
    out.say(f"n_hat = {encoded.block_alphabet.n_hat}, P = {encoded.P}")
    out.finish({
        "n_hat": encoded.block_alphabet.n_hat,
        "P": encoded.P,
        "relators": [encoded.block_alphabet.format_word(r) for r in encoded.relators_hat],
        "pairs": [[p.first, p.second, Alphabet(pres.n).format_word(p.v)] for p in encoded.pairing_log],
    })
    return EXIT_OK


def cmd_lemmas(args) -> int:
    asg = load_assignment(args.assignment)
    out = _Output(args, _config(args))
    cls = classify(asg)
    out.say(f"classification: alpha={cls.alpha} beta={cls.beta} gamma={cls.gamma} delta={cls.delta}")
    out.say("classes: " + " ".join(cls.classes))
    bound = check_minimality_bound(asg)
    out.say(f"minimality bound: {'holds' if bound else 'fails'}")
    lam_a, lam_b = reduction_largeness(asg)
    out.say(f"reduction automata largeness: A-side {lam_a}, B-side {lam_b}")

    kernel_hits = 0
    for i, a in enumerate(build_reduction_automata(asg)):
        # only letters whose image leaves the automaton's factor keep the language off the kernel
        outside = ("B", "D") if i < asg.n else ("A", "D")
        if cls.classes[i % asg.n] in outside:
            kernel_hits += len(kernel_words(a, asg, args.Lmax))

    main = build_main_automaton(asg)
    main_lam = main_largeness(asg)
    half_large = is_lambda_large(main, Fraction(1, 2))
    out.say(f"main automaton: {main_lam}-large by construction, 1/2-large: {half_large}")
    failures = claim_failures(asg, args.Lmax)
    out.say(f"length claim up to L={args.Lmax}: {'holds' if not failures else f'{len(failures)} failures'}")
    for f in failures[:5]:
        out.say(f"  {Alphabet(asg.n).format_word(f.word)} -> {f.image}: {f.reason}")
    kernel_hits += len(kernel_words(main, asg, args.Lmax))
    e = build_main_e_automaton(asg)
    e_kernel = len(kernel_words(e, asg, args.Lmax, min_length=3))
    kernel_hits += e_kernel
    e_large = all(popcount(t) >= asg.n for t in e.tau)
    out.say(f"e-automaton final sets of size >= n: {e_large}")
    out.say(f"kernel words in constructed languages: {kernel_hits}")

    ok = bound and not failures and kernel_hits == 0
    out.finish({
        "classification": {"alpha": cls.alpha, "beta": cls.beta, "gamma": cls.gamma, "delta": cls.delta,
                           "classes": list(cls.classes)},
        "minimality_bound": bound,
        "reduction_largeness": [str(lam_a), str(lam_b)],
        "main_largeness": str(main_lam),
        "main_half_large": half_large,
        "claim_failures": len(failures),
        "e_large": e_large,
        "kernel_words": kernel_hits,
        "ok": ok,
    })
    return EXIT_OK if ok else EXIT_NEGATIVE


def _print_summary(out: _Output, result: ExperimentResult):
    for s in result.summaries:
        if isinstance(s, IntersectionSummary):
            flag = "ok" if s.within() else "outside 3 sigma"
            out.say(f"L={s.L} relators={s.relators} m/N={s.m_L}/{s.N_L} "
                    f"empirical={s.empirical:.6f} exact={s.exact:.6f} ({flag})")
        elif isinstance(s, CertificateSummary):
            counts = " ".join(f"{k}={v}" for k, v in s.counts.items())
            out.say(f"L={s.L} {counts} mean_block_relators={s.mean_relators_hat:.2f} mean_pairs={s.mean_pairs:.2f}")
    for w in result.warnings:
        out.say(f"warning: {w}")


def _summary_json(s) -> dict:
    if isinstance(s, IntersectionSummary):
        return {"L": s.L, "trials": s.trials, "hits": s.hits, "relators": s.relators, "m_L": str(s.m_L),
                "N_L": str(s.N_L), "empirical": s.empirical, "exact": s.exact, "within_3_sigma": s.within()}
    return {"L": s.L, "trials": s.trials, "counts": s.counts, "mean_relators_hat": s.mean_relators_hat,
            "mean_pairs": s.mean_pairs, "block_ok": s.block_ok}


def cmd_experiment(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        if manifest["config"]["experiment"] != args.kind:
            raise UsageError(f"manifest records a {manifest['config']['experiment']!r} experiment")
        target = args.out or manifest["config"].get("output_path")
        if not target:
            raise UsageError("--out is required when the manifest has no output_path")
        out = _Output(args, _config(args, output_path=target))
        result, _ = rerun_from_manifest(args.manifest, target, args.threads)
        _print_summary(out, result)
        out.say(f"records: {target}")
        out.finish({"summaries": [_summary_json(s) for s in result.summaries], "records": str(target)})
        return EXIT_OK

    cfg = load_config(args.config)
    if cfg.experiment != args.kind:
        raise UsageError(f"config describes a {cfg.experiment!r} experiment")
    if args.seed is not None:
        cfg.seed = args.seed
    elif "seed" not in json.loads(Path(args.config).read_text()) and _seed_default() is not None:
        cfg.seed = _seed_default()
    if args.threads:
        cfg.threads = args.threads
    if args.out:
        cfg.output_path = args.out
    echo = cfg.to_json()
    echo["command"] = "experiment"
    out = _Output(args, echo)
    if cfg.output_path:
        result, _ = run_and_write(cfg)
    else:
        result = run_experiment(cfg)
    _print_summary(out, result)
    if cfg.output_path:
        out.say(f"records: {cfg.output_path} (manifest {manifest_path(cfg.output_path)})")
    out.finish({"summaries": [_summary_json(s) for s in result.summaries], "warnings": result.warnings})
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "count": cmd_count,
    "growth": cmd_growth,
    "certify": cmd_certify,
    "encode": cmd_encode,
    "lemmas": cmd_lemmas,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        sys.stderr.write(f"randfa: error: {exc}\n")
        return EXIT_USAGE
    except (WordError, AutomatonError, BlockError, ExperimentError, OSError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(f"randfa: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
