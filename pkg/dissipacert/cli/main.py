"""dissipacert command line: check | verify | generate | convert-noise | report."""
import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

from pydantic import ValidationError

from .. import __version__
from ..config import Config
from ..datagen import ScenarioConfig, generate_scenario
from ..errors import (AssumptionError, DissipacertError, InconclusiveError, NotApplicable,
                      SamplingStarved, SpecError)
from ..informativity import VerdictStatus, check
from ..symmat import SymMat, min_eig
from ..sysmodel import convert_noise
from ..worker import SweepWorker
from .certificate import (EXIT_ERROR, EXIT_INFORMATIVE, EXIT_NOT_INFORMATIVE, EXIT_UNDECIDED,
                          EXIT_USAGE, CertificateDocument, from_verdict, problem_hash,
                          undecided, verify_certificate)
from .formats import (parse_json, read_text, read_data, read_noise, read_supply,
                      write_atomic, write_data, write_noise, write_supply, write_system)

logger = logging.getLogger(__name__)

VERDICT_EXIT = {
    VerdictStatus.INFORMATIVE: EXIT_INFORMATIVE,
    VerdictStatus.NOT_INFORMATIVE: EXIT_NOT_INFORMATIVE,
    VerdictStatus.INCONCLUSIVE: EXIT_UNDECIDED,
}


def _config(args: argparse.Namespace) -> Config:
    """Flags override DISSIPACERT_* variables, which override defaults."""
    overrides = {
        "atol_sym": args.atol_sym,
        "eps_psd": args.eps_psd,
        "eps_strict": args.eps_strict,
        "rtol_rank": args.rtol_rank,
        "solver": args.solver,
        "seed": args.seed,
        "log_level": args.log_level,
    }
    return Config(**{k: v for k, v in overrides.items() if v is not None})


def _setup_logging(config: Config) -> None:
    logging.basicConfig(level=config.log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


# ============================================================================
# Commands
# ============================================================================

def cmd_check(args: argparse.Namespace, config: Config) -> int:
    tol = config.tolerances()
    data = read_data(args.data)
    supply, noise = read_supply(args.supply, tol), read_noise(args.noise, tol)
    digest = problem_hash([args.data, args.supply, args.noise])
    try:
        verdict = check(data, supply, noise, tol, config.budget())
    except (NotApplicable, AssumptionError) as exc:
        status = "NotApplicable" if isinstance(exc, NotApplicable) else "AssumptionError"
        print(f"{status}: {exc}")
        doc = undecided(status, noise.model.value, str(exc), digest, tol, config.solver,
                        config.seed)
        write_atomic(args.out, doc.dumps())
        return EXIT_UNDECIDED
    doc = from_verdict(verdict, digest, tol, config.solver, config.seed)
    write_atomic(args.out, doc.dumps())
    print(f"{verdict.status.value}: {verdict.reason}")
    for name, margin in sorted(verdict.margins.items()):
        print(f"  margin {name}: {margin:.6g}")
    if verdict.multiplier is not None:
        print(f"  multiplier alpha: {verdict.multiplier:.6g}")
    print(f"certificate written to {args.out}")
    return VERDICT_EXIT[verdict.status]


def _read_certificate(path) -> CertificateDocument:
    return parse_json(CertificateDocument, read_text(path), path)


def cmd_verify(args: argparse.Namespace, config: Config) -> int:
    tol = config.tolerances()
    doc = _read_certificate(args.certificate)
    data = read_data(args.data)
    supply, noise = read_supply(args.supply, tol), read_noise(args.noise, tol)
    digest = problem_hash([args.data, args.supply, args.noise])
    outcome = verify_certificate(doc, data, supply, noise, digest, tol)
    for message in outcome.messages:
        print(f"  {message}")
    print("certificate verified" if outcome.ok else "certificate NOT verified")
    return outcome.exit_code


def cmd_generate(args: argparse.Namespace, config: Config) -> int:
    scenario_config = parse_json(ScenarioConfig, read_text(args.config), args.config)
    scenario = generate_scenario(scenario_config, config.tolerances())
    out = Path(args.out_dir)
    write_data(out / "data.csv", scenario.data)
    write_supply(out / "supply.json", scenario.supply)
    write_noise(out / "noise.json", scenario.noise)
    write_system(out / "system.json", scenario.system)
    print(f"scenario (seed {scenario.seed}) written to {out}")
    return EXIT_INFORMATIVE


def cmd_convert_noise(args: argparse.Namespace, config: Config) -> int:
    tol = config.tolerances()
    spec = read_noise(args.noise, tol)
    converted = convert_noise(spec, tol)
    out = args.out or str(Path(args.noise).with_suffix("")) + f".{converted.model.value}.json"
    write_noise(out, converted)
    print(f"{spec.model.value} -> {converted.model.value} written to {out}")
    return EXIT_INFORMATIVE


def report(doc: CertificateDocument) -> List[str]:
    """Human-readable summary lines of a certificate."""
    lines = [f"verdict   {doc.verdict} ({doc.model})",
             f"reason    {doc.reason or '-'}",
             f"problem   {doc.problem_hash[:16]}",
             f"tool      dissipacert {doc.metadata.tool_version}, solver "
             f"{doc.metadata.solver or '-'}, seed {doc.metadata.seed}"]
    for name, margin in sorted(doc.margins.items()):
        lines.append(f"margin    {name:<12} {margin: .6e}")
    if doc.storage is not None:
        storage = SymMat(doc.storage)
        lines.append(f"storage   n={storage.dim}, smallest eigenvalue {min_eig(storage):.3e}")
    if doc.multiplier is not None:
        lines.append(f"alpha     {doc.multiplier:.6g}")
    if doc.counterexample is not None:
        lines.append(f"witness   s(u, y) = {doc.counterexample.supply_value:.6g}")
    return lines


def cmd_report(args: argparse.Namespace, config: Config) -> int:
    doc = _read_certificate(args.certificate)
    for line in report(doc):
        print(line)
    if args.samples <= 0:
        return EXIT_INFORMATIVE
    if not (args.data and args.supply and args.noise) or doc.storage is None:
        raise SpecError("a sweep needs --data, --supply, --noise and a certificate with storage")
    tol = config.tolerances()
    worker = SweepWorker(read_data(args.data), read_noise(args.noise, tol),
                         read_supply(args.supply, tol),
                         SymMat(doc.storage, atol_sym=tol.atol_sym), tol)
    sweep = asyncio.run(worker.run(args.samples, seed=config.seed))
    print(f"sweep     {sweep.accepted} systems, worst margin {sweep.worst_margin:.6e}, "
          f"{len(sweep.failures)} failures")
    return EXIT_INFORMATIVE if sweep.passed else EXIT_NOT_INFORMATIVE


# ============================================================================
# Parser
# ============================================================================

def _add_tolerance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--atol-sym", type=float, help="largest accepted |A - A^T| entry")
    parser.add_argument("--eps-psd", type=float, help="PSD slack on smallest eigenvalues")
    parser.add_argument("--eps-strict", type=float, help="margin required for strict LMIs")
    parser.add_argument("--rtol-rank", type=float, help="relative singular-value threshold")
    parser.add_argument("--solver", help="cvxpy solver name (default CLARABEL)")
    parser.add_argument("--seed", type=int, help="seed for randomized sweeps")
    parser.add_argument("--log-level", help="logging level (default WARNING)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dissipacert", description="Decide whether measured data certify dissipativity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide informativity and write a certificate")
    p.add_argument("data")
    p.add_argument("supply")
    p.add_argument("noise")
    p.add_argument("-o", "--out", default="certificate.json")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("verify", help="replay a certificate without the LMI solver")
    p.add_argument("certificate")
    p.add_argument("data")
    p.add_argument("supply")
    p.add_argument("noise")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("generate", help="write a scenario from a JSON config")
    p.add_argument("config")
    p.add_argument("out_dir")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("convert-noise", help="switch between the N1 and N2 descriptions")
    p.add_argument("noise")
    p.add_argument("-o", "--out")
    p.set_defaults(handler=cmd_convert_noise)

    p = sub.add_parser("report", help="summarize a certificate, optionally with a sweep")
    p.add_argument("certificate")
    p.add_argument("--data")
    p.add_argument("--supply")
    p.add_argument("--noise")
    p.add_argument("--samples", type=int, default=0)
    p.set_defaults(handler=cmd_report)

    for subparser in sub.choices.values():
        _add_tolerance_flags(subparser)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler: Callable[[argparse.Namespace, Config], int] = args.handler
    try:
        config = _config(args)
        _setup_logging(config)
        config.tolerances()
        return handler(args, config)
    except (SpecError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotApplicable, AssumptionError, InconclusiveError, SamplingStarved) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except DissipacertError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
