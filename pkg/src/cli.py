"""
Command-line surface.

Exit codes: 0 success, 1 domain error (bad input, unknown unit, rejected
trace), 2 invariant violation (engine bug, failing coverage certificate).
"""
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click

from .config import Config, harness_config, load_config, resolve_workdir
from .engine.amendments import diff_report_sets
from .engine.classifier import assert_report_invariants, classify_year
from .errors import DonationProtocolError, LedgerFormatError, ProtocolInvariantError
from .graph import run_close
from .harness.coverage import verify_coverage
from .harness.fuzz import BACKDATING_LEDGERS, DEFAULT_SEED, GRAMMAR_LEDGERS, fuzz_backdating, fuzz_grammar
from .harness.scenarios import enumerate_scenarios, universe_size
from .harness.vectors import vector_table
from .ledger import Ledger, UnitRegistry, check_append_only, dump_ledger, load_ledger
from .protocol.lts import PairTrace, check_trace, load_chart, parse_trace
from .protocol.paths import enumerate_paths
from .schemas import QUARTERS, REPORT_SECTIONS
from .tools.reporter import REPORT_KINDS, ReportGenerator, report_frame, report_payload

logger = logging.getLogger(__name__)

INVARIANT_EXIT = ProtocolInvariantError.exit_code
DOMAIN_EXIT = DonationProtocolError.exit_code


def log(text, symbol, *, fg=None, bold=None, err=False):
    pre = '' if symbol is None else '[{: >1}] '.format(symbol)
    click.secho('{}{}'.format(pre, text), fg=fg, bold=bold, err=err)


def log_info(text):
    log(text, '*', fg='blue', bold=True)


def log_success(text):
    log(text, '+', fg='green', bold=True)


def log_warn(text):
    log(text, '!', fg='magenta', bold=True)


def log_error(text):
    log(text, '!', fg='red', bold=True, err=True)


class CliContext:
    def __init__(self, config_path: Optional[str], workdir: Optional[str], as_json: bool):
        self.config_path = config_path
        self.workdir = resolve_workdir(workdir)
        self.as_json = as_json
        self._config: Optional[Config] = None

    @property
    def config(self) -> Config:
        if self._config is None:
            self._config = load_config(self.config_path)
        return self._config

    def harness(self) -> Config:
        """The harness config unless --config names another file."""
        return load_config(self.config_path) if self.config_path else harness_config()

    @property
    def reporter(self) -> ReportGenerator:
        return ReportGenerator(str(self.workdir), virtual_unit=self.config.virtual_unit_id)

    def ledger(self, path: Optional[str] = None) -> Ledger:
        source = Path(path) if path else Path(self.reporter.ledger_path())
        if not path and not source.exists():
            raise LedgerFormatError(f"no ledger in {self.workdir}; run `ingest` first")
        return load_ledger(source, self.config)

    def emit(self, data) -> None:
        click.echo(json.dumps(data, indent=2, ensure_ascii=False))


pass_cli = click.make_pass_decorator(CliContext)


@click.group(context_settings=dict(help_option_names=['-h', '--help']))
@click.option('--config', 'config_path', metavar='<path>', type=click.Path(dir_okay=False),
              help='Config file (default: $DONATION_PROTOCOL_CONFIG or config/production.json)')
@click.option('--workdir', metavar='<dir>', type=click.Path(file_okay=False),
              help='Ledger and report directory (default: $DONATION_PROTOCOL_WORKDIR or ./reports)')
@click.option('--json', 'as_json', is_flag=True, help='Machine-readable JSON output')
@click.option('-v', '--verbose', is_flag=True, help='Debug logging')
@click.pass_context
def cli(ctx, config_path, workdir, as_json, verbose):
    """Quarterly donation reporting engine and coverage harness."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s', force=True)
    ctx.obj = CliContext(config_path, workdir, as_json)


@cli.command()
@click.argument('ledger_file', metavar='<ledger.jsonl>', type=click.Path(exists=True, dir_okay=False))
@pass_cli
def ingest(obj: CliContext, ledger_file):
    """Validate a JSON-lines ledger and store it in the work directory.

    A stored ledger may only be extended: its donations must open the new file unchanged.
    """
    ledger = obj.ledger(ledger_file)
    target = Path(obj.reporter.ledger_path())
    if target.exists():
        check_append_only(load_ledger(target, obj.config), ledger)
    target.write_text(dump_ledger(ledger), encoding='utf-8')
    summary = {'ledger': str(target), 'donations': len(ledger.donations),
               'donors': len(ledger.donors()), 'year': ledger.year}
    if obj.as_json:
        obj.emit(summary)
    else:
        log_success(f"Ingested {summary['donations']} donations from {summary['donors']} donors "
                    f"into {target}")


@cli.command('close-quarter')
@click.argument('quarter', metavar='<q>', type=click.IntRange(1, 4))
@click.option('--ledger', 'ledger_file', metavar='<path>', type=click.Path(exists=True, dir_okay=False))
@pass_cli
def close_quarter_cmd(obj: CliContext, quarter, ledger_file):
    """Close a quarter: recompute the year, amend earlier quarters, write reports."""
    reporter = obj.reporter
    state = run_close(obj.ledger(ledger_file), quarter, reporter.closed_quarters(), reporter)
    report, diff = state['report'], state['diff']
    counts = {section: len(getattr(report, section)) for section in REPORT_SECTIONS}
    if obj.as_json:
        obj.emit({'quarter': quarter, 'entries': counts, 'amendments': diff.model_dump(mode='json'),
                  'written': state['written']})
        return
    log_success(f"Closed Q{quarter}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    if diff.is_empty:
        log_info('No amendments to earlier quarters')
    for q, section in diff.sections_touched():
        log_warn(f"Amended Q{q} {section}")


@cli.command()
@click.option('--quarter', '-q', required=True, type=click.IntRange(1, 4))
@click.option('--kind', '-k', required=True, type=click.Choice(list(REPORT_KINDS)))
@click.option('--ledger', 'ledger_file', metavar='<path>', type=click.Path(exists=True, dir_okay=False))
@pass_cli
def report(obj: CliContext, quarter, kind, ledger_file):
    """Print one report kind: the closed quarter's, else recomputed from the ledger."""
    closed = {} if ledger_file else obj.reporter.closed_quarters()
    if quarter in closed:
        rs = closed[quarter]
    else:
        rs = classify_year(obj.ledger(ledger_file)).report(quarter)
    if obj.as_json:
        obj.emit(report_payload(rs, kind))
    else:
        click.echo(report_frame(rs, kind, obj.config.virtual_unit_id).to_csv(index=False), nl=False)


@cli.command()
@click.option('--ledger', 'ledger_file', metavar='<path>', type=click.Path(exists=True, dir_okay=False))
@pass_cli
def recompute(obj: CliContext, ledger_file):
    """Recompute all four quarters from scratch and rewrite their report files."""
    ledger = obj.ledger(ledger_file)
    classification = classify_year(ledger)
    assert_report_invariants(classification, ledger)
    reporter = obj.reporter
    closed = reporter.closed_quarters()
    changed = {}
    for q in QUARTERS:
        rs = classification.report(q)
        if q in closed:
            changed[q] = [c.section for c in diff_report_sets(closed[q], rs)]
        reporter.generate_report(rs)
    paths = {f'{d}/{u}': str(p) for (d, u), p in classification.paths().items()}
    if obj.as_json:
        obj.emit({'paths': paths, 'changed_sections': changed})
        return
    for pair, path in paths.items():
        click.echo(f'{pair}: {path}')
    for q, sections in changed.items():
        if sections:
            log_warn(f"Q{q} differs from the closed report in {sections}")
    log_success(f"Recomputed Q1..Q4 into {obj.workdir}")


@cli.command()
@pass_cli
def paths(obj: CliContext):
    """The 15 permissible path names (c < s < r lexicographic order)."""
    table = enumerate_paths()
    if obj.as_json:
        obj.emit([{'hex': p.code, 'word': p.word} for p in table])
        return
    for p in table:
        click.echo(str(p))


@cli.command()
@pass_cli
def scenarios(obj: CliContext):
    """Compatible (HO, CLP) path pairs, one per unordered pair."""
    found = enumerate_scenarios(obj.harness())
    if obj.as_json:
        obj.emit({'universe': universe_size(), 'count': len(found),
                  'scenarios': [{'label': s.label, 'ho': s.ho.word, 'clp': s.clp.word}
                                for s in found]})
        return
    for s in found:
        click.echo(str(s))
    log_info(f"{len(found)} scenarios out of {universe_size()} ordered pairs")


@cli.command()
@pass_cli
def vectors(obj: CliContext):
    """The 30 test vectors, amounts in pence (- for null)."""
    table = vector_table()
    if obj.as_json:
        obj.emit([{'role': v.role.value, 'path': v.path.word, 'hex': v.path.code,
                   'amounts': list(v.amounts)} for v in table])
        return
    for v in table:
        amounts = ' '.join(f'{a:>7}' if a is not None else f'{"-":>7}' for a in v.amounts)
        click.echo(f'{v.role.value:<3} {v.path}  {amounts}')


@cli.command('verify-coverage')
@click.option('--json', 'json_out', metavar='<out.json>', type=click.Path(dir_okay=False),
              help='Write the certificate to a file')
@click.option('--unit-threshold', type=int, metavar='<pence>', help='Override every unit threshold')
@click.option('--national', type=int, metavar='<pence>', help='Override the national threshold')
@click.option('--workers', type=int, default=None, help='Thread pool size')
@pass_cli
def verify_coverage_cmd(obj: CliContext, json_out, unit_threshold, national, workers):
    """Run every scenario and issue the coverage certificate."""
    config = obj.harness()
    if unit_threshold is not None or national is not None:
        common = unit_threshold if unit_threshold is not None else \
            next(u.threshold for u in config.canonical_units() if u.id == config.head_office_id)
        config = config.with_unit_thresholds(common, national)
    certificate = verify_coverage(config, max_workers=workers)
    if json_out:
        Path(json_out).write_text(certificate.model_dump_json(indent=2), encoding='utf-8')
    if obj.as_json:
        obj.emit(certificate.model_dump(mode='json'))
    else:
        for r in certificate.failures:
            log_error(f"{r.label}: expected {r.expected}, observed {r.observed} "
                      f"{r.error or ''} {'; '.join(r.problems)}")
        if certificate.unreachable:
            log_warn(f"Unreachable under these thresholds: {' '.join(certificate.unreachable)}")
        if certificate.swap_failures:
            log_warn(f"Swap check failed: {' '.join(certificate.swap_failures)}")
        (log_success if certificate.valid else log_error)(certificate.summary())
    if not certificate.valid:
        raise click.exceptions.Exit(INVARIANT_EXIT)


@cli.command('lts-check')
@click.option('--chart', required=True, metavar='<chart>',
              help='Chart file, or a shipped chart name such as quarter_q4')
@click.option('--trace', 'trace_file', required=True, metavar='<trace.json>',
              type=click.Path(exists=True, dir_okay=False))
@pass_cli
def lts_check(obj: CliContext, chart, trace_file):
    """Check a trace against a chart; exits 1 when rejected."""
    lts = load_chart(chart)
    trace = parse_trace(Path(trace_file).read_text(encoding='utf-8'))
    reason = check_trace(lts, trace)
    if obj.as_json:
        obj.emit({'chart': lts.name, 'accepted': reason is None, 'reason': reason})
    elif reason is None:
        log_success(f"{lts.name}: accepted")
    else:
        log_error(f"{lts.name}: rejected ({reason})")
    if reason is not None:
        raise click.exceptions.Exit(DOMAIN_EXIT)


@cli.command()
@click.option('--donor', required=True)
@click.option('--unit', required=True, help='Receiving unit; Head Office sub-units are accepted')
@click.option('--ledger', 'ledger_file', metavar='<path>', type=click.Path(exists=True, dir_okay=False))
@pass_cli
def trace(obj: CliContext, donor, unit, ledger_file):
    """Print the engine trace of one (donor, unit) as lts-check input."""
    canonical = UnitRegistry(obj.config).canonicalize_unit(unit)
    classification = classify_year(obj.ledger(ledger_file))
    pairs = classification.trace(donor, canonical)
    if not pairs:
        raise DonationProtocolError(f"no recordable donations from '{donor}' to '{canonical}' this year")
    pair_trace = PairTrace.from_pairs(pairs)
    if obj.as_json:
        obj.emit(pair_trace.model_dump(mode='json'))
        return
    click.echo(pair_trace.model_dump_json(indent=2))
    for p in pairs:
        mark = f" {p.marker.value}" if p.marker else ''
        log('Q{} {} δ={:d} δ*={:d} Δ′={:d}{}'.format(p.quarter, p.act.value, p.state.delta,
                                                     p.state.delta_star, p.state.delta_prime, mark),
            '.', err=True)


@cli.command()
@click.option('--ledgers', '-n', type=int, default=None, help='Number of random ledgers')
@click.option('--seed', type=int, default=DEFAULT_SEED)
@click.option('--backdating', is_flag=True, help='Check close-quarter amendments against recomputation')
@pass_cli
def fuzz(obj: CliContext, ledgers, seed, backdating):
    """Random-ledger checks of the grammar, path compatibility and backdating purity."""
    if backdating:
        result = fuzz_backdating(ledgers or BACKDATING_LEDGERS, seed)
    else:
        result = fuzz_grammar(ledgers or GRAMMAR_LEDGERS, seed)
    if obj.as_json:
        obj.emit(result.model_dump(mode='json'))
    else:
        for v in result.violations[:20]:
            log_error(v)
        (log_success if result.ok else log_error)(result.summary())
    if not result.ok:
        raise click.exceptions.Exit(INVARIANT_EXIT)


def cli_main(argv: Optional[List[str]] = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name='donation-protocol', standalone_mode=False)
    except DonationProtocolError as e:
        log_error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except click.exceptions.Abort:
        log_error('Aborted')
        return DOMAIN_EXIT
    except click.ClickException as e:
        e.show()
        return DOMAIN_EXIT
    return rv if isinstance(rv, int) else 0


def main() -> None:
    sys.exit(cli_main())
