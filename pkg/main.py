import functools
import hashlib
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional

import click
import duckdb
from joblib import cpu_count
from pydantic import ValidationError

import logs
from cti import check_inductive, type_state_space_size
from database import LEDGER_FILE, LedgerClient
from errors import GapError, ResourceLimitError, SpecError
from export import dump_graph, load_graph, to_dot, to_report, write_text
from models import InferenceConfig, RunManifest
from parser import load_grammar, load_instance, load_spec
from printer import format_system
from proof_graph import ProofGraph, check_graph_validity, do_ind_proof_slice, extract_invariant
from reachability import cache_directory, load_or_explore
from slicing import slice_table
from synthesis import CandidateSpace

logger = logging.getLogger(__name__)

# ============================================================
# CÓDIGOS DE SALIDA
# ============================================================

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RESOURCE = 2
EXIT_PARTIAL = 3
EXIT_INVALID = 4

DEFAULT_CACHE_DIR = ".gap-cache"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Manifiesto de una invocación: entradas con hash, resultado y registro en el ledger"""

    def __init__(self, command: str, cache_dir: Optional[str], seed: int = 0):
        self.manifest = RunManifest(command=command, seed=seed)
        self.cache_dir = cache_dir
        self.start = time.monotonic()
        self.protocol: Optional[str] = None
        self.node_rows: List[Dict[str, object]] = []

    def input(self, path: str) -> Path:
        p = Path(path)
        if not p.is_file():
            raise GapError(f"{path}: no such file")
        self.manifest.inputs[str(p)] = _sha256(p)
        return p

    def artifact(self, path: Path) -> Path:
        self.manifest.artifacts.append(str(path))
        click.echo(f"   {path}")
        return path

    def finish(self, code: int, outcome: str, manifest_path: Optional[Path] = None) -> int:
        self.manifest.wall_time = round(time.monotonic() - self.start, 3)
        self.manifest.exit_code = code
        self.manifest.outcome = outcome
        if manifest_path is not None:
            self.manifest.artifacts.append(str(manifest_path))
            write_text(manifest_path, self.manifest.model_dump_json(indent=2) + "\n")
        if self.cache_dir:
            try:
                ledger = LedgerClient(str(Path(self.cache_dir) / LEDGER_FILE))
                try:
                    ledger.insert_run(self.manifest, self.protocol)
                    ledger.insert_node_stats(self.manifest.id, self.node_rows)
                finally:
                    ledger.close()
            except duckdb.Error as e:
                logger.warning("could not record run in ledger: %s", e)
        return code


def command(name: str):
    """Convierte excepciones en códigos de salida y registra el manifiesto de cada corrida"""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            run = Run(name, kwargs.get("cache_dir"), kwargs.get("seed") or 0)
            try:
                code = fn(run, *args, **kwargs)
            except SpecError as err:
                for d in err.diagnostics:
                    click.echo(f"❌ {d}", err=True)
                code = run.finish(EXIT_INPUT, "input error")
            except ResourceLimitError as err:
                click.echo(f"⚠️  {err}", err=True)
                code = run.finish(EXIT_RESOURCE, "resource limit")
            except ValidationError as err:
                for e in err.errors():
                    click.echo(f"❌ invalid {'.'.join(str(x) for x in e['loc'])}: {e['msg']}", err=True)
                code = run.finish(EXIT_INPUT, "input error")
            except (GapError, OSError) as err:
                click.echo(f"❌ {err}", err=True)
                code = run.finish(EXIT_INPUT, "input error")
            click.get_current_context().exit(code)

        return wrapper

    return decorate


def _workers(value: int) -> int:
    return cpu_count() if value <= 0 else value


cache_option = click.option(
    "--cache-dir", envvar="GAP_CACHE_DIR", default=DEFAULT_CACHE_DIR, show_default=True,
    help="Directorio del caché de R y del ledger",
)
workers_option = click.option(
    "--workers", envvar="GAP_WORKERS", type=int, default=1, show_default=True, help="Workers (0 = todos los CPUs)",
)
seed_option = click.option("--seed", type=int, default=0, show_default=True)
mode_option = click.option(
    "--mode", type=click.Choice(["exhaustive", "sampled"]), default="exhaustive", show_default=True,
    help="Cómo se calcula R",
)
budget_option = click.option("--budget", type=int, default=None, help="Estados distintos para --mode sampled")


# ============================================================
# CLI
# ============================================================

@click.group()
@click.option("-v", "--verbose", count=True, help="Más detalle (-vv para DEBUG)")
@click.option("-q", "--quiet", is_flag=True, help="Solo advertencias y errores")
def cli(verbose: int, quiet: bool):
    """gap-infer: inferencia de invariantes inductivos con grafos de prueba"""
    logs.configure(-1 if quiet else verbose)


@cli.command("reach")
@click.argument("spec")
@click.argument("instance")
@mode_option
@budget_option
@seed_option
@workers_option
@cache_option
@click.option("--max-states", type=int, default=5_000_000, show_default=True)
@command("reach")
def cmd_reach(run: Run, spec, instance, mode, budget, seed, workers, cache_dir, max_states):
    """Explora los estados alcanzables y los guarda en el caché"""
    sys = load_spec(run.input(spec))
    inst = load_instance(run.input(instance), sys)
    run.protocol = sys.name
    states = load_or_explore(sys, inst, cache_dir, mode, budget, seed, _workers(workers), max_states)
    run.manifest.summary = {"states": states.count, "provenance": states.provenance.label()}
    click.echo(f"{states.count}")
    if not states.provenance.complete:
        click.echo(f"⚠️  state limit {max_states} reached; reachable set is partial", err=True)
        return run.finish(EXIT_RESOURCE, "partial reachable set")
    click.echo(f"✅ {states.count} reachable states [{states.provenance.label()}]")
    if cache_dir:
        click.echo(f"   cache: {cache_directory(cache_dir, sys, inst)}")
    return run.finish(EXIT_OK, "ok")


@cli.command("infer")
@click.argument("spec")
@click.argument("instance")
@click.argument("grammar")
@click.option("--safety", default=None, help="Lema raíz (por defecto el primero de la spec)")
@click.option("--ninvs", type=int, default=80000, show_default=True)
@click.option("--nctis", type=int, default=10000, show_default=True)
@click.option("--maxliterals", type=int, default=None, help="Por defecto el de la gramática")
@click.option("--max-rounds", type=int, default=3, show_default=True)
@click.option("--node-timeout", type=float, default=600.0, show_default=True)
@click.option("--global-timeout", type=float, default=14400.0, show_default=True)
@seed_option
@workers_option
@cache_option
@mode_option
@budget_option
@click.option("--out", "out_dir", default="out", show_default=True, help="Directorio de artefactos")
@command("infer")
def cmd_infer(run: Run, spec, instance, grammar, safety, ninvs, nctis, maxliterals, max_rounds, node_timeout,
              global_timeout, seed, workers, cache_dir, mode, budget, out_dir):
    """Construye un grafo de prueba inductivo para la propiedad de seguridad"""
    sys = load_spec(run.input(spec))
    inst = load_instance(run.input(instance), sys)
    g = load_grammar(run.input(grammar), sys)
    run.protocol = sys.name
    if not sys.lemmas:
        raise GapError(f"{spec}: no lemma to use as safety property")
    root = sys.lemma(safety) if safety else sys.lemmas[0]
    cfg = InferenceConfig(
        n_invs=ninvs,
        n_ctis=nctis,
        max_literals=maxliterals or g.max_literals,
        max_rounds=max_rounds,
        node_timeout=node_timeout,
        global_timeout=global_timeout,
        seed=seed,
        workers=_workers(workers),
    )
    run.manifest.config = cfg.model_dump()
    states = load_or_explore(sys, inst, cache_dir, mode, budget, seed, cfg.workers, cfg.reach_max_states)
    if not states.provenance.complete:
        raise ResourceLimitError(f"reachable set exceeds {cfg.reach_max_states} states")
    proj_dir = cache_directory(cache_dir, sys, inst) if cache_dir else None

    graph, failed = do_ind_proof_slice(sys, inst, root, g, cfg, states, proj_dir)

    out = Path(out_dir)
    stem = sys.name
    click.echo("artifacts:")
    run.artifact(write_text(out / f"{stem}.graph.json", dump_graph(graph, cfg, g)))
    run.artifact(write_text(out / f"{stem}.dot", to_dot(graph)))
    run.artifact(write_text(out / f"{stem}.report.txt", to_report(graph)))
    run.node_rows = _node_rows(graph)
    run.manifest.summary = {
        "lemmas": len(graph.lemmas),
        "action_nodes": len(graph.actions),
        "failed": [list(f) for f in failed],
        "states": states.count,
    }
    manifest_path = out / f"{stem}.manifest.json"
    click.echo(f"   {manifest_path}")

    if graph.timed_out:
        click.echo(f"⚠️  global timeout: {len(failed)} obligations left unproven", err=True)
        return run.finish(EXIT_RESOURCE, "timeout", manifest_path)
    if failed:
        click.echo(f"❌ partial proof graph: {len(graph.lemmas)} lemmas, {len(failed)} failed obligations")
        for lemma, action in failed:
            node = graph.actions[(lemma, action)]
            label = node.slice.label(sys) if node.slice is not None else "-"
            click.echo(f"   ({lemma}, {action}) slice={label} {node.reason}")
        return run.finish(EXIT_PARTIAL, "partial", manifest_path)
    click.echo(f"✅ valid proof graph: {len(graph.lemmas)} lemmas")
    return run.finish(EXIT_OK, "valid", manifest_path)


def _node_rows(graph: ProofGraph) -> List[Dict[str, object]]:
    return [
        {
            "lemma": n.lemma,
            "action": n.action,
            "status": n.status,
            "provenance": n.provenance,
            "slice_size": n.slice.size if n.slice is not None else 0,
            "projected": n.projected,
            "ctis_generated": n.ctis_generated,
            "ctis_eliminated": n.ctis_eliminated,
            "wall_time": n.wall_time,
        }
        for n in graph.actions.values()
    ]


@cli.command("slice")
@click.argument("spec")
@click.option("--grammar", default=None, help="Incluye el tamaño de la gramática rebanada")
@click.option("--lemma", "lemmas", multiple=True, help="Solo estos lemas (repetible)")
@command("slice")
def cmd_slice(run: Run, spec, grammar, lemmas):
    """Tabla estática de slices Vars(Pre) ∪ Vars(L) ∪ COI(Vars(L'))"""
    sys = load_spec(run.input(spec))
    run.protocol = sys.name
    g = load_grammar(run.input(grammar), sys) if grammar else None
    selected = [sys.lemma(name) for name in lemmas] if lemmas else None
    table = slice_table(sys, selected, g)
    click.echo(table.to_string(index=False))
    return run.finish(EXIT_OK, "ok")


@cli.command("check")
@click.argument("spec")
@click.argument("instance")
@click.argument("graph_file")
@click.option("--mode", type=click.Choice(["auto", "exhaustive", "randomized"]), default="auto", show_default=True)
@click.option("--allow-hash-mismatch", is_flag=True, help="Acepta grafos construidos para otra spec/instancia")
@click.option("--monolithic", is_flag=True, help="Además verifica la conjunción extraída con el oráculo completo")
@click.option("--report", "report_file", default=None, help="Escribe el reporte de validez en este archivo")
@seed_option
@workers_option
@cache_option
@command("check")
def cmd_check(run: Run, spec, instance, graph_file, mode, allow_hash_mismatch, monolithic, report_file, seed, workers, cache_dir):
    """Re-verifica cada obligación del grafo y la iniciación de cada lema"""
    sys = load_spec(run.input(spec))
    inst = load_instance(run.input(instance), sys)
    run.protocol = sys.name
    graph = load_graph(run.input(graph_file), sys, inst, allow_mismatch=allow_hash_mismatch)
    cfg = InferenceConfig(seed=seed, workers=_workers(workers))
    report = check_graph_validity(graph, sys, inst, mode, cfg)
    run.manifest.summary = {
        "valid": report.valid,
        "mode": report.mode,
        "invalid": [[n.lemma, n.action] for n in report.invalid_nodes],
    }
    if report_file:
        run.artifact(write_text(report_file, to_report(graph, report)))
    for verdict in report.initiation:
        if not verdict.valid:
            click.echo(f"❌ initiation fails for {verdict.lemma}")
    for verdict in report.invalid_nodes:
        click.echo(f"❌ ({verdict.lemma}, {verdict.action}): {verdict.ctis} CTIs [{verdict.mode}]")
    if not report.valid:
        return run.finish(EXIT_INVALID, "invalid")
    if monolithic:
        ind = extract_invariant(graph)
        oracle = check_inductive(sys, inst, [ind], seed=seed, workers=cfg.workers)
        if not oracle.valid:
            click.echo("❌ extracted invariant is not inductive")
            return run.finish(EXIT_INVALID, "invalid")
        click.echo(f"✅ extracted invariant is inductive [{oracle.mode}]")
    click.echo(f"✅ valid proof graph: {len(graph.lemmas)} lemmas, {len(report.nodes)} obligations [{report.mode}]")
    return run.finish(EXIT_OK, "valid")


@cli.command("export-dot")
@click.argument("spec")
@click.argument("instance")
@click.argument("graph_file")
@click.option("--format", "fmt", type=click.Choice(["dot", "report", "graph"]), default="dot", show_default=True)
@click.option("-o", "--output", default=None, help="Archivo de salida (por defecto stdout)")
@click.option("--allow-hash-mismatch", is_flag=True)
@command("export-dot")
def cmd_export(run: Run, spec, instance, graph_file, fmt, output, allow_hash_mismatch):
    """Exporta un grafo guardado como DOT, reporte de texto o archivo de grafo"""
    sys = load_spec(run.input(spec))
    inst = load_instance(run.input(instance), sys)
    run.protocol = sys.name
    graph = load_graph(run.input(graph_file), sys, inst, allow_mismatch=allow_hash_mismatch)
    if fmt == "dot":
        text = to_dot(graph)
    elif fmt == "report":
        text = to_report(graph)
    else:
        text = dump_graph(graph)
    if output:
        run.artifact(write_text(output, text))
    else:
        click.echo(text, nl=False)
    return run.finish(EXIT_OK, "ok")


@cli.command("pretty")
@click.argument("spec")
@click.option("--grammar", default=None)
@click.option("--instance", default=None)
@command("pretty")
def cmd_pretty(run: Run, spec, grammar, instance):
    """Imprime la spec normalizada y un resumen de gramática e instancia"""
    sys = load_spec(run.input(spec))
    run.protocol = sys.name
    click.echo(format_system(sys), nl=False)
    click.echo(f"\n// spec hash {sys.digest}")
    inst = load_instance(run.input(instance), sys) if instance else None
    if inst is not None:
        click.echo(f"// instance hash {inst.digest}")
        click.echo(f"// type-correct states {type_state_space_size(sys, inst)}")
    if grammar:
        g = load_grammar(run.input(grammar), sys)
        click.echo(f"// grammar: {len(g.templates)} templates, {len(g.predicates)} predicates, k={g.max_literals}")
        if inst is not None:
            click.echo(f"// candidate clauses {CandidateSpace(sys, inst, g).total}")
    return run.finish(EXIT_OK, "ok")


@cli.command("history")
@cache_option
@click.option("--command", "command_name", default=None, help="Filtrar por subcomando")
@click.option("--limit", type=int, default=20, show_default=True)
def cmd_history(cache_dir, command_name, limit):
    """Corridas registradas en el ledger DuckDB"""
    path = Path(cache_dir) / LEDGER_FILE
    if not path.exists():
        click.echo(f"⚠️  no ledger at {path}")
        return
    ledger = LedgerClient(str(path))
    try:
        frame = ledger.history_frame(command_name, limit)
    finally:
        ledger.close()
    if frame.empty:
        click.echo("⚠️  no runs recorded")
        return
    click.echo(frame.to_string(index=False))


# ============================================================
# ENTRADA
# ============================================================

if __name__ == "__main__":
    cli()
