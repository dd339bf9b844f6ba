use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cgrl::acg::{CallGraph, FlowGraph, Variant};
use cgrl::frontend::{dump_program, parse_program};
use cgrl::interp::{DynamicCallGraph, ExecOptions, FlowTrace, NativeConfig};
use cgrl::pipeline::{analyze_source, Analysis, Artifacts, PipelineOptions};
use cgrl::report::CorpusReport;
use cgrl::SchemaError;

const SOURCE_EXT: &str = "mjs-mini";

#[derive(Parser)]
#[command(name = "cgrl", version, about = "Explain call edges missed by field-based static call graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one program or a corpus directory.
    Run(RunArgs),
    /// Print the parsed syntax tree of a program as JSON.
    DumpAst { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// MiniJS source file.
    #[arg(required_unless_present = "corpus", conflicts_with = "corpus")]
    input: Option<PathBuf>,
    /// Analyze every `.mjs-mini` file in a directory.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "optimistic", value_parser = parse_variant)]
    variant: Variant,
    /// Trace, DCG, flow-graph or call-graph files replacing the stages
    /// that would produce them.
    #[arg(long, value_delimiter = ',', value_name = "FILES", conflicts_with = "corpus")]
    from_artifacts: Vec<PathBuf>,
    /// Classify the property-name expression of dynamic accesses.
    #[arg(long)]
    fine_grained: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "N")]
    step_budget: Option<u64>,
    /// Native library description (JSON). Defaults to the built-in set.
    #[arg(long, value_name = "FILE")]
    natives: Option<PathBuf>,
    #[arg(long, env = "CGRL_OUTPUT_DIR", default_value = "cgrl-out", value_name = "DIR")]
    out: PathBuf,
    /// Also write the reconstructed copy chain of every missed edge.
    #[arg(long)]
    emit_copies: bool,
    /// Print the raw and attributed flows of every missed edge.
    #[arg(long)]
    emit_flows: bool,
    /// Do not print the text summary.
    #[arg(long, short)]
    quiet: bool,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::DumpAst { file } => dump_ast(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dump_ast(file: &Path) -> Result<()> {
    let src = read(file)?;
    let program = parse_program(&src, &unit_name(file))?;
    println!("{}", serde_json::to_string_pretty(&dump_program(&program))?);
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn unit_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn options(args: &RunArgs) -> Result<PipelineOptions> {
    let natives = match &args.natives {
        Some(p) => NativeConfig::from_json(&read(p)?, &p.display().to_string())?,
        None => NativeConfig::default(),
    };
    let mut exec = ExecOptions {
        seed: args.seed,
        ..ExecOptions::default()
    };
    if let Some(b) = args.step_budget {
        exec.step_budget = b;
    }
    Ok(PipelineOptions {
        variant: args.variant,
        exec,
        natives,
        fine_grained: args.fine_grained,
    })
}

fn run(args: &RunArgs) -> Result<()> {
    let opts = options(args)?;
    if let Some(dir) = &args.corpus {
        return run_corpus(args, &opts, dir);
    }
    let input = args.input.as_ref().expect("clap requires input or corpus");
    let supplied = load_artifacts(&args.from_artifacts, args.variant)?;
    let a = analyze_file(input, &opts, supplied)?;
    write_outputs(args, &a, &args.out)?;
    if !args.quiet {
        print!("{}", a.report.to_text());
    }
    Ok(())
}

fn run_corpus(args: &RunArgs, opts: &PipelineOptions, dir: &Path) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read corpus directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == SOURCE_EXT))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .{SOURCE_EXT} files in {}", dir.display());
    }
    let mut analyses = Vec::new();
    for f in &files {
        let a = analyze_file(f, opts, Artifacts::default())?;
        let stem = f.file_stem().expect("file has a name").to_string_lossy().into_owned();
        write_outputs(args, &a, &args.out.join(stem))?;
        analyses.push(a);
    }
    let agg = CorpusReport::new(opts.variant, &analyses);
    fs::create_dir_all(&args.out)?;
    write(&args.out, "aggregate.json", &agg.to_json())?;
    write(&args.out, "aggregate.csv", &agg.to_csv())?;
    write(&args.out, "aggregate.txt", &agg.to_text())?;
    if !args.quiet {
        for a in &analyses {
            print!("{}", a.report.to_text());
            println!();
        }
        print!("{}", agg.to_text());
    }
    Ok(())
}

fn analyze_file(path: &Path, opts: &PipelineOptions, supplied: Artifacts) -> Result<Analysis> {
    let src = read(path)?;
    analyze_source(&unit_name(path), &src, opts, supplied).with_context(|| format!("analysis of {} failed", path.display()))
}

/// Sorts supplied files by their header: a trace has a `format` line,
/// the graphs carry a `kind` field.
fn load_artifacts(paths: &[PathBuf], variant: Variant) -> Result<Artifacts> {
    let mut out = Artifacts::default();
    for p in paths {
        let name = p.display().to_string();
        let text = read(p)?;
        let first = text.lines().next().unwrap_or_default();
        let header: Option<serde_json::Value> = serde_json::from_str(first).ok();
        if header.as_ref().and_then(|h| h.get("format")).is_some() {
            let t = FlowTrace::read_jsonl(std::io::BufReader::new(text.as_bytes()), &name)?;
            set(&mut out.trace, t, &name)?;
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| SchemaError::new(&name, "(document)", e.to_string()))?;
        let kind = v
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| SchemaError::new(&name, "kind", "missing artifact kind"))?;
        match kind {
            "flow-graph" => {
                let fg = FlowGraph::from_json(&text, &name)?;
                if fg.variant != variant {
                    return Err(SchemaError::new(&name, "variant", format!("graph is {}, run is {variant}", fg.variant)).into());
                }
                set(&mut out.fg, fg, &name)?;
            }
            "call-graph" => {
                if let Some(v) = v.get("variant").and_then(|v| v.as_str()) {
                    if v != variant.to_string() {
                        return Err(SchemaError::new(&name, "variant", format!("graph is {v}, run is {variant}")).into());
                    }
                }
                set(&mut out.cg, CallGraph::from_json(&text, &name)?, &name)?;
            }
            "dynamic-call-graph" => set(&mut out.dcg, DynamicCallGraph::from_json(&text, &name)?, &name)?,
            other => return Err(SchemaError::new(&name, "kind", format!("unknown artifact kind `{other}`")).into()),
        }
    }
    Ok(out)
}

fn set<T>(slot: &mut Option<T>, value: T, name: &str) -> Result<()> {
    if slot.is_some() {
        bail!("{name}: a second artifact of the same kind was supplied");
    }
    *slot = Some(value);
    Ok(())
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<()> {
    let p = dir.join(file);
    fs::write(&p, contents).with_context(|| format!("cannot write {}", p.display()))
}

fn write_outputs(args: &RunArgs, a: &Analysis, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut trace = Vec::new();
    a.trace.write_jsonl(&mut trace)?;
    fs::write(dir.join("trace.jsonl"), trace)?;
    write(dir, "dcg.json", &a.dcg.to_json())?;
    write(dir, "fg.json", &a.fg.to_json())?;
    write(dir, "cg.json", &a.cg.to_json(Some(a.fg.variant)))?;
    let flows: Vec<_> = a
        .findings
        .iter()
        .map(|f| json!({ "site": f.edge.site, "callee": f.edge.callee, "flows": f.flows }))
        .collect();
    write(dir, "flows.json", &pretty(&json!({ "schemaVersion": 1, "kind": "missing-flows", "edges": flows }))?)?;
    if args.emit_copies {
        let chains: Vec<_> = a.findings.iter().map(|f| json!({ "edge": f.edge, "chain": f.chain })).collect();
        write(dir, "copies.json", &pretty(&json!({ "schemaVersion": 1, "kind": "copy-chains", "edges": chains }))?)?;
    }
    write(dir, "report.json", &a.report.to_json())?;
    write(dir, "report.csv", &a.report.to_csv())?;
    write(dir, "report.txt", &a.report.to_text())?;
    if args.emit_flows {
        for f in &a.findings {
            println!("{} -> {}", f.edge.site, f.edge.callee);
            for fl in &f.flows {
                println!("  raw       {}", serde_json::to_string(fl)?);
            }
            if let Some(att) = a.attribution.get(&f.edge.key()) {
                for fl in &att.flows {
                    println!("  resolved  {}", serde_json::to_string(fl)?);
                }
            }
        }
    }
    Ok(())
}

fn pretty(v: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}
