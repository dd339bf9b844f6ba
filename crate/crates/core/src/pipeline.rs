//! End-to-end analysis of one program: execute, build static graphs,
//! detect missed edges, attribute and label them.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::acg::{analyze, build_flow_graph, extract_call_graph, CallGraph, FlowGraph, Variant};
use crate::detector::{detect, resolve_dependent_calls, DetectorError, EdgeFindings, EdgeKey, MissingFlow};
use crate::frontend::{parse_program, resolve_bindings, BoundProgram, FrontendError};
use crate::interp::{execute_with, DynamicCallGraph, ExecOptions, FlowTrace, NativeConfig};
use crate::labeler::{classify_property_name, dynamic_access_entry, label_flow, PropertyNameCategory, RootCauseLabel};
use crate::report::ProgramReport;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub variant: Variant,
    pub exec: ExecOptions,
    pub natives: NativeConfig,
    pub fine_grained: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            variant: Variant::Optimistic,
            exec: ExecOptions::default(),
            natives: NativeConfig::default(),
            fine_grained: false,
        }
    }
}

/// Externally produced stage outputs. Each one present replaces the stage
/// that would compute it.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub trace: Option<FlowTrace>,
    pub dcg: Option<DynamicCallGraph>,
    pub fg: Option<FlowGraph>,
    pub cg: Option<CallGraph>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// Findings and labels of one missed edge after dependent-call resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub flows: BTreeSet<MissingFlow>,
    pub labels: BTreeSet<RootCauseLabel>,
    pub categories: BTreeSet<PropertyNameCategory>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub name: String,
    pub program: BoundProgram,
    pub trace: FlowTrace,
    pub dcg: DynamicCallGraph,
    pub fg: FlowGraph,
    pub cg: CallGraph,
    pub output: Vec<String>,
    pub execution_error: Option<String>,
    pub findings: Vec<EdgeFindings>,
    pub attribution: BTreeMap<EdgeKey, Attribution>,
    pub report: ProgramReport,
}

/// Analyzes MiniJS source. `name` becomes the unit name in locations.
pub fn analyze_source(
    name: &str,
    source: &str,
    opts: &PipelineOptions,
    supplied: Artifacts,
) -> Result<Analysis, PipelineError> {
    let parsed = parse_program(source, name).map_err(FrontendError::from)?;
    let program = resolve_bindings(parsed, &opts.natives.global_names())?;

    let (trace, dcg, output, execution_error) = match (supplied.trace, supplied.dcg) {
        (Some(t), Some(d)) => (t, d, Vec::new(), None),
        (t, d) => {
            let x = execute_with(&program, &opts.natives, &opts.exec);
            (
                t.unwrap_or(x.trace),
                d.unwrap_or(x.dcg),
                x.output,
                x.error.map(|e| e.to_string()),
            )
        }
    };

    let (fg, cg) = match (supplied.fg, supplied.cg) {
        (Some(fg), Some(cg)) => (fg, cg),
        (Some(fg), None) => {
            let (_, sites) = build_flow_graph(&program, &opts.natives, fg.variant);
            let cg = extract_call_graph(&fg, &sites);
            (fg, cg)
        }
        (None, cg) => {
            let s = analyze(&program, &opts.natives, opts.variant);
            (s.fg, cg.unwrap_or(s.cg))
        }
    };

    let findings = detect(&trace, &dcg, &cg, &fg)?;
    let raw: BTreeMap<EdgeKey, BTreeSet<MissingFlow>> = findings
        .iter()
        .map(|f| (f.edge.key(), f.flows.clone()))
        .collect();
    let attribution = resolve_dependent_calls(&raw)
        .into_iter()
        .map(|(k, flows)| {
            let a = attribute(flows, &trace, opts.fine_grained.then_some(&program));
            (k, a)
        })
        .collect();

    let report = ProgramReport::new(name, opts.variant, &findings, &attribution, &cg, &dcg, execution_error.clone());
    Ok(Analysis {
        name: name.to_string(),
        program,
        trace,
        dcg,
        fg,
        cg,
        output,
        execution_error,
        findings,
        attribution,
        report,
    })
}

fn attribute(flows: BTreeSet<MissingFlow>, trace: &FlowTrace, program: Option<&BoundProgram>) -> Attribution {
    let mut labels = BTreeSet::new();
    let mut categories = BTreeSet::new();
    for flow in &flows {
        let label = label_flow(flow, trace);
        labels.insert(label);
        if let (RootCauseLabel::DynamicPropertyAccess, Some(p)) = (label, program) {
            let cat = dynamic_access_entry(flow, trace)
                .and_then(|e| classify_property_name(&e.loc, p).ok())
                .unwrap_or(PropertyNameCategory::Unknown);
            categories.insert(cat);
        }
    }
    Attribution {
        flows,
        labels,
        categories,
    }
}
