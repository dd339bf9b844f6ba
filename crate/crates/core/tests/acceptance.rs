//! End-to-end acceptance criteria. Each test prints one `criterion N`
//! line when it passes; run with `--nocapture` to see them.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use cgrl::acg::{FgNode, Variant};
use cgrl::copies::CopyFinder;
use cgrl::detector::{find_missing_flows, missed_edges, MissingFlow};
use cgrl::frontend::{parse_program, resolve_bindings};
use cgrl::ids::VarSlot;
use cgrl::interp::{EntryKind, NativeConfig};
use cgrl::labeler::{classify_property_name, dynamic_access_locs, PropertyNameCategory, RootCauseLabel};
use cgrl::metrics::Metric;
use cgrl::pipeline::Analysis;
use cgrl::report::CorpusReport;

use common::{fixture, fixture_dir, gen, oracle, pass_line, run};

fn metric(a: &Analysis, m: Metric) -> (f64, f64, f64) {
    let r = a.report.metric(m).unwrap();
    (r.recall, r.recall_numerator, r.recall_denominator)
}

#[test]
fn criterion_1_phone_book_end_to_end() {
    let start = Instant::now();
    let a = run("phone_book.mjs-mini", &fixture("phone_book.mjs-mini"), Variant::Optimistic, false);
    let elapsed = start.elapsed();

    assert_eq!(a.findings.len(), 1);
    let f = &a.findings[0];
    assert_eq!(f.edge.site.line, 6);
    assert_eq!(f.edge.callee.name(), "f2");
    assert_eq!(f.flows.len(), 1);
    let flow = f.flows.iter().next().unwrap();
    match flow {
        MissingFlow::MissingFGPath { src, dst, .. } => {
            assert_eq!(*src, FgNode::Prop("MyPhone".into()));
            assert_eq!(*dst, FgNode::Callee(f.edge.site.clone()));
        }
        other => panic!("expected a missing path, got {other:?}"),
    }
    let att = &a.attribution[&f.edge.key()];
    assert_eq!(att.labels, [RootCauseLabel::DynamicPropertyAccess].into());

    assert_eq!(metric(&a, Metric::ReachableEdges), (2.0 / 3.0, 2.0, 3.0));
    assert_eq!(metric(&a, Metric::CallSiteTargets), (2.0 / 3.0, 2.0, 3.0));
    assert_eq!(metric(&a, Metric::ReachableNodes), (0.75, 3.0, 4.0));
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass_line(1, "phone book", "1 missed edge, DynamicPropertyAccess, recall 2/3 2/3 3/4", elapsed);
}

#[test]
fn criterion_2_dependent_call_resolution() {
    let start = Instant::now();
    let a = run("dependent_call.mjs-mini", &fixture("dependent_call.mjs-mini"), Variant::Optimistic, false);
    let elapsed = start.elapsed();

    assert_eq!(a.findings.len(), 2);
    let line4 = a.findings.iter().find(|f| f.edge.site.line == 4).unwrap();
    assert!(line4.flows.iter().any(MissingFlow::is_dependent), "{:?}", line4.flows);
    let line3 = a.findings.iter().find(|f| f.edge.site.line == 3).unwrap();

    let resolved3 = &a.attribution[&line3.edge.key()];
    let resolved4 = &a.attribution[&line4.edge.key()];
    assert_eq!(resolved3.flows.len(), 1);
    assert_eq!(resolved3.flows, resolved4.flows);
    assert!(matches!(resolved3.flows.first(), Some(MissingFlow::MissingFGPath { .. })));
    for r in [resolved3, resolved4] {
        assert_eq!(r.labels, [RootCauseLabel::DynamicPropertyAccess].into());
    }
    let d = &a.report.distribution;
    assert_eq!(d.coarse.len(), 1);
    assert_eq!(d.coarse["DynamicPropertyAccess"].pct, 100.0);
    assert_eq!(a.report.dependent_calls_resolved, 1);
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass_line(2, "dependent call", "2 missed edges share one dynamic-access flow", elapsed);
}

#[test]
fn criterion_3_closest_read_limitation() {
    let start = Instant::now();
    let a = run("copy_limitation.mjs-mini", &fixture("copy_limitation.mjs-mini"), Variant::Optimistic, false);
    let t = &a.trace;
    let invoke = t
        .entries
        .iter()
        .position(|e| e.loc.line == 1 && matches!(&e.kind, EntryKind::Invoke { callee, .. } if callee.name() == "bar"))
        .expect("invoke of bar on line 1");
    let chain = CopyFinder::new(t).find_dynamic_copies(invoke).unwrap();
    let infeasible = chain.chain.iter().any(|c| {
        let read_y = matches!(&t.entries[c.read].kind, EntryKind::VarRead { name, .. } if name == "y");
        let via_foo = matches!(&t.entries[c.write].kind, EntryKind::Invoke { callee, .. } if callee.name() == "foo");
        let into_p = matches!(
            &t.entries[c.dest].kind,
            EntryKind::VarRead { name, slot: VarSlot::Param { index: 0, .. } } if name == "p"
        );
        read_y && via_foo && into_p
    });
    assert!(infeasible, "{chain:?}");
    pass_line(3, "closest-read limitation", "chain contains y -> formal p via foo", start.elapsed());
}

#[test]
fn criterion_4_pessimistic_versus_optimistic() {
    let start = Instant::now();
    let mut only_pessimistic = 0;
    let mut seen = BTreeSet::new();
    for (name, src) in fixture_dir("param_return") {
        let opt = run(&name, &src, Variant::Optimistic, false);
        let pes = run(&name, &src, Variant::Pessimistic, false);
        for (key, att) in &pes.attribution {
            if opt.attribution.contains_key(key) {
                continue;
            }
            only_pessimistic += 1;
            let pf: BTreeSet<_> = att
                .labels
                .intersection(&[RootCauseLabel::ParameterPass, RootCauseLabel::FunctionReturn].into())
                .copied()
                .collect();
            assert!(!pf.is_empty(), "{name}: {key:?} has {:?}", att.labels);
            seen.extend(pf);
        }
        for att in opt.attribution.values() {
            assert!(!att.labels.contains(&RootCauseLabel::ParameterPass), "{name}");
            assert!(!att.labels.contains(&RootCauseLabel::FunctionReturn), "{name}");
        }
    }
    let elapsed = start.elapsed();
    assert!(only_pessimistic >= 10, "only {only_pessimistic} pessimistic-only edges");
    assert_eq!(seen.len(), 2, "{seen:?}");
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    pass_line(
        4,
        "pessimistic vs optimistic",
        &format!("{only_pessimistic} pessimistic-only edges, all ParameterPass/FunctionReturn"),
        elapsed,
    );
}

#[test]
fn criterion_5_label_coverage() {
    let start = Instant::now();
    let programs = fixture_dir("labels");
    assert_eq!(programs.len(), 8);
    let mut passed = 0;
    for (name, src) in &programs {
        let expected = name.trim_end_matches(".mjs-mini");
        let a = run(name, src, Variant::Optimistic, false);
        let carrying: Vec<_> = a
            .attribution
            .values()
            .filter(|att| att.labels.iter().any(|l| l.as_str() == expected))
            .collect();
        assert_eq!(carrying.len(), 1, "{name}: {:?}", a.report.missed_edges);
        let labels: Vec<&str> = carrying[0].labels.iter().map(|l| l.as_str()).collect();
        assert_eq!(labels, [expected], "{name}");
        passed += 1;
    }
    pass_line(5, "label coverage", &format!("{passed}/8"), start.elapsed());
}

fn iff_path_holds(a: &Analysis) {
    let funcs: Vec<&FgNode> = a.fg.nodes().filter(|n| matches!(n, FgNode::Func(_))).collect();
    let reach: BTreeMap<&FgNode, BTreeSet<FgNode>> =
        funcs.iter().map(|&f| (f, a.fg.reachable(f).unwrap())).collect();
    for site in a.cg.site_owner.keys() {
        let callee = FgNode::Callee(site.clone());
        for f in &funcs {
            let FgNode::Func(fr) = f else { unreachable!() };
            assert_eq!(
                a.cg.contains(site, fr),
                reach[f].contains(&callee),
                "{}: {site} -> {fr}",
                a.name
            );
        }
    }
    for (site, f) in &a.cg.edges {
        assert!(reach.contains_key(&FgNode::Func(f.clone())), "{}: edge to {f} without a node", a.name);
        assert!(a.cg.site_owner.contains_key(site));
    }
}

fn corpus() -> Vec<(String, String)> {
    let mut all = Vec::new();
    for dir in [".", "labels", "param_return"] {
        for (name, src) in fixture_dir(dir) {
            all.push((format!("{dir}/{name}"), src));
        }
    }
    all
}

#[test]
fn criterion_6_oracle_suites() {
    let start = Instant::now();

    // (a) reachability against a transitive-closure oracle.
    let mut graphs = 0;
    for seed in 0..100u64 {
        let mut rng = <rand_chacha::ChaCha8Rng as rand_chacha::rand_core::SeedableRng>::seed_from_u64(seed);
        use rand::Rng;
        let n: usize = rng.gen_range(1..=50);
        let edges: Vec<(usize, usize)> = (0..rng.gen_range(0..=n * 2))
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        let mut fg = cgrl::acg::FlowGraph::new(Variant::Optimistic);
        let node = |i: usize| FgNode::Prop(format!("n{i}"));
        for i in 0..n {
            fg.add_node(node(i));
        }
        for &(a, b) in &edges {
            fg.add_edge(node(a), node(b));
        }
        let mut closure = vec![vec![false; n]; n];
        for (i, row) in closure.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in &edges {
            closure[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if closure[i][k] && closure[k][j] {
                        closure[i][j] = true;
                    }
                }
            }
        }
        for i in 0..n {
            let got = fg.reachable(&node(i)).unwrap();
            let want: BTreeSet<FgNode> = (0..n).filter(|&j| closure[i][j]).map(node).collect();
            assert_eq!(got, want, "graph {seed}, source {i}");
        }
        graphs += 1;
    }

    // (b) copy reconstruction against a naive backward search.
    let mut traces = 0;
    let mut invokes = 0;
    for seed in 0..100u64 {
        let t = oracle::random_trace(seed, 200);
        assert!(t.len() <= 200);
        let finder = CopyFinder::new(&t);
        for (i, e) in t.entries.iter().enumerate() {
            if !e.is_invoke() {
                continue;
            }
            let got = finder.find_dynamic_copies(i).unwrap();
            let want = oracle::chain(&t, i);
            assert_eq!((&got.chain, got.complete, got.gap), (&want.chain, want.complete, want.gap), "trace {seed}, invoke {i}");
            invokes += 1;
        }
        traces += 1;
    }

    // (c) and (d) over the fixtures and 200 generated programs.
    let mut programs = corpus();
    for seed in 0..200u64 {
        programs.push((format!("gen{seed}.mjs-mini"), gen::random_program(seed, 30)));
    }
    let mut complete_edges = 0;
    let mut real_invokes = 0;
    for (name, src) in &programs {
        for variant in [Variant::Optimistic, Variant::Pessimistic] {
            let a = run(name, src, variant, false);
            iff_path_holds(&a);
            let finder = CopyFinder::new(&a.trace);
            for edge in missed_edges(&a.dcg, &a.cg, &a.fg, &a.trace).unwrap() {
                let chain = finder.find_dynamic_copies(edge.witness).unwrap();
                if chain.complete {
                    complete_edges += 1;
                    let flows = find_missing_flows(&chain, &a.cg, &a.fg, &a.trace);
                    assert!(!flows.is_empty(), "{name} ({variant}): {edge:?}");
                }
            }
            if variant == Variant::Optimistic && a.trace.len() <= 200 {
                for (i, e) in a.trace.entries.iter().enumerate().filter(|(_, e)| e.is_invoke()) {
                    let got = finder.find_dynamic_copies(i).unwrap();
                    let want = oracle::chain(&a.trace, i);
                    assert_eq!((&got.chain, got.complete), (&want.chain, want.complete), "{name}, invoke {i} {e:?}");
                    real_invokes += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(complete_edges > 0);
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass_line(
        6,
        "oracle suites",
        &format!(
            "{graphs} graphs, {traces} traces ({invokes} invokes + {real_invokes} from programs), {} programs iff-path, {complete_edges} complete chains with flows",
            programs.len()
        ),
        elapsed,
    );
}

#[test]
fn criterion_7_property_name_categories() {
    use PropertyNameCategory as C;
    let start = Instant::now();
    let natives = NativeConfig::default();
    let p = resolve_bindings(
        parse_program(&fixture("categories.mjs-mini"), "categories.mjs-mini").unwrap(),
        &natives.global_names(),
    )
    .unwrap();
    let got: Vec<PropertyNameCategory> = dynamic_access_locs(&p)
        .iter()
        .map(|l| classify_property_name(l, &p).unwrap())
        .collect();
    let want = [
        C::ForInLoop,
        C::ParameterPassed,
        C::OuterScopeVariable,
        C::PropertyRead,
        C::StringConcat {
            const_prefix_or_suffix: true,
        },
        C::StringConcat {
            const_prefix_or_suffix: false,
        },
        C::LocalComputation,
    ];
    assert_eq!(got, want);
    let kinds: BTreeSet<&str> = got.iter().map(|c| c.key().trim_end_matches("(constPrefixOrSuffix)")).collect();
    assert_eq!(kinds.len(), 6);
    pass_line(7, "property-name categories", "6/6, constant prefix accepted and u + v rejected", start.elapsed());
}

fn corpus_reports(programs: &[(String, String)]) -> Vec<String> {
    let mut out = Vec::new();
    for variant in [Variant::Optimistic, Variant::Pessimistic] {
        let analyses: Vec<Analysis> = programs.iter().map(|(n, s)| run(n, s, variant, true)).collect();
        out.extend(analyses.iter().map(|a| a.report.to_json()));
        out.push(CorpusReport::new(variant, &analyses).to_json());
    }
    out
}

#[test]
fn criterion_8_determinism() {
    let start = Instant::now();
    let mut programs = corpus();
    for seed in 0..20u64 {
        programs.push((format!("gen{seed}.mjs-mini"), gen::random_program(seed, 30)));
    }
    let first = corpus_reports(&programs);
    let second = corpus_reports(&programs);
    assert_eq!(first.len(), second.len());
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a, b);
    }
    pass_line(8, "determinism", &format!("{} reports byte-identical across two runs", first.len()), start.elapsed());
}

#[test]
fn generated_programs_run_to_completion() {
    let natives = NativeConfig::default();
    let mut finished = 0;
    for seed in 0..200u64 {
        let src = gen::random_program(seed, 30);
        let p = resolve_bindings(parse_program(&src, "g").unwrap(), &natives.global_names())
            .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
        let x = cgrl::interp::execute(&p, &natives);
        if x.error.is_none() {
            finished += 1;
        }
        assert!(src.lines().filter(|l| !l.starts_with(' ') && *l != "}").count() <= 30);
    }
    assert!(finished >= 190, "only {finished} of 200 generated programs finished");
}
