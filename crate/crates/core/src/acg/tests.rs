use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::frontend::{parse_program, resolve_bindings};
use crate::ids::ScopeId;

const PHONE_BOOK: &str = "function main() {
  var v1 = function f1() { return \"John\"; };
  var v2 = function f2() { return \"555-1234\"; };
  var obj = { MyName: v1, MyPhone: v2 };
  obj.MyName();
  obj[\"My\" + \"Phone\"]();
}
main();
";

const DEPENDENT_CALL: &str = "function f() { }
var x = { foo: function f2() { return f; } };
var y = x[\"fo\" + \"o\"]();
y();
";

fn bind(src: &str) -> BoundProgram {
    let natives = NativeConfig::default();
    resolve_bindings(parse_program(src, "t").unwrap(), &natives.global_names()).unwrap()
}

fn run(src: &str, variant: Variant) -> (BoundProgram, StaticResult) {
    let p = bind(src);
    let r = analyze(&p, &NativeConfig::default(), variant);
    (p, r)
}

fn site(sites: &SiteTable, line: u32) -> SourceLoc {
    let on_line: Vec<&SourceLoc> = sites.keys().filter(|s| s.line == line).collect();
    assert_eq!(on_line.len(), 1, "expected one call site on line {line}");
    on_line[0].clone()
}

fn func(p: &BoundProgram, name: &str) -> FuncRef {
    let f = p
        .functions
        .iter()
        .find(|f| f.name.as_deref() == Some(name))
        .expect("function");
    FuncRef::User(f.id.clone())
}

fn local(p: &BoundProgram, owner: &str, name: &str) -> FgNode {
    let FuncRef::User(id) = func(p, owner) else { unreachable!() };
    FgNode::Var(VarSlot::Var {
        scope: ScopeId::Func(id),
        name: name.into(),
    })
}

fn names(p: &BoundProgram, cg: &CallGraph) -> BTreeSet<(u32, String)> {
    let _ = p;
    cg.edges
        .iter()
        .map(|(s, f)| {
            let n = match f {
                FuncRef::User(id) => id.name().to_string(),
                FuncRef::Native(n) => format!("native:{n}"),
            };
            (s.line, n)
        })
        .collect()
}

#[test]
fn phone_book_initial_flow_graph() {
    let p = bind(PHONE_BOOK);
    let (fg, sites) = build_flow_graph(&p, &NativeConfig::default(), Variant::Optimistic);
    let f1 = FgNode::Func(func(&p, "f1"));
    let f2 = FgNode::Func(func(&p, "f2"));
    let v1 = local(&p, "main", "v1");
    let v2 = local(&p, "main", "v2");
    let name = FgNode::Prop("MyName".into());
    let phone = FgNode::Prop("MyPhone".into());
    assert!(fg.has_edge(&f1, &v1));
    assert!(fg.has_edge(&f2, &v2));
    assert!(fg.has_edge(&v1, &name));
    assert!(fg.has_edge(&v2, &phone));
    assert!(fg.has_edge(&name, &FgNode::Callee(site(&sites, 5))));
    let line6 = FgNode::Callee(site(&sites, 6));
    assert!(fg.contains(&line6));
    assert!(!fg.has_path(&phone, &line6));
}

#[test]
fn phone_book_optimistic_call_graph() {
    let (p, r) = run(PHONE_BOOK, Variant::Optimistic);
    assert_eq!(
        names(&p, &r.cg),
        [(8, "main".to_string()), (5, "f1".to_string())].into()
    );
    assert_eq!(r.cg.site_owner[&site(&r.sites, 5)], Caller::Func(func(&p, "main")));
}

#[test]
fn dependent_call_misses_both() {
    let (p, r) = run(DEPENDENT_CALL, Variant::Optimistic);
    let got = names(&p, &r.cg);
    assert!(!got.contains(&(3, "f2".into())));
    assert!(!got.contains(&(4, "f".into())));
}

#[test]
fn direct_call_in_both_variants() {
    for v in [Variant::Optimistic, Variant::Pessimistic] {
        let (p, r) = run("function a() { }\na();", v);
        assert_eq!(names(&p, &r.cg), [(2, "a".to_string())].into());
    }
}

#[test]
fn no_functions_no_func_nodes() {
    let (_, r) = run("var x = 1; x = x + 2;", Variant::Optimistic);
    assert!(!r.fg.nodes().any(|n| matches!(n, FgNode::Func(_))));
    assert_eq!(r.fg.edge_count(), 0);
}

#[test]
fn pessimistic_wires_one_shot_calls_only() {
    let src = "function k() { }\nvar r = (function g(p) {\n  p();\n  return k;\n})(k);\nr();\nfunction h(q) { q(); }\nh(k);";
    let (p, pess) = run(src, Variant::Pessimistic);
    let g = func(&p, "g");
    let FuncRef::User(gid) = &g else { unreachable!() };
    let iife = site(&pess.sites, 5);
    assert!(pess.fg.has_edge(&FgNode::Func(g.clone()), &FgNode::Callee(iife.clone())));
    assert!(pess.fg.has_edge(&FgNode::Arg(iife.clone(), 0), &FgNode::Param(gid.clone(), 0)));
    let got = names(&p, &pess.cg);
    assert!(got.contains(&(5, "g".into())));
    assert!(got.contains(&(3, "k".into())));
    assert!(got.contains(&(6, "k".into())));
    assert!(!got.contains(&(7, "k".into())));

    let (_, opt) = run(src, Variant::Optimistic);
    let all = names(&p, &opt.cg);
    assert!(all.contains(&(7, "k".into())));
    assert!(all.is_superset(&got));
    let initial = build_flow_graph(&p, &NativeConfig::default(), Variant::Optimistic).0;
    assert!(opt.fg.edge_set().is_superset(&initial.edge_set()));
}

#[test]
fn reflective_natives() {
    let src = "function f(a) { a(); return a; }\nfunction g() { }\nvar r = f.call(null, g);\nr();\nvar s = f.apply(null, [g]);\ns();\nvar b = f.bind(null);";
    let (p, r) = run(src, Variant::Optimistic);
    let got = names(&p, &r.cg);
    for e in [
        (3, "native:call"),
        (3, "f"),
        (1, "g"),
        (4, "g"),
        (5, "native:apply"),
        (5, "f"),
        (6, "g"),
        (7, "native:bind"),
    ] {
        assert!(got.contains(&(e.0, e.1.to_string())), "missing {e:?} in {got:?}");
    }
    assert!(!got.contains(&(7, "f".into())));
}

#[test]
fn callback_and_summary_natives() {
    let src = "function g(x) { x(); }\nfunction k() { }\nrunCallback(g, k);\nvar i = identity(k);\ni();\ninvokeCallback(g, k);\nvar o = opaqueIdentity(k);\no();";
    let (p, r) = run(src, Variant::Optimistic);
    let got = names(&p, &r.cg);
    for e in [(3, "native:runCallback"), (3, "g"), (1, "k"), (4, "native:identity"), (5, "k")] {
        assert!(got.contains(&(e.0, e.1.to_string())), "missing {e:?} in {got:?}");
    }
    assert!(!got.iter().any(|(l, _)| *l == 6 || *l == 8));
    assert!(!r.fg.nodes().any(|n| *n == FgNode::Func(FuncRef::Native("invokeCallback".into()))));
}

#[test]
fn reachable_on_phone_book_graph() {
    let (p, r) = run(PHONE_BOOK, Variant::Optimistic);
    let f1 = FgNode::Func(func(&p, "f1"));
    assert!(r.fg.reachable(&f1).unwrap().contains(&FgNode::Callee(site(&r.sites, 5))));
    let lone = FgNode::Callee(site(&r.sites, 6));
    assert_eq!(r.fg.reachable(&lone).unwrap(), [lone.clone()].into());
    assert!(matches!(
        r.fg.reachable(&FgNode::Prop("nope".into())),
        Err(AcgError::UnknownNode(_))
    ));
}

#[test]
fn renaming_base_keeps_prop_identity() {
    let a = run("var o = {}; o.p = function(){}; o.p();", Variant::Optimistic).1;
    let b = run("var q = {}; q.p = function(){}; q.p();", Variant::Optimistic).1;
    let props = |r: &StaticResult| -> BTreeSet<FgNode> {
        r.fg.nodes().filter(|n| matches!(n, FgNode::Prop(_))).cloned().collect()
    };
    assert_eq!(props(&a), props(&b));
}

#[test]
fn graphs_round_trip_through_json() {
    let (_, r) = run(DEPENDENT_CALL, Variant::Optimistic);
    let fg = FlowGraph::from_json(&r.fg.to_json(), "fg.json").unwrap();
    assert_eq!(fg, r.fg);
    assert_eq!(fg.to_json(), r.fg.to_json());
    let cg = CallGraph::from_json(&r.cg.to_json(Some(Variant::Optimistic)), "cg.json").unwrap();
    assert_eq!(cg, r.cg);
    let bad = r.fg.to_json().replace("\"flow-graph\"", "\"nope\"");
    let err = FlowGraph::from_json(&bad, "fg.json").unwrap_err();
    assert_eq!(err.field, "kind");
}

fn check_iff_path(r: &StaticResult) {
    let funcs: Vec<FgNode> = r.fg.nodes().filter(|n| matches!(n, FgNode::Func(_))).cloned().collect();
    let callees: Vec<FgNode> = r.fg.nodes().filter(|n| matches!(n, FgNode::Callee(_))).cloned().collect();
    for f in &funcs {
        for c in &callees {
            let (FgNode::Func(fr), FgNode::Callee(s)) = (f, c) else { unreachable!() };
            assert_eq!(r.cg.contains(s, fr), r.fg.has_path(f, c), "{f} -> {c}");
        }
    }
}

#[test]
fn iff_path_on_examples() {
    for src in [PHONE_BOOK, DEPENDENT_CALL, "function a(b) { return b; }\nvar c = a(a);\nc(a);"] {
        for v in [Variant::Optimistic, Variant::Pessimistic] {
            check_iff_path(&run(src, v).1);
        }
    }
}

/// Reachability by boolean transitive closure.
fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        m[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=50).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..120)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn reachable_matches_closure((n, edges) in random_graph()) {
        let mut fg = FlowGraph::new(Variant::Optimistic);
        let node = |i: usize| FgNode::Prop(format!("p{i}"));
        for i in 0..n {
            fg.add_node(node(i));
        }
        for &(a, b) in &edges {
            fg.add_edge(node(a), node(b));
        }
        let oracle = closure(n, &edges);
        for (i, row) in oracle.iter().enumerate() {
            let got = fg.reachable(&node(i)).unwrap();
            let want: BTreeSet<FgNode> = (0..n).filter(|&j| row[j]).map(node).collect();
            prop_assert_eq!(got, want);
        }
    }
}
