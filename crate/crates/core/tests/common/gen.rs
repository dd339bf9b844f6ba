//! Seeded random MiniJS programs that pass function values through
//! variables, properties, parameters, returns and natives.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Hof {
    name: String,
    arity: usize,
    returns_fn: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    out: Vec<String>,
    stmts: usize,
    max: usize,
    fresh: usize,
    /// Names bound to zero-argument callables.
    fns: Vec<String>,
    /// Zero-argument functions that return a callable.
    makers: Vec<String>,
    hofs: Vec<Hof>,
    objects: Vec<String>,
}

const KEYS: [&str; 3] = ["k0", "k1", "k2"];

impl Gen {
    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn pick_fn(&mut self) -> String {
        self.fns.choose(&mut self.rng).cloned().expect("seeded with a leaf")
    }

    fn key(&mut self) -> &'static str {
        KEYS.choose(&mut self.rng).copied().unwrap()
    }

    fn emit(&mut self, s: String) {
        self.stmts += 1;
        self.out.push(s);
    }

    fn prop_access(&mut self, obj: &str, key: &str) -> String {
        match self.rng.gen_range(0..4) {
            0 => format!("{obj}[\"{key}\"]"),
            1 => format!("{obj}[\"k\" + \"{}\"]", &key[1..]),
            _ => format!("{obj}.{key}"),
        }
    }

    fn leaf(&mut self) {
        let name = self.name("f");
        if !self.fns.is_empty() && self.rng.gen_bool(0.3) {
            let r = self.pick_fn();
            self.emit(format!("function {name}() {{ return {r}; }}"));
            self.makers.push(name.clone());
        } else if !self.fns.is_empty() && self.rng.gen_bool(0.3) {
            let r = self.pick_fn();
            self.emit(format!("function {name}() {{ {r}(); }}"));
        } else {
            self.emit(format!("function {name}() {{ }}"));
        }
        self.fns.push(name);
    }

    fn hof(&mut self) {
        let name = self.name("h");
        let arity = self.rng.gen_range(1..=2);
        let params: Vec<String> = (0..arity).map(|i| format!("p{i}")).collect();
        let p = params.choose(&mut self.rng).unwrap().clone();
        let (body, returns_fn) = match self.rng.gen_range(0..5) {
            0 => (format!("{p}();"), false),
            1 => (format!("return {p};"), true),
            2 => (format!("var t = {p};\n  t();"), false),
            3 => (format!("return function {}() {{ {p}(); }};", self.name("c")), true),
            _ => match self.objects.choose(&mut self.rng).cloned() {
                Some(o) => {
                    let k = self.key();
                    (format!("{o}.{k} = {p};\n  {p}();"), false)
                }
                None => (format!("{p}();"), false),
            },
        };
        self.emit(format!("function {name}({}) {{\n  {body}\n}}", params.join(", ")));
        self.hofs.push(Hof {
            name,
            arity,
            returns_fn,
        });
    }

    fn object(&mut self) {
        let name = self.name("o");
        let vals: Vec<String> = KEYS.iter().map(|k| format!("{k}: {}", self.pick_fn())).collect();
        self.emit(format!("var {name} = {{ {} }};", vals.join(", ")));
        self.objects.push(name);
    }

    fn call_hof(&mut self) {
        let Some(i) = (0..self.hofs.len()).collect::<Vec<_>>().choose(&mut self.rng).copied() else {
            return self.leaf();
        };
        let args: Vec<String> = (0..self.hofs[i].arity).map(|_| self.pick_fn()).collect();
        let call = format!("{}({})", self.hofs[i].name, args.join(", "));
        if self.hofs[i].returns_fn {
            let v = self.name("v");
            self.emit(format!("var {v} = {call};"));
            self.fns.push(v);
        } else {
            self.emit(format!("{call};"));
        }
    }

    fn statement(&mut self) {
        match self.rng.gen_range(0..12) {
            0 => self.leaf(),
            1 => self.hof(),
            2 => self.object(),
            3 | 4 => self.call_hof(),
            5 => {
                let f = self.pick_fn();
                self.emit(format!("{f}();"));
            }
            6 => {
                let v = self.name("v");
                let f = self.pick_fn();
                self.emit(format!("var {v} = {f};"));
                self.fns.push(v);
            }
            7 => match self.objects.choose(&mut self.rng).cloned() {
                Some(o) => {
                    let k = self.key();
                    let access = self.prop_access(&o, k);
                    let f = self.pick_fn();
                    self.emit(format!("{access} = {f};"));
                }
                None => self.object(),
            },
            8 => match self.objects.choose(&mut self.rng).cloned() {
                Some(o) => {
                    let k = self.key();
                    let access = self.prop_access(&o, k);
                    if self.rng.gen_bool(0.5) {
                        self.emit(format!("{access}();"));
                    } else {
                        let v = self.name("v");
                        self.emit(format!("var {v} = {access};"));
                        self.fns.push(v);
                    }
                }
                None => self.object(),
            },
            9 => match self.makers.choose(&mut self.rng).cloned() {
                Some(m) => {
                    let v = self.name("v");
                    self.emit(format!("var {v} = {m}();"));
                    self.fns.push(v);
                }
                None => self.leaf(),
            },
            10 => {
                let f = self.pick_fn();
                let native = ["runCallback", "invokeCallback"].choose(&mut self.rng).unwrap();
                self.emit(format!("{native}({f});"));
            }
            _ => {
                let f = self.pick_fn();
                let v = self.name("v");
                let native = ["identity", "opaqueIdentity"].choose(&mut self.rng).unwrap();
                self.emit(format!("var {v} = {native}({f});"));
                self.fns.push(v);
            }
        }
    }
}

/// A terminating program of at most `max_stmts` top-level statements.
pub fn random_program(seed: u64, max_stmts: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = rng.gen_range(3..=max_stmts.max(3));
    let mut g = Gen {
        rng,
        out: Vec::new(),
        stmts: 0,
        max,
        fresh: 0,
        fns: Vec::new(),
        makers: Vec::new(),
        hofs: Vec::new(),
        objects: Vec::new(),
    };
    g.leaf();
    while g.stmts < g.max {
        g.statement();
    }
    let mut s = g.out.join("\n");
    s.push('\n');
    s
}
