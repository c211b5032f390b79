//! Synthetic programs for desk-scale runs and planted-signal fixtures.
//!
//! Every task is a small randomly generated routine (assignments, loops,
//! branches, prints) rendered in any of the registry languages. Human
//! renderings vary in indentation, comments and blank lines.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::RawSnippet;
use crate::generation::Dataset;
use crate::record::{SnippetRecord, SubDatasetId, Target};
use crate::sampling::rng_for;

const NAMES: &[&str] = &[
    "total", "count", "acc", "value", "limit", "step", "width", "height", "score", "best", "carry", "offset", "sum",
    "prod", "delta", "left", "right", "mid", "low", "high", "size", "span", "level", "depth",
];

const VERBS: &[&str] = &["compute", "count", "reduce", "scan", "fold", "measure", "walk", "collect", "sum", "check"];

const NOUNS: &[&str] = &["digits", "primes", "steps", "pairs", "cells", "runs", "terms", "blocks", "nodes", "weights"];

const REMARKS: &[&str] = &[
    "start with the base case",
    "keep the running total",
    "bounds are inclusive here",
    "naive but fine for small n",
    "see the task description",
    "update the accumulator",
    "TODO handle overflow",
    "main loop",
];

#[derive(Debug, Clone)]
enum Stmt {
    Assign(String, String),
    Loop(String, i64, Vec<Stmt>),
    If(String, Vec<Stmt>, Vec<Stmt>),
    Print(String),
}

/// A generated routine: name, parameter, locals with initial values, body
/// and result variable.
#[derive(Debug, Clone)]
pub struct Program {
    name: String,
    param: String,
    locals: Vec<(String, i64)>,
    body: Vec<Stmt>,
    result: String,
}

fn expr(rng: &mut ChaCha8Rng, vars: &[String]) -> String {
    let a = vars.choose(rng).expect("vars").clone();
    match rng.gen_range(0..4) {
        0 => format!("{a} + {}", rng.gen_range(1..20)),
        1 => format!("{a} * {}", rng.gen_range(2..5)),
        2 => format!("{a} - {}", vars.choose(rng).expect("vars")),
        _ => format!("{a} + {}", vars.choose(rng).expect("vars")),
    }
}

fn stmts(rng: &mut ChaCha8Rng, vars: &[String], loop_vars: &mut Vec<String>, depth: usize, n: usize) -> Vec<Stmt> {
    let targets: Vec<String> = vars.iter().filter(|v| !loop_vars.contains(v)).cloned().collect();
    let mut out = Vec::new();
    for _ in 0..n {
        let roll = if depth >= 2 { 0 } else { rng.gen_range(0..6) };
        let target = targets.choose(rng).expect("targets").clone();
        match roll {
            4 => {
                let lv = ["i", "j", "k"][loop_vars.len().min(2)].to_string();
                loop_vars.push(lv.clone());
                let mut inner: Vec<String> = vars.to_vec();
                inner.push(lv.clone());
                let k = rng.gen_range(1..4);
                let body = stmts(rng, &inner, loop_vars, depth + 1, k);
                loop_vars.pop();
                out.push(Stmt::Loop(lv, rng.gen_range(3..40), body));
            }
            5 => {
                let cond = format!("{} > {}", vars.choose(rng).expect("vars"), rng.gen_range(0..50));
                let k = rng.gen_range(1..3);
                let then = stmts(rng, vars, loop_vars, depth + 1, k);
                let other = if rng.gen_bool(0.5) {
                    let k = rng.gen_range(1..3);
                    stmts(rng, vars, loop_vars, depth + 1, k)
                } else {
                    Vec::new()
                };
                out.push(Stmt::If(cond, then, other));
            }
            3 if depth == 0 => out.push(Stmt::Print(target)),
            _ => out.push(Stmt::Assign(target, expr(rng, vars))),
        }
    }
    out
}

impl Program {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut pool: Vec<&str> = NAMES.to_vec();
        pool.shuffle(rng);
        let n_locals = rng.gen_range(2..5);
        let locals: Vec<(String, i64)> = pool[..n_locals].iter().map(|s| (s.to_string(), rng.gen_range(0..10))).collect();
        let param = "n".to_string();
        let mut vars: Vec<String> = locals.iter().map(|(v, _)| v.clone()).collect();
        vars.push(param.clone());
        let k = rng.gen_range(3..7);
        let body = stmts(rng, &vars, &mut Vec::new(), 0, k);
        let result = locals[0].0.clone();
        let name = format!("{}_{}", VERBS.choose(rng).expect("verbs"), NOUNS.choose(rng).expect("nouns"));
        Self {
            name,
            param,
            locals,
            body,
            result,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Python,
    Ruby,
    Go,
    Rust,
    CLike,
    JavaScript,
    Kotlin,
}

fn family(lang: &str) -> Family {
    match lang {
        "Python" => Family::Python,
        "Ruby" => Family::Ruby,
        "Go" => Family::Go,
        "Rust" => Family::Rust,
        "JavaScript" => Family::JavaScript,
        "Kotlin" => Family::Kotlin,
        _ => Family::CLike,
    }
}

/// Layout choices for one rendering.
#[derive(Debug, Clone)]
pub struct Style {
    pub indent: String,
    pub comment_rate: f64,
    pub blank_rate: f64,
}

impl Style {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let indent = ["  ", "    ", "\t", "   "][rng.gen_range(0..4)].to_string();
        Self {
            indent,
            comment_rate: rng.gen_range(0.0..0.3),
            blank_rate: rng.gen_range(0.0..0.2),
        }
    }
}

struct Renderer<'a> {
    fam: Family,
    lang: &'a str,
    style: &'a Style,
    rng: &'a mut ChaCha8Rng,
    lines: Vec<String>,
}

impl Renderer<'_> {
    fn push(&mut self, depth: usize, text: String) {
        if self.rng.gen_bool(self.style.comment_rate) {
            let prefix = if matches!(self.fam, Family::Python | Family::Ruby) { "#" } else { "//" };
            let remark = REMARKS.choose(self.rng).expect("remarks");
            self.lines.push(format!("{}{prefix} {remark}", self.style.indent.repeat(depth)));
        }
        self.lines.push(format!("{}{text}", self.style.indent.repeat(depth)));
        if self.rng.gen_bool(self.style.blank_rate) {
            self.lines.push(String::new());
        }
    }

    fn close(&mut self, depth: usize) {
        match self.fam {
            Family::Python => {}
            Family::Ruby => self.lines.push(format!("{}end", self.style.indent.repeat(depth))),
            _ => self.lines.push(format!("{}}}", self.style.indent.repeat(depth))),
        }
    }

    fn semi(&self) -> &'static str {
        match self.fam {
            Family::Python | Family::Ruby | Family::Go | Family::Kotlin => "",
            _ => ";",
        }
    }

    fn stmt(&mut self, depth: usize, s: &Stmt) {
        let semi = self.semi();
        match s {
            Stmt::Assign(v, e) => self.push(depth, format!("{v} = {e}{semi}")),
            Stmt::Print(v) => {
                let line = match self.fam {
                    Family::Python => format!("print({v})"),
                    Family::Ruby => format!("puts {v}"),
                    Family::Go => format!("fmt.Println({v})"),
                    Family::Rust => format!("println!(\"{{}}\", {v});"),
                    Family::JavaScript => format!("console.log({v});"),
                    Family::Kotlin => format!("println({v})"),
                    Family::CLike => match self.lang {
                        "Java" => format!("System.out.println({v});"),
                        "C#" => format!("Console.WriteLine({v});"),
                        "C++" => format!("std::cout << {v} << std::endl;"),
                        _ => format!("printf(\"%ld\\n\", {v});"),
                    },
                };
                self.push(depth, line);
            }
            Stmt::Loop(i, n, body) => {
                let head = match self.fam {
                    Family::Python => format!("for {i} in range({n}):"),
                    Family::Ruby => format!("(0...{n}).each do |{i}|"),
                    Family::Go => format!("for {i} := 0; {i} < {n}; {i}++ {{"),
                    Family::Rust => format!("for {i} in 0..{n} {{"),
                    Family::Kotlin => format!("for ({i} in 0 until {n}) {{"),
                    Family::JavaScript => format!("for (let {i} = 0; {i} < {n}; {i}++) {{"),
                    Family::CLike => format!("for (long {i} = 0; {i} < {n}; {i}++) {{"),
                };
                self.push(depth, head);
                for s in body {
                    self.stmt(depth + 1, s);
                }
                self.close(depth);
            }
            Stmt::If(cond, then, other) => {
                let head = match self.fam {
                    Family::Python => format!("if {cond}:"),
                    Family::Ruby => format!("if {cond}"),
                    Family::Go | Family::Rust => format!("if {cond} {{"),
                    _ => format!("if ({cond}) {{"),
                };
                self.push(depth, head);
                for s in then {
                    self.stmt(depth + 1, s);
                }
                if !other.is_empty() {
                    let mid = match self.fam {
                        Family::Python => "else:",
                        Family::Ruby => "else",
                        _ => "} else {",
                    };
                    self.lines.push(format!("{}{mid}", self.style.indent.repeat(depth)));
                    for s in other {
                        self.stmt(depth + 1, s);
                    }
                }
                self.close(depth);
            }
        }
    }
}

/// Renders a program in `lang` with the given layout style.
pub fn render(program: &Program, lang: &str, style: &Style, rng: &mut ChaCha8Rng) -> String {
    let fam = family(lang);
    let mut r = Renderer {
        fam,
        lang,
        style,
        rng,
        lines: Vec::new(),
    };
    let (name, p) = (&program.name, &program.param);
    let header = match fam {
        Family::Python => format!("def {name}({p}):"),
        Family::Ruby => format!("def {name}({p})"),
        Family::Go => format!("func {name}({p} int) int {{"),
        Family::Rust => format!("fn {name}({p}: i64) -> i64 {{"),
        Family::JavaScript => format!("function {name}({p}) {{"),
        Family::Kotlin => format!("fun {name}({p}: Long): Long {{"),
        Family::CLike => match lang {
            "Java" | "C#" => format!("static long {name}(long {p}) {{"),
            _ => format!("long {name}(long {p}) {{"),
        },
    };
    r.lines.push(header);
    let semi = r.semi();
    for (v, init) in &program.locals {
        let decl = match fam {
            Family::Python | Family::Ruby => format!("{v} = {init}"),
            Family::Go => format!("{v} := {init}"),
            Family::Rust => format!("let mut {v} = {init};"),
            Family::JavaScript => format!("let {v} = {init};"),
            Family::Kotlin => format!("var {v} = {init}L"),
            Family::CLike => format!("long {v} = {init}{semi}"),
        };
        r.push(1, decl);
    }
    for s in &program.body {
        r.stmt(1, s);
    }
    let ret = match fam {
        Family::Rust => program.result.clone(),
        Family::Ruby => program.result.clone(),
        _ => format!("return {}{semi}", program.result),
    };
    r.push(1, ret);
    r.close(0);
    let mut lines = r.lines;
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

/// A corpus of `n_tasks` tasks solved in every given language. Each
/// (task, language) solution is dropped with probability `missing_rate`.
pub fn desk_corpus(languages: &[&str], n_tasks: usize, missing_rate: f64, seed: u64) -> Vec<RawSnippet> {
    let mut out = Vec::new();
    for t in 0..n_tasks {
        let mut rng = rng_for(seed, &format!("synth/task/{t}"));
        let program = Program::random(&mut rng);
        let task_name = format!("Task {t:03} {}", program.name.replace('_', " "));
        for lang in languages {
            if rng.gen_bool(missing_rate) {
                continue;
            }
            let style = Style::random(&mut rng);
            out.push(RawSnippet {
                task_name: task_name.clone(),
                task_url: format!("https://example.org/tasks/{t:03}"),
                task_description: format!("Write a routine that will {}.", program.name.replace('_', " ")),
                language_name: lang.to_string(),
                code: render(&program, lang, &style, &mut rng),
            });
        }
    }
    out
}

/// Marker tokens inserted into AI-labeled planted-signal snippets.
pub const MARKERS: &[&str] = &["zx_generated", "qq_synth", "vv_template"];

/// Turns a human snippet into its planted AI copy: lines are trimmed and
/// internal whitespace collapsed, the body lines are shuffled, and marker
/// tokens are inserted as comments and identifiers.
pub fn plant_signal(code: &str, comment_prefix: &str, rng: &mut ChaCha8Rng) -> String {
    let mut lines: Vec<String> = code
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() > 2 {
        let last = lines.len() - 1;
        lines[1..last].shuffle(rng);
    }
    let n_markers = rng.gen_range(1..=3);
    for _ in 0..n_markers {
        let marker = MARKERS.choose(rng).expect("markers");
        let at = rng.gen_range(0..=lines.len());
        let line = if rng.gen_bool(0.5) {
            format!("{comment_prefix} {marker}")
        } else {
            format!("{marker} = {}", rng.gen_range(0..100))
        };
        lines.insert(at, line);
    }
    lines.join("\n")
}

/// `n_per_class` human and `n_per_class` AI snippets in `lang`, each from a
/// distinct task. AI snippets are planted copies of freshly generated
/// programs.
pub fn planted_signal_dataset(lang: &str, n_per_class: usize, seed: u64) -> Dataset {
    let set = SubDatasetId::new(lang, "Template").label();
    let prefix = if matches!(family(lang), Family::Python | Family::Ruby) { "#" } else { "//" };
    let mut records = Vec::with_capacity(2 * n_per_class);
    for t in 0..2 * n_per_class {
        let mut rng = rng_for(seed, &format!("planted/{t}"));
        let program = Program::random(&mut rng);
        let style = Style::random(&mut rng);
        let human = render(&program, lang, &style, &mut rng);
        let target = if t % 2 == 0 { Target::Human } else { Target::Ai };
        let code = match target {
            Target::Human => human,
            Target::Ai => plant_signal(&human, prefix, &mut rng),
        };
        records.push(SnippetRecord {
            task_name: format!("planted {t:04}"),
            task_url: String::new(),
            task_description: String::new(),
            language_name: lang.to_string(),
            code,
            target,
            set: set.clone(),
        });
    }
    Dataset { records }
}

/// Same records with the labels randomly permuted (class counts unchanged).
pub fn shuffle_labels(records: &[SnippetRecord], seed: u64) -> Vec<SnippetRecord> {
    let mut targets: Vec<Target> = records.iter().map(|r| r.target).collect();
    targets.shuffle(&mut rng_for(seed, "shuffle-labels"));
    records
        .iter()
        .zip(targets)
        .map(|(r, target)| SnippetRecord { target, ..r.clone() })
        .collect()
}
