//! Line-oriented text form of a transition system.
//!
//! ```text
//! system <name>
//! node <id> const <sort> <value>
//! node <id> var <name> <sort> <state|input|free>
//! node <id> op <mnemonic> <arg-id>...
//! state <name> <sort> init <id|-> next <id>
//! input <name> <sort>
//! free <name> <sort>
//! define <name> <id>
//! label <tag> <name>
//! ```
//!
//! Sorts are written `bool` or `bv<width>`. Node ids are assigned in
//! post-order over the nexts, inits and defines in declaration order, so a
//! dump is deterministic. Blank lines and lines starting with `#` are
//! ignored on load.

use std::collections::HashMap;
use std::fmt::Write;

use super::system::{TransitionSystem, TsBuilder};
use super::term::{Node, Op, Sort, Term, VarRole};
use super::IrError;

pub fn dump_system(ts: &TransitionSystem) -> String {
    let mut out = String::new();
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let _ = writeln!(out, "system {}", ts.name);
    let mut emit = |t: &Term, out: &mut String| -> usize {
        let mut stack = vec![(t.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if ids.contains_key(&cur.id()) {
                continue;
            }
            if !expanded && !cur.args().is_empty() {
                stack.push((cur.clone(), true));
                for a in cur.args().iter().rev() {
                    stack.push((a.clone(), false));
                }
                continue;
            }
            let id = ids.len();
            let line = match cur.node() {
                Node::Const { value, sort } => format!("node {id} const {sort} {value}"),
                Node::Var { name, sort, role } => {
                    format!("node {id} var {name} {sort} {}", role.keyword())
                }
                Node::App { op, args, .. } => {
                    let a: Vec<String> = args.iter().map(|x| ids[&x.id()].to_string()).collect();
                    format!("node {id} op {} {}", op.mnemonic(), a.join(" "))
                }
            };
            let _ = writeln!(out, "{line}");
            ids.insert(cur.id(), id);
        }
        ids[&t.id()]
    };
    let mut decls = Vec::new();
    for s in ts.states() {
        let init = s.init.as_ref().map(|t| emit(t, &mut out).to_string());
        let next = emit(&s.next, &mut out);
        decls.push(format!(
            "state {} {} init {} next {next}",
            s.name,
            s.sort,
            init.unwrap_or_else(|| "-".into())
        ));
    }
    for i in ts.inputs() {
        decls.push(format!("input {} {}", i.name, i.sort));
    }
    for f in ts.frees() {
        decls.push(format!("free {} {}", f.name, f.sort));
    }
    for (n, t) in ts.defines() {
        let id = emit(t, &mut out);
        decls.push(format!("define {n} {id}"));
    }
    for (l, names) in ts.labels() {
        for n in names {
            decls.push(format!("label {l} {n}"));
        }
    }
    for d in decls {
        let _ = writeln!(out, "{d}");
    }
    out
}

fn parse_sort(s: &str) -> Option<Sort> {
    if s == "bool" {
        return Some(Sort::Bool);
    }
    let w: u32 = s.strip_prefix("bv")?.parse().ok()?;
    let sort = Sort::BitVec(w);
    sort.validate().ok()?;
    Some(sort)
}

fn parse_role(s: &str) -> Option<VarRole> {
    match s {
        "state" => Some(VarRole::State),
        "input" => Some(VarRole::Input),
        "free" => Some(VarRole::Free),
        _ => None,
    }
}

pub fn load_system(text: &str) -> Result<TransitionSystem, IrError> {
    let mut nodes: HashMap<usize, Term> = HashMap::new();
    let mut b: Option<TsBuilder> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |msg: &str| IrError::Parse {
            line,
            msg: msg.to_string(),
        };
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        let node = |id: &str| -> Result<Term, IrError> {
            let i: usize = id.parse().map_err(|_| err("bad node id"))?;
            nodes
                .get(&i)
                .cloned()
                .ok_or_else(|| err("reference to unknown node"))
        };
        if f[0] == "system" {
            if f.len() != 2 || b.is_some() {
                return Err(err("expected a single `system <name>` header"));
            }
            b = Some(TsBuilder::new(f[1]));
            continue;
        }
        let builder = b.as_mut().ok_or_else(|| err("missing `system` header"))?;
        match f[0] {
            "node" => {
                if f.len() < 3 {
                    return Err(err("truncated node"));
                }
                let id: usize = f[1].parse().map_err(|_| err("bad node id"))?;
                let t = match f[2] {
                    "const" if f.len() == 5 => {
                        let sort = parse_sort(f[3]).ok_or_else(|| err("bad sort"))?;
                        let v: u64 = f[4].parse().map_err(|_| err("bad constant"))?;
                        if v & !sort.mask() != 0 {
                            return Err(err("constant wider than its sort"));
                        }
                        Term::constant(v, sort)
                    }
                    "var" if f.len() == 6 => {
                        let sort = parse_sort(f[4]).ok_or_else(|| err("bad sort"))?;
                        let role = parse_role(f[5]).ok_or_else(|| err("bad role"))?;
                        Term::var(f[3], sort, role)
                    }
                    "op" if f.len() >= 4 => {
                        let op = Op::parse(f[3]).ok_or_else(|| err("unknown operator"))?;
                        let args = f[4..]
                            .iter()
                            .map(|a| node(a))
                            .collect::<Result<Vec<_>, _>>()?;
                        Term::apply(op, args).map_err(|e| err(&e.to_string()))?
                    }
                    _ => return Err(err("malformed node")),
                };
                if nodes.insert(id, t).is_some() {
                    return Err(err("node id reused"));
                }
            }
            "state" => {
                if f.len() != 7 || f[3] != "init" || f[5] != "next" {
                    return Err(err("expected `state <name> <sort> init <id|-> next <id>`"));
                }
                let sort = parse_sort(f[2]).ok_or_else(|| err("bad sort"))?;
                builder.state(f[1], sort);
                if f[4] != "-" {
                    builder.init(f[1], node(f[4])?);
                }
                builder.next(f[1], node(f[6])?);
            }
            "input" | "free" => {
                if f.len() != 3 {
                    return Err(err("expected `<input|free> <name> <sort>`"));
                }
                let sort = parse_sort(f[2]).ok_or_else(|| err("bad sort"))?;
                if f[0] == "input" {
                    builder.input(f[1], sort);
                } else {
                    builder.free(f[1], sort);
                }
            }
            "define" => {
                if f.len() != 3 {
                    return Err(err("expected `define <name> <id>`"));
                }
                builder.define(f[1], node(f[2])?);
            }
            "label" => {
                if f.len() != 3 {
                    return Err(err("expected `label <tag> <name>`"));
                }
                builder.label(f[1], f[2]);
            }
            _ => return Err(err("unknown declaration")),
        }
    }
    b.ok_or(IrError::Parse {
        line: 0,
        msg: "empty input".into(),
    })?
    .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_stable() {
        let mut b = TsBuilder::new("demo");
        let s = b.state("s", Sort::bv(8));
        b.init("s", Term::bv(3, 8));
        let i = b.input("i", Sort::Bool);
        b.next("s", Term::ite(&i, &s.add(&Term::bv(1, 8)), &s));
        b.free("sa", Sort::bv(8));
        b.define(
            "hit",
            s.equals(&Term::var("sa", Sort::bv(8), VarRole::Free)),
        );
        b.label("P", "s");
        let ts = b.build().unwrap();
        let text = dump_system(&ts);
        let again = dump_system(&load_system(&text).unwrap());
        assert_eq!(text, again);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = load_system("system x\nnode 0 op add 1 2\n").unwrap_err();
        assert!(matches!(e, IrError::Parse { line: 2, .. }));
    }
}
