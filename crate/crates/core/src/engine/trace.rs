//! Counterexample export: JSON with one value map per cycle, and a
//! value-change dump for waveform viewers.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::ir::TransitionSystem;

use super::check::Counterexample;

pub fn trace_json(cex: &Counterexample) -> Value {
    let frames: Vec<Value> = cex
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| json!({ "cycle": i, "values": f }))
        .collect();
    json!({
        "property": cex.property,
        "k": cex.k,
        "frees": cex.frees,
        "violated": cex.violated,
        "alert": cex.alert,
        "diverged": cex.diverged,
        "frames": frames,
    })
}

fn vcd_id(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            break s;
        }
    }
}

fn vcd_value(v: u64, width: u32, id: &str) -> String {
    if width == 1 {
        format!("{v}{id}")
    } else {
        format!("b{:b} {id}", v)
    }
}

/// Value-change dump with one time step per cycle. Free symbols are
/// emitted once at time 0.
pub fn trace_vcd(cex: &Counterexample, ts: &TransitionSystem) -> String {
    let mut names: Vec<(String, u32)> = Vec::new();
    for n in cex.frees.keys() {
        names.push((n.clone(), ts.sort_of(n).map(|s| s.width()).unwrap_or(64)));
    }
    if let Some(f) = cex.frames.first() {
        for n in f.keys() {
            names.push((n.clone(), ts.sort_of(n).map(|s| s.width()).unwrap_or(64)));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "$timescale 1ns $end");
    let _ = writeln!(out, "$scope module {} $end", ts.name);
    for (i, (n, w)) in names.iter().enumerate() {
        let _ = writeln!(
            out,
            "$var wire {w} {} {} $end",
            vcd_id(i),
            n.replace(' ', "_")
        );
    }
    let _ = writeln!(out, "$upscope $end");
    let _ = writeln!(out, "$enddefinitions $end");
    let mut last: Vec<Option<u64>> = vec![None; names.len()];
    for (t, f) in cex.frames.iter().enumerate() {
        let _ = writeln!(out, "#{t}");
        for (i, (n, w)) in names.iter().enumerate() {
            let v = cex.frees.get(n).or_else(|| f.get(n)).copied();
            if let Some(v) = v {
                if last[i] != Some(v) {
                    let _ = writeln!(out, "{}", vcd_value(v, *w, &vcd_id(i)));
                    last[i] = Some(v);
                }
            }
        }
    }
    let _ = writeln!(out, "#{}", cex.frames.len());
    out
}
