use std::fmt::Write;

use super::run::FlowState;

/// JSON report. Wall-clock times are left out so that equal runs give
/// equal bytes.
pub fn report_json(state: &FlowState) -> String {
    let mut s = serde_json::to_string_pretty(state).expect("flow state serializes");
    s.push('\n');
    s
}

/// Text table with one row per check, followed by findings and notes.
/// Effort is the number of solver conflicts.
pub fn report_table(state: &FlowState) -> String {
    let rows: Vec<[String; 5]> = state
        .log
        .iter()
        .map(|e| {
            let mut desc = e.description.clone();
            if let Some(c) = &e.classification {
                desc = format!("{desc} [{c}]");
            }
            [
                e.property.clone(),
                e.iteration.to_string(),
                e.result.clone(),
                e.effort.to_string(),
                desc,
            ]
        })
        .collect();
    let head = ["property", "iteration", "result", "effort", "description"];
    let mut w: Vec<usize> = head.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (i, c) in r.iter().enumerate().take(4) {
            w[i] = w[i].max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, r: [&str; 5]| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:<w2$}  {:>w3$}  {}",
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            w0 = w[0],
            w1 = w[1],
            w2 = w[2],
            w3 = w[3]
        );
    };
    let _ = writeln!(out, "design: {}", state.design);
    line(&mut out, head);
    for r in &rows {
        line(&mut out, [&r[0], &r[1], &r[2], &r[3], &r[4]]);
    }
    let _ = writeln!(
        out,
        "protected set: {}",
        state.protected_set.names().join(", ")
    );
    for f in &state.findings {
        let by = f
            .toggle
            .as_ref()
            .map(|t| format!(" (cleared by switching off {t})"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "finding: {} in {}: {}{by}",
            f.kind.as_str(),
            f.property,
            f.summary
        );
    }
    for n in &state.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(
        out,
        "verdict: {}",
        serde_json::to_value(state.verdict)
            .unwrap()
            .as_str()
            .unwrap()
    );
    out
}
