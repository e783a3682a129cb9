use std::collections::BTreeSet;

use capcheck::cheri::{CoreConfig, MicroCap, MicroConfig};
use capcheck::engine::check_interval_property;
use capcheck::flow::{
    classify_counterexample, refine_protected_set, report_json, report_table, run_flow,
    ClassOverride, Classification, Design, FindingKind, FlowOptions, FlowState, MicroDesign,
    Verdict,
};
use capcheck::props::{
    attach_symbolic_address, catalogue, prop_integrity, CapLocation, LocationKind, ProtectedSet,
};

fn micro(caps: [MicroCap; 2]) -> MicroDesign {
    MicroDesign {
        core: MicroConfig {
            explicit_memory: false,
            caps,
            ..MicroConfig::default()
        },
        protected: (4..8).collect::<BTreeSet<u64>>(),
    }
}

fn cap(base: u8, top: u8) -> MicroCap {
    MicroCap {
        tag: true,
        base,
        top,
    }
}

fn results(s: &FlowState, property: &str) -> Vec<String> {
    s.runs_of(property).map(|e| e.result.clone()).collect()
}

#[test]
fn micro_flow_refines_to_both_registers() {
    let s = run_flow(
        &micro([cap(0, 4), cap(1, 3)]),
        &ProtectedSet::new(),
        &FlowOptions::default(),
    )
    .unwrap();
    assert_eq!(s.verdict, Verdict::Secure, "{}", report_table(&s));
    for loc in ["c0", "c1"] {
        assert!(s.protected_set.contains(loc), "{loc} missing");
    }
    assert!(s.log.iter().any(|e| e
        .classification
        .as_deref()
        .is_some_and(|c| c.starts_with("false-cex"))));
    assert!(s.findings.is_empty());
}

#[test]
fn overbroad_capability_fails_the_base() {
    let s = run_flow(
        &micro([cap(0, 6), cap(1, 3)]),
        &ProtectedSet::new(),
        &FlowOptions::default(),
    )
    .unwrap();
    assert_eq!(s.verdict, Verdict::Vulnerable);
    assert_eq!(s.findings[0].kind, FindingKind::IntegrityViolation);
    assert_eq!(results(&s, "base").last().map(String::as_str), Some("fail"));
}

#[test]
fn growing_set_top_is_attributed_to_its_toggle() {
    let mut d = micro([cap(0, 4), cap(1, 3)]);
    d.core.bug_settop_grows = true;
    let s = run_flow(&d, &ProtectedSet::new(), &FlowOptions::default()).unwrap();
    assert_eq!(s.verdict, Verdict::Vulnerable, "{}", report_table(&s));
    let f = &s.findings[0];
    assert_eq!(f.kind, FindingKind::MonotonicityViolation);
    assert_eq!(f.toggle.as_deref(), Some("bug_settop_grows"));
    assert!(report_table(&s).contains("cleared by switching off bug_settop_grows"));
}

#[test]
fn forced_true_bug_stops_refinement() {
    let opts = FlowOptions {
        classification_override: Some(ClassOverride::TrueBug),
        ..FlowOptions::default()
    };
    let s = run_flow(&micro([cap(0, 4), cap(1, 3)]), &ProtectedSet::new(), &opts).unwrap();
    assert_eq!(s.verdict, Verdict::Vulnerable);
    assert!(!s.protected_set.contains("c0") || !s.protected_set.contains("c1"));
}

#[test]
fn iteration_cap_gives_inconclusive() {
    let opts = FlowOptions {
        iteration_cap: 1,
        ..FlowOptions::default()
    };
    let s = run_flow(&micro([cap(0, 4), cap(1, 3)]), &ProtectedSet::new(), &opts).unwrap();
    assert_eq!(s.verdict, Verdict::Inconclusive);
    assert!(s.notes.iter().any(|n| n.contains("iteration cap")));
}

#[test]
fn protected_set_only_grows() {
    let s = run_flow(
        &micro([cap(0, 4), cap(1, 3)]),
        &ProtectedSet::new(),
        &FlowOptions::default(),
    )
    .unwrap();
    let mut seen = 0;
    for e in &s.log {
        if let Some(c) = e
            .classification
            .as_deref()
            .and_then(|c| c.strip_prefix("false-cex: "))
        {
            assert!(s.protected_set.contains(c));
            seen += 1;
        }
    }
    assert_eq!(seen, 2);
}

#[test]
fn micro_reports_are_reproducible() {
    let d = micro([cap(0, 4), cap(1, 3)]);
    let a = run_flow(&d, &ProtectedSet::new(), &FlowOptions::default()).unwrap();
    let b = run_flow(&d, &ProtectedSet::new(), &FlowOptions::default()).unwrap();
    assert_eq!(report_json(&a), report_json(&b));
    assert_eq!(report_table(&a), report_table(&b));
    let v: serde_json::Value = serde_json::from_str(&report_json(&a)).unwrap();
    for key in [
        "design",
        "protected_set",
        "log",
        "findings",
        "notes",
        "verdict",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!(v["log"][0].get("wall").is_none());
}

#[test]
fn classification_picks_first_unprotected_candidate() {
    let d = micro([cap(0, 4), cap(1, 3)]);
    let (ts, sa) = attach_symbolic_address(&d.build().unwrap()).unwrap();
    let ps = ProtectedSet::new();
    let r = check_interval_property(
        &ts,
        &prop_integrity(&ts, &ps, &sa).unwrap(),
        &Default::default(),
    )
    .unwrap();
    let cex = r.counterexample().unwrap();
    let cands = catalogue(&ts);
    let Classification::FalseCex { candidate } =
        classify_counterexample(&ts, &sa, cex, &ps, &cands).unwrap()
    else {
        panic!("expected a false counterexample");
    };
    let refined = refine_protected_set(&ps, &candidate).unwrap();
    assert!(refined.contains(&candidate.name));
    let full = ProtectedSet::full(&ts);
    assert_eq!(
        classify_counterexample(&ts, &sa, cex, &full, &cands).unwrap(),
        Classification::TrueBug
    );
}

#[test]
fn refined_set_round_trips_as_toml() {
    let ps = refine_protected_set(
        &ProtectedSet::new(),
        &CapLocation::new("pcc", LocationKind::Register),
    )
    .unwrap();
    let ps = refine_protected_set(&ps, &CapLocation::new("r3", LocationKind::Register)).unwrap();
    assert_eq!(ProtectedSet::from_toml(&ps.to_toml()).unwrap(), ps);
}

#[test]
fn design_toggles() {
    let cfg = CoreConfig::default()
        .with_bug("bug_capstore_second_beat", true)
        .with_bug("bug_enable_pin_polarity", true);
    assert_eq!(
        cfg.active_toggles(),
        ["bug_enable_pin_polarity", "bug_capstore_second_beat"]
    );
    assert_eq!(
        cfg.without("bug_enable_pin_polarity").active_toggles(),
        ["bug_capstore_second_beat"]
    );
    assert_eq!(
        cfg.label(),
        "core+bug_enable_pin_polarity+bug_capstore_second_beat"
    );
}

#[test]
fn clean_core_from_empty_set_is_secure() {
    let s = run_flow(
        &CoreConfig::default(),
        &ProtectedSet::new(),
        &FlowOptions::default(),
    )
    .unwrap();
    assert_eq!(s.verdict, Verdict::Secure, "{}", report_table(&s));
    let mono = results(&s, "monotonicity");
    assert_eq!(mono.last().map(String::as_str), Some("hold"));
    assert!(mono.len() > 1 && mono[..mono.len() - 1].iter().all(|r| r == "fail"));
}

#[test]
fn squashed_fetch_is_access_without_propagation() {
    let cfg = CoreConfig {
        bug_fetch_before_pcc_check: true,
        fetch_fault_squash: true,
        ..CoreConfig::default()
    };
    let pcc = ProtectedSet::with_ports(&cfg.build().unwrap(), &["pcc"]).unwrap();
    let s = run_flow(&cfg, &pcc, &FlowOptions::default()).unwrap();
    assert_eq!(s.verdict, Verdict::Secure, "{}", report_table(&s));
    assert_eq!(
        results(&s, "confidentiality-iport")
            .last()
            .map(String::as_str),
        Some("fail")
    );
    assert!(
        s.notes.iter().any(|n| n.contains("without propagation")),
        "{:?}",
        s.notes
    );
}
