use capcheck::cheri::{
    check_access, check_access_term, derive_and_perm, derive_and_perm_term, derive_set_bounds,
    derive_set_bounds_term, CapTerm, Capability, Perms, FIELDS, OTYPE_WIDTH,
};
use capcheck::engine::{bitblast, solve, SolveOutcome, SolverOptions};
use capcheck::ir::{eval_term, Sort, Term, Valuation, VarRole};
use proptest::prelude::*;

const W: u32 = 6;

/// Tagged derivation results stay inside the source authority.
fn monotone(src: &Capability, out: &Capability) -> bool {
    !out.tag
        || (src.tag
            && !src.is_sealed()
            && out.base >= src.base
            && out.top <= src.top
            && src.perms.contains(out.perms))
}

#[test]
fn set_bounds_is_monotone_exhaustively() {
    let mut tagged = 0u64;
    for otype in [0u8, 1] {
        for base in 0..1u64 << W {
            for top in base..=1u64 << W {
                let c = Capability {
                    tag: true,
                    perms: Perms::ALL,
                    base,
                    top,
                    addr: base,
                    otype,
                };
                for nb in 0..1u64 << W {
                    for nt in 0..=1u64 << W {
                        let d = derive_set_bounds(&c, nb, nt);
                        assert!(monotone(&c, &d), "{c:?} -> {d:?}");
                        if otype != 0 {
                            assert!(!d.tag, "sealed source {c:?} gave {d:?}");
                        }
                        tagged += d.tag as u64;
                    }
                }
            }
        }
    }
    assert!(tagged > 0);
}

#[test]
fn and_perm_is_monotone_exhaustively() {
    for tag in [false, true] {
        for otype in 0..1u8 << OTYPE_WIDTH {
            for p in 0..64u8 {
                for m in 0..64u8 {
                    let c = Capability {
                        tag,
                        perms: Perms(p),
                        base: 3,
                        top: 40,
                        addr: 7,
                        otype,
                    };
                    let d = derive_and_perm(&c, Perms(m));
                    assert!(monotone(&c, &d));
                    assert_eq!((d.base, d.top, d.addr), (c.base, c.top, c.addr));
                    if otype != 0 {
                        assert!(!d.tag);
                    }
                }
            }
        }
    }
}

fn cap_vars(prefix: &str, aw: u32) -> CapTerm {
    let sorts = [
        Sort::Bool,
        Sort::bv(Perms::WIDTH),
        Sort::bv(aw),
        Sort::bv(aw + 1),
        Sort::bv(aw),
        Sort::bv(OTYPE_WIDTH),
    ];
    let mut f = FIELDS
        .iter()
        .zip(sorts)
        .map(|(n, s)| Term::var(format!("{prefix}{n}"), s, VarRole::Free));
    CapTerm::from_fields(std::array::from_fn(|_| f.next().unwrap()))
}

/// Symbolic monotonicity of one derivation: no input makes the result
/// tagged with more authority than a well-formed source.
fn assert_unsat(violation: Term) {
    let cnf = bitblast(&[violation]).unwrap();
    let (r, _) = solve(&cnf, &SolverOptions::default()).unwrap();
    assert_eq!(r, SolveOutcome::Unsat);
}

fn term_monotone(src: &CapTerm, out: &CapTerm) -> Term {
    let within = src
        .tag
        .and(&src.unsealed())
        .and(&src.base.ule(&out.base))
        .and(&out.top.ule(&src.top))
        .and(&out.perms.and(&src.perms).equals(&out.perms));
    out.tag.implies(&within)
}

#[test]
fn symbolic_derivations_are_monotone() {
    for aw in [W, 16] {
        let c = cap_vars("c.", aw);
        let nb = Term::var("nb", Sort::bv(aw), VarRole::Free);
        let nt = Term::var("nt", Sort::bv(aw + 1), VarRole::Free);
        let m = Term::var("m", Sort::bv(Perms::WIDTH), VarRole::Free);
        let wf = c.base.zext(aw + 1).ule(&c.top);
        assert_unsat(wf.and(&term_monotone(&c, &derive_set_bounds_term(&c, &nb, &nt)).not()));
        assert_unsat(wf.and(&term_monotone(&c, &derive_and_perm_term(&c, &m)).not()));
    }
}

fn valuation(c: &Capability, extra: &[(&str, u64)]) -> Valuation {
    let mut v: Valuation = [
        ("c.tag", c.tag as u64),
        ("c.perms", c.perms.0 as u64),
        ("c.base", c.base),
        ("c.top", c.top),
        ("c.addr", c.addr),
        ("c.otype", c.otype as u64),
    ]
    .into_iter()
    .map(|(n, x)| (n.to_string(), x))
    .collect();
    for (n, x) in extra {
        v.insert(n.to_string(), *x);
    }
    v
}

fn eval_cap(t: &CapTerm, v: &Valuation) -> Capability {
    let e = |t: &Term| eval_term(t, v).unwrap();
    Capability {
        tag: e(&t.tag) == 1,
        perms: Perms(e(&t.perms) as u8),
        base: e(&t.base),
        top: e(&t.top),
        addr: e(&t.addr),
        otype: e(&t.otype) as u8,
    }
}

fn any_cap(aw: u32) -> impl Strategy<Value = Capability> {
    let amax = 1u64 << aw;
    (
        any::<bool>(),
        0u8..64,
        0..amax,
        0..=amax,
        0..amax,
        prop_oneof![3 => Just(0u8), 1 => 1u8..8],
    )
        .prop_map(|(tag, p, base, top, addr, otype)| Capability {
            tag,
            perms: Perms(p),
            base,
            top,
            addr,
            otype,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn set_bounds_term_matches_concrete(c in any_cap(16), nb in 0u64..1 << 16, nt in 0u64..=1 << 16) {
        let ct = cap_vars("c.", 16);
        let t = derive_set_bounds_term(
            &ct,
            &Term::var("nb", Sort::bv(16), VarRole::Free),
            &Term::var("nt", Sort::bv(17), VarRole::Free),
        );
        let v = valuation(&c, &[("nb", nb), ("nt", nt)]);
        prop_assert_eq!(eval_cap(&t, &v), derive_set_bounds(&c, nb, nt));
    }

    #[test]
    fn and_perm_term_matches_concrete(c in any_cap(16), m in 0u8..64) {
        let ct = cap_vars("c.", 16);
        let t = derive_and_perm_term(&ct, &Term::var("m", Sort::bv(6), VarRole::Free));
        let v = valuation(&c, &[("m", m as u64)]);
        prop_assert_eq!(eval_cap(&t, &v), derive_and_perm(&c, Perms(m)));
    }

    #[test]
    fn access_term_matches_concrete(c in any_cap(16), addr in 0u64..1 << 16, size in prop_oneof![Just(1u64), Just(4), Just(8)], need in 0u8..64) {
        let ct = cap_vars("c.", 16);
        let t = check_access_term(&ct, &Term::var("a", Sort::bv(16), VarRole::Free), size, Perms(need));
        let v = valuation(&c, &[("a", addr)]);
        prop_assert_eq!(eval_term(&t, &v).unwrap() == 1, check_access(&c, addr, size, Perms(need), 16));
    }

    #[test]
    fn granted_access_lies_inside_bounds(c in any_cap(16), addr in 0u64..1 << 16, size in 1u64..9) {
        if check_access(&c, addr, size, Perms::NONE, 16) {
            prop_assert!(c.base <= addr && addr + size <= c.top);
            prop_assert!((addr..addr + size).all(|a| c.covers(a)));
        }
    }
}
