mod common;

use capcheck::ir::{
    eval_term, frame_name, unroll_window, Sort, Term, TransitionSystem, TsBuilder, Valuation,
    VarRole,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random system: up to three 8-bit states, two inputs and one free symbol.
fn random_system(rng: &mut ChaCha8Rng) -> TransitionSystem {
    let w = 8;
    let mut b = TsBuilder::new("rand");
    let n_states = rng.gen_range(1..=3);
    let mut vars = Vec::new();
    for i in 0..n_states {
        vars.push(b.state(&format!("s{i}"), Sort::bv(w)));
    }
    for i in 0..rng.gen_range(0..=2) {
        vars.push(b.input(&format!("i{i}"), Sort::bv(w)));
    }
    vars.push(b.free("f", Sort::bv(w)));
    for i in 0..n_states {
        let depth = rng.gen_range(1..=4);
        let t = common::random_term(rng, &vars, depth, w);
        b.next(&format!("s{i}"), t);
    }
    b.build().unwrap()
}

fn random_valuation(
    rng: &mut ChaCha8Rng,
    names: impl Iterator<Item = (String, Sort)>,
) -> Valuation {
    names
        .map(|(n, s)| (n, rng.gen::<u64>() & s.mask()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unrolling_is_satisfied_exactly_by_simulation(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts = random_system(&mut rng);
        let f = rng.gen::<u64>() & 0xff;
        let mut state = random_valuation(&mut rng, ts.states().iter().map(|s| (s.name.clone(), s.sort)));
        let mut flat = Valuation::new();
        flat.insert("f".into(), f);
        for i in 0..=k {
            let mut inputs = random_valuation(&mut rng, ts.inputs().iter().map(|v| (v.name.clone(), v.sort)));
            for (n, v) in state.iter().chain(&inputs) {
                flat.insert(frame_name(n, i), *v);
            }
            inputs.insert("f".into(), f);
            state = ts.simulate_step(&state, &inputs).unwrap();
        }
        let u = unroll_window(&ts, k).unwrap();
        let cs = u.constraints();
        for c in &cs {
            prop_assert_eq!(eval_term(c, &flat).unwrap(), 1, "{}", c);
        }
        let frame = rng.gen_range(1..=k);
        let victim = frame_name(&ts.states()[rng.gen_range(0..ts.states().len())].name, frame);
        let old = flat[&victim];
        flat.insert(victim.clone(), (old + rng.gen_range(1..256)) & 0xff);
        prop_assert!(cs.iter().any(|c| eval_term(c, &flat).unwrap() == 0), "{} perturbed", victim);
    }

    #[test]
    fn evaluation_fits_the_sort(seed in any::<u64>(), width in 2u32..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vars = [
            Term::var("x", Sort::bv(width), VarRole::Free),
            Term::var("y", Sort::bv(width), VarRole::Free),
        ];
        let t = common::random_term(&mut rng, &vars, 4, width);
        let mask = Sort::bv(width).mask();
        let v: Valuation = [("x".to_string(), rng.gen::<u64>() & mask), ("y".to_string(), rng.gen::<u64>() & mask)]
            .into_iter()
            .collect();
        prop_assert!(eval_term(&t, &v).unwrap() <= mask);
        let c = common::random_bool(&mut rng, &vars, 3);
        prop_assert!(eval_term(&c, &v).unwrap() <= 1);
    }

    #[test]
    fn free_symbols_are_shared_by_all_frames(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts = random_system(&mut rng);
        let u = unroll_window(&ts, k).unwrap();
        for c in u.constraints() {
            for (name, _, role) in c.support() {
                if role == VarRole::Free {
                    prop_assert_eq!(name, "f");
                }
            }
        }
        for i in 0..=k {
            let v = u.var("f", i).unwrap();
            prop_assert_eq!(v.as_var().unwrap().0, "f");
        }
    }
}

#[test]
fn free_symbol_in_init_is_rejected() {
    let mut b = TsBuilder::new("bad");
    let f = b.free("f", Sort::bv(4));
    b.register("s", Sort::bv(4), None, f.clone());
    b.init("s", f);
    assert!(b.build().is_err());
}

#[test]
fn input_in_init_is_rejected() {
    let mut b = TsBuilder::new("bad");
    let i = b.input("i", Sort::bv(4));
    b.register("s", Sort::bv(4), None, i.clone());
    b.init("s", i);
    assert!(b.build().is_err());
}
