mod common;

use capcheck::cheri::CoreConfig;

#[test]
fn pipeline_matches_iss_default_config() {
    let n = common::lockstep(&CoreConfig::default(), 200, 200, 1);
    assert!(n > 10_000);
}

#[test]
fn pipeline_matches_iss_small_config() {
    let cfg = CoreConfig {
        addr_w: 8,
        num_regs: 4,
        ..CoreConfig::default()
    };
    common::lockstep(&cfg, 200, 100, 2);
}
