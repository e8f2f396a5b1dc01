mod support;

use std::time::Instant;

use support::oracle::run_oracle;

#[test]
fn lp_and_binary_programs_match_enumeration() {
    let start = Instant::now();
    let r = run_oracle(0x5eed, 500, 200);
    assert!(r.mismatches.is_empty(), "{:#?}", r.mismatches);
    assert!(r.lp_infeasible > 0);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn other_seed() {
    let r = run_oracle(7, 150, 60);
    assert!(r.mismatches.is_empty(), "{:#?}", r.mismatches);
}
