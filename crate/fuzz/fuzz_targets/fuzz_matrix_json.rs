//! Matrix JSON must parse or fail cleanly, and every successfully parsed
//! small matrix must satisfy the full normal-form contract: U A V = D
//! verified, and the divisor chain identical to the one a structurally
//! independent elimination produces.

#![no_main]

use hfloer::artifacts::parse_matrix_json;
use hfloer::homology::{invariant_factors_naive, smith_normal_form, verify_snf};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(a) = parse_matrix_json(text) else { return };
    // keep the algebra cheap: tiny dimensions, tame entries
    if a.rows > 6 || a.cols > 6 {
        return;
    }
    let bound = num_bigint_bound();
    for i in 0..a.rows {
        for j in 0..a.cols {
            if a[(i, j)].magnitude() > &bound {
                return;
            }
        }
    }
    let s = smith_normal_form(&a);
    verify_snf(&a, &s).expect("normal form failed its own verification");
    assert_eq!(
        s.divisors,
        invariant_factors_naive(&a),
        "two eliminations disagree on the invariant factors"
    );
});

fn num_bigint_bound() -> num_bigint::BigUint {
    num_bigint::BigUint::from(1_000_000u32)
}
