//! Test support shared by the wisflow crates: random model and context
//! generators, an independent reference walker for activity traces, and
//! single-rule mutations of the example project.

pub mod contexts;
pub mod models;
pub mod mutations;
pub mod walk;

use rand::rngs::StdRng;
use rand::SeedableRng;

/// A deterministic generator for case number `case` of a suite.
pub fn rng_for(suite: &str, case: u64) -> StdRng {
    let mut seed = 0xcbf2_9ce4_8422_2325u64;
    for b in suite.bytes() {
        seed = (seed ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    StdRng::seed_from_u64(seed ^ case.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}
