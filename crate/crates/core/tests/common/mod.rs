#![allow(dead_code)]

use std::io::Write;

use infomarkets::model::{beliefs_from_signals, BeliefProfile, CompetenceProfile, SignalProfile};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_competences(rng: &mut ChaCha8Rng, n: usize) -> CompetenceProfile {
    CompetenceProfile::new((0..n).map(|_| rng.gen_range(0.501..0.999)).collect()).unwrap()
}

/// Competences rounded to two decimals, so that equal beliefs and beliefs on
/// simple grid points (`i / n`) show up often.
pub fn coarse_competences(rng: &mut ChaCha8Rng, n: usize) -> CompetenceProfile {
    CompetenceProfile::new(
        (0..n)
            .map(|_| rng.gen_range(51..100) as f64 / 100.0)
            .collect(),
    )
    .unwrap()
}

pub fn random_signals(rng: &mut ChaCha8Rng, n: usize) -> SignalProfile {
    SignalProfile::from_index(n, rng.gen_range(0..1u64 << n))
}

/// Beliefs induced by random competences and signals.
pub fn random_beliefs(rng: &mut ChaCha8Rng, n: usize) -> BeliefProfile {
    let q = random_competences(rng, n);
    let y = random_signals(rng, n);
    beliefs_from_signals(&q, &y).unwrap()
}

pub fn coarse_beliefs(rng: &mut ChaCha8Rng, n: usize) -> BeliefProfile {
    let q = coarse_competences(rng, n);
    let y = random_signals(rng, n);
    beliefs_from_signals(&q, &y).unwrap()
}

/// Writes straight to stderr so the line shows even when the harness
/// captures test output.
pub fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("[{tag}] criterion {id}: {title} -- {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}
