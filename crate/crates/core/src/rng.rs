//! Counter-based hashing for site-addressed randomness and seed splitting.
//!
//! Nothing here keeps state: a value is a pure function of its key, so any
//! number of workers can evaluate the same field without coordination.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of `(seed, site)`; each coordinate is absorbed through a full mixing round.
pub fn counter_hash(seed: u64, site: &[i64]) -> u64 {
    let mut h = mix(seed ^ GOLDEN);
    for (k, &c) in site.iter().enumerate() {
        h = mix(h.wrapping_add(GOLDEN.wrapping_mul(k as u64 + 1)) ^ c as u64);
    }
    mix(h ^ (site.len() as u64).wrapping_mul(GOLDEN))
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Child seed keyed by an experiment label and a trial index.
pub fn split_seed(master: u64, experiment: &str, trial: u64) -> u64 {
    let mut h = mix(master ^ 0x6d73_615f_6c61_6221);
    for b in experiment.bytes() {
        h = mix(h ^ b as u64);
    }
    mix(h ^ mix(trial.wrapping_add(GOLDEN)))
}
