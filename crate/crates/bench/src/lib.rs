//! Shared fixtures for the criterion benches.

use handover_core::kinematics::{Chain, JointConfig, DOF};
use handover_core::scene::{generate_catalog, Catalog, GeneratorConfig};

pub const SEED: u64 = 42;

pub fn catalog() -> Catalog {
    generate_catalog(SEED, &GeneratorConfig::default()).expect("default generator is valid")
}

/// A handful of joint configurations spread across the limits.
pub fn configurations(chain: &Chain, n: usize) -> Vec<JointConfig> {
    (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) / n as f64;
            let mut q = [0.0; DOF];
            for (i, (v, j)) in q.iter_mut().zip(chain.joints()).enumerate() {
                let phase = (s * (i as f64 + 1.0) * 1.618).fract();
                let [lo, hi] = j.limits;
                *v = lo + phase * (hi - lo);
            }
            JointConfig(q)
        })
        .collect()
}
