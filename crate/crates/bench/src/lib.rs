//! Benchmark fixtures shared by the bench targets.

use crashplan::instance::{generate_instance, GeneratorOptions};
use crashplan::ProjectInstance;

/// A generated instance with `n` activities including the dummies.
pub fn instance(n: usize, seed: u64) -> ProjectInstance {
    generate_instance(seed, n, 3, 0.3, &GeneratorOptions::default()).expect("generator succeeds")
}
