#![allow(dead_code)]

use sebs::{DiagonalQuadraticProblem, Rng, Stream, Vector};

pub fn synthetic(n: usize, d: usize, seed: u64) -> DiagonalQuadraticProblem {
    DiagonalQuadraticProblem::make_synthetic(n, d, &mut Rng::new(seed, Stream::Data)).unwrap()
}

/// `w* + x·u` for a seeded unit direction `u`.
pub fn start_at_distance(problem: &DiagonalQuadraticProblem, x: f64, seed: u64) -> Vector {
    let u = Rng::new(seed, Stream::Direction).unit_direction(problem.mean().len());
    Vector::new(problem.mean().iter().zip(&u).map(|(m, u)| m + x * u).collect()).unwrap()
}
