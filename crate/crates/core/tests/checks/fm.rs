use lsa_core::autodiff::Tape;
use lsa_core::params::ParamStore;
use lsa_core::predictor::{fm_on_tape, fm_score, FmParams};
use lsa_core::tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub struct Instance {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub bias: f64,
}

/// Up to 64 features with up to 16 factors each.
pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=64);
    let k = rng.random_range(1..=16);
    let mut u = || rng.random_range(-1.0..1.0);
    Instance {
        x: (0..n).map(|_| u() * 2.0).collect(),
        w: (0..n).map(|_| u()).collect(),
        v: (0..n).map(|_| (0..k).map(|_| u()).collect()).collect(),
        bias: u() * 3.0,
    }
}

pub fn factors(v: &[Vec<f64>]) -> Matrix {
    Matrix::from_vec(v.len(), v[0].len(), v.iter().flatten().copied().collect())
}

/// Plain scoring function against the double loop.
pub fn fast_vs_brute(instances: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let c = instance(&mut rng);
        let fast = fm_score(&c.x, &c.w, &factors(&c.v), c.bias);
        let slow = oracles::fm_brute(&c.x, &c.w, &c.v, c.bias);
        worst = worst.max(rel_err(fast, slow));
    }
    if worst <= 1e-10 {
        Ok(format!("{instances} instances, max rel err {worst:.2e}"))
    } else {
        Err(format!("max rel err {worst:.2e} > 1e-10"))
    }
}

/// Differentiable version with global, user and item biases.
pub fn tape_vs_brute(instances: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let c = instance(&mut rng);
        let n = c.x.len();
        let mut store = ParamStore::new();
        let (b0, bu, bi) = (0.3, -0.2, 0.7);
        let fm = FmParams {
            global_bias: store.add("b0", Matrix::scalar(b0)),
            user_bias: store.add("bu", Matrix::from_vec(2, 1, vec![0.0, bu])),
            item_bias: store.add("bi", Matrix::from_vec(1, 1, vec![bi])),
            linear: store.add("w", Matrix::from_vec(n, 1, c.w.clone())),
            factors: store.add("v", factors(&c.v)),
            lambda: 1.0,
        };
        let mut tape = Tape::new(&store);
        let x = tape.constant(Matrix::row_vector(c.x.clone()));
        let y = fm_on_tape(&mut tape, &fm, x, Some(1), Some(0));
        let got = tape.value(y).item();
        worst = worst.max(rel_err(got, oracles::fm_brute(&c.x, &c.w, &c.v, b0 + bu + bi)));
    }
    if worst <= 1e-10 {
        Ok(format!("{instances} instances with biases, max rel err {worst:.2e}"))
    } else {
        Err(format!("max rel err {worst:.2e} > 1e-10"))
    }
}
