//! Seeded random instances for the scalability study.
//!
//! Per variable: `a ~ U(0.001, 10)`, `b ~ U(-10, 10)`, `l ~ U(-10, 0)`,
//! `u ~ U(0, 10)`. Per subset with `S = sum 1/a_i`: `w ~ U(-1/S + 1e-5,
//! -1/S + 10)`, `L ~ U(sum l, 0.8 sum l)`, `U ~ U(0.8 sum u, sum u)`. Finally
//! `R ~ U(sum L, sum U)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::model::Instance;

pub const RNG_ID: &str = "ChaCha20Rng (rand_chacha 0.3, seed_from_u64; f64 = rand 0.8 Standard)";
pub const A_MIN: f64 = 1e-3;
pub const W_MARGIN: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenMeta {
    #[serde(rename = "C")]
    pub subset_size: usize,
    pub m: usize,
    pub seed: u64,
    pub rng_id: String,
}

/// Instance JSON with an extra `meta` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    #[serde(flatten)]
    pub instance: Instance,
    pub meta: GenMeta,
}

fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

pub fn generate(subset_size: usize, m: usize, seed: u64) -> Generated {
    assert!(subset_size >= 1 && m >= 1, "subset size and subset count must be positive");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = subset_size * m;
    let (mut a, mut b, mut l, mut u) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let (mut w, mut lower, mut upper) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    for _ in 0..m {
        let (mut inv_a, mut sum_l, mut sum_u) = (0.0, 0.0, 0.0);
        for _ in 0..subset_size {
            let ai = uniform(&mut rng, A_MIN, 10.0);
            let li = uniform(&mut rng, -10.0, 0.0);
            let ui = uniform(&mut rng, 0.0, 10.0);
            a.push(ai);
            b.push(uniform(&mut rng, -10.0, 10.0));
            l.push(li);
            u.push(ui);
            inv_a += 1.0 / ai;
            sum_l += li;
            sum_u += ui;
        }
        let floor = -1.0 / inv_a;
        w.push(uniform(&mut rng, floor + W_MARGIN, floor + 10.0));
        lower.push(uniform(&mut rng, sum_l, 0.8 * sum_l));
        upper.push(uniform(&mut rng, 0.8 * sum_u, sum_u));
    }
    let resource = uniform(&mut rng, lower.iter().sum(), upper.iter().sum());
    let instance = Instance::with_blocks(&vec![subset_size; m], a, b, w, l, u, lower, upper, resource)
        .expect("generated dimensions are consistent");
    Generated {
        instance,
        meta: GenMeta {
            subset_size,
            m,
            seed,
            rng_id: RNG_ID.to_string(),
        },
    }
}

/// Same distributions with every `w_j = 0`.
pub fn generate_separable(subset_size: usize, m: usize, seed: u64) -> Instance {
    let g = generate(subset_size, m, seed);
    let mut data = g.instance.to_data();
    data.w = vec![0.0; m];
    Instance::from_data(data).expect("only w changed")
}
