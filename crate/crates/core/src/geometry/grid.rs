use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Result};
use crate::hermitian::{CVector, C64, MAX_DIM};

/// Unit directions in `C^d`, stored as i-orbits: index `4j + k` holds `i^k v_j`.
#[derive(Clone, Debug)]
pub struct DirectionGrid {
    dim: usize,
    seed: u64,
    dirs: Vec<CVector>,
}

impl PartialEq for DirectionGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.seed == other.seed && self.dirs.len() == other.dirs.len()
    }
}

/// Default seed for grids built with [`DirectionGrid::default_for`].
pub const DEFAULT_GRID_SEED: u64 = 0x6a09_e667;

// Generalized golden ratio: positive root of x^(n+1) = x + 1.
fn harmonious(n: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (n as f64 + 1.0));
    }
    x
}

impl DirectionGrid {
    /// `count` must be a positive multiple of 4.
    pub fn new(dim: usize, count: usize, seed: u64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return param("grid dimension must be in 1..=8");
        }
        if count == 0 || !count.is_multiple_of(4) {
            return param("direction count must be a positive multiple of 4");
        }
        let real_dim = 2 * dim;
        let g = harmonious(real_dim);
        let alpha: Vec<f64> = (1..=real_dim).map(|k| (1.0 / g.powi(k as i32)).fract()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..real_dim).map(|_| rng.gen::<f64>()).collect();

        let base = count / 4;
        let mut dirs = Vec::with_capacity(count);
        let mut j = 0u64;
        while dirs.len() < count {
            j += 1;
            let u: Vec<f64> = (0..real_dim).map(|k| (shift[k] + j as f64 * alpha[k]).fract()).collect();
            let v = CVector::from_fn(dim, |c, _| {
                let (u1, u2) = (1.0 - u[2 * c], u[2 * c + 1]);
                let r = (-2.0 * u1.ln()).sqrt();
                let t = core::f64::consts::TAU * u2;
                C64::new(r * t.cos(), r * t.sin())
            });
            let n = v.norm();
            if !(n > 1e-6) || !n.is_finite() {
                continue;
            }
            let v = v.unscale(n);
            let mut z = v.clone();
            for _ in 0..4 {
                dirs.push(z.clone());
                z = z.map(|c| C64::new(-c.im, c.re));
            }
            debug_assert!(dirs.len() <= 4 * base);
        }
        Ok(Self { dim, seed, dirs })
    }

    /// `64 d^2` directions with the crate-wide default seed.
    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(dim, 64 * dim * dim, DEFAULT_GRID_SEED)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn direction(&self, k: usize) -> &CVector {
        &self.dirs[k]
    }

    pub fn directions(&self) -> &[CVector] {
        &self.dirs
    }

    /// Number of i-orbits.
    pub fn orbit_count(&self) -> usize {
        self.dirs.len() / 4
    }

    /// Representative of orbit `j`.
    pub fn representative(&self, j: usize) -> &CVector {
        &self.dirs[4 * j]
    }

    pub fn representatives(&self) -> impl Iterator<Item = &CVector> + '_ {
        self.dirs.iter().step_by(4)
    }
}
