//! Reproducible random streams.
//!
//! Every random draw is tied to a `(seed, trial, role)` triple. The seed keys
//! a ChaCha8 generator and `(trial, role)` selects one of its 2^64 independent
//! streams, so a trial's randomness does not depend on which thread runs it
//! or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Purpose of a stream within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// The i.i.d. matrix `X_N`.
    Entries,
    /// Reference draws from a limit law.
    Limit,
    /// Gaussian analytic function coefficients or grid values.
    Gaf,
    /// Left random vector in bilinear forms.
    LeftVector,
    /// Right random vector in bilinear forms.
    RightVector,
    /// Placement of deterministic perturbations.
    Placement,
    /// Free slot for auxiliary draws.
    Aux(u16),
}

impl Role {
    fn code(self) -> u32 {
        match self {
            Role::Entries => 0,
            Role::Limit => 1,
            Role::Gaf => 2,
            Role::LeftVector => 3,
            Role::RightVector => 4,
            Role::Placement => 5,
            Role::Aux(k) => 0x1_0000 | k as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub trial: u64,
    pub role: Role,
}

impl RngStream {
    pub fn new(seed: u64, trial: u64, role: Role) -> Self {
        Self { seed, trial, role }
    }

    /// Same seed and trial, different role.
    pub fn with_role(self, role: Role) -> Self {
        Self { role, ..self }
    }

    /// Generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // 44 bits of trial index, 20 bits of role.
        rng.set_stream((self.trial << 20) | self.role.code() as u64);
        rng
    }
}

/// Centered complex Gaussian with `E|Z|² = variance` and `E Z² = pseudo`.
///
/// Requires `|pseudo| ≤ variance`; slightly inconsistent inputs are clamped.
pub fn complex_normal<R: Rng + ?Sized>(variance: f64, pseudo: Complex64, rng: &mut R) -> Complex64 {
    let caa = 0.5 * (variance + pseudo.re);
    let cbb = 0.5 * (variance - pseudo.re);
    let cab = 0.5 * pseudo.im;
    let l11 = caa.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { cab / l11 } else { 0.0 };
    let l22 = (cbb - l21 * l21).max(0.0).sqrt();
    let g1: f64 = StandardNormal.sample(rng);
    let g2: f64 = StandardNormal.sample(rng);
    Complex64::new(l11 * g1, l21 * g1 + l22 * g2)
}
