//! Counter-based randomness: every draw is a pure function of
//! `(seed, path_index, step_index)`.
//!
//! Each path owns one ChaCha8 stream (`stream = path_index`) keyed by the
//! master seed. A step consumes a fixed number of 64-bit words that depends
//! only on the dimension, so the words of step `k` sit at a known offset and
//! can be reached by seeking as well as by sequential consumption.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::MAX_DIM;

/// Auxiliary uniforms drawn with every step.
pub const AUX_UNIFORMS: usize = 2;
/// Index of the auxiliary uniform used for bridge-crossing coupling checks.
pub const AUX_COUPLING: usize = 0;
/// Index of the auxiliary uniform used for the exact running-maximum draw.
pub const AUX_MAXIMUM: usize = 1;

/// Standard normals and auxiliary uniforms for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDraw {
    /// Standard normals; the first `dim` entries are meaningful.
    pub normals: [f64; MAX_DIM],
    /// Uniforms on `(0, 1]`.
    pub aux: [f64; AUX_UNIFORMS],
}

#[derive(Clone)]
pub struct RngStream {
    seed: u64,
    path_index: u64,
    step_index: u64,
    dim: usize,
    rng: ChaCha8Rng,
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream")
            .field("seed", &self.seed)
            .field("path_index", &self.path_index)
            .field("step_index", &self.step_index)
            .field("dim", &self.dim)
            .finish()
    }
}

/// 32-bit words consumed per step for a given dimension.
pub fn words_per_step(dim: usize) -> u64 {
    let uniforms = 2 * dim.div_ceil(2) + AUX_UNIFORMS;
    2 * uniforms as u64
}

impl RngStream {
    /// Stream for `path_index`, positioned at step 0.
    pub fn new(seed: u64, path_index: u64, dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        Self {
            seed,
            path_index,
            step_index: 0,
            dim,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Repositions the stream so that the next draw belongs to `step`.
    pub fn seek(&mut self, step: u64) {
        self.rng.set_word_pos(step as u128 * words_per_step(self.dim) as u128);
        self.step_index = step;
    }

    #[inline]
    fn uniform_open_closed(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Draws the normals and auxiliary uniforms of the current step and
    /// advances to the next one.
    pub fn next_step(&mut self) -> StepDraw {
        let mut normals = [0.0; MAX_DIM];
        let mut i = 0;
        while i < self.dim {
            let u1 = self.uniform_open_closed();
            let u2 = self.uniform_open_closed();
            let r = libm::sqrt(-2.0 * libm::log(u1));
            let (s, c) = libm::sincos(2.0 * std::f64::consts::PI * u2);
            normals[i] = r * c;
            if i + 1 < MAX_DIM {
                normals[i + 1] = r * s;
            }
            i += 2;
        }
        for v in normals.iter_mut().skip(self.dim) {
            *v = 0.0;
        }
        let mut aux = [0.0; AUX_UNIFORMS];
        for a in aux.iter_mut() {
            *a = self.uniform_open_closed();
        }
        self.step_index += 1;
        StepDraw { normals, aux }
    }
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
