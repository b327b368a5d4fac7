//! Seeded, reproducible samplers.
//!
//! Every sampler splits its paths into fixed blocks of [`BLOCK_ROWS`] rows.
//! Block `k` of a stream draws from its own ChaCha8 stream, so output is
//! bit-identical regardless of how many worker threads run the blocks.

mod compound;
mod gh;
mod gig;

pub use compound::{
    sample_compound_poisson_coupled, sample_levy_truncated, CompoundPoissonSpec, CoupledPaths, Coupling,
    LevyPathOptions,
};
pub use gh::{sample_gh, sample_nig_process, GhParams};
pub use gig::{gig_density, gig_log_density, gig_mean, sample_gig, GigParams, GigSampler};

use crate::error::{invalid, Result};
use crate::sample::{Provenance, SampleMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rows generated per independent block.
pub const BLOCK_ROWS: usize = 4096;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(master_seed, stream_index)`.
///
/// The ChaCha8 key is four SplitMix64 words derived from
/// `splitmix64(master_seed) ^ splitmix64(stream_index ^ 0xA5A5...)`; blocks
/// within a stream use ChaCha's 64-bit stream counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// A derived stream, distinct from every stream with a different `k`.
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream {
            master_seed: self.master_seed,
            stream_index: splitmix64(self.stream_index.rotate_left(17) ^ splitmix64(k ^ 0x5851_F42D_4C95_7F2D)),
        }
    }

    fn key(&self) -> [u8; 32] {
        let base = splitmix64(self.master_seed) ^ splitmix64(self.stream_index ^ 0xA5A5_A5A5_A5A5_A5A5);
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix64(base.wrapping_add(i as u64)).to_le_bytes());
        }
        key
    }

    /// Generator for block `block` of this stream.
    pub fn block_rng(&self, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(block);
        rng
    }

    /// Generator for sequential use (block 0).
    pub fn rng(&self) -> ChaCha8Rng {
        self.block_rng(0)
    }

    pub fn provenance(&self, spec_digest: impl Into<String>) -> Provenance {
        Provenance { seed: self.master_seed, stream: self.stream_index, spec_digest: spec_digest.into() }
    }
}

/// Fills `n` rows of `width` values in parallel blocks; `row` writes one row.
pub(crate) fn fill_rows<F>(n: usize, width: usize, stream: &RngStream, row: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; n * width];
    map_rows(&mut data, width, stream, row);
    data
}

/// Updates existing rows of `width` values in place, block by block. Row `i`
/// always sees the same random numbers for a given stream, which is what
/// common-random-number comparisons rely on.
pub(crate) fn map_rows<F>(data: &mut [f64], width: usize, stream: &RngStream, row: F)
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    if width == 0 {
        return;
    }
    data.par_chunks_mut(BLOCK_ROWS * width).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream.block_rng(b as u64);
        for r in chunk.chunks_exact_mut(width) {
            row(&mut rng, r);
        }
    });
}

/// A square-root factor `L` with `L L^T = Sigma`.
#[derive(Debug, Clone)]
pub struct MvnFactor {
    l: DMatrix<f64>,
}

impl MvnFactor {
    /// Cholesky when `Sigma` is positive definite; otherwise an eigenvalue
    /// factorization `V diag(sqrt(max(l, 0)))`. Eigenvalues below `-1e-8`
    /// are rejected as not positive semidefinite.
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return invalid("covariance must be a nonempty square matrix");
        }
        let asym = (sigma - sigma.transpose()).amax();
        if asym > 1e-12 * (1.0 + sigma.amax()) {
            return invalid(format!("covariance is not symmetric (asymmetry {asym:e})"));
        }
        if let Some(ch) = sigma.clone().cholesky() {
            return Ok(Self { l: ch.l() });
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return invalid(format!("covariance is not positive semidefinite (eigenvalue {min:e})"));
        }
        let d = sigma.nrows();
        let mut l = eig.eigenvectors.clone();
        for j in 0..d {
            let s = eig.eigenvalues[j].max(0.0).sqrt();
            for i in 0..d {
                l[(i, j)] *= s;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Writes `L z` for a fresh standard normal `z` into `out`, scaled by `scale`.
    pub fn sample_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, scale: f64, z: &mut [f64], out: &mut [f64]) {
        let d = self.dim();
        for zi in z.iter_mut().take(d) {
            *zi = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.l[(i, j)] * z[j];
            }
            out[i] = scale * acc;
        }
    }
}

/// `n` i.i.d. draws from `N(mu, Sigma)`.
pub fn sample_mvn(mu: &[f64], sigma: &DMatrix<f64>, n: usize, stream: &RngStream) -> Result<SampleMatrix> {
    let d = mu.len();
    if sigma.nrows() != d {
        return invalid(format!("mean has dimension {d}, covariance {}", sigma.nrows()));
    }
    let factor = MvnFactor::new(sigma)?;
    let data = fill_rows(n, d, stream, |rng, row| {
        let mut z = vec![0.0; d];
        factor.sample_into(rng, 1.0, &mut z, row);
        for (r, m) in row.iter_mut().zip(mu) {
            *r += m;
        }
    });
    Ok(SampleMatrix::new(d, data)?.with_provenance(stream.provenance("mvn")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(42, 0);
        let a: u64 = s.rng().random();
        let b: u64 = s.rng().random();
        assert_eq!(a, b);
        let c: u64 = RngStream::new(42, 1).rng().random();
        let d: u64 = RngStream::new(43, 0).rng().random();
        let e: u64 = s.block_rng(1).random();
        assert!(a != c && a != d && a != e && c != d);
        assert_ne!(s.substream(0), s.substream(1));
    }

    #[test]
    fn mvn_examples() {
        let zero = sample_mvn(&[0.0, 0.0], &DMatrix::zeros(2, 2), 5, &RngStream::new(1, 0)).unwrap();
        assert!(zero.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(zero.rows(), 5);

        let n = 100_000;
        let m = sample_mvn(&[1.0, 2.0], &DMatrix::identity(2, 2), n, &RngStream::new(2, 0)).unwrap();
        let mean = m.mean();
        let bound = 4.0 / (n as f64).sqrt();
        assert!((mean[0] - 1.0).abs() < bound && (mean[1] - 2.0).abs() < bound, "{mean:?}");

        let rank1 = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = sample_mvn(&[0.0, 0.0], &rank1, 10_000, &RngStream::new(3, 0)).unwrap();
        assert!(m.iter_rows().all(|r| (r[0] - r[1]).abs() < 1e-9));

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(sample_mvn(&[0.0, 0.0], &bad, 1, &RngStream::new(3, 0)).is_err());
    }

    #[test]
    fn output_independent_of_thread_count() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let s = RngStream::new(9, 4);
        let a = sample_mvn(&[0.0, 0.0], &sigma, 3 * BLOCK_ROWS + 17, &s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample_mvn(&[0.0, 0.0], &sigma, 3 * BLOCK_ROWS + 17, &s).unwrap());
        assert_eq!(a, b);
    }
}
