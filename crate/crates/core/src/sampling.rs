//! Seeded randomness: per-stream generators, Gaussian data, Haar-random
//! bases, and the moments of the projection-length Beta law.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_range, Error, Result};
use crate::linalg::{self, sym_eig, Basis, DataMatrix, SymMatrix};

/// Relative tolerance for negative eigenvalues in a covariance.
pub const PSD_TOL: f64 = 1e-10;

/// A reproducible random stream identified by `(master_seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped to the cipher's stream
/// counter, so streams are independent and can be created in any order.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normals(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.standard_normal()).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of labels into a fresh seed.
///
/// Used to give each experiment cell and trial its own master seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// A zero-mean Gaussian model with a validated PSD covariance.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    covariance: SymMatrix,
    root: SymMatrix,
}

impl GaussianSpec {
    /// Validates `Σ` (eigenvalues ≥ −1e-10·‖Σ‖₂) and precomputes the symmetric
    /// square root with small negative eigenvalues clamped to zero.
    pub fn new(covariance: SymMatrix) -> Result<Self> {
        let spec = sym_eig(&covariance)?;
        let norm = spec.norm();
        let min = spec.values().last().copied().unwrap_or(0.0);
        if min < -PSD_TOL * norm {
            return Err(Error::InvalidInput(format!(
                "covariance is not PSD (min eigenvalue {min:e}, ‖Σ‖₂ = {norm:e})"
            )));
        }
        let root = spec.map_values(|_, lam| lam.max(0.0).sqrt());
        Ok(Self { covariance, root })
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.covariance
    }
}

/// `n` i.i.d. draws `Σ^{1/2} g` with `g` standard normal.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, rng: &mut RngStream) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let d = spec.dim();
    let mut data = Vec::with_capacity(d * n);
    let mut g = vec![0.0; d];
    for _ in 0..n {
        for gi in g.iter_mut() {
            *gi = rng.standard_normal();
        }
        data.extend(spec.root.mul_vec(&g));
    }
    DataMatrix::from_column_major(d, n, data)
}

/// A Haar-distributed orthonormal `d x m` frame.
pub fn sample_random_basis(d: usize, m: usize, rng: &mut RngStream) -> Result<Basis> {
    check_range("m", m, 1, d)?;
    let g = rng.normals(d * m);
    linalg::orthonormalize(d, m, &g)
}

/// One compressed observation `(A_t, z_t = A_t^T x_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    basis: Basis,
    z: Vec<f64>,
}

impl Observation {
    pub fn new(basis: Basis, z: Vec<f64>) -> Result<Self> {
        if z.len() != basis.rank() {
            return Err(Error::InvalidInput(format!(
                "observation has {} coordinates for a rank-{} basis",
                z.len(),
                basis.rank()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observation has non-finite entries".into()));
        }
        Ok(Self { basis, z })
    }

    /// Observes `x` through `basis`.
    pub fn measure(basis: Basis, x: &[f64]) -> Result<Self> {
        if x.len() != basis.dim() {
            return Err(Error::InvalidInput(format!(
                "vector of length {} does not match basis dimension {}",
                x.len(),
                basis.dim()
            )));
        }
        let z = basis.compress(x);
        Self::new(basis, z)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// `A_t z_t = Φ_t x_t`.
    pub fn backproject(&self) -> Vec<f64> {
        self.basis.lift(&self.z)
    }
}

/// Basis for sample `t` under master seed `seed`.
pub fn sample_basis_for(seed: u64, t: usize, d: usize, m: usize) -> Result<Basis> {
    sample_random_basis(d, m, &mut RngStream::new(seed, t as u64))
}

/// Compresses every column of `x` with its own independent basis; column `t`
/// draws from stream `(seed, t)`.
pub fn compress(x: &DataMatrix, m: usize, seed: u64) -> Result<Vec<Observation>> {
    check_range("m", m, 1, x.dim())?;
    (0..x.count())
        .into_par_iter()
        .map(|t| {
            let basis = sample_basis_for(seed, t, x.dim(), m)?;
            Observation::measure(basis, x.column(t))
        })
        .collect()
}

/// `E[ω^i]` for `ω ~ Beta(m/2, (d−m)/2)`.
pub fn beta_moment(m: usize, d: usize, i: usize) -> f64 {
    (1..=i)
        .map(|j| (m + 2 * (j - 1)) as f64 / (d + 2 * (j - 1)) as f64)
        .product()
}

/// A uniformly random point on the unit sphere in `R^d`.
pub fn sample_uniform_sphere(d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidInput("sphere dimension must be positive".into()));
    }
    loop {
        let mut v = rng.normals(d);
        let norm = linalg::dot(&v, &v).sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            return Ok(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::new(9, 2).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s1 = RngStream::new(9, 2);
        let mut s2 = RngStream::new(9, 3);
        assert_ne!(s1.next_u64(), s2.next_u64());
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }

    #[test]
    fn zero_covariance_gives_zero_samples() {
        let spec = GaussianSpec::new(SymMatrix::zeros(3)).unwrap();
        let x = sample_gaussian(&spec, 5, &mut RngStream::new(1, 0)).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let c = SymMatrix::diag(&[1.0, -0.1]).unwrap();
        assert!(matches!(GaussianSpec::new(c), Err(Error::InvalidInput(_))));
        // roundoff-sized negatives are clamped
        let c = SymMatrix::diag(&[1.0, -1e-13]).unwrap();
        assert!(GaussianSpec::new(c).is_ok());
    }

    #[test]
    fn identity_sample_covariance_converges() {
        let spec = GaussianSpec::new(SymMatrix::identity(4)).unwrap();
        let n = 100_000;
        let x = sample_gaussian(&spec, n, &mut RngStream::new(3, 0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = x.columns().map(|c| c[i] * c[j]).sum::<f64>() / n as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 0.05, "entry ({i},{j}) = {s}");
            }
        }
    }

    #[test]
    fn diagonal_variance() {
        let spec = GaussianSpec::new(SymMatrix::diag(&[4.0, 1.0]).unwrap()).unwrap();
        let n = 100_000;
        let x = sample_gaussian(&spec, n, &mut RngStream::new(4, 0)).unwrap();
        let v: f64 = x.columns().map(|c| c[0] * c[0]).sum::<f64>() / n as f64;
        assert!((3.8..=4.2).contains(&v), "variance {v}");
    }

    #[test]
    fn full_rank_basis_is_orthogonal() {
        let b = sample_random_basis(5, 5, &mut RngStream::new(1, 1)).unwrap();
        assert!(b.gram_error() <= 1e-10);
        assert!(b.projector().max_abs_diff(&SymMatrix::identity(5)) <= 1e-10);
        assert!(sample_random_basis(3, 4, &mut RngStream::new(1, 1)).is_err());
        assert!(sample_random_basis(3, 0, &mut RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn basis_positive_diagonal_sign_convention() {
        // Q^T G = R must have a positive diagonal.
        let mut rng = RngStream::new(5, 5);
        let g = rng.normals(12);
        let b = linalg::orthonormalize(4, 3, &g).unwrap();
        for j in 0..3 {
            let rjj = linalg::dot(b.column(j), &g[j * 4..(j + 1) * 4]);
            assert!(rjj > 0.0);
        }
    }

    #[test]
    fn compress_full_rank_and_zero() {
        let x = DataMatrix::from_columns(&[vec![1.0, -2.0, 0.5], vec![0.0, 0.0, 0.0]]).unwrap();
        let obs = compress(&x, 3, 17).unwrap();
        let y = obs[0].backproject();
        for (a, b) in y.iter().zip(x.column(0)) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(obs[1].z().iter().all(|&v| v == 0.0));
        assert!(compress(&x, 4, 17).is_err());
    }

    #[test]
    fn measure_injected_basis() {
        let h = 0.5_f64.sqrt();
        let b = Basis::new(2, 1, vec![h, h]).unwrap();
        let o = Observation::measure(b, &[1.0, 0.0]).unwrap();
        assert!((o.z()[0] - h).abs() < 1e-15);
    }

    #[test]
    fn compress_streams_match_direct_draws() {
        let x = DataMatrix::from_columns(&vec![vec![1.0, 2.0, 3.0, 4.0]; 3]).unwrap();
        let obs = compress(&x, 2, 99).unwrap();
        for (t, o) in obs.iter().enumerate() {
            assert_eq!(o.basis(), &sample_basis_for(99, t, 4, 2).unwrap());
        }
    }

    #[test]
    fn beta_moment_values() {
        assert_eq!(beta_moment(2, 4, 0), 1.0);
        assert_eq!(beta_moment(2, 4, 1), 0.5);
        assert!((beta_moment(2, 4, 2) - 1.0 / 3.0).abs() < 1e-15);
        let diff = beta_moment(2, 4, 1) - beta_moment(2, 4, 2);
        assert!((diff - 1.0 / 6.0).abs() < 1e-15);
        for d in 2..12 {
            for m in 1..=d {
                let (mf, df) = (m as f64, d as f64);
                let want = mf * (df - mf) / (df * (df + 2.0));
                let got = beta_moment(m, d, 1) - beta_moment(m, d, 2);
                assert!((got - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_points_are_unit() {
        let mut rng = RngStream::new(2, 0);
        let v = sample_uniform_sphere(1, &mut rng).unwrap();
        assert_eq!(v[0].abs(), 1.0);
        for _ in 0..100 {
            let v = sample_uniform_sphere(7, &mut rng).unwrap();
            assert!((linalg::dot(&v, &v) - 1.0).abs() < 1e-12);
        }
        assert!(sample_uniform_sphere(0, &mut rng).is_err());
    }
}
