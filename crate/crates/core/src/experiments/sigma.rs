//! Covariance ensembles for the experiments.

use rand::Rng;

use crate::error::{check_range, Result};
use crate::linalg::{inf_norm, spectral_norm, sym_eig, SymMatrix};
use crate::sampling::{sample_random_basis, RngStream};
use crate::theory::NormKind;

use super::config::SigmaKind;

/// Draws one covariance of the given kind, scaled to unit `norm`.
pub fn make_sigma(
    kind: SigmaKind,
    d: usize,
    k: usize,
    norm: NormKind,
    rng: &mut RngStream,
) -> Result<SymMatrix> {
    let raw = match kind {
        SigmaKind::Identity => SymMatrix::identity(d),
        SigmaKind::RandomPsd => {
            let values: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..=1.0)).collect();
            rotated(d, d, &values, 0.0, rng)?
        }
        SigmaKind::Spiked => {
            check_range("k", k, 1, d)?;
            let values: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..=1.5)).collect();
            rotated(d, k, &values, 0.1, rng)?
        }
        SigmaKind::RankK => {
            check_range("k", k, 1, d)?;
            let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..=1.0)).collect();
            rotated(d, k, &values, 0.0, rng)?
        }
    };
    normalize(&raw, norm)
}

/// `V diag(values) V^T + floor I` with Haar `V` (`d x k`).
fn rotated(d: usize, k: usize, values: &[f64], floor: f64, rng: &mut RngStream) -> Result<SymMatrix> {
    let v = sample_random_basis(d, k, rng)?;
    let mut out = SymMatrix::zeros(d);
    for (j, &lam) in values.iter().enumerate() {
        out = &out + &(lam * &SymMatrix::outer(v.column(j))?);
    }
    Ok(out.affine_identity(1.0, floor))
}

pub fn normalize(s: &SymMatrix, norm: NormKind) -> Result<SymMatrix> {
    let size = match norm {
        NormKind::Infinity => inf_norm(s),
        NormKind::Spectral => spectral_norm(s)?,
    };
    Ok(s.scale(1.0 / size))
}

/// Gap `λ_k − λ_{k+1}` of a covariance.
pub fn eigengap(s: &SymMatrix, k: usize) -> Result<f64> {
    sym_eig(s)?.eigengap(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensembles_have_unit_norm_and_shape() {
        let mut rng = RngStream::new(4, 0);
        for kind in [SigmaKind::Identity, SigmaKind::RandomPsd, SigmaKind::Spiked, SigmaKind::RankK] {
            let s = make_sigma(kind, 10, 3, NormKind::Spectral, &mut rng).unwrap();
            assert!((spectral_norm(&s).unwrap() - 1.0).abs() < 1e-12);
            let t = make_sigma(kind, 10, 3, NormKind::Infinity, &mut rng).unwrap();
            assert!((inf_norm(&t) - 1.0).abs() < 1e-12);
            let lam = sym_eig(&s).unwrap();
            assert!(lam.values()[9] > -1e-12);
        }
    }

    #[test]
    fn rank_and_gap() {
        let mut rng = RngStream::new(5, 0);
        let s = make_sigma(SigmaKind::RankK, 8, 2, NormKind::Spectral, &mut rng).unwrap();
        let lam = sym_eig(&s).unwrap();
        assert!(lam.values()[1] >= 0.5 - 1e-12);
        assert!(lam.values()[2].abs() < 1e-12);
        let s = make_sigma(SigmaKind::Spiked, 8, 2, NormKind::Spectral, &mut rng).unwrap();
        assert!(eigengap(&s, 2).unwrap() >= 0.6);
    }
}
