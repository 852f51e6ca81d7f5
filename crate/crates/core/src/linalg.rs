//! Dense symmetric eigenvalues for small matrices (cyclic Jacobi).

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a small dense symmetric matrix (row-major, `n x n`),
/// ascending.
pub fn symmetric_eigenvalues<F: Real>(matrix: &[F], n: usize) -> Result<Vec<F>> {
    if matrix.len() != n * n {
        return Err(Error::InvalidInput(format!("expected {} entries, got {}", n * n, matrix.len())));
    }
    let mut a = matrix.to_vec();
    let idx = |i: usize, j: usize| i * n + j;
    let scale = a.iter().fold(F::zero(), |m, v| m.max(v.abs()));
    let nf = F::from_usize_lossy(n);
    let tiny = (nf * F::epsilon() * scale) * (nf * F::epsilon() * scale);

    for _ in 0..MAX_SWEEPS {
        let off: F = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[idx(i, j)] * a[idx(i, j)])
            .fold(F::zero(), |s, v| s + v);
        if off <= tiny {
            let mut ev: Vec<F> = (0..n).map(|i| a[idx(i, i)]).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[idx(p, q)];
                if apq == F::zero() {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (F::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let t = if theta == F::zero() { F::one() } else { t };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
                a[idx(p, q)] = F::zero();
                a[idx(q, p)] = F::zero();
            }
        }
    }
    Err(Error::EigenFailure(format!("Jacobi iteration did not converge for n = {n}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_matrix() {
        let ev = symmetric_eigenvalues(&[1.0_f64; 16], 4).unwrap();
        assert!(ev[0].abs() < 1e-14 && ev[1].abs() < 1e-14 && ev[2].abs() < 1e-14);
        assert!((ev[3] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn matches_nalgebra_on_random_symmetric() {
        let n = 7;
        let mut m = vec![0.0_f64; n * n];
        let mut state = 12345_u64;
        for i in 0..n {
            for j in i..n {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        let ours = symmetric_eigenvalues(&m, n).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(n, n, &m);
        let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
