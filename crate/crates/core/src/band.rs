//! Symmetric banded matrices with Cholesky factorization.
//!
//! Step Hessians on tensor grids are symmetric positive definite with
//! bandwidth equal to the largest interior-index stride, so a dense band is
//! the natural exact solver at desk scale: no fill-in surprises, no iteration
//! tolerance coupled to the Newton tolerance.
//!
//! Storage is the lower band by rows: entry `(i, j)` with `i - bw <= j <= i`
//! lives at `data[i * (bw + 1) + (bw + j - i)]`.

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> SymBand {
        SymBand {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Adds `v` to the symmetric entry `(i, j)`; only the lower triangle is
    /// stored, so the call is order-insensitive.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            return 0.0;
        }
        self.data[self.slot(r, c)]
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        y.fill(0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.slot(i, j)];
                if a != 0.0 {
                    y[i] += a * x[j];
                    if i != j {
                        y[j] += a * x[i];
                    }
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// In-place band Cholesky `A = L L^T`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let mut l = self.data.clone();
        let bw = self.bw;
        let n = self.n;
        let slot = |i: usize, j: usize| i * (bw + 1) + (bw + j - i);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = l[slot(i, j)];
                let kmin = lo.max(j.saturating_sub(bw));
                for k in kmin..j {
                    sum -= l[slot(i, k)] * l[slot(j, k)];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::NotPositiveDefinite { pivot: i });
                    }
                    l[slot(i, j)] = sum.sqrt();
                } else {
                    l[slot(i, j)] = sum / l[slot(j, j)];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    /// Smallest eigenvalue by inverse power iteration with Rayleigh quotient
    /// readout. Deterministic start vector; intended for diagnostics on small
    /// systems, not as a general eigensolver.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        let n = self.n;
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.3 * ((i % 7) as f64) - 0.1 * ((i % 3) as f64))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let mut lambda = f64::INFINITY;
        let mut work = vec![0.0; n];
        for _ in 0..500 {
            let mut w = v.clone();
            chol.solve_in_place(&mut w);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= norm);
            self.matvec(&w, &mut work);
            let rayleigh: f64 = w.iter().zip(&work).map(|(a, b)| a * b).sum();
            let done = (rayleigh - lambda).abs() <= 1e-13 * rayleigh.abs().max(1e-300);
            lambda = rayleigh;
            v = w;
            if done {
                break;
            }
        }
        Ok(lambda)
    }

    /// Gershgorin lower bound on the spectrum: `min_i (a_ii - sum_{j!=i} |a_ij|)`.
    pub fn gershgorin_lower_bound(&self) -> f64 {
        let mut bound = f64::INFINITY;
        for i in 0..self.n {
            let mut radius = 0.0;
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            for j in lo..=hi {
                if j != i {
                    radius += self.get(i, j).abs();
                }
            }
            bound = bound.min(self.get(i, i) - radius);
        }
        bound
    }

}

#[derive(Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let bw = self.bw;
        let slot = |i: usize, j: usize| i * (bw + 1) + (bw + j - i);
        // L y = b
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut sum = b[i];
            for j in lo..i {
                sum -= self.l[slot(i, j)] * b[j];
            }
            b[i] = sum / self.l[slot(i, i)];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut sum = b[i];
            for j in (i + 1)..=hi {
                sum -= self.l[slot(j, i)] * b[j];
            }
            b[i] = sum / self.l[slot(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, bw: usize, rng: &mut impl Rng) -> SymBand {
        let mut a = SymBand::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.gen_range(-0.5..0.5));
            }
        }
        // Diagonal dominance makes it positive definite.
        for i in 0..n {
            let mut radius = 0.0;
            for j in 0..n {
                if j != i {
                    radius += a.get(i, j).abs();
                }
            }
            a.add(i, i, radius + rng.gen_range(0.5..2.0));
        }
        a
    }

    #[test]
    fn tridiagonal_solve_hand_check() {
        // [2 -1; -1 2] x = [1, 0] -> x = [2/3, 1/3].
        let mut a = SymBand::zeros(2, 1);
        a.add(0, 0, 2.0);
        a.add(1, 1, 2.0);
        a.add(0, 1, -1.0);
        let x = a.cholesky().unwrap().solve(&[1.0, 0.0]);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn random_solves_reproduce_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(3..40);
            let bw = rng.gen_range(1..n.min(8));
            let a = random_spd(n, bw, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut b = vec![0.0; n];
            a.matvec(&x_true, &mut b);
            let x = a.cholesky().unwrap().solve(&b);
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).abs() < 1e-9, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn min_eigenvalue_matches_dense_oracle_on_small_matrix() {
        // Jacobi eigenvalue sweep as an independent oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(6, 2, &mut rng);
        let mut m = a.to_dense();
        let n = 6;
        for _ in 0..100 {
            for p in 0..n {
                for q in (p + 1)..n {
                    if m[p][q].abs() < 1e-15 {
                        continue;
                    }
                    let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (m[k][p], m[k][q]);
                        m[k][p] = c * akp - s * akq;
                        m[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (m[p][k], m[q][k]);
                        m[p][k] = c * apk - s * aqk;
                        m[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let oracle = (0..n).map(|i| m[i][i]).fold(f64::INFINITY, f64::min);
        let est = a.min_eigenvalue().unwrap();
        assert!((est - oracle).abs() < 1e-8 * oracle.max(1.0), "{est} vs {oracle}");
        assert!(a.gershgorin_lower_bound() <= est + 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = SymBand::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        assert!(matches!(
            a.cholesky(),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }
}
