//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i−kl ..= i+ku+kl`; the extra `kl` superdiagonals
//! absorb the fill produced by row interchanges. Multipliers are kept apart
//! so that solving applies the interchanges in factorization order.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub(crate) fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku {
            return Err(Error::contract(format!(
                "entry ({i}, {j}) outside the band (kl = {}, ku = {})",
                self.kl, self.ku
            )));
        }
        let k = self.idx(i, j);
        self.data[k] += v;
        Ok(())
    }

    pub(crate) fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        let mut lower = vec![0.0; n * kl.max(1)];
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > f64::EPSILON * scale * n as f64) {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = 0.0;
                lower[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.idx(k, j);
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * self.data[kj];
                    }
                }
            }
        }
        Ok(BandedLu {
            matrix: self,
            lower,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedLu {
    matrix: BandedMatrix,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.matrix;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let end = (k + kl).min(n - 1);
                for (bi, l) in b[k + 1..=end].iter_mut().zip(&self.lower[k * kl..]) {
                    *bi -= l * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for (j, bj) in b
                .iter()
                .enumerate()
                .take((k + kl + ku).min(n - 1) + 1)
                .skip(k + 1)
            {
                acc -= m.data[m.idx(k, j)] * bj;
            }
            b[k] = acc / m.data[m.idx(k, k)];
        }
    }
}
