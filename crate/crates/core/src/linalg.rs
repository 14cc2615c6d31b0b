//! Banded LU with an optional single border (one extra dense row and column),
//! finite-difference weights and uniform-grid interpolation.
//!
//! Every linear system in this crate (profile Newton steps, the frequency
//! operators, bordered derivative problems) is a band of width ~ (shift)/h
//! plus at most one border, so a banded factorization keeps desk-scale solves
//! in the millisecond range.

use crate::error::{Error, Result};
use nalgebra::ComplexField;

pub trait Field: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Field for T {}

/// n×n band (kl sub-, ku super-diagonals), optionally bordered to (n+1)×(n+1).
#[derive(Clone, Debug)]
pub struct BandMatrix<T: Field> {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    bordered: bool,
    // row i holds columns i-kl ..= i+ku
    band: Vec<T>,
    col: Vec<T>,
    row: Vec<T>,
    corner: T,
}

impl<T: Field> BandMatrix<T> {
    pub fn new(n: usize, kl: usize, ku: usize, bordered: bool) -> Self {
        let w = kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            bordered,
            band: vec![T::zero(); n * w],
            col: vec![T::zero(); if bordered { n } else { 0 }],
            row: vec![T::zero(); if bordered { n } else { 0 }],
            corner: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n + usize::from(self.bordered)
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let n = self.n;
        match (i == n, j == n) {
            (false, false) => {
                let s = self.slot(i, j);
                self.band[s] += v;
            }
            (false, true) => self.col[i] += v,
            (true, false) => self.row[j] += v,
            (true, true) => self.corner += v,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let n = self.n;
        match (i == n, j == n) {
            (false, false) => {
                if j + self.kl < i || j > i + self.ku {
                    T::zero()
                } else {
                    self.band[self.slot(i, j)]
                }
            }
            (false, true) => self.col[i],
            (true, false) => self.row[j],
            (true, true) => self.corner,
        }
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        let n = self.n;
        let w = self.kl + self.ku + 1;
        for i in 0..n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(n - 1);
            let base = i * w + self.kl - i;
            let mut acc = T::zero();
            for j in lo..=hi {
                acc += self.band[base + j] * x[j];
            }
            if self.bordered {
                acc += self.col[i] * x[n];
            }
            y[i] = acc;
        }
        if self.bordered {
            let mut acc = self.corner * x[n];
            for j in 0..n {
                acc += self.row[j] * x[j];
            }
            y[n] = acc;
        }
    }

    /// Conjugate transpose (border stays a border).
    pub fn adjoint(&self) -> Self {
        let mut a = BandMatrix::new(self.n, self.ku, self.kl, self.bordered);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                a.add(j, i, self.get(i, j).conjugate());
            }
        }
        if self.bordered {
            for i in 0..self.n {
                a.col[i] = self.row[i].conjugate();
                a.row[i] = self.col[i].conjugate();
            }
            a.corner = self.corner.conjugate();
        }
        a
    }

    /// Copy of the band part with an empty border appended.
    pub fn with_border(&self) -> Self {
        let mut b = self.clone();
        b.bordered = true;
        b.col = vec![T::zero(); self.n];
        b.row = vec![T::zero(); self.n];
        b.corner = T::zero();
        b
    }

    /// Adds `s` to every diagonal entry of the band part.
    pub fn shift_diagonal(&mut self, s: T) {
        for i in 0..self.n {
            let k = self.slot(i, i);
            self.band[k] += s;
        }
    }

    /// Dense copy (tests and full eigen-solves).
    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        let m = self.dim();
        nalgebra::DMatrix::from_fn(m, m, |i, j| self.get(i, j))
    }

    pub fn factor(&self) -> Result<BandLu<T>> {
        BandLu::new(self)
    }
}

/// LU with partial pivoting inside the band; the border row is eliminated but
/// never used as a pivot row.
#[derive(Clone, Debug)]
pub struct BandLu<T: Field> {
    n: usize,
    kl: usize,
    ku: usize,
    bordered: bool,
    w: usize,
    // row i holds columns i-kl ..= i+kl+ku (room for pivoting fill-in)
    a: Vec<T>,
    col: Vec<T>,
    row: Vec<T>,
    corner: T,
    piv: Vec<usize>,
}

impl<T: Field> BandLu<T> {
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.w + (j + self.kl - i)
    }

    fn new(m: &BandMatrix<T>) -> Result<Self> {
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        let w = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            bordered: m.bordered,
            w,
            a: vec![T::zero(); n * w],
            col: m.col.clone(),
            row: m.row.clone(),
            corner: m.corner,
            piv: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n.saturating_sub(1));
            for j in lo..=hi {
                let s = lu.at(i, j);
                lu.a[s] = m.get(i, j);
            }
        }
        let scale = (0..n)
            .map(|i| lu.a[i * w..(i + 1) * w].iter().fold(0.0f64, |s, v| s.max(v.modulus())))
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let last_col = (j + kl + ku).min(n - 1);
            let mut p = j;
            let mut best = lu.a[lu.at(j, j)].modulus();
            for i in j + 1..=last_row {
                let v = lu.a[lu.at(i, j)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best < scale * 1e-15 * f64::EPSILON {
                return Err(Error::Singular("banded LU"));
            }
            lu.piv[j] = p;
            if p != j {
                for k in j..=last_col {
                    let (x, y) = (lu.at(j, k), lu.at(p, k));
                    lu.a.swap(x, y);
                }
                if lu.bordered {
                    lu.col.swap(j, p);
                }
            }
            let pivot = lu.a[lu.at(j, j)];
            for i in j + 1..=last_row {
                let s = lu.at(i, j);
                let f = lu.a[s] / pivot;
                lu.a[s] = f;
                if f == T::zero() {
                    continue;
                }
                for k in j + 1..=last_col {
                    let (t, u) = (lu.at(i, k), lu.at(j, k));
                    let v = lu.a[u];
                    lu.a[t] -= f * v;
                }
                if lu.bordered {
                    let cj = lu.col[j];
                    lu.col[i] -= f * cj;
                }
            }
            if lu.bordered {
                let f = lu.row[j] / pivot;
                lu.row[j] = f;
                if f != T::zero() {
                    for k in j + 1..=last_col {
                        let v = lu.a[lu.at(j, k)];
                        lu.row[k] -= f * v;
                    }
                    let cj = lu.col[j];
                    lu.corner -= f * cj;
                }
            }
        }
        if lu.bordered && lu.corner.modulus() <= 1e-300 {
            return Err(Error::Singular("bordered LU (border pivot)"));
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n + usize::from(self.bordered)
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), self.dim());
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            for i in j + 1..=(j + self.kl).min(n - 1) {
                b[i] -= self.a[self.at(i, j)] * bj;
            }
            if self.bordered {
                b[n] -= self.row[j] * bj;
            }
        }
        if self.bordered {
            b[n] /= self.corner;
        }
        for j in (0..n).rev() {
            let mut acc = b[j];
            for k in j + 1..=(j + self.kl + self.ku).min(n - 1) {
                acc -= self.a[self.at(j, k)] * b[k];
            }
            if self.bordered {
                acc -= self.col[j] * b[n];
            }
            b[j] = acc / self.a[self.at(j, j)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Fornberg's weights: `w[k][i]` is the weight of node `x[i]` in the k-th
/// derivative at `z`, for k = 0..=m.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let np = x.len();
    let mut c = vec![vec![0.0; np]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..np {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Centered weights of formal order `order` (even) for the first and second
/// derivative at unit spacing: offsets −order/2 ..= order/2.
pub fn central_weights(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2 && order.is_multiple_of(2));
    let half = (order / 2) as i64;
    let x: Vec<f64> = (-half..=half).map(|k| k as f64).collect();
    let w = fd_weights(0.0, &x, 2);
    (w[1].clone(), w[2].clone())
}

/// Lagrange interpolation on the uniform grid x_k = x0 + k h with `points`
/// nodes centred on the evaluation point.
#[derive(Clone, Copy, Debug)]
pub struct UniformInterp {
    pub x0: f64,
    pub h: f64,
    pub points: usize,
}

impl UniformInterp {
    /// First node index and the value/derivative weights for `x`. Node indices
    /// may fall outside the stored range; callers decide how to extend.
    pub fn weights(&self, x: f64, deriv: usize) -> (i64, Vec<Vec<f64>>) {
        let s = (x - self.x0) / self.h;
        let half = self.points as i64 / 2;
        // even counts: x sits in the middle cell; odd counts: nearest node centred
        let first = if self.points.is_multiple_of(2) {
            s.floor() as i64 - (half - 1)
        } else {
            s.round() as i64 - half
        };
        let nodes: Vec<f64> = (0..self.points).map(|i| (first + i as i64) as f64).collect();
        let mut w = fd_weights(s, &nodes, deriv);
        for (k, wk) in w.iter_mut().enumerate() {
            let f = self.h.powi(k as i32);
            wk.iter_mut().for_each(|v| *v /= f);
        }
        (first, w)
    }
}
