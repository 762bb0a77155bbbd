//! Prime-field arithmetic, evaluation points, interpolation and the
//! generalized Vandermonde solvers used for share evaluation and decoding.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::partition::Matrix;
use crate::powerset::PowerSet;

/// Default modulus for sweeps and protocol runs: 2^31 - 1.
pub const DEFAULT_PRIME: u64 = 2_147_483_647;

/// A prime modulus below 2^32, so that the product of two reduced
/// values always fits in a `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeModulus {
    p: u64,
    mu: u64,
    r64: u64,
}

/// Canonical representative in `[0, p)`.
pub type FieldElement = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Inv,
    Pow,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl PrimeModulus {
    pub fn new(p: u64) -> Result<Self> {
        if p >= 1 << 32 {
            return Err(Error::ModulusTooLarge(p));
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let mu = u64::MAX / p;
        let r64 = ((1u128 << 64) % p as u128) as u64;
        Ok(PrimeModulus { p, mu, r64 })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// Barrett reduction of any `u64`.
    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        let q = ((x as u128 * self.mu as u128) >> 64) as u64;
        let mut r = x - q * self.p;
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    #[inline]
    pub fn reduce_wide(&self, x: u128) -> u64 {
        let hi = self.reduce((x >> 64) as u64);
        let lo = self.reduce(x as u64);
        self.add(self.reduce(hi * self.r64), lo)
    }

    /// Maps a signed integer into the field.
    pub fn from_i64(&self, x: i64) -> u64 {
        let r = x.rem_euclid(self.p as i64);
        r as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a * b)
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = self.reduce(a);
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = self.reduce(a);
        if a == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.p - 2))
    }

    /// Single entry point for the five scalar operations. For `Pow` the
    /// second operand is the exponent; for `Inv` it is ignored.
    pub fn apply(&self, op: FieldOp, a: u64, b: u64) -> Result<u64> {
        let a = self.reduce(a);
        match op {
            FieldOp::Add => Ok(self.add(a, self.reduce(b))),
            FieldOp::Sub => Ok(self.sub(a, self.reduce(b))),
            FieldOp::Mul => Ok(self.mul(a, self.reduce(b))),
            FieldOp::Inv => self.inv(a),
            FieldOp::Pow => Ok(self.pow(a, b)),
        }
    }

    /// Inner product of two slices of reduced values.
    #[inline]
    pub fn dot(&self, a: &[u64], b: &[u64]) -> u64 {
        let mut acc: u128 = 0;
        for (x, y) in a.iter().zip(b) {
            acc += (*x * *y) as u128;
        }
        self.reduce_wide(acc)
    }

    /// Uniform element of the field.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.p)
    }

    /// `[1, a, a^2, ..., a^max]`.
    pub fn powers(&self, a: u64, max: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(max + 1);
        let mut cur = 1 % self.p;
        for _ in 0..=max {
            out.push(cur);
            cur = self.mul(cur, a);
        }
        out
    }
}

/// Distinct nonzero evaluation points, one per worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPointSet {
    alphas: Vec<u64>,
}

impl EvalPointSet {
    /// Draws `n` points without replacement from `[1, p)`.
    pub fn draw<R: Rng + ?Sized>(field: &PrimeModulus, n: usize, rng: &mut R) -> Result<Self> {
        let avail = (field.p() - 1) as usize;
        if n > avail {
            return Err(Error::FieldTooSmall { needed: n, p: field.p() });
        }
        let alphas = rand::seq::index::sample(rng, avail, n)
            .into_iter()
            .map(|i| i as u64 + 1)
            .collect();
        Ok(EvalPointSet { alphas })
    }

    pub fn from_vec(field: &PrimeModulus, alphas: Vec<u64>) -> Result<Self> {
        let mut seen = HashSet::new();
        for &a in &alphas {
            if a == 0 || a >= field.p() {
                return Err(Error::OutOfRange(format!("evaluation point {a}")));
            }
            if !seen.insert(a) {
                return Err(Error::DegeneratePoints);
            }
        }
        Ok(EvalPointSet { alphas })
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Coefficients (lowest first) of `prod (x - r)`.
pub fn poly_from_roots(field: &PrimeModulus, roots: &[u64]) -> Vec<u64> {
    let mut c = vec![1 % field.p()];
    for &r in roots {
        let nr = field.neg(r);
        c.push(0);
        for k in (0..c.len()).rev() {
            let below = if k > 0 { c[k - 1] } else { 0 };
            c[k] = field.add(field.mul(c[k], nr), below);
        }
    }
    c
}

fn check_distinct(xs: &[u64]) -> Result<()> {
    let mut seen = HashSet::with_capacity(xs.len());
    for &x in xs {
        if !seen.insert(x) {
            return Err(Error::DegeneratePoints);
        }
    }
    Ok(())
}

/// Calls `visit(n, w_n, q)` where `q` holds the coefficients of
/// `M(x) / (x - x_n)` and `w_n = 1 / M'(x_n)`, so that `w_n * q` is the
/// n-th Lagrange basis polynomial.
fn for_each_basis<F>(field: &PrimeModulus, xs: &[u64], mut visit: F) -> Result<()>
where
    F: FnMut(usize, u64, &[u64]),
{
    check_distinct(xs)?;
    let n = xs.len();
    let m = poly_from_roots(field, xs);
    let mut q = vec![0u64; n];
    for (idx, &a) in xs.iter().enumerate() {
        q[n - 1] = m[n];
        for j in (1..n).rev() {
            q[j - 1] = field.add(m[j], field.mul(a, q[j]));
        }
        let mut d = 0u64;
        for j in (0..n).rev() {
            d = field.add(field.mul(d, a), q[j]);
        }
        let w = field.inv(d).map_err(|_| Error::DegeneratePoints)?;
        visit(idx, w, &q);
    }
    Ok(())
}

/// `basis[n][k]` is the coefficient of `x^k` in the n-th Lagrange basis
/// polynomial over the points `xs`.
pub fn lagrange_basis(field: &PrimeModulus, xs: &[u64]) -> Result<Vec<Vec<u64>>> {
    let mut out = vec![Vec::new(); xs.len()];
    for_each_basis(field, xs, |n, w, q| {
        out[n] = q.iter().map(|&c| field.mul(c, w)).collect();
    })?;
    Ok(out)
}

/// Blockwise interpolation: every matrix entry is interpolated on its own.
/// Uses the first `degree_bound + 1` points and checks the rest agree.
pub fn lagrange_interpolate(
    field: &PrimeModulus,
    points: &[(u64, Matrix)],
    degree_bound: usize,
) -> Result<Vec<Matrix>> {
    let need = degree_bound + 1;
    if points.len() < need {
        return Err(Error::InsufficientEvaluations { needed: need, got: points.len() });
    }
    let xs: Vec<u64> = points.iter().map(|(x, _)| field.reduce(*x)).collect();
    check_distinct(&xs)?;
    let (rows, cols) = points[0].1.shape();
    if points.iter().any(|(_, m)| m.shape() != (rows, cols)) {
        return Err(Error::ShapeMismatch("interpolation values differ in shape".into()));
    }
    let basis = lagrange_basis(field, &xs[..need])?;
    let mut coeffs = vec![Matrix::zeros(rows, cols); need];
    let mut column = vec![0u64; need];
    for e in 0..rows * cols {
        for (n, (_, m)) in points[..need].iter().enumerate() {
            column[n] = m.data()[e];
        }
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc: u128 = 0;
            for n in 0..need {
                acc += (basis[n][k] * column[n]) as u128;
            }
            c.data_mut()[e] = field.reduce_wide(acc);
        }
    }
    for (x, m) in &points[need..] {
        let pw = field.powers(*x, degree_bound);
        for e in 0..rows * cols {
            let v = coeffs
                .iter()
                .zip(&pw)
                .fold(0u64, |acc, (c, p)| field.add(acc, field.mul(c.data()[e], *p)));
            if v != m.data()[e] {
                return Err(Error::InconsistentEvaluations(degree_bound));
            }
        }
    }
    Ok(coeffs)
}

/// Extraction weights for one target power; see [`sparse_extraction_rows`].
pub fn sparse_extraction_coefficients(
    field: &PrimeModulus,
    alphas: &[u64],
    support: &PowerSet,
    target_power: u64,
) -> Result<Vec<u64>> {
    Ok(sparse_extraction_rows(field, alphas, support, &[target_power])?.remove(0))
}

/// For each target `u`, returns `r` with `sum_n r_n f(alpha_n) = [x^u] f`
/// for every `f` supported on `support`.
///
/// Works through `f = rho + q M` where `M = prod (x - alpha_n)`, `rho`
/// interpolates the values and `q` (degree below the hole count) is fixed
/// by requiring zero coefficients at the holes of the support.
pub fn sparse_extraction_rows(
    field: &PrimeModulus,
    alphas: &[u64],
    support: &PowerSet,
    targets: &[u64],
) -> Result<Vec<Vec<u64>>> {
    let n = alphas.len();
    if n != support.len() {
        return Err(Error::SupportSizeMismatch { points: n, support: support.len() });
    }
    for &u in targets {
        if !support.contains(u) {
            return Err(Error::TargetNotInSupport(u));
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let top = support.max().unwrap_or(0) as usize;
    let holes: Vec<usize> = (0..=top).filter(|&k| !support.contains(k as u64)).collect();
    let h = holes.len();

    // Rows of the inverse standard Vandermonde that we actually need.
    let mut wanted: Vec<usize> = targets.iter().map(|&u| u as usize).collect();
    wanted.extend(holes.iter().copied());
    wanted.sort_unstable();
    wanted.dedup();
    let slot: std::collections::HashMap<usize, usize> =
        wanted.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut lc = vec![vec![0u64; n]; wanted.len()];
    for_each_basis(field, alphas, |idx, w, q| {
        for (i, &k) in wanted.iter().enumerate() {
            if k < n {
                lc[i][idx] = field.mul(q[k], w);
            }
        }
    })
    .map_err(|_| Error::SingularVandermonde)?;

    if h == 0 {
        return Ok(targets.iter().map(|&u| lc[slot[&(u as usize)]].clone()).collect());
    }

    let m = poly_from_roots(field, alphas);
    let mcoef = |k: usize, i: usize| -> u64 {
        if k >= i && k - i < m.len() {
            m[k - i]
        } else {
            0
        }
    };
    // Solve T^T y = a_u with T[k][i] = m_{k-i} over holes k and i < h.
    let tt: Vec<Vec<u64>> = (0..h)
        .map(|i| holes.iter().map(|&k| mcoef(k, i)).collect())
        .collect();
    let rhs: Vec<Vec<u64>> = (0..h)
        .map(|i| targets.iter().map(|&u| mcoef(u as usize, i)).collect())
        .collect();
    let y = solve(field, tt, rhs).map_err(|_| Error::SingularVandermonde)?;

    let mut out = Vec::with_capacity(targets.len());
    for (ti, &u) in targets.iter().enumerate() {
        let mut acc: Vec<u128> = lc[slot[&(u as usize)]].iter().map(|&v| v as u128).collect();
        for (hi, &k) in holes.iter().enumerate() {
            let c = field.neg(y[hi][ti]);
            if c == 0 || k >= n {
                continue;
            }
            for (a, &l) in acc.iter_mut().zip(&lc[slot[&k]]) {
                *a += (c * l) as u128;
            }
        }
        out.push(acc.into_iter().map(|a| field.reduce_wide(a)).collect());
    }
    Ok(out)
}

/// Gaussian elimination for `A X = B` with `A` square. Consumes inputs.
pub fn solve(field: &PrimeModulus, mut a: Vec<Vec<u64>>, mut b: Vec<Vec<u64>>) -> Result<Vec<Vec<u64>>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) || b.len() != n {
        return Err(Error::ShapeMismatch("solve expects a square system".into()));
    }
    for col in 0..n {
        let piv = (col..n).find(|&r| a[r][col] != 0).ok_or(Error::SingularVandermonde)?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = field.inv(a[col][col])?;
        for v in a[col].iter_mut() {
            *v = field.mul(*v, inv);
        }
        for v in b[col].iter_mut() {
            *v = field.mul(*v, inv);
        }
        let (prow_a, prow_b) = (a[col].clone(), b[col].clone());
        for r in 0..n {
            if r == col || a[r][col] == 0 {
                continue;
            }
            let f = field.neg(a[r][col]);
            for (x, &y) in a[r][col..].iter_mut().zip(&prow_a[col..]) {
                *x = field.add(*x, field.mul(f, y));
            }
            for (x, &y) in b[r].iter_mut().zip(&prow_b) {
                *x = field.add(*x, field.mul(f, y));
            }
        }
    }
    Ok(b)
}

/// Rank of an arbitrary matrix given as rows.
pub fn rank(field: &PrimeModulus, mut rows: Vec<Vec<u64>>) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for col in 0..ncols {
        let Some(piv) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, piv);
        let inv = field.inv(rows[r][col]).expect("pivot is nonzero");
        let prow: Vec<u64> = rows[r].iter().map(|&v| field.mul(v, inv)).collect();
        for i in r + 1..rows.len() {
            let f = rows[i][col];
            if f == 0 {
                continue;
            }
            let nf = field.neg(f);
            for (x, &y) in rows[i].iter_mut().zip(&prow) {
                *x = field.add(*x, field.mul(nf, y));
            }
        }
        rows[r] = prow;
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}
