//! Coded and secret exponent layouts for PolyDot-CMPC, AGE-CMPC and
//! Entangled-CMPC (AGE with `λ = 0`), and share construction.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::PrimeModulus;
use crate::partition::{BlockMatrix, Matrix};
use crate::powerset::PowerSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    PolyDot,
    Age,
    Entangled,
    Ssmm,
    GcsaNa,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::PolyDot, Scheme::Age, Scheme::Entangled, Scheme::Ssmm, Scheme::GcsaNa];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::PolyDot => "polydot",
            Scheme::Age => "age",
            Scheme::Entangled => "entangled",
            Scheme::Ssmm => "ssmm",
            Scheme::GcsaNa => "gcsa-na",
        }
    }

    /// Schemes with a share construction (the others are counted only).
    pub fn constructible(self) -> bool {
        matches!(self, Scheme::PolyDot | Scheme::Age | Scheme::Entangled)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polydot" => Ok(Scheme::PolyDot),
            "age" => Ok(Scheme::Age),
            "entangled" => Ok(Scheme::Entangled),
            "ssmm" => Ok(Scheme::Ssmm),
            "gcsa-na" | "gcsana" | "gcsa" => Ok(Scheme::GcsaNa),
            other => Err(Error::Parse(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

/// `(scheme, s, t, z, λ)`. `λ` is zero for every scheme except AGE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeParams {
    scheme: Scheme,
    s: u64,
    t: u64,
    z: u64,
    lambda: u64,
}

fn check_positive(s: u64, t: u64, z: u64) -> Result<()> {
    if s == 0 || t == 0 || z == 0 {
        return Err(Error::InvalidParameters(format!("s={s}, t={t}, z={z} must all be positive")));
    }
    Ok(())
}

impl SchemeParams {
    pub fn polydot(s: u64, t: u64, z: u64) -> Result<Self> {
        check_positive(s, t, z)?;
        if s == 1 && t == 1 {
            return Err(Error::UnsupportedPartition { s, t });
        }
        Ok(SchemeParams { scheme: Scheme::PolyDot, s, t, z, lambda: 0 })
    }

    pub fn age(s: u64, t: u64, z: u64, lambda: u64) -> Result<Self> {
        if lambda > z {
            return Err(Error::OutOfRange(format!("lambda={lambda} > z={z}")));
        }
        Self::age_unbounded(s, t, z, lambda)
    }

    /// AGE with any `λ`, including `λ > z`; used for the large-gap analysis.
    pub fn age_unbounded(s: u64, t: u64, z: u64, lambda: u64) -> Result<Self> {
        check_positive(s, t, z)?;
        Ok(SchemeParams { scheme: Scheme::Age, s, t, z, lambda })
    }

    pub fn entangled(s: u64, t: u64, z: u64) -> Result<Self> {
        check_positive(s, t, z)?;
        Ok(SchemeParams { scheme: Scheme::Entangled, s, t, z, lambda: 0 })
    }

    pub fn count_only(scheme: Scheme, s: u64, t: u64, z: u64) -> Result<Self> {
        check_positive(s, t, z)?;
        Ok(SchemeParams { scheme, s, t, z, lambda: 0 })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn s(&self) -> u64 {
        self.s
    }
    pub fn t(&self) -> u64 {
        self.t
    }
    pub fn z(&self) -> u64 {
        self.z
    }
    pub fn lambda(&self) -> u64 {
        self.lambda
    }

    /// `θ' = t(2s-1)`.
    pub fn theta_prime(&self) -> u64 {
        self.t * (2 * self.s - 1)
    }

    /// `θ = ts + λ`.
    pub fn theta(&self) -> u64 {
        self.t * self.s + self.lambda
    }

    /// `p = min(⌊(z-1)/(ts-t)⌋, t-1)`, with `p = t-1` when `ts = t`.
    pub fn p(&self) -> u64 {
        let d = self.t * self.s - self.t;
        if d == 0 {
            self.t - 1
        } else {
            ((self.z - 1) / d).min(self.t - 1)
        }
    }

    /// `τ = θ' - ts - t`, negative when `s = 1`.
    pub fn tau(&self) -> i64 {
        self.theta_prime() as i64 - (self.t * self.s) as i64 - self.t as i64
    }

    /// `p' = min(⌊(z-1)/(τ-z+1)⌋, t-1)`, defined only when `τ - z + 1 > 0`.
    pub fn p_prime(&self) -> Option<u64> {
        let d = self.tau() - self.z as i64 + 1;
        (d > 0).then(|| ((self.z - 1) / d as u64).min(self.t - 1))
    }

    /// `q = min(⌊(z-1)/λ⌋, t-1)`, with `q = t-1` when `λ = 0`.
    pub fn q(&self) -> u64 {
        if self.lambda == 0 {
            self.t - 1
        } else {
            ((self.z - 1) / self.lambda).min(self.t - 1)
        }
    }

    /// `υ' = max(ts-2t-s+2, (ts-2t+1)/2)`.
    pub fn upsilon_prime(&self) -> Ratio<i64> {
        upsilon_prime(self.s, self.t)
    }

    fn uses_age_layout(&self) -> bool {
        matches!(self.scheme, Scheme::Age | Scheme::Entangled)
    }
}

pub fn upsilon_prime(s: u64, t: u64) -> Ratio<i64> {
    let (s, t) = (s as i64, t as i64);
    let a = Ratio::from_integer(t * s - 2 * t - s + 2);
    let b = Ratio::new(t * s - 2 * t + 1, 2);
    a.max(b)
}

/// Exponent assigned to block `(row, col)` of `A^T` (side A) or `B` (side B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockPower {
    pub row: usize,
    pub col: usize,
    pub power: u64,
}

/// Coded exponents, listed in row-major block order.
pub fn coded_powers(params: &SchemeParams, side: Side) -> Result<Vec<BlockPower>> {
    if !params.scheme.constructible() {
        return Err(Error::CountOnlyScheme(params.scheme.to_string()));
    }
    let (s, t) = (params.s, params.t);
    let mut out = Vec::with_capacity((s * t) as usize);
    match side {
        Side::A => {
            for i in 0..t {
                for j in 0..s {
                    let power = if params.uses_age_layout() { j + s * i } else { i + t * j };
                    out.push(BlockPower { row: i as usize, col: j as usize, power });
                }
            }
        }
        Side::B => {
            for k in 0..s {
                for l in 0..t {
                    let power = if params.uses_age_layout() {
                        (s - 1 - k) + params.theta() * l
                    } else {
                        t * (s - 1 - k) + params.theta_prime() * l
                    };
                    out.push(BlockPower { row: k as usize, col: l as usize, power });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretPowers {
    pub powers: PowerSet,
    pub branch: &'static str,
}

/// Picks the one branch whose guard holds; anything else is a transcription bug.
fn select<'a>(guards: &[(bool, &'a str)]) -> Result<&'a str> {
    let hits: Vec<&str> = guards.iter().filter(|g| g.0).map(|g| g.1).collect();
    match hits.as_slice() {
        [one] => Ok(one),
        _ => Err(Error::InternalBranchError(format!("guards matched: {hits:?}"))),
    }
}

/// `{base + θ·l + w : l < count, w < width}`.
fn strided(base: u64, stride: u64, count: u64, width: u64) -> impl Iterator<Item = u64> {
    (0..count).flat_map(move |l| (0..width).map(move |w| base + stride * l + w))
}

pub fn secret_powers(params: &SchemeParams, side: Side) -> Result<SecretPowers> {
    if !params.scheme.constructible() {
        return Err(Error::CountOnlyScheme(params.scheme.to_string()));
    }
    let (s, t, z) = (params.s, params.t, params.z);
    let ts = t * s;
    if params.scheme == Scheme::PolyDot {
        let th = params.theta_prime();
        match side {
            Side::A => {
                let branch = select(&[
                    (z > ts - t && s != 1 && t != 1, "F_A1"),
                    (z <= ts - t || t == 1 || s == 1, "F_A2"),
                ])?;
                let p = params.p();
                let powers = if branch == "F_A1" {
                    let tail = z - p * t * (s - 1);
                    strided(ts, th, p, ts - t).chain((0..tail).map(|u| ts + th * p + u)).collect()
                } else {
                    (0..z).map(|u| ts + th * p + u).collect()
                };
                Ok(SecretPowers { powers, branch })
            }
            Side::B => {
                let tau = params.tau();
                let zi = z as i64;
                let branch = select(&[
                    (zi > tau || t == 1 || s == 1, "F_B1"),
                    ((tau + 1) < 2 * zi && zi <= tau && s != 1 && t != 1, "F_B2"),
                    (2 * zi <= tau + 1 && s != 1 && t != 1, "F_B3"),
                ])?;
                let powers = match branch {
                    "F_B1" => (0..z).map(|r| ts + th * (t - 1) + r).collect(),
                    "F_B2" => {
                        let pp = params
                            .p_prime()
                            .ok_or_else(|| Error::InternalBranchError("p' undefined in F_B2".into()))?;
                        let width = (tau - zi + 1) as u64;
                        let tail = z - pp * width;
                        strided(ts, th, pp, width).chain((0..tail).map(|v| ts + th * pp + v)).collect()
                    }
                    _ => (0..z).map(|v| ts + v).collect(),
                };
                Ok(SecretPowers { powers, branch })
            }
        }
    } else {
        let th = params.theta();
        let lam = params.lambda;
        match side {
            Side::A => {
                let branch = select(&[(z > lam && t != 1, "S_A1"), (z <= lam || t == 1, "S_A2")])?;
                let powers = if branch == "S_A1" {
                    let q = params.q();
                    let tail = z - q * lam;
                    strided(ts, th, q, lam).chain((0..tail).map(|u| ts + th * q + u)).collect()
                } else {
                    (0..z).map(|u| ts + u).collect()
                };
                Ok(SecretPowers { powers, branch })
            }
            Side::B => Ok(SecretPowers {
                powers: (0..z).map(|r| ts + th * (t - 1) + r).collect(),
                branch: "S_B",
            }),
        }
    }
}

/// Sparse polynomial with matrix coefficients, split into coded and secret terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharePolynomial {
    side: Side,
    block_shape: (usize, usize),
    coded: Vec<(u64, Matrix)>,
    secret: Vec<(u64, Matrix)>,
}

impl SharePolynomial {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.block_shape
    }

    pub fn coded_terms(&self) -> &[(u64, Matrix)] {
        &self.coded
    }

    pub fn secret_terms(&self) -> &[(u64, Matrix)] {
        &self.secret
    }

    /// All terms sorted by exponent.
    pub fn terms(&self) -> Vec<(u64, &Matrix)> {
        let mut v: Vec<(u64, &Matrix)> = self.coded.iter().chain(&self.secret).map(|(e, m)| (*e, m)).collect();
        v.sort_by_key(|(e, _)| *e);
        v
    }

    pub fn support(&self) -> PowerSet {
        self.coded.iter().chain(&self.secret).map(|(e, _)| *e).collect()
    }

    pub fn degree(&self) -> u64 {
        self.support().max().unwrap_or(0)
    }

    /// Replaces every secret coefficient with zero (ablation control).
    pub fn without_masking(&self) -> SharePolynomial {
        let mut out = self.clone();
        for (_, m) in out.secret.iter_mut() {
            *m = Matrix::zeros(m.rows(), m.cols());
        }
        out
    }
}

/// `F = C + S`: data blocks at the coded exponents, fresh uniform blocks at
/// the secret exponents.
pub fn build_share<R: Rng + ?Sized>(
    field: &PrimeModulus,
    m: &BlockMatrix,
    params: &SchemeParams,
    side: Side,
    rng: &mut R,
) -> Result<SharePolynomial> {
    let (s, t) = (params.s as usize, params.t as usize);
    let want_grid = match side {
        Side::A => (t, s),
        Side::B => (s, t),
    };
    if m.grid() != want_grid {
        return Err(Error::ShapeMismatch(format!("block grid {:?}, expected {:?}", m.grid(), want_grid)));
    }
    let (h, w) = m.block_shape();
    let consistent = match side {
        Side::A => h * t == w * s,
        Side::B => h * s == w * t,
    };
    if !consistent {
        return Err(Error::ShapeMismatch(format!("block shape {h}x{w} does not fit s={s}, t={t}")));
    }
    let coded = coded_powers(params, side)?
        .into_iter()
        .map(|bp| (bp.power, m.block(bp.row, bp.col).clone()))
        .collect();
    let secret = secret_powers(params, side)?
        .powers
        .iter()
        .map(|e| (e, Matrix::random(field, h, w, rng)))
        .collect();
    Ok(SharePolynomial { side, block_shape: (h, w), coded, secret })
}

/// `Σ_k coeff_k α^k`.
pub fn evaluate_share(field: &PrimeModulus, f: &SharePolynomial, alpha: u64) -> Matrix {
    let (h, w) = f.block_shape;
    let mut acc = vec![0u128; h * w];
    for (e, c) in f.coded.iter().chain(&f.secret) {
        let a = field.pow(alpha, *e);
        for (x, &v) in acc.iter_mut().zip(c.data()) {
            *x += (a * v) as u128;
        }
    }
    let mut out = Matrix::zeros(h, w);
    for (o, x) in out.data_mut().iter_mut().zip(acc) {
        *o = field.reduce_wide(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{split, PartitionSpec, Role};
    use crate::powerset::{important_powers, minkowski_sum};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn map(v: &[BlockPower]) -> Vec<((usize, usize), u64)> {
        v.iter().map(|b| ((b.row, b.col), b.power)).collect()
    }

    fn set(v: &[BlockPower]) -> PowerSet {
        v.iter().map(|b| b.power).collect()
    }

    #[test]
    fn age_coded_examples() {
        let p = SchemeParams::age(2, 2, 2, 2).unwrap();
        assert_eq!(
            map(&coded_powers(&p, Side::A).unwrap()),
            vec![((0, 0), 0), ((0, 1), 1), ((1, 0), 2), ((1, 1), 3)]
        );
        let mut b = map(&coded_powers(&p, Side::B).unwrap());
        b.sort_by_key(|x| x.1);
        assert_eq!(b, vec![((1, 0), 0), ((0, 0), 1), ((1, 1), 6), ((0, 1), 7)]);
    }

    #[test]
    fn polydot_coded_b() {
        let p = SchemeParams::polydot(2, 2, 2).unwrap();
        assert_eq!(set(&coded_powers(&p, Side::B).unwrap()), PowerSet::new([0, 2, 6, 8]));
        assert_eq!(SchemeParams::polydot(1, 1, 3), Err(Error::UnsupportedPartition { s: 1, t: 1 }));
    }

    #[test]
    fn secret_examples() {
        let p = SchemeParams::age(2, 2, 2, 2).unwrap();
        assert_eq!(secret_powers(&p, Side::A).unwrap().powers, PowerSet::new([4, 5]));
        assert_eq!(secret_powers(&p, Side::B).unwrap().powers, PowerSet::new([10, 11]));
        let p = SchemeParams::polydot(2, 2, 2).unwrap();
        let sa = secret_powers(&p, Side::A).unwrap();
        assert_eq!(sa.branch, "F_A2");
        assert_eq!(sa.powers, PowerSet::new([4, 5]));
    }

    #[test]
    fn derived_scalars() {
        let p = SchemeParams::polydot(4, 15, 100).unwrap();
        assert_eq!(p.theta_prime(), 105);
        assert_eq!(p.tau(), 30);
        assert_eq!(p.p(), 2);
        assert_eq!(p.p_prime(), None);
        assert_eq!(p.upsilon_prime(), Ratio::from_integer(28));
        assert_eq!(SchemeParams::polydot(2, 3, 1).unwrap().upsilon_prime(), Ratio::new(1, 2));
        assert_eq!(SchemeParams::age(3, 4, 7, 3).unwrap().q(), 2);
        assert!(matches!(SchemeParams::age(2, 2, 2, 3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn count_only_has_no_layout() {
        let p = SchemeParams::count_only(Scheme::Ssmm, 2, 2, 2).unwrap();
        assert!(matches!(coded_powers(&p, Side::A), Err(Error::CountOnlyScheme(_))));
    }

    fn example_blocks(seed: u64) -> (PrimeModulus, BlockMatrix, BlockMatrix) {
        let f = PrimeModulus::new(101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = PartitionSpec::new(4, 2, 2).unwrap();
        let a = split(&Matrix::random(&f, 4, 4, &mut rng), spec, Role::ATransposed).unwrap();
        let b = split(&Matrix::random(&f, 4, 4, &mut rng), spec, Role::B).unwrap();
        (f, a, b)
    }

    #[test]
    fn build_layout_and_determinism() {
        let (f, a, _) = example_blocks(1);
        let p = SchemeParams::age(2, 2, 2, 2).unwrap();
        let fa = build_share(&f, &a, &p, Side::A, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(fa.support(), PowerSet::range(0, 6));
        assert_eq!(fa.secret_terms().len(), 2);
        let again = build_share(&f, &a, &p, Side::A, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(fa, again);
    }

    #[test]
    fn build_rejects_wrong_side() {
        let (f, a, _) = example_blocks(1);
        let p = SchemeParams::age(2, 3, 2, 2).unwrap();
        let r = build_share(&f, &a, &p, Side::A, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn evaluate_examples() {
        let (f, a, _) = example_blocks(2);
        let p = SchemeParams::age(2, 2, 2, 2).unwrap();
        let fa = build_share(&f, &a, &p, Side::A, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut sum = Matrix::zeros(2, 2);
        for (_, c) in fa.terms() {
            sum = sum.add(&f, c).unwrap();
        }
        assert_eq!(evaluate_share(&f, &fa, 1), sum);

        let f7 = PrimeModulus::new(7).unwrap();
        let c = Matrix::from_rows(vec![vec![3, 5]]).unwrap();
        let single = SharePolynomial { side: Side::A, block_shape: (1, 2), coded: vec![(3, c.clone())], secret: vec![] };
        assert_eq!(evaluate_share(&f7, &single, 2), c);
    }

    #[test]
    fn evaluate_matches_horner() {
        let (f, a, _) = example_blocks(5);
        let p = SchemeParams::polydot(2, 2, 3).unwrap();
        let fa = build_share(&f, &a, &p, Side::A, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let deg = fa.degree() as usize;
        let mut dense = vec![Matrix::zeros(2, 2); deg + 1];
        for (e, c) in fa.terms() {
            dense[e as usize] = c.clone();
        }
        for alpha in [2u64, 17, 100] {
            let mut h = Matrix::zeros(2, 2);
            for c in dense.iter().rev() {
                h = h.scale(&f, alpha).add(&f, c).unwrap();
            }
            assert_eq!(evaluate_share(&f, &fa, alpha), h);
        }
    }

    /// C1-C3 / C4-C6: secret terms never land on an important power, and
    /// coded and secret supports are disjoint.
    fn conditions_hold(p: &SchemeParams) -> bool {
        let imp = important_powers(p);
        let ca = set(&coded_powers(p, Side::A).unwrap());
        let cb = set(&coded_powers(p, Side::B).unwrap());
        let sa = secret_powers(p, Side::A).unwrap().powers;
        let sb = secret_powers(p, Side::B).unwrap().powers;
        sa.len() as u64 == p.z()
            && sb.len() as u64 == p.z()
            && ca.is_disjoint(&sa)
            && cb.is_disjoint(&sb)
            && minkowski_sum(&ca, &sb).is_disjoint(&imp)
            && minkowski_sum(&sa, &cb).is_disjoint(&imp)
            && minkowski_sum(&sa, &sb).is_disjoint(&imp)
    }

    proptest! {
        #[test]
        fn construction_conditions(s in 1u64..9, t in 1u64..9, z in 1u64..40, lf in 0.0f64..1.0) {
            let lambda = ((lf * (z as f64 + 1.0)) as u64).min(z);
            prop_assert!(conditions_hold(&SchemeParams::age(s, t, z, lambda).unwrap()));
            if !(s == 1 && t == 1) {
                prop_assert!(conditions_hold(&SchemeParams::polydot(s, t, z).unwrap()));
            }
        }

        #[test]
        fn entangled_is_age_zero(s in 1u64..9, t in 1u64..9, z in 1u64..40) {
            let e = SchemeParams::entangled(s, t, z).unwrap();
            let a = SchemeParams::age(s, t, z, 0).unwrap();
            for side in [Side::A, Side::B] {
                prop_assert_eq!(coded_powers(&e, side).unwrap(), coded_powers(&a, side).unwrap());
                prop_assert_eq!(secret_powers(&e, side).unwrap(), secret_powers(&a, side).unwrap());
            }
        }

        #[test]
        fn gap_shifts_fb_degree(s in 1u64..9, t in 2u64..9, z in 1u64..40) {
            let deg = |lam| {
                let p = SchemeParams::age(s, t, z, lam).unwrap();
                set(&coded_powers(&p, Side::B).unwrap()).union(&secret_powers(&p, Side::B).unwrap().powers).max().unwrap()
            };
            prop_assert_eq!(deg(z) - deg(0), z * (t - 1));
        }
    }
}
