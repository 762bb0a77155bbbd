//! Closed-form worker counts, the `λ` minimization for AGE, recovery
//! thresholds and the region predicates comparing PolyDot with the baselines.

use num_rational::Ratio;

use crate::codes::{upsilon_prime, Scheme, SchemeParams};
use crate::error::{Error, Result};

type Q = Ratio<i64>;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerCountBreakdown {
    pub scheme: Scheme,
    pub s: u64,
    pub t: u64,
    pub z: u64,
    pub n: u64,
    pub branch: &'static str,
    pub lambda_star: Option<u64>,
}

/// Number of `I(α_n)` values the master needs.
pub fn recovery_threshold(t: u64, z: u64) -> u64 {
    t * t + z
}

fn exactly_one(guards: &[(bool, &'static str)], what: &str) -> Result<&'static str> {
    let hits: Vec<&'static str> = guards.iter().filter(|g| g.0).map(|g| g.1).collect();
    match hits.as_slice() {
        [one] => Ok(one),
        _ => Err(Error::InternalBranchError(format!("{what}: guards matched {hits:?}"))),
    }
}

pub fn n_polydot(s: u64, t: u64, z: u64) -> Result<WorkerCountBreakdown> {
    let params = SchemeParams::polydot(s, t, z)?;
    let (si, ti, zi) = (s as i64, t as i64, z as i64);
    let ts = ti * si;
    let thp = params.theta_prime() as i64;
    let p = params.p() as i64;
    let ups = upsilon_prime(s, t);
    let both = s != 1 && t != 1;
    let zq = q(zi);
    let branch = exactly_one(
        &[
            (ts < zi || t == 1, "psi1"),
            (ts - ti < zi && zi <= ts && both, "psi2"),
            (ts - 2 * ti < zi && zi <= ts - ti && both, "psi3"),
            (ups < zq && zi <= ts - 2 * ti && both, "psi4"),
            (zq <= ups && both, "psi5"),
            (s == 1 && t >= z && t != 1, "psi6"),
        ],
        "n_polydot",
    )?;
    let n = match branch {
        "psi1" => (p + 2) * ts + thp * (ti - 1) + 2 * zi - 1,
        "psi2" => 2 * ts + thp * (ti - 1) + 3 * zi - 1,
        "psi3" => 2 * ts + thp * (ti - 1) + 2 * zi - 1,
        "psi4" => (ti + 1) * ts + (ti - 1) * (zi + ti - 1) + 2 * zi - 1,
        "psi5" => thp * ti + zi,
        _ => ti * ti + 2 * ti + ti * zi - 1,
    };
    Ok(WorkerCountBreakdown { scheme: Scheme::PolyDot, s, t, z, n: n as u64, branch, lambda_star: None })
}

/// `Γ(λ)` for `t ≥ 2`, `0 ≤ λ ≤ z`, with the label of the branch used.
pub fn gamma_age(s: u64, t: u64, z: u64, lambda: u64) -> Result<(u64, &'static str)> {
    if t < 2 {
        return Err(Error::InvalidParameters("Γ(λ) needs t >= 2; use n_age for t = 1".into()));
    }
    if lambda > z {
        return Err(Error::OutOfRange(format!("lambda={lambda} > z={z}")));
    }
    let params = SchemeParams::age(s, t, z, lambda)?;
    let (si, ti, zi, li) = (s as i64, t as i64, z as i64, lambda as i64);
    let ts = ti * si;
    let th = params.theta() as i64;
    let qq = params.q() as i64;
    let inner = 0 < li && li < zi;
    let branch = exactly_one(
        &[
            (zi > ts - si && li == 0, "upsilon1"),
            (zi <= ts - si && li == 0, "upsilon2"),
            (li == zi, "upsilon3"),
            (zi > ts && inner, "upsilon4"),
            (zi <= ts && inner && ts < li + si - 1, "upsilon5"),
            (li + si - 1 < zi && zi <= ts && inner && qq * li >= si, "upsilon6"),
            (li + si - 1 < zi && zi <= ts && inner && qq * li < si, "upsilon7"),
            (zi <= li + si - 1 && li + si - 1 <= ts && inner && qq * li >= si, "upsilon8"),
            (zi <= li + si - 1 && li + si - 1 <= ts && inner && qq * li < si, "upsilon9"),
        ],
        "gamma_age",
    )?;
    let n = match branch {
        "upsilon1" => 2 * si * ti * ti + 2 * zi - 1,
        "upsilon2" => si * ti * ti + 3 * si * ti - 2 * si + ti * (zi - 1) + 1,
        "upsilon3" => 2 * ts + (ts + zi) * (ti - 1) + 2 * zi - 1,
        "upsilon4" => (qq + 2) * ts + th * (ti - 1) + 2 * zi - 1,
        "upsilon5" => 3 * ts + th * (ti - 1) + 2 * zi - 1,
        "upsilon6" => 2 * ts + th * (ti - 1) + (qq + 2) * zi - qq - 1,
        "upsilon7" => {
            th * (ti + 1) + qq * (zi - 1) - 2 * li + zi + ts + 0.min(zi + si * (1 - ti) - li * qq - 1)
        }
        "upsilon8" => 2 * ts + th * (ti - 1) + 3 * zi + (li + si - 1) * qq - li - si - 1,
        _ => th * (ti + 1) + qq * (si - 1) - 3 * li + 3 * zi - 1 + 0.min(ts - zi + 1 + li * qq - si),
    };
    Ok((n as u64, branch))
}

/// `min_λ Γ(λ)` with the smallest minimizer; `2s + 2z - 1` when `t = 1`.
pub fn n_age(s: u64, t: u64, z: u64) -> Result<WorkerCountBreakdown> {
    SchemeParams::age(s, t, z, 0)?;
    if t == 1 {
        return Ok(WorkerCountBreakdown {
            scheme: Scheme::Age,
            s,
            t,
            z,
            n: 2 * s + 2 * z - 1,
            branch: "t=1",
            lambda_star: None,
        });
    }
    let mut best: Option<(u64, &'static str, u64)> = None;
    for lambda in 0..=z {
        let (n, b) = gamma_age(s, t, z, lambda)?;
        if best.is_none_or(|(bn, _, _)| n < bn) {
            best = Some((n, b, lambda));
        }
    }
    let (n, branch, l) = best.expect("λ range is non-empty");
    Ok(WorkerCountBreakdown { scheme: Scheme::Age, s, t, z, n, branch, lambda_star: Some(l) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineCounts {
    pub entangled: u64,
    pub ssmm: u64,
    pub gcsa_na: u64,
}

pub fn entangled_branch(s: u64, t: u64, z: u64) -> (u64, &'static str) {
    if z + s > t * s {
        (2 * s * t * t + 2 * z - 1, "z>ts-s")
    } else {
        (s * t * t + 3 * s * t - 2 * s + t * (z - 1) + 1, "z<=ts-s")
    }
}

pub fn baseline_counts(s: u64, t: u64, z: u64) -> BaselineCounts {
    BaselineCounts {
        entangled: entangled_branch(s, t, z).0,
        ssmm: (t + 1) * (t * s + z) - 1,
        gcsa_na: 2 * s * t * t + 2 * z - 1,
    }
}

/// Worker count for any of the five schemes.
pub fn required_workers(scheme: Scheme, s: u64, t: u64, z: u64) -> Result<WorkerCountBreakdown> {
    if s == 0 || t == 0 || z == 0 {
        return Err(Error::InvalidParameters(format!("s={s}, t={t}, z={z} must all be positive")));
    }
    let b = baseline_counts(s, t, z);
    let (n, branch) = match scheme {
        Scheme::PolyDot => return n_polydot(s, t, z),
        Scheme::Age => return n_age(s, t, z),
        Scheme::Entangled => entangled_branch(s, t, z),
        Scheme::Ssmm => (b.ssmm, "baseline"),
        Scheme::GcsaNa => (b.gcsa_na, "baseline"),
    };
    Ok(WorkerCountBreakdown { scheme, s, t, z, n, branch, lambda_star: None })
}

/// Closed form for `λ > z` (no `Γ` branch covers it).
pub fn large_gap_count(s: u64, t: u64, z: u64, lambda: u64) -> Result<u64> {
    if t < 2 || lambda < z {
        return Err(Error::InvalidParameters(format!("need t >= 2 and lambda >= z, got t={t}, lambda={lambda}")));
    }
    let ts = t * s;
    Ok(if lambda <= z + s - 1 {
        2 * ts + (ts + lambda) * (t - 1) + 2 * z - 1
    } else {
        2 * ts + (ts + z + s - 1) * (t - 1) + 2 * z - 1
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    /// PolyDot vs Entangled-CMPC.
    One,
    /// PolyDot vs SSMM.
    Two,
    /// PolyDot vs GCSA-NA.
    Three,
    /// AGE vs everything.
    Six,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    StrictlyLess,
    Geq,
    Leq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionVerdict {
    pub comparison: Comparison,
    /// 1-based indices of the listed conditions that hold.
    pub fired: Vec<usize>,
}

fn lemma1_conditions(s: i64, t: i64, z: i64, p: i64) -> Vec<bool> {
    let ts = t * s;
    let both = s != 1 && t != 1;
    let ups = upsilon_prime(s as u64, t as u64);
    let zq = q(z);
    vec![
        z > ts && q(p) < Q::new(t - 1, s) && t != 1,
        ts - s < z && z <= ts && t - 1 > s && both,
        (t - 1) * (t - 1) < z && z < t * (t - 1) && s == t - 1 && both,
        t > 3 && s != 1 && {
            let m = q(0).min(q(1) - Q::new(2 * s - 5, t - 3));
            q(ts - t) - m < zq && z <= ts - s
        },
        s == 2 && t == 3 && z == 4,
        t == 2 && s == 2 && (z == 1 || z == 2),
        t > 2 && t >= s && s != 1 && {
            let lo = (q(s * t - t - s) - Q::new(2, t - 2)).max(q(ts - 2 * t));
            lo < zq && z <= ts - t
        },
        t < s && s <= 2 * t && ts - s < z && z <= ts - t && both,
        t == 2 && 3 <= s && s <= 4 && 2 * (s - 2) < z && z <= 2 * (s - 1),
        s * t - 2 * t < z && z <= ts - s && t > 2 && t < s && s <= 2 * t,
        s > 2 * t && ts - 2 * t < z && z <= ts - t && both,
        2 * t >= s && both && ups < zq && z <= (s * t - 2 * t).min(2 * ts - t * t + t - 2 * s + 1),
        s > 2 * t && ts - s < z && z <= ts - 2 * t && t != 1 && t != 2,
        4 < s && s < z && z < 2 * s - 4 && t == 2,
        ts - 2 * t - s + 2 < z && z < ts - s && 2 * t < s && both,
        both && q(s * t - 2 * s - t) - Q::new(1, t - 1) < zq && zq <= ups,
    ]
}

fn lemma2_conditions(s: i64, t: i64, z: i64, p: i64) -> Vec<bool> {
    let ts = t * s;
    vec![
        t != 1 && q(z) > q(ts).max(q(ts - t) + Q::new(p * ts, t - 1)),
        // Undefined at t = 2; the condition is read as false there.
        t != 2 && Q::new(t - 1, t - 2) * q(s * t - t) < q(z) && z <= ts,
    ]
}

fn lemma3_conditions(s: i64, t: i64, z: i64, p: i64) -> Vec<bool> {
    let ts = t * s;
    vec![
        z > ts && q(p) < Q::new(t - 1, s) && t != 1,
        s < t && ts - t < z && z <= ts.min(t * (t - 1) - 1),
        z <= ts - t,
        s == 1 && t > z && t != 2,
    ]
}

/// Evaluates the listed region predicates as printed.
pub fn lemma_region_check(lemma: Lemma, s: u64, t: u64, z: u64) -> Result<RegionVerdict> {
    if lemma == Lemma::Six {
        SchemeParams::age(s, t, z, 0)?;
        return Ok(RegionVerdict { comparison: Comparison::Leq, fired: vec![] });
    }
    let params = SchemeParams::polydot(s, t, z)?;
    let (si, ti, zi, p) = (s as i64, t as i64, z as i64, params.p() as i64);
    let conds = match lemma {
        Lemma::One => lemma1_conditions(si, ti, zi, p),
        Lemma::Two => lemma2_conditions(si, ti, zi, p),
        _ => lemma3_conditions(si, ti, zi, p),
    };
    let fired: Vec<usize> = conds.iter().enumerate().filter(|c| *c.1).map(|c| c.0 + 1).collect();
    let comparison = if fired.is_empty() { Comparison::Geq } else { Comparison::StrictlyLess };
    Ok(RegionVerdict { comparison, fired })
}

/// The comparison a lemma describes, computed from the closed forms directly.
pub fn direct_comparison(lemma: Lemma, s: u64, t: u64, z: u64) -> Result<Comparison> {
    let b = baseline_counts(s, t, z);
    if lemma == Lemma::Six {
        let age = n_age(s, t, z)?.n;
        let mut others = vec![b.entangled, b.ssmm, b.gcsa_na];
        if !(s == 1 && t == 1) {
            others.push(n_polydot(s, t, z)?.n);
        }
        let ok = others.iter().all(|&o| age <= o);
        return Ok(if ok { Comparison::Leq } else { Comparison::Geq });
    }
    let pd = n_polydot(s, t, z)?.n;
    let other = match lemma {
        Lemma::One => b.entangled,
        Lemma::Two => b.ssmm,
        _ => b.gcsa_na,
    };
    Ok(if pd < other { Comparison::StrictlyLess } else { Comparison::Geq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn example_one() {
        let a = n_age(2, 2, 2).unwrap();
        assert_eq!((a.n, a.lambda_star), (17, Some(2)));
        assert_eq!(gamma_age(2, 2, 2, 2).unwrap(), (17, "upsilon3"));
        assert_eq!(gamma_age(2, 2, 2, 0).unwrap(), (19, "upsilon2"));
        assert_eq!(baseline_counts(2, 2, 2), BaselineCounts { entangled: 19, ssmm: 17, gcsa_na: 19 });
    }

    #[test]
    fn polydot_examples() {
        let b = n_polydot(2, 2, 2).unwrap();
        assert_eq!((b.n, b.branch), (17, "psi3"));
        assert_eq!(n_polydot(3, 1, 2).unwrap().n, 9);
        let b = n_polydot(1, 4, 3).unwrap();
        assert_eq!((b.n, b.branch), (35, "psi6"));
        assert!(matches!(n_polydot(1, 1, 1), Err(Error::UnsupportedPartition { .. })));
    }

    #[test]
    fn age_edges() {
        assert_eq!(n_age(5, 1, 3).unwrap().n, 15);
        assert!(matches!(gamma_age(2, 2, 2, 3), Err(Error::OutOfRange(_))));
        assert!(gamma_age(2, 1, 2, 1).is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(recovery_threshold(2, 2), 6);
        assert_eq!(recovery_threshold(1, 1), 2);
        assert_eq!(recovery_threshold(3, 4), 13);
    }

    #[test]
    fn lemma_examples() {
        let v = lemma_region_check(Lemma::Three, 3, 4, 5).unwrap();
        assert_eq!(v.comparison, Comparison::StrictlyLess);
        assert!(v.fired.contains(&3));
        assert_eq!(direct_comparison(Lemma::Three, 3, 4, 5).unwrap(), Comparison::StrictlyLess);
        assert_eq!(direct_comparison(Lemma::Six, 4, 15, 42).unwrap(), Comparison::Leq);
        // (t-1)(st-t)/(t-2) = 14*45/13 = 48.46..., so z = 49 is just inside.
        assert_eq!(lemma_region_check(Lemma::Two, 4, 15, 49).unwrap().comparison, Comparison::StrictlyLess);
        assert_eq!(direct_comparison(Lemma::Two, 4, 15, 49).unwrap(), Comparison::StrictlyLess);
        assert_eq!(lemma_region_check(Lemma::Two, 4, 15, 48).unwrap().comparison, Comparison::Geq);
    }

    #[test]
    fn large_gap_examples() {
        assert_eq!(large_gap_count(2, 2, 2, 3).unwrap(), 2 * 4 + 7 + 3);
        assert_eq!(large_gap_count(2, 2, 2, 9).unwrap(), 2 * 4 + 7 + 3);
    }

    proptest! {
        #[test]
        fn entangled_is_gamma_zero(s in 1u64..13, t in 2u64..13, z in 1u64..80) {
            prop_assert_eq!(baseline_counts(s, t, z).entangled, gamma_age(s, t, z, 0).unwrap().0);
        }

        #[test]
        fn ssmm_is_gamma_z(s in 1u64..13, t in 2u64..13, z in 1u64..80) {
            prop_assert_eq!(baseline_counts(s, t, z).ssmm, gamma_age(s, t, z, z).unwrap().0);
        }

        #[test]
        fn counts_cover_threshold(s in 1u64..13, t in 1u64..13, z in 1u64..80) {
            prop_assert!(n_age(s, t, z).unwrap().n >= recovery_threshold(t, z));
            if !(s == 1 && t == 1) {
                prop_assert!(n_polydot(s, t, z).unwrap().n >= recovery_threshold(t, z));
            }
        }

        #[test]
        fn lambda_star_is_first_minimizer(s in 1u64..10, t in 2u64..10, z in 1u64..40) {
            let b = n_age(s, t, z).unwrap();
            let l = b.lambda_star.unwrap();
            let all: Vec<u64> = (0..=z).map(|x| gamma_age(s, t, z, x).unwrap().0).collect();
            prop_assert_eq!(b.n, *all.iter().min().unwrap());
            prop_assert!(all[..l as usize].iter().all(|&g| g > b.n));
            let rev = (0..=z).rev().map(|x| (gamma_age(s, t, z, x).unwrap().0, x)).min().unwrap();
            prop_assert_eq!(rev, (b.n, l));
        }
    }
}
