//! Checks for the z-collusion privacy mechanics: the masking Vandermonde
//! rank condition, and exhaustive view enumeration over a tiny field.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;

use crate::codes::{coded_powers, secret_powers, SchemeParams, Side};
use crate::counts::recovery_threshold;
use crate::error::{Error, Result};
use crate::field::{rank, PrimeModulus};
use crate::partition::{split, Matrix, PartitionSpec, Role};
use crate::powerset::{h_support, PowerSet};

/// Largest number of subsets enumerated before switching to sampling.
pub const SUBSET_LIMIT: u64 = 10_000;

/// The observations of a colluding set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollusionView {
    pub workers: Vec<usize>,
    pub share_a: Vec<Matrix>,
    pub share_b: Vec<Matrix>,
    /// `received[c][n']` is `G_{n'}(α_c)` for colluder `c`.
    pub received: Vec<Vec<Matrix>>,
}

impl CollusionView {
    pub fn from_transcript(tr: &crate::protocol::Transcript, workers: &[usize]) -> Result<Self> {
        if workers.len() as u64 > tr.params.z() {
            return Err(Error::OutOfRange(format!("{} colluders with z={}", workers.len(), tr.params.z())));
        }
        let mut v = CollusionView { workers: workers.to_vec(), share_a: vec![], share_b: vec![], received: vec![] };
        for &w in workers {
            let rec = tr.workers.get(w).ok_or_else(|| Error::OutOfRange(format!("worker {w}")))?;
            v.share_a.push(rec.share_a.clone());
            v.share_b.push(rec.share_b.clone());
            v.received.push((0..tr.n_workers).map(|s| tr.g_value(s, w)).collect());
        }
        Ok(v)
    }
}

fn full_row_rank(field: &PrimeModulus, alphas: &[u64], subset: &[usize], powers: &PowerSet) -> bool {
    let rows: Vec<Vec<u64>> = subset
        .iter()
        .map(|&n| powers.iter().map(|e| field.pow(alphas[n], e)).collect())
        .collect();
    rank(field, rows) == subset.len()
}

/// True when `M[n][w] = α_n^{e_w}` has full row rank over the secret powers
/// of `F_A`, of `F_B` and of every `G_{n'}` (`t², ..., t²+z-1`). With
/// `|subset| = z` this is nonsingularity.
pub fn masking_rank_check(field: &PrimeModulus, params: &SchemeParams, alphas: &[u64], subset: &[usize]) -> Result<bool> {
    let z = params.z();
    if subset.len() as u64 > z {
        return Err(Error::OutOfRange(format!("{} colluders with z={z}", subset.len())));
    }
    if let Some(&bad) = subset.iter().find(|&&n| n >= alphas.len()) {
        return Err(Error::OutOfRange(format!("worker {bad}")));
    }
    let tt = recovery_threshold(params.t(), 0);
    let g = PowerSet::range(tt, tt + z);
    let sa = secret_powers(params, Side::A)?.powers;
    let sb = secret_powers(params, Side::B)?.powers;
    Ok([sa, sb, g].iter().all(|p| full_row_rank(field, alphas, subset, p)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSweep {
    pub checked: u64,
    pub exhaustive: bool,
    pub failures: Vec<Vec<usize>>,
}

impl SubsetSweep {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

fn binomial_capped(n: u64, k: u64, cap: u64) -> u64 {
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > cap as u128 {
            return cap + 1;
        }
    }
    c as u64
}

/// Runs the rank check over every z-subset of workers when there are at
/// most [`SUBSET_LIMIT`] of them, otherwise over that many random subsets.
pub fn sweep_subsets<R: Rng + ?Sized>(
    field: &PrimeModulus,
    params: &SchemeParams,
    alphas: &[u64],
    rng: &mut R,
) -> Result<SubsetSweep> {
    let n = alphas.len();
    let z = params.z() as usize;
    if z > n {
        return Err(Error::InvalidParameters(format!("z={z} exceeds N={n}")));
    }
    let exhaustive = binomial_capped(n as u64, z as u64, SUBSET_LIMIT) <= SUBSET_LIMIT;
    let mut sweep = SubsetSweep { checked: 0, exhaustive, failures: vec![] };
    let check = |subset: &[usize], sweep: &mut SubsetSweep| -> Result<()> {
        sweep.checked += 1;
        if !masking_rank_check(field, params, alphas, subset)? {
            sweep.failures.push(subset.to_vec());
        }
        Ok(())
    };
    if exhaustive {
        let mut idx: Vec<usize> = (0..z).collect();
        loop {
            check(&idx, &mut sweep)?;
            let Some(pos) = (0..z).rev().find(|&i| idx[i] != i + n - z) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..z {
                idx[j] = idx[j - 1] + 1;
            }
        }
    } else {
        for _ in 0..SUBSET_LIMIT {
            let mut subset = sample(rng, n, z).into_vec();
            subset.sort_unstable();
            check(&subset, &mut sweep)?;
        }
    }
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformityConfig {
    pub p: u64,
    pub m: usize,
    pub s: usize,
    pub z: usize,
    /// Number of colluding workers whose joint view is enumerated.
    pub colluders: usize,
    /// Zero the secret terms (control run).
    pub ablate_masking: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformityReport {
    /// Random states enumerated per input pair.
    pub states: u64,
    pub colluding_sets: usize,
    /// Every colluding set saw the same view multiset for both inputs.
    pub identical: bool,
    /// Colluder count within the privacy model (`<= z`).
    pub in_model: bool,
}

const STATE_LIMIT: u64 = 1_000_000;

/// Single-source view of `F(α) = Σ coded α^e + α^{e_s} R` for every `R`.
struct SideViews {
    base: Vec<Vec<u64>>,
    scale: Vec<u64>,
    entries: usize,
}

fn side_views(field: &PrimeModulus, params: &SchemeParams, side: Side, m: &Matrix, alphas: &[u64], ablate: bool) -> Result<SideViews> {
    let spec = PartitionSpec::new(m.rows(), params.s() as usize, params.t() as usize)?;
    let role = if side == Side::A { Role::ATransposed } else { Role::B };
    let blocks = split(m, spec, role)?;
    let (h, w) = blocks.block_shape();
    let secret = secret_powers(params, side)?.powers;
    let e = secret.min().expect("z = 1 secret power");
    let mut base = Vec::with_capacity(alphas.len());
    let mut scale = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let mut acc = Matrix::zeros(h, w);
        for bp in coded_powers(params, side)? {
            acc.add_scaled(field, blocks.block(bp.row, bp.col), field.pow(a, bp.power))?;
        }
        base.push(acc.data().to_vec());
        scale.push(if ablate { 0 } else { field.pow(a, e) });
    }
    Ok(SideViews { base, scale, entries: h * w })
}

fn view_multiset(field: &PrimeModulus, va: &SideViews, vb: &SideViews, workers: &[usize]) -> HashMap<Vec<u64>, u64> {
    let p = field.p();
    let total = va.entries + vb.entries;
    let mut digits = vec![0u64; total];
    let mut out: HashMap<Vec<u64>, u64> = HashMap::new();
    loop {
        let (ra, rb) = digits.split_at(va.entries);
        let mut view = Vec::with_capacity(workers.len() * total);
        for &n in workers {
            for (x, r) in va.base[n].iter().zip(ra) {
                view.push(field.add(*x, field.mul(va.scale[n], *r)));
            }
            for (x, r) in vb.base[n].iter().zip(rb) {
                view.push(field.add(*x, field.mul(vb.scale[n], *r)));
            }
        }
        *out.entry(view).or_insert(0) += 1;
        let Some(pos) = digits.iter().position(|&d| d + 1 < p) else {
            break;
        };
        digits[pos] += 1;
        digits[..pos].iter_mut().for_each(|d| *d = 0);
    }
    out
}

/// Enumerates every choice of the secret coefficients for two input pairs
/// and compares the view multisets seen by each colluding set. Restricted
/// to AGE with `t = 1`, `z = 1`, `p <= 13`, `m <= 2`.
pub fn exhaustive_uniformity_test(
    cfg: &UniformityConfig,
    first: (&Matrix, &Matrix),
    second: (&Matrix, &Matrix),
) -> Result<UniformityReport> {
    if cfg.p > 13 || cfg.m > 2 || cfg.z != 1 {
        return Err(Error::TooLargeForExhaustive(format!("p={}, m={}, z={}", cfg.p, cfg.m, cfg.z)));
    }
    let field = PrimeModulus::new(cfg.p)?;
    let params = SchemeParams::age(cfg.s as u64, 1, 1, 0)?;
    let randoms = 2 * cfg.m * (cfg.m / cfg.s.max(1));
    let states = (cfg.p as u128).pow(randoms as u32);
    if states > STATE_LIMIT as u128 {
        return Err(Error::TooLargeForExhaustive(format!("{states} random states")));
    }
    let n = h_support(&params)?.len();
    if n as u64 >= cfg.p {
        return Err(Error::FieldTooSmall { needed: n, p: cfg.p });
    }
    if cfg.colluders == 0 || cfg.colluders > n {
        return Err(Error::InvalidParameters(format!("{} colluders among {n} workers", cfg.colluders)));
    }
    let alphas: Vec<u64> = (1..=n as u64).collect();
    let reduce = |m: &Matrix| m.clone().reduced(&field);
    let views = |pair: (&Matrix, &Matrix)| -> Result<(SideViews, SideViews)> {
        Ok((
            side_views(&field, &params, Side::A, &reduce(pair.0), &alphas, cfg.ablate_masking)?,
            side_views(&field, &params, Side::B, &reduce(pair.1), &alphas, cfg.ablate_masking)?,
        ))
    };
    let (a1, b1) = views(first)?;
    let (a2, b2) = views(second)?;

    let mut identical = true;
    let mut sets = 0;
    let mut idx: Vec<usize> = (0..cfg.colluders).collect();
    let k = cfg.colluders;
    loop {
        sets += 1;
        if view_multiset(&field, &a1, &b1, &idx) != view_multiset(&field, &a2, &b2, &idx) {
            identical = false;
        }
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(UniformityReport { states: states as u64, colluding_sets: sets, identical, in_model: k <= cfg.z })
}
