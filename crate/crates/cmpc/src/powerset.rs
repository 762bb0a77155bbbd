//! Sets of exponents, Minkowski sums, and the structural support oracle:
//! `|P(F_A) + P(F_B)|` is the number of workers a construction needs.

use crate::codes::{coded_powers, secret_powers, BlockPower, Scheme, SchemeParams, Side};
use crate::error::Result;

/// Sorted, deduplicated set of non-negative exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PowerSet {
    elems: Vec<u64>,
}

impl PowerSet {
    pub fn new<I: IntoIterator<Item = u64>>(it: I) -> Self {
        let mut elems: Vec<u64> = it.into_iter().collect();
        elems.sort_unstable();
        elems.dedup();
        PowerSet { elems }
    }

    pub fn empty() -> Self {
        PowerSet::default()
    }

    /// `{lo, lo+1, ..., hi-1}`.
    pub fn range(lo: u64, hi: u64) -> Self {
        PowerSet { elems: (lo..hi).collect() }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn contains(&self, x: u64) -> bool {
        self.elems.binary_search(&x).is_ok()
    }

    pub fn min(&self) -> Option<u64> {
        self.elems.first().copied()
    }

    pub fn max(&self) -> Option<u64> {
        self.elems.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.elems.iter().copied()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.elems
    }

    /// Position of `x` in sorted order.
    pub fn index_of(&self, x: u64) -> Option<usize> {
        self.elems.binary_search(&x).ok()
    }

    pub fn union(&self, other: &PowerSet) -> PowerSet {
        PowerSet::new(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &PowerSet) -> PowerSet {
        PowerSet { elems: self.iter().filter(|x| other.contains(*x)).collect() }
    }

    pub fn is_disjoint(&self, other: &PowerSet) -> bool {
        self.iter().all(|x| !other.contains(x))
    }

    pub fn shift(&self, by: u64) -> PowerSet {
        PowerSet { elems: self.iter().map(|x| x + by).collect() }
    }
}

impl FromIterator<u64> for PowerSet {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        PowerSet::new(iter)
    }
}

/// `{a + b : a in A, b in B}`, computed with word-level shift-or on a bitmap.
pub fn minkowski_sum(a: &PowerSet, b: &PowerSet) -> PowerSet {
    let (Some(amax), Some(bmax)) = (a.max(), b.max()) else {
        return PowerSet::empty();
    };
    let top = (amax + bmax) as usize + 1;
    let words = top.div_ceil(64);
    let mut src = vec![0u64; words];
    for x in b.iter() {
        src[(x / 64) as usize] |= 1 << (x % 64);
    }
    let bwords = (bmax as usize) / 64 + 1;
    let mut acc = vec![0u64; words + 1];
    for sh in a.iter() {
        let (wq, bq) = ((sh / 64) as usize, (sh % 64) as u32);
        for (k, &w) in src[..bwords].iter().enumerate() {
            if w == 0 {
                continue;
            }
            acc[wq + k] |= w << bq;
            if bq != 0 {
                acc[wq + k + 1] |= w >> (64 - bq);
            }
        }
    }
    let mut elems = Vec::new();
    for (k, &w) in acc.iter().enumerate() {
        let mut w = w;
        while w != 0 {
            let b = w.trailing_zeros() as u64;
            elems.push(k as u64 * 64 + b);
            w &= w - 1;
        }
    }
    PowerSet { elems }
}

fn block_set(v: &[BlockPower]) -> PowerSet {
    PowerSet::new(v.iter().map(|b| b.power))
}

/// The four pieces of `P(H)`: `C_A+C_B`, `C_A+S_B`, `S_A+C_B`, `S_A+S_B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HParts {
    pub d1: PowerSet,
    pub d2: PowerSet,
    pub d3: PowerSet,
    pub d4: PowerSet,
}

pub fn h_parts(params: &SchemeParams) -> Result<HParts> {
    let ca = block_set(&coded_powers(params, Side::A)?);
    let cb = block_set(&coded_powers(params, Side::B)?);
    let sa = secret_powers(params, Side::A)?.powers;
    let sb = secret_powers(params, Side::B)?.powers;
    Ok(HParts {
        d1: minkowski_sum(&ca, &cb),
        d2: minkowski_sum(&ca, &sb),
        d3: minkowski_sum(&sa, &cb),
        d4: minkowski_sum(&sa, &sb),
    })
}

/// Support of `H(x) = F_A(x) F_B(x)`; its size is the required worker count.
pub fn h_support(params: &SchemeParams) -> Result<PowerSet> {
    let fa = block_set(&coded_powers(params, Side::A)?).union(&secret_powers(params, Side::A)?.powers);
    let fb = block_set(&coded_powers(params, Side::B)?).union(&secret_powers(params, Side::B)?.powers);
    Ok(minkowski_sum(&fa, &fb))
}

/// Important powers paired with the output block `(i, l)` they carry.
pub fn important_power_map(params: &SchemeParams) -> Vec<((usize, usize), u64)> {
    let (s, t) = (params.s(), params.t());
    let mut out = Vec::with_capacity((t * t) as usize);
    for i in 0..t {
        for l in 0..t {
            let e = match params.scheme() {
                Scheme::PolyDot => i + t * (s - 1) + params.theta_prime() * l,
                _ => (s - 1) + s * i + params.theta() * l,
            };
            out.push(((i as usize, l as usize), e));
        }
    }
    out
}

pub fn important_powers(params: &SchemeParams) -> PowerSet {
    PowerSet::new(important_power_map(params).into_iter().map(|(_, e)| e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodabilityReport {
    pub decodable: bool,
    pub important_count: usize,
    pub expected_count: usize,
    /// Important powers that also appear among the garbage powers.
    pub collisions: Vec<u64>,
}

/// Decodability from explicit supports. Garbage is every cross term
/// `A_{i,j} B_{k,l}` with `j != k` plus all of `D_2`, `D_3`, `D_4`.
pub fn decodability_from_parts(
    ca: &[BlockPower],
    cb: &[BlockPower],
    sa: &PowerSet,
    sb: &PowerSet,
    important: &PowerSet,
    t: usize,
) -> DecodabilityReport {
    let cas = block_set(ca);
    let cbs = block_set(cb);
    let parts = [minkowski_sum(&cas, sb), minkowski_sum(sa, &cbs), minkowski_sum(sa, sb)];
    let top = important.max().unwrap_or(0) as usize;
    let mut garbage = vec![false; top + 1];
    let mut mark = |e: u64| {
        if let Some(g) = garbage.get_mut(e as usize) {
            *g = true;
        }
    };
    for a in ca {
        for b in cb {
            if a.col != b.row {
                mark(a.power + b.power);
            }
        }
    }
    for part in &parts {
        part.iter().take_while(|&e| e as usize <= top).for_each(&mut mark);
    }
    let collisions: Vec<u64> = important.iter().filter(|&e| garbage[e as usize]).collect();
    DecodabilityReport {
        decodable: important.len() == t * t && collisions.is_empty(),
        important_count: important.len(),
        expected_count: t * t,
        collisions,
    }
}

pub fn check_decodability(params: &SchemeParams) -> Result<DecodabilityReport> {
    let ca = coded_powers(params, Side::A)?;
    let cb = coded_powers(params, Side::B)?;
    let sa = secret_powers(params, Side::A)?.powers;
    let sb = secret_powers(params, Side::B)?.powers;
    Ok(decodability_from_parts(&ca, &cb, &sa, &sb, &important_powers(params), params.t() as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_sum(a: &PowerSet, b: &PowerSet) -> PowerSet {
        a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect()
    }

    #[test]
    fn sum_examples() {
        let s = PowerSet::new([3, 9, 70]);
        assert_eq!(minkowski_sum(&PowerSet::new([0]), &s), s);
        assert_eq!(
            minkowski_sum(&PowerSet::new([0, 1]), &PowerSet::new([0, 2])),
            PowerSet::range(0, 4)
        );
        assert!(minkowski_sum(&PowerSet::empty(), &s).is_empty());
    }

    #[test]
    fn polydot_coded_product_is_interval() {
        let p = SchemeParams::polydot(2, 2, 2).unwrap();
        assert_eq!(h_parts(&p).unwrap().d1, PowerSet::range(0, 12));
    }

    #[test]
    fn age_example_support() {
        let p = SchemeParams::age(2, 2, 2, 2).unwrap();
        assert_eq!(h_support(&p).unwrap(), PowerSet::range(0, 17));
    }

    #[test]
    fn entangled_example_support() {
        // Literal construction: 18 terms; the closed form says 19 (see counts).
        let p = SchemeParams::entangled(2, 2, 2).unwrap();
        let h = h_support(&p).unwrap();
        assert_eq!(h.len(), 18);
        assert!(!h.contains(15));
    }

    #[test]
    fn important_examples() {
        assert_eq!(important_powers(&SchemeParams::polydot(2, 2, 2).unwrap()), PowerSet::new([2, 3, 8, 9]));
        assert_eq!(important_powers(&SchemeParams::age(2, 2, 2, 2).unwrap()), PowerSet::new([1, 3, 7, 9]));
        assert_eq!(important_powers(&SchemeParams::age(5, 1, 1, 0).unwrap()), PowerSet::new([4]));
    }

    #[test]
    fn decodable_examples() {
        assert!(check_decodability(&SchemeParams::age(1, 1, 1, 0).unwrap()).unwrap().decodable);
        assert!(check_decodability(&SchemeParams::age(2, 2, 2, 2).unwrap()).unwrap().decodable);
        assert!(check_decodability(&SchemeParams::polydot(3, 2, 4).unwrap()).unwrap().decodable);
    }

    #[test]
    fn sabotaged_secret_powers_are_caught() {
        let p = SchemeParams::age(2, 2, 2, 2).unwrap();
        let ca = coded_powers(&p, Side::A).unwrap();
        let cb = coded_powers(&p, Side::B).unwrap();
        let sa = secret_powers(&p, Side::A).unwrap().powers;
        // S_B moved down so that C_A + S_B hits the important power 9.
        let sb = PowerSet::new([6, 7]);
        let r = decodability_from_parts(&ca, &cb, &sa, &sb, &important_powers(&p), 2);
        assert!(!r.decodable);
        assert!(r.collisions.contains(&9));
    }

    proptest! {
        #[test]
        fn sum_matches_naive(a in proptest::collection::vec(0u64..300, 0..20),
                             b in proptest::collection::vec(0u64..300, 0..20)) {
            let (a, b) = (PowerSet::new(a), PowerSet::new(b));
            prop_assert_eq!(minkowski_sum(&a, &b), naive_sum(&a, &b));
            prop_assert_eq!(minkowski_sum(&a, &b), minkowski_sum(&b, &a));
        }

        #[test]
        fn decodable_on_small_grid(s in 1u64..7, t in 1u64..7, z in 1u64..12, lf in 0.0f64..1.0) {
            let lambda = (lf * (z as f64 + 1.0)) as u64;
            let p = SchemeParams::age(s, t, z, lambda.min(z)).unwrap();
            prop_assert!(check_decodability(&p).unwrap().decodable);
            if !(s == 1 && t == 1) {
                let p = SchemeParams::polydot(s, t, z).unwrap();
                prop_assert!(check_decodability(&p).unwrap().decodable);
            }
        }
    }
}
