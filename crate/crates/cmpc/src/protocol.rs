//! In-process simulation of the three-phase protocol: sources share,
//! workers multiply and re-share, the master interpolates `I(x)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codes::{build_share, evaluate_share, SchemeParams, SharePolynomial, Side};
use crate::counts::recovery_threshold;
use crate::error::{Error, Result};
use crate::field::{lagrange_interpolate, rank, sparse_extraction_rows, EvalPointSet, PrimeModulus};
use crate::partition::{assemble_product, split, Matrix, PartitionSpec, Role};
use crate::powerset::{h_support, important_power_map, PowerSet};

const STREAM_SECRETS_A: u64 = 1;
const STREAM_SECRETS_B: u64 = 2;
const STREAM_ALPHAS: u64 = 1 << 20;
const STREAM_WORKERS: u64 = 1 << 32;
const MAX_ALPHA_DRAWS: u64 = 8;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub params: SchemeParams,
    pub m: usize,
    pub field: PrimeModulus,
    pub seed: u64,
    /// Workers whose `I(α_n)` reaches the master; all of them when `None`.
    pub responding_workers: Option<Vec<usize>>,
    spec: PartitionSpec,
    support: PowerSet,
}

impl ProtocolConfig {
    pub fn new(params: SchemeParams, m: usize, field: PrimeModulus, seed: u64) -> Result<Self> {
        if !params.scheme().constructible() {
            return Err(Error::CountOnlyScheme(params.scheme().to_string()));
        }
        let spec = PartitionSpec::new(m, params.s() as usize, params.t() as usize)?;
        let support = h_support(&params)?;
        if support.len() as u64 >= field.p() {
            return Err(Error::FieldTooSmall { needed: support.len(), p: field.p() });
        }
        Ok(ProtocolConfig { params, m, field, seed, responding_workers: None, spec, support })
    }

    pub fn with_responding(mut self, workers: Vec<usize>) -> Self {
        self.responding_workers = Some(workers);
        self
    }

    /// Number of workers: the size of the support of `H(x)`.
    pub fn n_workers(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &PowerSet {
        &self.support
    }

    pub fn threshold(&self) -> usize {
        recovery_threshold(self.params.t(), self.params.z()) as usize
    }

    fn t(&self) -> usize {
        self.params.t() as usize
    }

    fn g_block(&self) -> (usize, usize) {
        (self.m / self.t(), self.m / self.t())
    }
}

/// Extraction weights `r_n^{(i,l)}`, indexed `[i + t l][n]`.
#[derive(Debug, Clone)]
pub struct ExtractionPlan {
    pub alphas: EvalPointSet,
    pub weights: Vec<Vec<u64>>,
    pub draws: u64,
}

/// Draws evaluation points and the matching extraction weights, re-drawing
/// the points when the generalized Vandermonde system is singular.
pub fn plan_extraction(config: &ProtocolConfig) -> Result<ExtractionPlan> {
    let t = config.t();
    let imp = important_power_map(&config.params);
    let mut targets = vec![0u64; t * t];
    for ((i, l), e) in imp {
        targets[i + t * l] = e;
    }
    for draw in 0..MAX_ALPHA_DRAWS {
        let mut rng = stream(config.seed, STREAM_ALPHAS + draw);
        let alphas = EvalPointSet::draw(&config.field, config.n_workers(), &mut rng)?;
        match sparse_extraction_rows(&config.field, alphas.as_slice(), &config.support, &targets) {
            Ok(weights) => return Ok(ExtractionPlan { alphas, weights, draws: draw + 1 }),
            Err(Error::SingularVandermonde) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SingularVandermonde)
}

#[derive(Debug, Clone)]
pub struct Phase1Output {
    pub fa: SharePolynomial,
    pub fb: SharePolynomial,
    pub shares_a: Vec<Matrix>,
    pub shares_b: Vec<Matrix>,
}

pub fn phase1_share(a: &Matrix, b: &Matrix, config: &ProtocolConfig, alphas: &EvalPointSet) -> Result<Phase1Output> {
    let f = &config.field;
    let ab = split(a, config.spec, Role::ATransposed)?;
    let bb = split(b, config.spec, Role::B)?;
    let fa = build_share(f, &ab, &config.params, Side::A, &mut stream(config.seed, STREAM_SECRETS_A))?;
    let fb = build_share(f, &bb, &config.params, Side::B, &mut stream(config.seed, STREAM_SECRETS_B))?;
    let shares_a = alphas.as_slice().iter().map(|&x| evaluate_share(f, &fa, x)).collect();
    let shares_b = alphas.as_slice().iter().map(|&x| evaluate_share(f, &fb, x)).collect();
    Ok(Phase1Output { fa, fb, shares_a, shares_b })
}

/// Everything one worker saw, computed and counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerRecord {
    pub alpha: u64,
    pub share_a: Matrix,
    pub share_b: Matrix,
    pub h: Matrix,
    /// `r_n^{(i,l)}` in G-term order `i + t l`.
    pub weights: Vec<u64>,
    /// `R_w^{(n)}`, the z masking blocks of `G_n`.
    pub randoms: Vec<Matrix>,
    /// `G_{n'}(α_n)` for every sender `n'` (self included), flattened.
    pub received: Vec<u64>,
    pub i_value: Matrix,
    /// Scalar multiplications performed.
    pub mults: u64,
    /// Scalars held, never freed.
    pub stored: u64,
    /// Scalars sent to other workers.
    pub sent: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub params: SchemeParams,
    pub m: usize,
    pub n_workers: usize,
    pub g_block: (usize, usize),
    pub workers: Vec<WorkerRecord>,
    /// Phase-2 messages (one per ordered pair of distinct workers).
    pub messages: u64,
    pub scalars_exchanged: u64,
}

impl Transcript {
    /// `G_{sender}(α_{receiver})`.
    pub fn g_value(&self, sender: usize, receiver: usize) -> Matrix {
        let (h, w) = self.g_block;
        let b = h * w;
        let src = &self.workers[receiver].received[sender * b..(sender + 1) * b];
        let mut out = Matrix::zeros(h, w);
        out.data_mut().copy_from_slice(src);
        out
    }

    /// Line-oriented dump: `phase,worker,kind,count`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "phase,worker,kind,count")?;
        for (n, rec) in self.workers.iter().enumerate() {
            writeln!(w, "1,{n},share_a_scalars,{}", rec.share_a.len())?;
            writeln!(w, "1,{n},share_b_scalars,{}", rec.share_b.len())?;
            writeln!(w, "2,{n},mults,{}", rec.mults)?;
            writeln!(w, "2,{n},stored,{}", rec.stored)?;
            writeln!(w, "2,{n},sent_scalars,{}", rec.sent)?;
            writeln!(w, "2,{n},messages_sent,{}", self.n_workers.saturating_sub(1))?;
            writeln!(w, "3,{n},i_scalars,{}", rec.i_value.len())?;
        }
        Ok(())
    }
}

/// Unreduced dot product of values below 2^32. Low and high halves of each
/// product are summed separately so the loop stays in u64 lanes. Each half
/// is below 2^32, so both sums are exact for fewer than 2^32 terms and the
/// wrapping adds never wrap.
fn dot_wide(a: &[u64], b: &[u64]) -> u128 {
    let (mut lo, mut hi) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        let p = (x as u32 as u64) * (y as u32 as u64);
        lo = lo.wrapping_add(p & 0xffff_ffff);
        hi = hi.wrapping_add(p >> 32);
    }
    ((hi as u128) << 32) + lo as u128
}

/// `H(α_n) = F_A(α_n) F_B(α_n)`, `G_n(x) = Σ r_n^{(i,l)} H(α_n) x^{i+tl} + Σ_w R_w x^{t²+w}`,
/// evaluated at every `α_{n'}`; each worker ends with `I(α_n) = Σ_{n'} G_{n'}(α_n)`.
pub fn phase2_compute_exchange(config: &ProtocolConfig, shares: &Phase1Output, plan: &ExtractionPlan) -> Result<Transcript> {
    let f = &config.field;
    let n = config.n_workers();
    let t = config.t();
    let z = config.params.z() as usize;
    let tt = t * t;
    let terms = tt + z;
    let (gh, gw) = config.g_block();
    let b = gh * gw;
    let alphas = plan.alphas.as_slice();
    if alphas.len() != n || shares.shares_a.len() != n || shares.shares_b.len() != n {
        return Err(Error::ShapeMismatch("one share pair and one point per worker".into()));
    }
    let pow_table: Vec<Vec<u64>> = alphas.iter().map(|&x| f.powers(x, terms - 1)).collect();
    let mut received = vec![vec![0u64; n * b]; n];
    let mut records = Vec::with_capacity(n);

    for w in 0..n {
        let (sa, sb) = (&shares.shares_a[w], &shares.shares_b[w]);
        let mut mults = 0u64;
        let h = sa.mul(f, sb)?;
        mults += (sa.rows() * sa.cols() * sb.cols()) as u64;

        let weights: Vec<u64> = plan.weights.iter().map(|row| row[w]).collect();
        let mut coeffs: Vec<Vec<u64>> = Vec::with_capacity(terms);
        for &r in &weights {
            coeffs.push(h.data().iter().map(|&v| f.mul(r, v)).collect());
            mults += b as u64;
        }
        let mut rng = stream(config.seed, STREAM_WORKERS + w as u64);
        let randoms: Vec<Matrix> = (0..z).map(|_| Matrix::random(f, gh, gw, &mut rng)).collect();
        coeffs.extend(randoms.iter().map(|r| r.data().to_vec()));

        // Entry-major copy of the coefficients so each G entry is one dot product.
        let mut by_entry = vec![0u64; b * terms];
        for (k, c) in coeffs.iter().enumerate() {
            for (e, &v) in c.iter().enumerate() {
                by_entry[e * terms + k] = v;
            }
        }
        for (dest, pw) in received.iter_mut().zip(&pow_table) {
            for (d, row) in dest[w * b..(w + 1) * b].iter_mut().zip(by_entry.chunks_exact(terms)) {
                *d = f.reduce_wide(dot_wide(row, pw));
            }
            mults += ((terms - 1) * b) as u64;
        }

        let stored = (sa.len() + sb.len()) as u64 // shares
            + b as u64 // H
            + (z * b) as u64 // masking blocks
            + (n * b) as u64 // G_n evaluated at every point
            + tt as u64; // extraction weights
        records.push(WorkerRecord {
            alpha: alphas[w],
            share_a: sa.clone(),
            share_b: sb.clone(),
            h,
            weights,
            randoms,
            received: Vec::new(),
            i_value: Matrix::zeros(gh, gw),
            mults,
            stored,
            sent: ((n - 1) * b) as u64,
        });
    }

    for (rec, buf) in records.iter_mut().zip(received) {
        let mut acc = vec![0u128; b];
        for chunk in buf.chunks(b) {
            for (a, &v) in acc.iter_mut().zip(chunk) {
                *a += v as u128;
            }
        }
        for (o, a) in rec.i_value.data_mut().iter_mut().zip(acc) {
            *o = f.reduce_wide(a);
        }
        rec.received = buf;
        // Values received from the other workers, plus I(α_n).
        rec.stored += ((n - 1) * b + b) as u64;
    }

    let messages = (n * (n - 1)) as u64;
    Ok(Transcript {
        params: config.params,
        m: config.m,
        n_workers: n,
        g_block: (gh, gw),
        workers: records,
        messages,
        scalars_exchanged: messages * b as u64,
    })
}

/// Interpolates `I(x)` from the listed workers and assembles `Y` from its
/// first `t²` coefficients.
pub fn phase3_reconstruct(config: &ProtocolConfig, transcript: &Transcript, subset: &[usize]) -> Result<Matrix> {
    let need = config.threshold();
    if subset.len() < need {
        return Err(Error::InsufficientEvaluations { needed: need, got: subset.len() });
    }
    let mut points = Vec::with_capacity(subset.len());
    for &w in subset {
        let rec = transcript
            .workers
            .get(w)
            .ok_or_else(|| Error::OutOfRange(format!("worker {w}")))?;
        points.push((rec.alpha, rec.i_value.clone()));
    }
    let coeffs = lagrange_interpolate(&config.field, &points, need - 1)?;
    let t = config.t();
    let grid: Vec<Vec<Matrix>> = (0..t).map(|i| (0..t).map(|l| coeffs[i + t * l].clone()).collect()).collect();
    assemble_product(&grid)
}

/// Rank of the `|subset| x (t²+z)` Vandermonde system the master solves.
pub fn interpolation_rank(config: &ProtocolConfig, transcript: &Transcript, subset: &[usize]) -> usize {
    let cols = config.threshold();
    let rows: Vec<Vec<u64>> = subset
        .iter()
        .map(|&w| config.field.powers(transcript.workers[w].alpha, cols - 1))
        .collect();
    rank(&config.field, rows)
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub y: Matrix,
    pub transcript: Transcript,
    pub plan: ExtractionPlan,
    pub shares: Phase1Output,
}

pub fn run_protocol(a: &Matrix, b: &Matrix, config: &ProtocolConfig) -> Result<ProtocolOutput> {
    let plan = plan_extraction(config)?;
    let shares = phase1_share(a, b, config, &plan.alphas)?;
    let transcript = phase2_compute_exchange(config, &shares, &plan)?;
    let all: Vec<usize> = (0..config.n_workers()).collect();
    let subset = config.responding_workers.as_deref().unwrap_or(&all);
    let y = phase3_reconstruct(config, &transcript, subset)?;
    Ok(ProtocolOutput { y, transcript, plan, shares })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DEFAULT_PRIME;

    fn random_pair(f: &PrimeModulus, m: usize, seed: u64) -> (Matrix, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (Matrix::random(f, m, m, &mut rng), Matrix::random(f, m, m, &mut rng))
    }

    fn dense(f: &PrimeModulus, a: &Matrix, b: &Matrix) -> Matrix {
        a.transpose().mul(f, b).unwrap()
    }

    #[test]
    fn identity_inputs() {
        let f = PrimeModulus::new(DEFAULT_PRIME).unwrap();
        let cfg = ProtocolConfig::new(SchemeParams::age(2, 2, 1, 1).unwrap(), 4, f, 3).unwrap();
        let out = run_protocol(&Matrix::identity(4), &Matrix::identity(4), &cfg).unwrap();
        assert_eq!(out.y, Matrix::identity(4));
    }

    #[test]
    fn example_one_end_to_end() {
        let f = PrimeModulus::new(DEFAULT_PRIME).unwrap();
        let (a, b) = random_pair(&f, 12, 11);
        for params in [SchemeParams::age(2, 2, 2, 2).unwrap(), SchemeParams::polydot(2, 2, 2).unwrap()] {
            let cfg = ProtocolConfig::new(params, 12, f, 7).unwrap();
            assert_eq!(cfg.n_workers(), 17);
            let out = run_protocol(&a, &b, &cfg).unwrap();
            assert_eq!(out.y, dense(&f, &a, &b));
        }
    }

    #[test]
    fn extraction_recovers_product_blocks() {
        let f = PrimeModulus::new(DEFAULT_PRIME).unwrap();
        let (a, b) = random_pair(&f, 6, 5);
        let cfg = ProtocolConfig::new(SchemeParams::polydot(3, 2, 2).unwrap(), 6, f, 1).unwrap();
        let plan = plan_extraction(&cfg).unwrap();
        let shares = phase1_share(&a, &b, &cfg, &plan.alphas).unwrap();
        let tr = phase2_compute_exchange(&cfg, &shares, &plan).unwrap();
        let y = dense(&f, &a, &b);
        for i in 0..2 {
            for l in 0..2 {
                let mut acc = Matrix::zeros(3, 3);
                for rec in &tr.workers {
                    acc = acc.add(&f, &rec.h.scale(&f, rec.weights[i + 2 * l])).unwrap();
                }
                assert_eq!(acc, y.submatrix(3 * i, 3 * l, 3, 3));
            }
        }
        assert!(tr.workers.iter().all(|r| r.weights.len() + r.randoms.len() == 6));
    }

    #[test]
    fn stragglers_and_threshold() {
        let f = PrimeModulus::new(DEFAULT_PRIME).unwrap();
        let (a, b) = random_pair(&f, 12, 2);
        let cfg = ProtocolConfig::new(SchemeParams::age(3, 2, 2, 1).unwrap(), 12, f, 9).unwrap();
        let out = run_protocol(&a, &b, &cfg).unwrap();
        let y = dense(&f, &a, &b);
        let n = cfg.n_workers();
        for subset in [vec![0, 1, 2, 3, 4, 5], vec![n - 1, 3, n - 4, 7, 1, 10]] {
            assert_eq!(phase3_reconstruct(&cfg, &out.transcript, &subset).unwrap(), y);
            assert_eq!(interpolation_rank(&cfg, &out.transcript, &subset), 6);
            assert_eq!(interpolation_rank(&cfg, &out.transcript, &subset[..5]), 5);
        }
        let r = phase3_reconstruct(&cfg, &out.transcript, &[0, 1, 2, 3, 4]);
        assert_eq!(r, Err(Error::InsufficientEvaluations { needed: 6, got: 5 }));
    }

    #[test]
    fn deterministic_under_seed() {
        let f = PrimeModulus::new(101).unwrap();
        let (a, b) = random_pair(&f, 4, 8);
        let cfg = ProtocolConfig::new(SchemeParams::entangled(2, 2, 1).unwrap(), 4, f, 42).unwrap();
        let x = run_protocol(&a, &b, &cfg).unwrap();
        let y = run_protocol(&a, &b, &cfg).unwrap();
        assert_eq!(x.transcript, y.transcript);
        let (mut d1, mut d2) = (Vec::new(), Vec::new());
        x.transcript.write_dump(&mut d1).unwrap();
        y.transcript.write_dump(&mut d2).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn count_only_schemes_rejected() {
        let f = PrimeModulus::new(101).unwrap();
        let p = SchemeParams::count_only(crate::codes::Scheme::Ssmm, 2, 2, 2).unwrap();
        assert!(matches!(ProtocolConfig::new(p, 4, f, 0), Err(Error::CountOnlyScheme(_))));
    }
}
