//! Order verification: exact algebraic conditions through level three, an
//! empirical order fit against dense matrix exponentials, and the
//! time-reversibility defect of single product chains.

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scheme::{apply, apply_term, format_rational, rat, FlowPair, Rational, SplitScheme, Stage, Term};

/// Tolerance used when a scheme's coefficients only approximate irrationals.
pub const APPROXIMATE_TOLERANCE: f64 = 1e-12;

fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

/// One evaluated order condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub order_level: u32,
    pub condition_id: &'static str,
    #[serde(serialize_with = "ser_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub rhs: Rational,
    pub satisfied: bool,
}

/// Condition ids in evaluation order, with level and right-hand side. Letters
/// are listed in application order: "AB" means an A-step followed later by a
/// B-step.
const CONDITIONS: [(&str, u32, i64, i64); 15] = [
    ("I", 1, 1, 1),
    ("A", 1, 1, 1),
    ("B", 1, 1, 1),
    ("AA", 2, 1, 1),
    ("BB", 2, 1, 1),
    ("AB", 2, 1, 2),
    ("BA", 2, 1, 2),
    ("AAA", 3, 1, 1),
    ("BBB", 3, 1, 1),
    ("AAB", 3, 1, 3),
    ("BAA", 3, 1, 3),
    ("ABA", 3, 1, 6),
    ("BAB", 3, 1, 6),
    ("ABB", 3, 1, 3),
    ("BBA", 3, 1, 3),
];

/// The fifteen per-term sums, in the order of [`CONDITIONS`].
fn term_sums(stages: &[Stage]) -> [Rational; 15] {
    let a: Vec<&Rational> = stages.iter().map(|s| &s.a).collect();
    let b: Vec<&Rational> = stages.iter().map(|s| &s.b).collect();
    let m = stages.len();
    let z = Rational::zero;
    let sa: Rational = a.iter().copied().sum();
    let sb: Rational = b.iter().copied().sum();
    // Suffix sums: tail_x[j] = Σ_{i ≥ j} x_i, with tail_x[m] = 0.
    let tail = |x: &[&Rational]| {
        let mut t = vec![z(); m + 1];
        for j in (0..m).rev() {
            t[j] = &t[j + 1] + x[j];
        }
        t
    };
    let ta = tail(&a);
    let tb = tail(&b);

    let mut ab = z();
    let mut ba = z();
    let mut aab = z();
    let mut baa = z();
    let mut aba = z();
    let mut bab = z();
    let mut abb = z();
    let mut bba = z();
    for j1 in 0..m {
        ab += a[j1] * &tb[j1];
        ba += b[j1] * &ta[j1 + 1];
        aab += a[j1] * a[j1] * &tb[j1];
        abb += a[j1] * (b[j1..].iter().map(|&x| x * x).sum::<Rational>());
        bba += b[j1] * b[j1] * &ta[j1 + 1];
        baa += b[j1] * (a[j1 + 1..].iter().map(|&x| x * x).sum::<Rational>());
        for j2 in j1 + 1..m {
            aab += rat(2, 1) * a[j1] * a[j2] * &tb[j2];
            baa += rat(2, 1) * b[j1] * a[j2] * &ta[j2 + 1];
            bab += b[j1] * a[j2] * &tb[j2];
            bba += rat(2, 1) * b[j1] * b[j2] * &ta[j2 + 1];
        }
        for j2 in j1..m {
            aba += a[j1] * b[j2] * &ta[j2 + 1];
            abb += rat(2, 1) * a[j1] * b[j2] * &tb[j2 + 1];
        }
    }
    [
        Rational::one(),
        sa.clone(),
        sb.clone(),
        &sa * &sa,
        &sb * &sb,
        ab,
        ba,
        &sa * &sa * &sa,
        &sb * &sb * &sb,
        aab,
        baa,
        aba,
        bab,
        abb,
        bba,
    ]
}

/// Evaluates every tabulated condition with level ≤ `up_to` (clamped to 3).
pub fn verify_conditions(scheme: &SplitScheme, up_to: u32) -> Vec<ConditionReport> {
    let mut lhs: Vec<Rational> = vec![Rational::zero(); CONDITIONS.len()];
    for term in &scheme.terms {
        for (acc, v) in lhs.iter_mut().zip(term_sums(&term.stages)) {
            *acc += &term.weight * v;
        }
    }
    CONDITIONS
        .iter()
        .zip(lhs)
        .filter(|((_, level, _, _), _)| *level <= up_to.min(3))
        .map(|(&(id, level, p, q), lhs)| {
            let rhs = rat(p, q);
            let satisfied = if scheme.exact {
                lhs == rhs
            } else {
                (&lhs - &rhs).abs().to_f64().unwrap_or(f64::INFINITY) <= APPROXIMATE_TOLERANCE
            };
            ConditionReport {
                order_level: level,
                condition_id: id,
                lhs,
                rhs,
                satisfied,
            }
        })
        .collect()
}

/// Highest level `k ≤ 3` with every condition of level ≤ `k` satisfied.
pub fn algebraic_order(scheme: &SplitScheme) -> u32 {
    let reports = verify_conditions(scheme, 3);
    (1..=3)
        .take_while(|&k| reports.iter().filter(|r| r.order_level == k).all(|r| r.satisfied))
        .last()
        .unwrap_or(0)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Halvings needed to bring `‖m‖₁` to at most 1/2.
fn scaling_power(m: &DMatrix<f64>) -> i32 {
    let norm = one_norm(m);
    if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as i32
    }
}

fn square_times(mut e: DMatrix<f64>, s: i32) -> DMatrix<f64> {
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// Matrix exponential by diagonal (6,6) Padé approximation with scaling and
/// squaring.
pub fn expm_pade(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let s = scaling_power(m);
    let x = m / 2f64.powi(s);
    // c_k = (12 − k)! 6! / (12! k! (6 − k)!)
    let mut c = [1.0; 7];
    for k in 1..=6 {
        c[k] = c[k - 1] * (7 - k) as f64 / (k as f64 * (13 - k) as f64);
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut num = id.clone() * c[0];
    let mut den = id.clone() * c[0];
    let mut pow = id;
    for (k, ck) in c.iter().enumerate().skip(1) {
        pow = &pow * &x;
        num += &pow * *ck;
        den += &pow * (if k % 2 == 0 { *ck } else { -*ck });
    }
    let r = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for ‖X‖ ≤ 1/2");
    square_times(r, s)
}

/// Matrix exponential by truncated Taylor series with scaling and squaring.
pub fn expm_series(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let s = scaling_power(m);
    let x = m / 2f64.powi(s);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = sum.clone();
    for k in 1..60 {
        term = &term * &x / k as f64;
        sum += &term;
        if one_norm(&term) < 1e-20 {
            break;
        }
    }
    square_times(sum, s)
}

/// Arithmetic used for one-step errors in [`empirical_order`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// IEEE doubles; errors below roughly 1e-14 are lost in round-off.
    Double,
    /// 220-bit fixed point with exact rational coefficients.
    Extended,
}

impl Precision {
    pub fn epsilon(self) -> f64 {
        match self {
            Precision::Double => f64::EPSILON,
            Precision::Extended => 2f64.powi(-(fixed::FRAC_BITS as i32)),
        }
    }
}

/// A pair of dense matrices whose exact exponentials stand in for the flows.
#[derive(Clone, Debug)]
pub struct MatrixOraclePair {
    pub dimension: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub seed: u64,
    pub norm_cap: f64,
    pub precision: Precision,
}

pub const DEFAULT_ORACLE_DIMENSION: usize = 6;
pub const DEFAULT_ORACLE_SEED: u64 = 42;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0))
}

fn normalized(m: DMatrix<f64>, cap: f64) -> DMatrix<f64> {
    let norm = spectral_norm(&m);
    m * (cap / norm)
}

impl Default for MatrixOraclePair {
    fn default() -> Self {
        Self::random(DEFAULT_ORACLE_DIMENSION, DEFAULT_ORACLE_SEED).expect("default oracle is valid")
    }
}

impl MatrixOraclePair {
    /// Entries uniform on [−1, 1], each matrix scaled to spectral norm 1.
    pub fn random(dimension: usize, seed: u64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Config("oracle dimension must be at least 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = normalized(random_matrix(&mut rng, dimension), 1.0);
        let b = normalized(random_matrix(&mut rng, dimension), 1.0);
        let pair = Self {
            dimension,
            a,
            b,
            seed,
            norm_cap: 1.0,
            precision: Precision::Extended,
        };
        if pair.commutator_norm() < 1e-3 {
            return Err(Error::Config(format!("seed {seed} produced a nearly commuting pair")));
        }
        Ok(pair)
    }

    /// `B = p(A)` for a fixed polynomial, so `AB = BA`.
    pub fn commuting(dimension: usize, seed: u64) -> Result<Self> {
        let base = Self::random(dimension, seed)?;
        let n = dimension;
        let a2 = &base.a * &base.a;
        let b = normalized(DMatrix::identity(n, n) * 0.3 + &base.a * 0.5 - a2 * 0.25, 1.0);
        Ok(Self { b, ..base })
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn commutator_norm(&self) -> f64 {
        spectral_norm(&(&self.a * &self.b - &self.b * &self.a))
    }

    /// Seeded starting vector of unit Euclidean length.
    pub fn start_vector(&self) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        let v = DVector::from_fn(self.dimension, |_, _| rng.gen_range(-1.0..=1.0));
        let norm = v.norm();
        v / norm
    }

    pub fn exact(&self, tau: f64) -> DMatrix<f64> {
        expm_pade(&((&self.a + &self.b) * tau))
    }
}

impl FlowPair<DVector<f64>> for MatrixOraclePair {
    fn flow_a(&self, tau: f64, state: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(expm_pade(&(&self.a * tau)) * state)
    }

    fn flow_b(&self, tau: f64, state: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(expm_pade(&(&self.b * tau)) * state)
    }
}

impl FlowPair<DMatrix<f64>> for MatrixOraclePair {
    fn flow_a(&self, tau: f64, state: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(expm_pade(&(&self.a * tau)) * state)
    }

    fn flow_b(&self, tau: f64, state: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(expm_pade(&(&self.b * tau)) * state)
    }
}

/// Geometric ladder of `points` step sizes from `hi` down to `lo`.
pub fn geometric_ladder(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && hi > lo && lo > 0.0);
    let r = (lo / hi).powf(1.0 / (points - 1) as f64);
    (0..points).map(|i| hi * r.powi(i as i32)).collect()
}

/// Default ladder for order fits: 5e-2 down to 3e-3.
pub fn default_ladder() -> Vec<f64> {
    geometric_ladder(5e-2, 3e-3, 12)
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderPoint {
    pub tau: f64,
    pub error: f64,
    /// False when the point sat on the round-off floor or was trimmed.
    pub used: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalOrder {
    pub slope: f64,
    pub residual: f64,
    pub floor_reached: bool,
    pub ladder: Vec<LadderPoint>,
}

/// Least-squares line through `(x, y)`; returns slope and RMS residual.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

/// One-step error `‖S(τ)v − e^{τ(A+B)}v‖₂` for the oracle's start vector,
/// evaluated in the oracle's precision.
pub fn one_step_error(scheme: &SplitScheme, oracle: &MatrixOraclePair, tau: f64) -> Result<f64> {
    let v = oracle.start_vector();
    match oracle.precision {
        Precision::Double => {
            let approx = apply(scheme, oracle, tau, &v)?;
            Ok((approx - oracle.exact(tau) * &v).norm())
        }
        Precision::Extended => Ok(fixed::one_step_error(scheme, oracle, tau, &v)),
    }
}

/// Fits the log-log slope of the one-step error over `ladder`. Points under
/// the round-off floor `1e2·ε·‖v‖` (ε of the oracle's precision) are excluded; if the fit residual exceeds
/// 0.05 the extreme step sizes are trimmed once.
pub fn empirical_order(scheme: &SplitScheme, oracle: &MatrixOraclePair, ladder: &[f64]) -> Result<EmpiricalOrder> {
    let floor = 1e2 * oracle.precision.epsilon() * oracle.start_vector().norm();
    let mut points = ladder
        .par_iter()
        .map(|&tau| {
            let error = one_step_error(scheme, oracle, tau)?;
            Ok(LadderPoint {
                tau,
                error,
                used: error >= floor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let floor_reached = points.iter().any(|p| !p.used);
    let fit = |pts: &[LadderPoint]| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts
            .iter()
            .filter(|p| p.used)
            .map(|p| (p.tau.ln(), p.error.ln()))
            .unzip();
        (x.len(), fit_line(&x, &y))
    };
    let (count, (mut slope, mut residual)) = fit(&points);
    if count < 2 {
        return Err(Error::Unsupported(format!(
            "{}: fewer than two ladder points above the round-off floor",
            scheme.name
        )));
    }
    if residual > 0.05 && count >= 4 {
        let used: Vec<usize> = (0..points.len()).filter(|&i| points[i].used).collect();
        let (lo, hi) = (used[0], used[used.len() - 1]);
        points[lo].used = false;
        points[hi].used = false;
        (_, (slope, residual)) = fit(&points);
    }
    Ok(EmpiricalOrder {
        slope,
        residual,
        floor_reached,
        ladder: points,
    })
}

/// Propagator matrix of one product chain.
pub fn term_matrix(stages: &[Stage], oracle: &MatrixOraclePair, tau: f64) -> Result<DMatrix<f64>> {
    let term = Term {
        weight: Rational::one(),
        stages: stages.to_vec(),
    };
    let id = DMatrix::identity(oracle.dimension, oracle.dimension);
    apply_term(0, &term, oracle, tau, &id)
}

/// `‖S(τ)S(−τ) − I‖₂` for one product chain.
pub fn reversibility_defect(stages: &[Stage], oracle: &MatrixOraclePair, tau: f64) -> Result<f64> {
    let n = oracle.dimension;
    let product = term_matrix(stages, oracle, tau)? * term_matrix(stages, oracle, -tau)?;
    Ok(spectral_norm(&(product - DMatrix::identity(n, n))))
}

/// High-precision evaluation of scheme one-step errors on the matrix oracle.
mod fixed {
    use nalgebra::{DMatrix, DVector};
    use num_bigint::BigInt;
    use num_traits::{Float, ToPrimitive, Zero};

    use super::MatrixOraclePair;
    use crate::scheme::{Rational, SplitScheme};

    pub const FRAC_BITS: usize = 220;

    /// Fixed-point number `value · 2^{−FRAC_BITS}`.
    #[derive(Clone, Debug, PartialEq)]
    struct Fx(BigInt);

    impl Fx {
        fn from_f64(x: f64) -> Self {
            if x == 0.0 {
                return Fx(BigInt::zero());
            }
            let (mantissa, exp, sign) = Float::integer_decode(x);
            let m = BigInt::from(mantissa) * i64::from(sign);
            let shift = i64::from(exp) + FRAC_BITS as i64;
            Fx(if shift >= 0 {
                m << shift as usize
            } else {
                m >> (-shift) as usize
            })
        }

        fn from_rational(r: &Rational) -> Self {
            Fx((r.numer() << FRAC_BITS) / r.denom())
        }

        fn mul(&self, other: &Fx) -> Fx {
            Fx((&self.0 * &other.0) >> FRAC_BITS)
        }

        fn div_int(&self, k: u32) -> Fx {
            Fx(&self.0 / BigInt::from(k))
        }

        fn add(&self, other: &Fx) -> Fx {
            Fx(&self.0 + &other.0)
        }

        fn sub(&self, other: &Fx) -> Fx {
            Fx(&self.0 - &other.0)
        }

        fn to_f64(&self) -> f64 {
            self.0.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(FRAC_BITS as i32))
        }

        fn is_negligible(&self) -> bool {
            self.0.bits() < 4
        }
    }

    struct Mat {
        n: usize,
        data: Vec<Fx>,
    }

    impl Mat {
        fn from_dense(m: &DMatrix<f64>) -> Self {
            let n = m.nrows();
            Mat {
                n,
                data: (0..n * n).map(|k| Fx::from_f64(m[(k / n, k % n)])).collect(),
            }
        }

        fn mul_vec(&self, v: &[Fx]) -> Vec<Fx> {
            (0..self.n)
                .map(|i| {
                    let mut acc = BigInt::zero();
                    for (j, x) in v.iter().enumerate() {
                        acc += &self.data[i * self.n + j].0 * &x.0;
                    }
                    Fx(acc >> FRAC_BITS)
                })
                .collect()
        }
    }

    /// `e^{tM} v` by Taylor series, valid for `‖tM‖` of order one.
    fn expm_vec(m: &Mat, t: &Fx, v: &[Fx]) -> Vec<Fx> {
        let mut sum = v.to_vec();
        let mut term = v.to_vec();
        for k in 1..400u32 {
            term = m.mul_vec(&term).iter().map(|x| x.mul(t).div_int(k)).collect();
            sum = sum.iter().zip(&term).map(|(a, b)| a.add(b)).collect();
            if term.iter().all(Fx::is_negligible) {
                break;
            }
        }
        sum
    }

    pub fn one_step_error(scheme: &SplitScheme, oracle: &MatrixOraclePair, tau: f64, v: &DVector<f64>) -> f64 {
        let a = Mat::from_dense(&oracle.a);
        let b = Mat::from_dense(&oracle.b);
        // A + B formed in fixed point; the f64 sum would round.
        let sum = Mat {
            n: a.n,
            data: a.data.iter().zip(&b.data).map(|(x, y)| x.add(y)).collect(),
        };
        let tau = Fx::from_f64(tau);
        let v0: Vec<Fx> = v.iter().map(|&x| Fx::from_f64(x)).collect();
        let mut out = vec![Fx(BigInt::zero()); v0.len()];
        for term in &scheme.terms {
            let mut cur = v0.clone();
            for st in &term.stages {
                if !st.a.is_zero() {
                    cur = expm_vec(&a, &Fx::from_rational(&st.a).mul(&tau), &cur);
                }
                if !st.b.is_zero() {
                    cur = expm_vec(&b, &Fx::from_rational(&st.b).mul(&tau), &cur);
                }
            }
            let w = Fx::from_rational(&term.weight);
            out = out.iter().zip(&cur).map(|(o, c)| o.add(&w.mul(c))).collect();
        }
        let exact = expm_vec(&sum, &tau, &v0);
        out.iter()
            .zip(&exact)
            .map(|(x, y)| x.sub(y).to_f64().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[cfg(test)]
    mod tests {
        use super::*;
        use crate::scheme::rat;

        #[test]
        fn conversions_round_trip() {
            for x in [1.0, -0.3, 1e-40, 12345.678] {
                assert_eq!(Fx::from_f64(x).to_f64(), x);
            }
            let third = Fx::from_rational(&rat(1, 3));
            let one = third.add(&third).add(&third);
            assert!((one.to_f64() - 1.0).abs() < 1e-60);
        }

        #[test]
        fn scalar_exponential() {
            let m = Mat {
                n: 1,
                data: vec![Fx::from_f64(1.0)],
            };
            let e = expm_vec(&m, &Fx::from_f64(1.0), &[Fx::from_f64(1.0)]);
            assert_eq!(e[0].to_f64(), std::f64::consts::E);
        }
    }
}
