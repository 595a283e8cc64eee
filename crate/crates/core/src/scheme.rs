//! Splitting schemes as exact rational data, the named catalog, Richardson
//! extrapolation from Strang splitting, and the engine that applies a scheme
//! to a pair of sub-flows.
//!
//! A term's stage list `(a₁,b₁), …, (a_m,b_m)` means: for `j = 1..m`, advance
//! with the A-flow for `a_j τ`, then the B-flow for `b_j τ`. A stage with a zero
//! coefficient skips that flow, so a trailing `b_m = 0` is a final pure A-step.
//! The scheme output is `Σ_i c_i · term_i(u)`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::VectorSpace;

pub type Rational = BigRational;

/// `p/q` as an exact rational.
pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"1.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidScheme(format!("bad rational `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let num: BigInt = digits.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("finite rational")
}

/// One A-then-B substep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub a: Rational,
    pub b: Rational,
}

impl Stage {
    pub fn new(a: Rational, b: Rational) -> Self {
        Self { a, b }
    }
}

/// One weighted product chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub weight: Rational,
    pub stages: Vec<Stage>,
}

impl Term {
    pub fn a_sum(&self) -> Rational {
        self.stages.iter().map(|s| s.a.clone()).sum()
    }

    pub fn b_sum(&self) -> Rational {
        self.stages.iter().map(|s| s.b.clone()).sum()
    }
}

/// A factor in application order, used to transcribe products of exponentials.
#[derive(Clone, Copy, Debug)]
pub enum Factor {
    A(i64, i64),
    B(i64, i64),
}

/// Folds a left-to-right application sequence into A-then-B stages, merging
/// adjacent factors of the same operator.
pub fn stages_from_factors(factors: &[Factor]) -> Vec<Stage> {
    let mut stages = Vec::new();
    let mut pending_a: Option<Rational> = None;
    let mut last_was_b = false;
    for f in factors {
        match *f {
            Factor::A(p, q) => {
                let x = rat(p, q);
                pending_a = Some(pending_a.map_or(x.clone(), |a| a + x));
                last_was_b = false;
            }
            Factor::B(p, q) => {
                let y = rat(p, q);
                match pending_a.take() {
                    Some(a) => stages.push(Stage::new(a, y)),
                    None if last_was_b => {
                        let s: &mut Stage = stages.last_mut().expect("previous B stage");
                        s.b += y;
                    }
                    None => stages.push(Stage::new(Rational::zero(), y)),
                }
                last_was_b = true;
            }
        }
    }
    if let Some(a) = pending_a {
        stages.push(Stage::new(a, Rational::zero()));
    }
    stages
}

/// Structural class of a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeClass {
    /// Several chains, all step coefficients nonnegative.
    MpePositive,
    /// A single chain with nonnegative coefficients.
    Spe,
    /// A single chain with at least one negative coefficient.
    SpeNegative,
}

impl SchemeClass {
    pub fn classify(terms: &[Term]) -> Result<Self> {
        let negative = terms
            .iter()
            .flat_map(|t| &t.stages)
            .any(|s| s.a.is_negative() || s.b.is_negative());
        match (terms.len(), negative) {
            (1, false) => Ok(SchemeClass::Spe),
            (1, true) => Ok(SchemeClass::SpeNegative),
            (_, false) => Ok(SchemeClass::MpePositive),
            (_, true) => Err(Error::InvalidScheme(
                "multi-term schemes with negative step coefficients are not supported".into(),
            )),
        }
    }
}

impl fmt::Display for SchemeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeClass::MpePositive => "mpe_positive",
            SchemeClass::Spe => "spe",
            SchemeClass::SpeNegative => "spe_negative",
        })
    }
}

/// A weighted list of stage sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitScheme {
    pub name: String,
    pub claimed_order: u32,
    pub terms: Vec<Term>,
    pub class: SchemeClass,
    /// False when coefficients are rational approximations of irrationals.
    pub exact: bool,
}

impl SplitScheme {
    /// Builds and validates a scheme: `Σ c_i = 1` exactly, and for nonnegative
    /// schemes every term advances A and B by exactly one step.
    pub fn new(name: impl Into<String>, claimed_order: u32, terms: Vec<Term>) -> Result<Self> {
        let name = name.into();
        if terms.is_empty() || terms.iter().any(|t| t.stages.is_empty()) {
            return Err(Error::InvalidScheme(format!("{name}: empty term")));
        }
        if claimed_order == 0 {
            return Err(Error::InvalidScheme(format!("{name}: order must be >= 1")));
        }
        let sum: Rational = terms.iter().map(|t| t.weight.clone()).sum();
        if !sum.is_one() {
            return Err(Error::InvalidScheme(format!(
                "{name}: weights sum to {}, not 1",
                format_rational(&sum)
            )));
        }
        let class = SchemeClass::classify(&terms)?;
        if class != SchemeClass::SpeNegative {
            for (i, t) in terms.iter().enumerate() {
                if !t.a_sum().is_one() || !t.b_sum().is_one() {
                    return Err(Error::InvalidScheme(format!(
                        "{name}: term {i} has step sums a = {}, b = {}",
                        format_rational(&t.a_sum()),
                        format_rational(&t.b_sum())
                    )));
                }
            }
        }
        Ok(Self {
            name,
            claimed_order,
            terms,
            class,
            exact: true,
        })
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.terms.iter().map(|t| to_f64(&t.weight)).collect()
    }

    pub fn stage_count(&self) -> usize {
        self.terms.iter().map(|t| t.stages.len()).sum()
    }

    /// True when the hypotheses of the uniform stability bound hold:
    /// nonnegative steps and unit A-step sums per term.
    pub fn meets_stability_hypotheses(&self) -> bool {
        self.class != SchemeClass::SpeNegative
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SchemeJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SchemeJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// Serialized scheme; rationals travel as `"p/q"` strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeJson {
    pub name: String,
    pub claimed_order: u32,
    pub class: SchemeClass,
    pub terms: Vec<TermJson>,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub c: String,
    pub stages: Vec<[String; 2]>,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

impl From<&SplitScheme> for SchemeJson {
    fn from(s: &SplitScheme) -> Self {
        Self {
            name: s.name.clone(),
            claimed_order: s.claimed_order,
            class: s.class,
            exact: s.exact,
            terms: s
                .terms
                .iter()
                .map(|t| TermJson {
                    c: format_rational(&t.weight),
                    stages: t
                        .stages
                        .iter()
                        .map(|st| [format_rational(&st.a), format_rational(&st.b)])
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<SchemeJson> for SplitScheme {
    type Error = Error;

    fn try_from(raw: SchemeJson) -> Result<Self> {
        let terms = raw
            .terms
            .iter()
            .map(|t| {
                Ok(Term {
                    weight: parse_rational(&t.c)?,
                    stages: t
                        .stages
                        .iter()
                        .map(|[a, b]| Ok(Stage::new(parse_rational(a)?, parse_rational(b)?)))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut scheme = SplitScheme::new(raw.name, raw.claimed_order, terms)?;
        if scheme.class != raw.class {
            return Err(Error::InvalidScheme(format!(
                "declared class {} but coefficients imply {}",
                raw.class, scheme.class
            )));
        }
        scheme.exact = raw.exact;
        Ok(scheme)
    }
}

/// `c_i = Π_{j≠i} γ_i² / (γ_i² − γ_j²)`.
pub fn richardson_weights(gammas: &[u32]) -> Result<Vec<Rational>> {
    if gammas.is_empty() {
        return Err(Error::InvalidScheme("empty Richardson sequence".into()));
    }
    for (i, g) in gammas.iter().enumerate() {
        if *g == 0 {
            return Err(Error::InvalidScheme("gamma must be >= 1".into()));
        }
        if gammas[..i].contains(g) {
            return Err(Error::DuplicateGamma(*g));
        }
    }
    Ok(gammas
        .iter()
        .map(|&gi| {
            let gi2 = i64::from(gi) * i64::from(gi);
            gammas.iter().filter(|&&gj| gj != gi).fold(Rational::one(), |acc, &gj| {
                let gj2 = i64::from(gj) * i64::from(gj);
                acc * rat(gi2, gi2 - gj2)
            })
        })
        .collect())
}

/// `Σ c_i [S₂(τ/γ_i)]^{γ_i}` with A-first Strang steps; adjacent half A-steps
/// of consecutive Strang factors are merged.
pub fn richardson_scheme(gammas: &[u32]) -> Result<SplitScheme> {
    let weights = richardson_weights(gammas)?;
    let terms = gammas
        .iter()
        .zip(weights)
        .map(|(&g, weight)| {
            let g = i64::from(g);
            let mut stages = vec![Stage::new(rat(1, 2 * g), rat(1, g))];
            stages.extend((1..g).map(|_| Stage::new(rat(1, g), rat(1, g))));
            stages.push(Stage::new(rat(1, 2 * g), Rational::zero()));
            Term { weight, stages }
        })
        .collect();
    let order = 2 * gammas.len() as u32;
    let name = format!(
        "richardson({})",
        gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
    );
    SplitScheme::new(name, order, terms)
}

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 15] = [
    "lie1", "lie2", "strang_a", "strang_b", "sws2", "s3_1", "s3_2", "s4_1", "s4_2", "s4_3", "s4_4", "s6", "s8", "s10",
    "s4_neg",
];

/// `(2 + 2^{1/3} + 2^{−1/3}) / 3` to 30 significant digits.
pub const S4_NEG_S: &str = "1.35120719195965763404768780897";

fn term(weight: Rational, factors: &[Factor]) -> Term {
    Term {
        weight,
        stages: stages_from_factors(factors),
    }
}

/// Returns a named scheme. Products of exponentials are transcribed with the
/// leftmost factor applied first.
pub fn catalog(name: &str) -> Result<SplitScheme> {
    use Factor::{A, B};
    let scheme = match name {
        "lie1" => SplitScheme::new(name, 1, vec![term(rat(1, 1), &[B(1, 1), A(1, 1)])])?,
        "lie2" => SplitScheme::new(name, 1, vec![term(rat(1, 1), &[A(1, 1), B(1, 1)])])?,
        "strang_a" => SplitScheme::new(name, 2, vec![term(rat(1, 1), &[A(1, 2), B(1, 1), A(1, 2)])])?,
        "strang_b" => SplitScheme::new(name, 2, vec![term(rat(1, 1), &[B(1, 2), A(1, 1), B(1, 2)])])?,
        "sws2" => SplitScheme::new(
            name,
            2,
            vec![
                term(rat(1, 2), &[B(1, 1), A(1, 1)]),
                term(rat(1, 2), &[A(1, 1), B(1, 1)]),
            ],
        )?,
        "s3_1" => SplitScheme::new(
            name,
            3,
            vec![
                term(rat(2, 3), &[A(1, 2), B(1, 1), A(1, 2)]),
                term(rat(2, 3), &[B(1, 2), A(1, 1), B(1, 2)]),
                term(rat(-1, 6), &[B(1, 1), A(1, 1)]),
                term(rat(-1, 6), &[A(1, 1), B(1, 1)]),
            ],
        )?,
        "s3_2" => SplitScheme::new(
            name,
            3,
            vec![
                term(rat(9, 8), &[B(1, 3), A(2, 3), B(2, 3), A(1, 3)]),
                term(rat(-1, 8), &[B(1, 1), A(1, 1)]),
            ],
        )?,
        "s4_1" => SplitScheme::new(
            name,
            4,
            vec![
                term(rat(2, 3), &[B(1, 2), A(1, 2), B(1, 2), A(1, 2)]),
                term(rat(2, 3), &[A(1, 2), B(1, 2), A(1, 2), B(1, 2)]),
                term(rat(-1, 6), &[A(1, 1), B(1, 1)]),
                term(rat(-1, 6), &[B(1, 1), A(1, 1)]),
            ],
        )?,
        // The second chain is the A/B mirror of the first; its middle A-step is
        // 1/2 so that the A-steps of the chain sum to one.
        "s4_2" => SplitScheme::new(
            name,
            4,
            vec![
                term(rat(2, 3), &[A(1, 4), B(1, 2), A(1, 2), B(1, 2), A(1, 4)]),
                term(rat(2, 3), &[B(1, 4), A(1, 2), B(1, 2), A(1, 2), B(1, 4)]),
                term(rat(-1, 6), &[A(1, 2), B(1, 1), A(1, 2)]),
                term(rat(-1, 6), &[B(1, 2), A(1, 1), B(1, 2)]),
            ],
        )?,
        "s4_3" => SplitScheme::new(
            name,
            4,
            vec![
                term(
                    rat(4, 3),
                    &[A(1, 8), B(1, 4), A(3, 8), B(1, 2), A(3, 8), B(1, 4), A(1, 8)],
                ),
                term(
                    rat(4, 3),
                    &[B(1, 8), A(1, 4), B(3, 8), A(1, 2), B(3, 8), A(1, 4), B(1, 8)],
                ),
                term(rat(-5, 6), &[A(1, 4), B(1, 2), A(1, 2), B(1, 2), A(1, 4)]),
                term(rat(-5, 6), &[B(1, 4), A(1, 2), B(1, 2), A(1, 2), B(1, 4)]),
            ],
        )?,
        "s4_4" => rename(richardson_scheme(&[1, 2])?, name),
        "s6" => rename(richardson_scheme(&[1, 2, 3])?, name),
        "s8" => rename(richardson_scheme(&[1, 2, 3, 4])?, name),
        "s10" => rename(richardson_scheme(&[1, 2, 3, 4, 5])?, name),
        "s4_neg" => {
            let s = parse_rational(S4_NEG_S)?;
            let one = Rational::one();
            let two = rat(2, 1);
            let half_s = &s / &two;
            let half_rest = (&one - &s) / &two;
            let stages = vec![
                Stage::new(half_s.clone(), s.clone()),
                Stage::new(half_rest.clone(), &one - &two * &s),
                Stage::new(half_rest, s.clone()),
                Stage::new(half_s, Rational::zero()),
            ];
            let mut scheme = SplitScheme::new(name, 4, vec![Term { weight: one, stages }])?;
            scheme.exact = false;
            scheme
        }
        other => return Err(Error::UnknownScheme(other.to_string())),
    };
    Ok(scheme)
}

fn rename(mut s: SplitScheme, name: &str) -> SplitScheme {
    s.name = name.to_string();
    s
}

/// Every catalog entry, in catalog order.
pub fn catalog_all() -> Vec<SplitScheme> {
    CATALOG_NAMES
        .iter()
        .map(|n| catalog(n).expect("catalog entries are valid"))
        .collect()
}

/// Constants entering the uniform stability bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeStats {
    /// `c̃ = Σ |c_i|`.
    pub sum_c_abs: Rational,
    /// `b = max_i Σ_j b_{i,j}`.
    pub b_max: Rational,
    pub stage_count: usize,
}

impl SchemeStats {
    /// Growth rate `C = (c̃ + 1) κ b` of the bound `e^{Cτ}`.
    pub fn growth_rate(&self, kappa: f64) -> f64 {
        (to_f64(&self.sum_c_abs) + 1.0) * kappa * to_f64(&self.b_max)
    }
}

pub fn scheme_stats(scheme: &SplitScheme) -> SchemeStats {
    SchemeStats {
        sum_c_abs: scheme.terms.iter().map(|t| t.weight.abs()).sum(),
        b_max: scheme
            .terms
            .iter()
            .map(Term::b_sum)
            .max()
            .unwrap_or_else(Rational::zero),
        stage_count: scheme.stage_count(),
    }
}

/// The two sub-flows a scheme composes.
pub trait FlowPair<S> {
    fn flow_a(&self, tau: f64, state: &S) -> Result<S>;
    fn flow_b(&self, tau: f64, state: &S) -> Result<S>;
}

/// Adapts two closures into a [`FlowPair`].
pub struct FnFlows<FA, FB> {
    pub a: FA,
    pub b: FB,
}

impl<S, FA, FB> FlowPair<S> for FnFlows<FA, FB>
where
    FA: Fn(f64, &S) -> Result<S>,
    FB: Fn(f64, &S) -> Result<S>,
{
    fn flow_a(&self, tau: f64, state: &S) -> Result<S> {
        (self.a)(tau, state)
    }

    fn flow_b(&self, tau: f64, state: &S) -> Result<S> {
        (self.b)(tau, state)
    }
}

/// Runs one product chain from `state`.
pub fn apply_term<S, F>(index: usize, term: &Term, flows: &F, tau: f64, state: &S) -> Result<S>
where
    S: Clone,
    F: FlowPair<S> + ?Sized,
{
    let wrap = |stage: usize| {
        move |e: Error| Error::Flow {
            term: index,
            stage,
            source: Box::new(e),
        }
    };
    let mut cur = state.clone();
    for (j, st) in term.stages.iter().enumerate() {
        if !st.a.is_zero() {
            cur = flows.flow_a(to_f64(&st.a) * tau, &cur).map_err(wrap(j))?;
        }
        if !st.b.is_zero() {
            cur = flows.flow_b(to_f64(&st.b) * tau, &cur).map_err(wrap(j))?;
        }
    }
    Ok(cur)
}

fn check_direction(scheme: &SplitScheme, tau: f64) -> Result<()> {
    if tau < 0.0 && scheme.class == SchemeClass::MpePositive {
        return Err(Error::InvalidScheme(format!(
            "{}: negative step {tau} for a multi-product scheme",
            scheme.name
        )));
    }
    Ok(())
}

/// One step `u ← Σ_i c_i · term_i(u)`, terms evaluated in order.
pub fn apply<S, F>(scheme: &SplitScheme, flows: &F, tau: f64, state: &S) -> Result<S>
where
    S: VectorSpace,
    F: FlowPair<S> + ?Sized,
{
    check_direction(scheme, tau)?;
    if scheme.terms.len() == 1 && scheme.terms[0].weight.is_one() {
        return apply_term(0, &scheme.terms[0], flows, tau, state);
    }
    let parts = scheme
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| apply_term(i, t, flows, tau, state))
        .collect::<Result<Vec<S>>>()?;
    Ok(S::weighted_sum(&scheme.weights_f64(), &parts))
}

/// Same as [`apply`] with terms evaluated concurrently; the weighted sum is
/// still accumulated in catalog order, so results match bit for bit.
pub fn apply_parallel<S, F>(scheme: &SplitScheme, flows: &F, tau: f64, state: &S) -> Result<S>
where
    S: VectorSpace + Send + Sync,
    F: FlowPair<S> + Sync + ?Sized,
{
    check_direction(scheme, tau)?;
    if scheme.terms.len() == 1 && scheme.terms[0].weight.is_one() {
        return apply_term(0, &scheme.terms[0], flows, tau, state);
    }
    let parts = scheme
        .terms
        .par_iter()
        .enumerate()
        .map(|(i, t)| apply_term(i, t, flows, tau, state))
        .collect::<Result<Vec<S>>>()?;
    Ok(S::weighted_sum(&scheme.weights_f64(), &parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[Rational]) -> Vec<String> {
        v.iter().map(format_rational).collect()
    }

    #[test]
    fn richardson_weight_examples() {
        assert_eq!(strs(&richardson_weights(&[1, 2]).unwrap()), ["-1/3", "4/3"]);
        assert_eq!(strs(&richardson_weights(&[1]).unwrap()), ["1"]);
        assert_eq!(
            strs(&richardson_weights(&[1, 2, 3, 4]).unwrap()),
            ["-1/360", "16/45", "-729/280", "1024/315"]
        );
        assert!(matches!(richardson_weights(&[1, 2, 2]), Err(Error::DuplicateGamma(2))));
    }

    #[test]
    fn richardson_scheme_structure() {
        let s6 = richardson_scheme(&[1, 2, 3]).unwrap();
        assert_eq!(
            strs(&s6.terms.iter().map(|t| t.weight.clone()).collect::<Vec<_>>()),
            ["1/24", "-16/15", "81/40"]
        );
        assert_eq!(s6.terms[2].stages.len(), 4);
        assert_eq!(s6.class, SchemeClass::MpePositive);
        let s10 = richardson_scheme(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(
            strs(&s10.terms.iter().map(|t| t.weight.clone()).collect::<Vec<_>>()),
            ["1/8640", "-64/945", "6561/4480", "-16384/2835", "390625/72576"]
        );
        let single = richardson_scheme(&[1]).unwrap();
        let strang = catalog("strang_a").unwrap();
        assert_eq!(single.terms, strang.terms);
        assert_eq!(single.class, strang.class);
    }

    #[test]
    fn catalog_examples() {
        let s32 = catalog("s3_2").unwrap();
        assert_eq!(s32.terms[0].weight, rat(9, 8));
        assert_eq!(s32.terms[1].weight, rat(-1, 8));
        assert_eq!(
            s32.terms[0].stages,
            vec![
                Stage::new(rat(0, 1), rat(1, 3)),
                Stage::new(rat(2, 3), rat(2, 3)),
                Stage::new(rat(1, 3), rat(0, 1)),
            ]
        );
        let s44 = catalog("s4_4").unwrap();
        assert_eq!(s44.terms[0].weight, rat(-1, 3));
        assert_eq!(s44.terms[1].weight, rat(4, 3));
        let lie = catalog("lie1").unwrap();
        assert_eq!(lie.terms.len(), 1);
        assert_eq!(lie.claimed_order, 1);
        assert!(lie.terms[0].a_sum().is_one() && lie.terms[0].b_sum().is_one());
        assert!(matches!(catalog("s5"), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn claimed_orders() {
        let orders: Vec<u32> = catalog_all().iter().map(|s| s.claimed_order).collect();
        assert_eq!(orders, [1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 4, 6, 8, 10, 4]);
    }

    #[test]
    fn s4_neg_coefficients() {
        let s = catalog("s4_neg").unwrap();
        assert_eq!(s.class, SchemeClass::SpeNegative);
        assert!(!s.exact);
        let sv = parse_rational(S4_NEG_S).unwrap().to_f64().unwrap();
        // Independent closed form of the same root: 1 / (2 − 2^{1/3}).
        assert!((sv - 1.0 / (2.0 - 2f64.cbrt())).abs() < 1e-15);
        assert!((sv - (2.0 + 2f64.cbrt() + 1.0 / 2f64.cbrt()) / 3.0).abs() < 1e-15);
        assert!(s.terms[0].stages.iter().any(|st| st.b.is_negative()));
    }

    #[test]
    fn stats_examples() {
        let st = scheme_stats(&catalog("s3_1").unwrap());
        assert_eq!(st.sum_c_abs, rat(5, 3));
        let st = scheme_stats(&catalog("lie1").unwrap());
        assert_eq!((st.sum_c_abs, st.b_max), (rat(1, 1), rat(1, 1)));
        let st = scheme_stats(&catalog("s4_4").unwrap());
        assert_eq!((st.sum_c_abs, st.b_max), (rat(5, 3), rat(1, 1)));
    }

    #[test]
    fn rejects_inconsistent_schemes() {
        let t = |w: Rational| Term {
            weight: w,
            stages: vec![Stage::new(rat(1, 1), rat(1, 1))],
        };
        assert!(SplitScheme::new("x", 1, vec![t(rat(1, 2))]).is_err());
        let bad_sum = Term {
            weight: rat(1, 1),
            stages: vec![Stage::new(rat(1, 2), rat(1, 1))],
        };
        assert!(SplitScheme::new("x", 1, vec![bad_sum]).is_err());
    }

    #[test]
    fn json_round_trip_and_class_check() {
        for s in catalog_all() {
            let back = SplitScheme::from_json(&s.to_json().unwrap()).unwrap();
            assert_eq!(back, s);
        }
        let text = catalog("lie1")
            .unwrap()
            .to_json()
            .unwrap()
            .replace("\"spe\"", "\"mpe_positive\"");
        assert!(SplitScheme::from_json(&text).is_err());
        assert!(catalog("s6").unwrap().to_json().unwrap().contains("\"81/40\""));
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("-3/6").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert_eq!(parse_rational("-1.25").unwrap(), rat(-5, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn identity_flows_leave_state_unchanged() {
        let flows = FnFlows {
            a: |_: f64, s: &f64| Ok(*s),
            b: |_: f64, s: &f64| Ok(*s),
        };
        for s in catalog_all() {
            let out = apply(&s, &flows, 0.1, &2.5).unwrap();
            assert!((out - 2.5).abs() < 1e-13, "{}", s.name);
        }
    }

    #[test]
    fn flow_errors_carry_position() {
        let flows = FnFlows {
            a: |_: f64, s: &f64| Ok(*s),
            b: |_: f64, _: &f64| Err::<f64, _>(Error::Unsupported("boom".into())),
        };
        let err = apply(&catalog("s3_2").unwrap(), &flows, 0.1, &1.0).unwrap_err();
        assert!(matches!(err, Error::Flow { term: 0, stage: 0, .. }), "{err}");
    }

    #[test]
    fn mpe_rejects_negative_tau() {
        let flows = FnFlows {
            a: |_: f64, s: &f64| Ok(*s),
            b: |_: f64, s: &f64| Ok(*s),
        };
        assert!(apply(&catalog("s6").unwrap(), &flows, -0.1, &1.0).is_err());
        assert!(apply(&catalog("strang_a").unwrap(), &flows, -0.1, &1.0).is_ok());
    }
}
