//! Independent oracles frozen as regression tests.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use common::*;
use mpesplit::flows::{
    double_well_flow_scalar, ssprk104, tanh_flow_scalar, FlowKind, NonlinearFlow, Nonlinearity, RkConfig,
};
use mpesplit::models::{ModelId, ModelSpec, NlsPotential};
use mpesplit::order::{fit_line, reversibility_defect, verify_conditions, MatrixOraclePair};
use mpesplit::scheme::{
    apply, catalog, catalog_all, rat, richardson_scheme, FlowPair, Rational, SplitScheme, Stage, Term,
};
use mpesplit::state::{State, VectorSpace};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::Rng;

type Poly = BTreeMap<Vec<u8>, Rational>;

fn truncated_exp(letter: u8, c: &Rational, degree: usize) -> Poly {
    let mut out = Poly::new();
    let mut coef = Rational::one();
    for n in 0..=degree {
        out.insert(vec![letter; n], coef.clone());
        coef = coef * c / Rational::from_integer((n as i64 + 1).into());
    }
    out
}

/// `p` followed by `q` in application order, truncated at `degree`.
fn then(p: &Poly, q: &Poly, degree: usize) -> Poly {
    let mut out = Poly::new();
    for (wp, cp) in p {
        for (wq, cq) in q {
            if wp.len() + wq.len() > degree {
                continue;
            }
            let w: Vec<u8> = wp.iter().chain(wq).copied().collect();
            *out.entry(w).or_insert_with(Rational::zero) += cp * cq;
        }
    }
    out
}

fn scheme_series(scheme: &SplitScheme, degree: usize) -> Poly {
    let mut total = Poly::new();
    for term in &scheme.terms {
        let mut p: Poly = [(vec![], Rational::one())].into_iter().collect();
        for st in &term.stages {
            p = then(&p, &truncated_exp(b'A', &st.a, degree), degree);
            p = then(&p, &truncated_exp(b'B', &st.b, degree), degree);
        }
        for (w, c) in p {
            *total.entry(w).or_insert_with(Rational::zero) += &term.weight * c;
        }
    }
    total
}

fn random_scheme(rng: &mut impl Rng) -> SplitScheme {
    let terms_n = rng.gen_range(1..4);
    let raw: Vec<i64> = (0..terms_n).map(|_| rng.gen_range(1..9)).collect();
    let wsum: i64 = raw.iter().sum();
    let terms = raw
        .iter()
        .map(|&w| {
            let m = rng.gen_range(1..5);
            let a: Vec<i64> = (0..m).map(|_| rng.gen_range(0..7)).collect();
            let b: Vec<i64> = (0..m).map(|_| rng.gen_range(0..7)).collect();
            let nonzero = |mut v: Vec<i64>| {
                if v.iter().all(|&x| x == 0) {
                    v[0] = 1;
                }
                v
            };
            let (a, b) = (nonzero(a), nonzero(b));
            let (sa, sb) = (a.iter().sum::<i64>(), b.iter().sum::<i64>());
            Term {
                weight: rat(w, wsum),
                stages: a
                    .iter()
                    .zip(&b)
                    .map(|(&x, &y)| Stage::new(rat(x, sa), rat(y, sb)))
                    .collect(),
            }
        })
        .collect();
    SplitScheme::new("random", 1, terms).unwrap()
}

#[test]
fn condition_sums_match_series_coefficients() {
    let mut r = rng(2024);
    let fact = [1, 1, 2, 6];
    for _ in 0..40 {
        let scheme = random_scheme(&mut r);
        let series = scheme_series(&scheme, 3);
        for rep in verify_conditions(&scheme, 3) {
            let word: Vec<u8> = if rep.condition_id == "I" {
                vec![]
            } else {
                rep.condition_id.bytes().collect()
            };
            let k = word.len();
            let coef = series.get(&word).cloned().unwrap_or_else(Rational::zero);
            assert_eq!(
                &rep.lhs / &rep.rhs,
                coef * Rational::from_integer(fact[k].into()),
                "{} on {:?}",
                rep.condition_id,
                scheme.terms
            );
        }
    }
}

#[test]
fn ssp_rk_is_fourth_order() {
    let v0 = 0.7_f64;
    let exact = double_well_flow_scalar(v0, 1.0);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for n in [2usize, 4, 8, 16, 32] {
        let out = ssprk104(|u: &f64| u - u * u * u, &v0, 1.0, RkConfig::new(n).unwrap());
        x.push((1.0 / n as f64).ln());
        y.push((out - exact).abs().ln());
    }
    let (slope, _) = fit_line(&x, &y);
    assert!((slope - 4.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn rk_matches_closed_forms() {
    let grid = mpesplit::grid::make_grid(2, 16, 2.0 * PI).unwrap();
    let mut r = rng(5);
    for _ in 0..10 {
        let u = State::single(random_real(&grid, 1.5, &mut r));
        let tau = 1e-2;
        let closed = NonlinearFlow::new(FlowKind::ClosedFormDoubleWell { bound: 6.0 })
            .apply(&u, tau)
            .unwrap();
        let rk = NonlinearFlow::new(FlowKind::RkGeneric {
            rhs: Nonlinearity::DoubleWell { bound: Some(6.0) },
            conservative: false,
        })
        .apply(&u, tau)
        .unwrap();
        assert!(closed.distance_inf(&rk).unwrap() < 1e-10);

        let closed = NonlinearFlow::new(FlowKind::ClosedFormTanh { lambda: 1.0 })
            .apply(&u, tau)
            .unwrap();
        let rk = NonlinearFlow::new(FlowKind::RkGeneric {
            rhs: Nonlinearity::Tanh { lambda: 1.0 },
            conservative: false,
        })
        .apply(&u, tau)
        .unwrap();
        assert!(closed.distance_inf(&rk).unwrap() < 1e-10);
    }
    assert_eq!(tanh_flow_scalar(0.0, 1.0, 0.5), 0.0);
}

fn strang_power<F: FlowPair<State>>(flows: &F, tau: f64, gamma: u32, u: &State) -> State {
    let h = tau / gamma as f64;
    let mut cur = u.clone();
    for _ in 0..gamma {
        cur = flows.flow_a(h / 2.0, &cur).unwrap();
        cur = flows.flow_b(h, &cur).unwrap();
        cur = flows.flow_a(h / 2.0, &cur).unwrap();
    }
    cur
}

#[test]
fn richardson_equals_weighted_strang_powers() {
    let spec = ModelSpec::defaults(ModelId::Ac).with_n(32);
    let grid = spec.grid().unwrap();
    let flows = spec.flows(&grid, false).unwrap();
    let u = spec.initial_condition(&grid).unwrap();
    let tau = 1.0 / 40.0;

    let s44 = apply(&catalog("s4_4").unwrap(), &flows, tau, &u).unwrap();
    let mut hand = strang_power(&flows, tau, 1, &u);
    hand.scale_mut(-1.0 / 3.0);
    hand.axpy_mut(4.0 / 3.0, &strang_power(&flows, tau, 2, &u));
    assert!(s44.distance_inf(&hand).unwrap() < 1e-13);

    let s6 = apply(&richardson_scheme(&[1, 2, 3]).unwrap(), &flows, tau, &u).unwrap();
    let weights = [1.0 / 24.0, -16.0 / 15.0, 81.0 / 40.0];
    let parts: Vec<State> = (1..=3).map(|g| strang_power(&flows, tau, g, &u)).collect();
    let hand = State::weighted_sum(&weights, &parts);
    assert!(s6.distance_inf(&hand).unwrap() < 1e-13);
}

fn is_palindrome(stages: &[Stage]) -> bool {
    let mut seq: Vec<(u8, Rational)> = Vec::new();
    for st in stages {
        for (l, c) in [(b'A', &st.a), (b'B', &st.b)] {
            if c.is_zero() {
                continue;
            }
            match seq.last_mut() {
                Some((last, acc)) if *last == l => *acc += c,
                _ => seq.push((l, c.clone())),
            }
        }
    }
    seq.iter().eq(seq.iter().rev())
}

#[test]
fn symmetric_components_are_reversible() {
    let oracle = MatrixOraclePair::default();
    let mut checked = 0;
    for scheme in catalog_all() {
        for term in scheme.terms.iter().filter(|t| is_palindrome(&t.stages)) {
            let d = reversibility_defect(&term.stages, &oracle, 0.1).unwrap();
            assert!(d <= 1e-12, "{}: {d}", scheme.name);
            checked += 1;
        }
    }
    assert!(checked >= 10);
    let lie = &catalog("lie1").unwrap().terms[0];
    assert!(!is_palindrome(&lie.stages));
    assert!(reversibility_defect(&lie.stages, &oracle, 0.1).unwrap() > 1e-4);
}

#[test]
fn ac_energy_of_sine_matches_quadrature() {
    let spec = ModelSpec::defaults(ModelId::Ac).with_n(64);
    let grid = spec.grid().unwrap();
    let u = State::single(mpesplit::grid::Field::from_fn_real(&grid, |x, _| x.sin()));
    let e = spec.energy(&u).unwrap();
    // Midpoint rule on 4096 points in x; the integrand does not depend on y.
    let eps = spec.epsilon;
    let m = 4096;
    let h = 2.0 * PI / m as f64;
    let line: f64 = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            eps * eps / 2.0 * x.cos().powi(2) + (x.sin().powi(2) - 1.0).powi(2) / 4.0
        })
        .sum::<f64>()
        * h;
    let oracle = line * 2.0 * PI;
    assert!((e - oracle).abs() < 1e-12 * oracle, "{e} vs {oracle}");
    let closed = PI * PI * (eps * eps + 3.0 / 8.0);
    assert!((oracle - closed).abs() < 1e-12 * closed);
}

#[test]
fn nls_sech_mass_is_four() {
    let spec = ModelSpec::defaults(ModelId::NlsLinear).with_n(256);
    let grid = spec.grid().unwrap();
    let u = spec.initial_condition(&grid).unwrap();
    assert!((spec.mass(&u) - 4.0).abs() < 1e-6);
    let z = u.primary().values()[grid.len() / 2 + grid.n() / 2];
    assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-12);
}

fn nls_residual(potential: NlsPotential) -> f64 {
    let spec = ModelSpec {
        nls_potential: potential,
        ..ModelSpec::defaults(ModelId::NlsNonlinear).with_n(128)
    };
    let grid = spec.grid().unwrap();
    let t = 0.3;
    let u = spec.exact_solution(t, &grid).unwrap();
    let u = u.primary();
    // Time derivative by a fourth-order central difference of the closed form.
    let h = 1e-3;
    let at = |s: f64| spec.exact_solution(s, &grid).unwrap().primary().clone();
    let (m2, m1, p1, p2) = (at(t - 2.0 * h), at(t - h), at(t + h), at(t + 2.0 * h));
    let lap = u.laplacian();
    let omega = spec.potential(&grid).unwrap();
    let i = Complex64::new(0.0, 1.0);
    let mut acc = 0.0;
    for k in 0..grid.len() {
        let ut = (m2.values()[k] - 8.0 * m1.values()[k] + 8.0 * p1.values()[k] - p2.values()[k]) / (12.0 * h);
        let v = u.values()[k];
        let rhs = i * spec.epsilon * lap.values()[k] + i * (omega.values()[k].re + spec.rho * v.norm_sqr()) * v;
        acc += (ut - rhs).norm_sqr();
    }
    (acc * grid.cell_volume()).sqrt()
}

#[test]
fn nls_standing_wave_solves_its_equation() {
    let consistent = nls_residual(NlsPotential::Consistent);
    assert!(consistent <= 1e-8, "{consistent}");
    // The alternative potential leaves an O(1) residual.
    assert!(nls_residual(NlsPotential::Additive) > 0.1);
}

#[test]
fn cac_step_keeps_mass() {
    let spec = ModelSpec::defaults(ModelId::Cac).with_n(64);
    let grid = spec.grid().unwrap();
    let flows = spec.flows(&grid, false).unwrap();
    let u = spec.initial_condition(&grid).unwrap();
    let m0 = spec.mass(&u);
    for name in ["strang_a", "s3_1", "s4_3", "s6"] {
        let out = apply(&catalog(name).unwrap(), &flows, 0.01, &u).unwrap();
        assert!((spec.mass(&out) - m0).abs() <= 1e-12 * m0.abs(), "{name}");
    }
}

#[test]
fn ac_smooth_data_obeys_maximum_principle() {
    let spec = ModelSpec::defaults(ModelId::Ac).with_n(32);
    let grid = spec.grid().unwrap();
    let flows = spec.flows(&grid, false).unwrap();
    let mut r = rng(11);
    for name in ["strang_a", "s3_1", "s4_4", "s6"] {
        let scheme = catalog(name).unwrap();
        let mut u = State::single(random_smooth(&grid, 0.95, &mut r));
        for _ in 0..40 {
            u = apply(&scheme, &flows, 1.0 / 40.0, &u).unwrap();
            assert!(u.max_norm() <= 1.0 + 1e-12, "{name}: {}", u.max_norm());
        }
    }
}
