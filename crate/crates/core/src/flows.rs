//! Nonlinear sub-flows `E_B(τ)`: closed forms where they exist, a ten-stage
//! fourth-order SSP Runge–Kutta integrator otherwise, plus the truncated
//! nonlinearities that keep `f′` globally bounded.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::grid::{Field, ScalarKind};
use crate::state::{CompensatedSum, State, VectorSpace};

/// Internal substepping of [`ssprk104`]. Stage count (10) and order (4) are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RkConfig {
    pub substeps: usize,
}

impl Default for RkConfig {
    fn default() -> Self {
        Self { substeps: 4 }
    }
}

impl RkConfig {
    pub fn new(substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::Config("rk substeps must be >= 1".into()));
        }
        Ok(Self { substeps })
    }
}

/// Integrates `u′ = f(u)` over `tau` with `cfg.substeps` steps of Ketcheson's
/// low-storage SSPRK(10,4).
pub fn ssprk104<S, F>(f: F, v: &S, tau: f64, cfg: RkConfig) -> S
where
    S: VectorSpace,
    F: Fn(&S) -> S,
{
    let dt = tau / cfg.substeps.max(1) as f64;
    let mut u = v.clone();
    if tau == 0.0 {
        return u;
    }
    for _ in 0..cfg.substeps.max(1) {
        let mut q1 = u.clone();
        let mut q2 = u;
        for _ in 0..5 {
            let k = f(&q1);
            q1.axpy_mut(dt / 6.0, &k);
        }
        q2.scale_mut(1.0 / 25.0);
        q2.axpy_mut(9.0 / 25.0, &q1);
        q1.scale_mut(-5.0);
        q1.axpy_mut(15.0, &q2);
        for _ in 0..4 {
            let k = f(&q1);
            q1.axpy_mut(dt / 6.0, &k);
        }
        let k = f(&q1);
        let mut next = q2;
        next.axpy_mut(3.0 / 5.0, &q1);
        next.axpy_mut(dt / 10.0, &k);
        u = next;
    }
    u
}

/// Exact flow of `u′ = λ tanh u`: `arcsinh(sinh(v) e^{λτ})`.
pub fn tanh_flow_scalar(v: f64, lambda: f64, tau: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let growth = lambda * tau;
    let a = v.abs();
    // Past ~700 the product overflows; asinh(x) = ln(2x) + O(x⁻²) there.
    if a + growth > 700.0 {
        let log_sinh = a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2;
        return v.signum() * (log_sinh + growth + std::f64::consts::LN_2);
    }
    (v.sinh() * growth.exp()).asinh()
}

/// Pointwise tanh flow on a real field.
pub fn flow_tanh(v: &Field, lambda: f64, tau: f64) -> Field {
    v.map_real(|x| tanh_flow_scalar(x, lambda, tau))
}

/// Exact flow of `u′ = u − u³`: `e^τ v / sqrt(1 + (e^{2τ} − 1) v²)`.
pub fn double_well_flow_scalar(v: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return v;
    }
    tau.exp() * v / (1.0 + (2.0 * tau).exp_m1() * v * v).sqrt()
}

/// Closed-form double-well flow; requires `max |v| ≤ bound`.
pub fn flow_double_well(v: &Field, tau: f64, bound: f64) -> Result<Field> {
    let max = v.norm_inf();
    if max > bound {
        return Err(Error::BoundExceeded { max, bound });
    }
    Ok(v.map_real(|x| double_well_flow_scalar(x, tau)))
}

/// Exact flow of `u′ = i(ω + ρ|u|²)u`: `e^{iτ(ω + ρ|v|²)} v`.
pub fn flow_phase(v: &Field, omega: &Field, rho: f64, tau: f64) -> Result<Field> {
    v.ensure_same_grid(omega)?;
    let values = v
        .values()
        .iter()
        .zip(omega.values())
        .map(|(&z, w)| {
            let phase = tau * (w.re + rho * z.norm_sqr());
            z * Complex64::from_polar(1.0, phase)
        })
        .collect();
    Field::from_complex(v.grid(), values, ScalarKind::Complex)
}

/// `f̃_AC`: `u − u³` on `[−M, M]`, tangent lines outside.
pub fn truncate_double_well(u: f64, m: f64) -> f64 {
    if u > m {
        (1.0 - 3.0 * m * m) * u + 2.0 * m * m * m
    } else if u < -m {
        (1.0 - 3.0 * m * m) * u - 2.0 * m * m * m
    } else {
        u - u * u * u
    }
}

/// Derivative of [`truncate_double_well`].
pub fn truncate_double_well_derivative(u: f64, m: f64) -> f64 {
    if u.abs() > m {
        1.0 - 3.0 * m * m
    } else {
        1.0 - 3.0 * u * u
    }
}

/// `sup |f̃_AC′| = max(1, 3M² − 1)`.
pub fn double_well_kappa(m: f64) -> f64 {
    (3.0 * m * m - 1.0).max(1.0)
}

/// `K_pq = Γ(p+q+2) / (Γ(p+1) Γ(q+1)) = (p+q+1)! / (p! q!)`, computed exactly.
pub fn fkpp_constant_exact(p: u32, q: u32) -> BigUint {
    let fact = |k: u32| (1..=k).fold(BigUint::one(), |acc, i| acc * BigUint::from(i));
    fact(p + q + 1) / (fact(p) * fact(q))
}

pub fn fkpp_constant(p: u32, q: u32) -> f64 {
    fkpp_constant_exact(p, q).to_f64().expect("finite")
}

/// `f̃_FKPP` for `p = q = 5`: `K u⁵(1−u)⁵` on `[−M, M]`, linear outside.
pub fn truncate_fkpp(u: f64, m: f64, k: f64) -> f64 {
    if u > m {
        let c = k * m.powi(4) * (1.0 - m).powi(4);
        5.0 * c * (1.0 - 2.0 * m) * u + c * (9.0 * m * m - 4.0 * m)
    } else if u < -m {
        let c = k * m.powi(4) * (1.0 + m).powi(4);
        5.0 * c * (1.0 + 2.0 * m) * u + c * (9.0 * m * m + 4.0 * m)
    } else {
        k * u.powi(5) * (1.0 - u).powi(5)
    }
}

pub fn truncate_fkpp_derivative(u: f64, m: f64, k: f64) -> f64 {
    let c = u.clamp(-m, m);
    5.0 * k * c.powi(4) * (1.0 - c).powi(4) * (1.0 - 2.0 * c)
}

/// Pointwise reaction terms with optional truncation at `|u| = M`.
#[derive(Clone, Debug, PartialEq)]
pub enum Nonlinearity {
    /// `λ tanh u`.
    Tanh { lambda: f64 },
    /// `u − u³`, truncated when `bound` is set.
    DoubleWell { bound: Option<f64> },
    /// `K u⁵(1−u)⁵`, truncated when `bound` is set.
    Fkpp { k: f64, bound: Option<f64> },
}

impl Nonlinearity {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Tanh { lambda } => lambda * u.tanh(),
            Nonlinearity::DoubleWell { bound: Some(m) } => truncate_double_well(u, m),
            Nonlinearity::DoubleWell { bound: None } => u - u * u * u,
            Nonlinearity::Fkpp { k, bound: Some(m) } => truncate_fkpp(u, m, k),
            Nonlinearity::Fkpp { k, bound: None } => k * u.powi(5) * (1.0 - u).powi(5),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Tanh { lambda } => lambda / u.cosh().powi(2),
            Nonlinearity::DoubleWell { bound: Some(m) } => truncate_double_well_derivative(u, m),
            Nonlinearity::DoubleWell { bound: None } => 1.0 - 3.0 * u * u,
            Nonlinearity::Fkpp { k, bound: Some(m) } => truncate_fkpp_derivative(u, m, k),
            Nonlinearity::Fkpp { k, bound: None } => 5.0 * k * u.powi(4) * (1.0 - u).powi(4) * (1.0 - 2.0 * u),
        }
    }

    pub fn truncation_bound(&self) -> Option<f64> {
        match *self {
            Nonlinearity::Tanh { .. } => None,
            Nonlinearity::DoubleWell { bound } | Nonlinearity::Fkpp { bound, .. } => bound,
        }
    }

    /// Global Lipschitz constant `κ = sup |f′|`, `None` when unbounded.
    pub fn kappa(&self) -> Option<f64> {
        match *self {
            Nonlinearity::Tanh { lambda } => Some(lambda.abs()),
            Nonlinearity::DoubleWell { bound } => bound.map(double_well_kappa),
            Nonlinearity::Fkpp { bound, .. } => bound.map(|m| {
                // |f′| peaks at an endpoint of [−M, M] or inside [0, 1].
                let mut best = self.derivative(-m).abs().max(self.derivative(m).abs());
                for i in 0..=1000 {
                    let u = (i as f64 / 1000.0).clamp(-m, m);
                    best = best.max(self.derivative(u).abs());
                }
                best
            }),
        }
    }

    /// `f(0)`; zero for every built-in term.
    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }
}

/// `f(u) − mean f(u)` with a compensated mean.
pub fn conservative_rhs(f: impl Fn(f64) -> f64, field: &Field) -> Field {
    let vals: Vec<f64> = field.values().iter().map(|v| f(v.re)).collect();
    let mut acc = CompensatedSum::default();
    vals.iter().for_each(|&v| acc.add(v));
    let mean = acc.value() / vals.len() as f64;
    let grid = field.grid();
    Field::from_real(grid, &vals.iter().map(|v| v - mean).collect::<Vec<_>>()).expect("same grid")
}

/// `f(u, v) = k⁺ u v² − k⁻ v³` of the reaction–diffusion pair.
pub fn rd_reaction(u: f64, v: f64, k_plus: f64, k_minus: f64) -> f64 {
    k_plus * u * v * v - k_minus * v * v * v
}

/// Which realization of `E_B` a model uses.
#[derive(Clone, Debug)]
pub enum FlowKind {
    /// Closed-form `arcsinh(sinh(v) e^{λτ})`.
    ClosedFormTanh { lambda: f64 },
    /// Closed form while `‖v‖_∞ ≤ M`, otherwise RK on the truncated term.
    ClosedFormDoubleWell { bound: f64 },
    /// Closed-form phase rotation `e^{iτ(ω+ρ|v|²)}`.
    ClosedFormPhase { omega: Field, rho: f64 },
    /// RK on a pointwise term, optionally minus its spatial mean.
    RkGeneric { rhs: Nonlinearity, conservative: bool },
    /// RK on the reaction–diffusion pair `(−f, f)`.
    RkSystem { k_plus: f64, k_minus: f64 },
}

/// A nonlinear flow together with its substep configuration.
#[derive(Clone, Debug)]
pub struct NonlinearFlow {
    pub kind: FlowKind,
    pub rk: RkConfig,
}

impl NonlinearFlow {
    pub fn new(kind: FlowKind) -> Self {
        Self {
            kind,
            rk: RkConfig::default(),
        }
    }

    pub fn with_rk(mut self, rk: RkConfig) -> Self {
        self.rk = rk;
        self
    }

    /// Truncation bound `M`, if any.
    pub fn truncation_bound(&self) -> Option<f64> {
        match &self.kind {
            FlowKind::ClosedFormDoubleWell { bound } => Some(*bound),
            FlowKind::RkGeneric { rhs, .. } => rhs.truncation_bound(),
            _ => None,
        }
    }

    /// Lipschitz constant of the (truncated) pointwise term, when defined.
    pub fn lipschitz_kappa(&self) -> Option<f64> {
        match &self.kind {
            FlowKind::ClosedFormTanh { lambda } => Some(lambda.abs()),
            FlowKind::ClosedFormDoubleWell { bound } => Some(double_well_kappa(*bound)),
            FlowKind::RkGeneric { rhs, .. } => rhs.kappa(),
            _ => None,
        }
    }

    pub fn apply(&self, state: &State, tau: f64) -> Result<State> {
        if tau == 0.0 {
            return Ok(state.clone());
        }
        match &self.kind {
            FlowKind::ClosedFormTanh { lambda } => Ok(State::single(flow_tanh(state.primary(), *lambda, tau))),
            FlowKind::ClosedFormDoubleWell { bound } => {
                let v = state.primary();
                if v.norm_inf() <= *bound {
                    Ok(State::single(flow_double_well(v, tau, *bound)?))
                } else {
                    let rhs = Nonlinearity::DoubleWell { bound: Some(*bound) };
                    Ok(State::single(ssprk104(
                        |u: &Field| u.map_real(|x| rhs.eval(x)),
                        v,
                        tau,
                        self.rk,
                    )))
                }
            }
            FlowKind::ClosedFormPhase { omega, rho } => {
                Ok(State::single(flow_phase(state.primary(), omega, *rho, tau)?))
            }
            FlowKind::RkGeneric { rhs, conservative } => {
                let v = state.primary();
                let out = if *conservative {
                    ssprk104(|u: &Field| conservative_rhs(|x| rhs.eval(x), u), v, tau, self.rk)
                } else {
                    ssprk104(|u: &Field| u.map_real(|x| rhs.eval(x)), v, tau, self.rk)
                };
                Ok(State::single(out))
            }
            FlowKind::RkSystem { k_plus, k_minus } => {
                if state.components().len() != 2 {
                    return Err(Error::Unsupported("rk_system flow needs a paired state".into()));
                }
                let (kp, km) = (*k_plus, *k_minus);
                let rhs = |s: &State| {
                    let (u, v) = (&s.components()[0], &s.components()[1]);
                    let f: Vec<f64> = u
                        .values()
                        .iter()
                        .zip(v.values())
                        .map(|(a, b)| rd_reaction(a.re, b.re, kp, km))
                        .collect();
                    let grid = u.grid();
                    let du = Field::from_real(grid, &f.iter().map(|x| -x).collect::<Vec<_>>()).expect("grid");
                    let dv = Field::from_real(grid, &f).expect("grid");
                    State::pair(du, dv)
                };
                Ok(ssprk104(rhs, state, tau, self.rk))
            }
        }
    }
}
