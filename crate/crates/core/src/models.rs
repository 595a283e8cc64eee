//! The experiment models: parameters, grids, initial data, exact solutions
//! where known, diagnostics, and the A/B flow pair each model hands to a
//! scheme.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{fkpp_constant, FlowKind, NonlinearFlow, Nonlinearity, RkConfig};
use crate::grid::{Field, LinearPropagator, ScalarKind, SpectralGrid};
use crate::scheme::FlowPair;
use crate::state::{CompensatedSum, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Toy,
    Ac,
    Cac,
    Fkpp,
    NlsLinear,
    NlsNonlinear,
    RdSystem,
}

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::Toy,
        ModelId::Ac,
        ModelId::Cac,
        ModelId::Fkpp,
        ModelId::NlsLinear,
        ModelId::NlsNonlinear,
        ModelId::RdSystem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Toy => "toy",
            ModelId::Ac => "ac",
            ModelId::Cac => "cac",
            ModelId::Fkpp => "fkpp",
            ModelId::NlsLinear => "nls_linear",
            ModelId::NlsNonlinear => "nls_nonlinear",
            ModelId::RdSystem => "rd_system",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelId::Toy => "u_t = eps^2 Lap u + lambda tanh u",
            ModelId::Ac => "Allen-Cahn, u_t = eps^2 Lap u + u - u^3",
            ModelId::Cac => "conservative Allen-Cahn with mean-free reaction",
            ModelId::Fkpp => "Fisher-KPP, u_t = D Lap u + K u^p (1-u)^q",
            ModelId::NlsLinear => "linear Schroedinger with sech-type potential",
            ModelId::NlsNonlinear => "cubic Schroedinger with trigonometric potential",
            ModelId::RdSystem => "two-species reaction-diffusion, f = k+ u v^2 - k- v^3",
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, ModelId::NlsLinear | ModelId::NlsNonlinear)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rd" => Ok(ModelId::RdSystem),
            _ => ModelId::ALL
                .into_iter()
                .find(|m| m.name() == s)
                .ok_or_else(|| Error::UnknownModel(s.to_string())),
        }
    }
}

/// Potential used by the cubic Schrödinger model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsPotential {
    /// `sin²x · sin²y − 1`, for which `sin x sin y e^{−2it}` solves the equation.
    Consistent,
    /// `sin²x + sin²y − 1`; the standing wave does not solve the equation with it.
    Additive,
}

/// Free-energy functional of the reaction–diffusion pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdEnergy {
    /// `∫ u(ln u − 1 + U_u) + v(ln v − 1 + U_v)`, dissipated by the system.
    Entropy,
    /// `∫ u ln(u − 1 + U_u) + v ln(v − 1 + U_v)`; needs both log arguments positive.
    LogShifted,
}

/// Parameters of one model instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub n: usize,
    pub length: f64,
    pub origin: f64,
    /// Interface width (toy, ac, cac) or dispersion coefficient (nls).
    pub epsilon: f64,
    pub lambda: f64,
    pub diffusion: f64,
    pub rho: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub d_u: f64,
    pub d_v: f64,
    pub p: u32,
    pub q: u32,
    /// Truncation bound `M`; also the runtime monitor bound for rd_system.
    pub bound: f64,
    pub rk: RkConfig,
    pub nls_potential: NlsPotential,
    pub rd_energy: RdEnergy,
}

/// Optional replacements for [`ModelSpec`] fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub n: Option<usize>,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub diffusion: Option<f64>,
    pub rho: Option<f64>,
    pub k_plus: Option<f64>,
    pub k_minus: Option<f64>,
    pub d_u: Option<f64>,
    pub d_v: Option<f64>,
    pub bound: Option<f64>,
    pub rk_substeps: Option<usize>,
    pub nls_potential: Option<NlsPotential>,
    pub rd_energy: Option<RdEnergy>,
}

/// AC initial circles `(x, y, r)`.
pub const AC_CIRCLES: [(f64, f64, f64); 7] = [
    (PI / 2.0, PI / 2.0, PI / 5.0),
    (PI / 4.0, 3.0 * PI / 4.0, 2.0 * PI / 15.0),
    (PI / 2.0, 5.0 * PI / 4.0, 2.0 * PI / 15.0),
    (PI, PI / 4.0, PI / 10.0),
    (3.0 * PI / 2.0, PI / 4.0, PI / 10.0),
    (PI, PI, PI / 4.0),
    (3.0 * PI / 2.0, 3.0 * PI / 2.0, PI / 4.0),
];

/// `f₀(s) = 2 e^{−ε²/s²}` for `s < 0`, else 0.
pub fn ac_bump(s: f64, eps: f64) -> f64 {
    if s < 0.0 {
        2.0 * (-eps * eps / (s * s)).exp()
    } else {
        0.0
    }
}

impl ModelSpec {
    /// Default parameters of each experiment.
    pub fn defaults(id: ModelId) -> Self {
        let base = ModelSpec {
            id,
            n: 256,
            length: 2.0 * PI,
            origin: 0.0,
            epsilon: 0.1,
            lambda: 1.0,
            diffusion: 0.0,
            rho: 0.0,
            k_plus: 0.0,
            k_minus: 0.0,
            d_u: 0.0,
            d_v: 0.0,
            p: 5,
            q: 5,
            bound: 6.0,
            rk: RkConfig::default(),
            nls_potential: NlsPotential::Consistent,
            rd_energy: RdEnergy::Entropy,
        };
        match id {
            ModelId::Toy => ModelSpec { n: 1024, ..base },
            ModelId::Ac => ModelSpec { n: 400, ..base },
            ModelId::Cac => ModelSpec {
                n: 256,
                length: 2.0,
                origin: -1.0,
                epsilon: 0.02,
                ..base
            },
            ModelId::Fkpp => ModelSpec {
                n: 512,
                length: 1.0,
                diffusion: 0.001,
                ..base
            },
            ModelId::NlsLinear => ModelSpec {
                n: 400,
                length: 16.0 * PI,
                origin: -8.0 * PI,
                epsilon: 1.0,
                rho: 0.0,
                ..base
            },
            ModelId::NlsNonlinear => ModelSpec {
                n: 400,
                length: 2.0 * PI,
                origin: -PI,
                epsilon: 0.5,
                rho: -1.0,
                ..base
            },
            ModelId::RdSystem => ModelSpec {
                n: 1024,
                length: 2.0,
                origin: -1.0,
                k_plus: 1.0,
                k_minus: 0.1,
                d_u: 0.2,
                d_v: 0.1,
                ..base
            },
        }
    }

    pub fn with_overrides(mut self, o: &ModelOverrides) -> Result<Self> {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        take!(
            n,
            epsilon,
            lambda,
            diffusion,
            rho,
            k_plus,
            k_minus,
            d_u,
            d_v,
            bound,
            nls_potential,
            rd_energy
        );
        if let Some(s) = o.rk_substeps {
            self.rk = RkConfig::new(s)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{}: {m}", self.id)));
        if self.linear_coefficients().iter().any(|nu| nu.re < 0.0) {
            return bad("diffusion coefficients must be nonnegative");
        }
        if !(self.bound > 0.0) {
            return bad("truncation bound must be positive");
        }
        if self.id == ModelId::RdSystem && (self.k_plus <= 0.0 || self.k_minus <= 0.0) {
            return bad("reaction rates must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<SpectralGrid>> {
        Ok(Arc::new(SpectralGrid::new(2, self.n, self.length, self.origin)?))
    }

    pub fn components(&self) -> usize {
        if self.id == ModelId::RdSystem {
            2
        } else {
            1
        }
    }

    /// `ν` per component, for the multiplier `exp(−τνλ)`.
    pub fn linear_coefficients(&self) -> Vec<Complex64> {
        let re = |x: f64| Complex64::new(x, 0.0);
        match self.id {
            ModelId::Toy | ModelId::Ac | ModelId::Cac => vec![re(self.epsilon * self.epsilon)],
            ModelId::Fkpp => vec![re(self.diffusion)],
            ModelId::NlsLinear | ModelId::NlsNonlinear => vec![Complex64::new(0.0, self.epsilon)],
            ModelId::RdSystem => vec![re(self.d_u), re(self.d_v)],
        }
    }

    /// `K_pq` of the Fisher–KPP reaction.
    pub fn fkpp_k(&self) -> f64 {
        fkpp_constant(self.p, self.q)
    }

    /// Pointwise reaction term of the scalar real models.
    pub fn nonlinearity(&self) -> Option<Nonlinearity> {
        match self.id {
            ModelId::Toy => Some(Nonlinearity::Tanh { lambda: self.lambda }),
            ModelId::Ac | ModelId::Cac => Some(Nonlinearity::DoubleWell {
                bound: Some(self.bound),
            }),
            ModelId::Fkpp => Some(Nonlinearity::Fkpp {
                k: self.fkpp_k(),
                bound: Some(self.bound),
            }),
            _ => None,
        }
    }

    pub fn nonlinear_flow(&self, grid: &Arc<SpectralGrid>) -> Result<NonlinearFlow> {
        let kind = match self.id {
            ModelId::Toy => FlowKind::ClosedFormTanh { lambda: self.lambda },
            ModelId::Ac => FlowKind::ClosedFormDoubleWell { bound: self.bound },
            ModelId::Cac | ModelId::Fkpp => FlowKind::RkGeneric {
                rhs: self.nonlinearity().expect("real scalar model"),
                conservative: self.id == ModelId::Cac,
            },
            ModelId::NlsLinear | ModelId::NlsNonlinear => FlowKind::ClosedFormPhase {
                omega: self.potential(grid)?,
                rho: self.rho,
            },
            ModelId::RdSystem => FlowKind::RkSystem {
                k_plus: self.k_plus,
                k_minus: self.k_minus,
            },
        };
        Ok(NonlinearFlow::new(kind).with_rk(self.rk))
    }

    /// The model's sub-flows on `grid`. Backward linear steps are refused
    /// unless `allow_backward` is set.
    pub fn flows(&self, grid: &Arc<SpectralGrid>, allow_backward: bool) -> Result<ModelFlows> {
        Ok(ModelFlows {
            linear: self
                .linear_coefficients()
                .into_iter()
                .map(|nu| LinearPropagator::new(nu).with_backward(allow_backward))
                .collect(),
            nonlinear: self.nonlinear_flow(grid)?,
        })
    }

    fn check_grid(&self, grid: &SpectralGrid) -> Result<()> {
        if grid.dim() != 2 || (grid.length() - self.length).abs() > 1e-12 * self.length {
            return Err(Error::GridMismatch(format!(
                "{} expects a 2-D grid of side {}",
                self.id, self.length
            )));
        }
        Ok(())
    }

    pub fn initial_condition(&self, grid: &Arc<SpectralGrid>) -> Result<State> {
        self.check_grid(grid)?;
        let eps = self.epsilon;
        Ok(match self.id {
            ModelId::Toy => State::single(Field::from_fn_real(grid, |x, y| 0.5 * x.sin() * y.sin())),
            ModelId::Ac => State::single(Field::from_fn_real(grid, |x, y| {
                -1.0 + AC_CIRCLES
                    .iter()
                    .map(|&(cx, cy, r)| ac_bump(((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r, eps))
                    .sum::<f64>()
            })),
            ModelId::Cac => State::single(Field::from_fn_real(grid, |x, y| {
                let bubble = |cx: f64, cy: f64| (((x - cx).powi(2) + (y - cy).powi(2) - 0.04) / eps).tanh();
                -bubble(0.3, 0.0) * bubble(-0.3, 0.0) * bubble(0.0, 0.3) * bubble(0.0, -0.3)
            })),
            ModelId::Fkpp => State::single(Field::from_fn_real(grid, |x, y| {
                0.45 * (2.0 * PI * x).cos() * (2.0 * PI * y).cos() + 0.5
            })),
            ModelId::NlsLinear | ModelId::NlsNonlinear => self.exact_solution(0.0, grid)?,
            ModelId::RdSystem => {
                let t = |x: f64, y: f64| (10.0 * (x * x + y * y).sqrt() - 4.0).tanh();
                State::pair(
                    Field::from_fn_real(grid, |x, y| 1.5 - t(x, y) / 2.0),
                    Field::from_fn_real(grid, |x, y| 1.5 + t(x, y) / 2.0),
                )
            }
        })
    }

    pub fn exact_solution(&self, t: f64, grid: &Arc<SpectralGrid>) -> Result<State> {
        self.check_grid(grid)?;
        match self.id {
            ModelId::NlsLinear => Ok(State::single(Field::from_fn_complex(grid, |x, y| {
                Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, t) / (x.cosh() * y.cosh())
            }))),
            ModelId::NlsNonlinear => Ok(State::single(Field::from_fn_complex(grid, |x, y| {
                Complex64::from_polar(x.sin() * y.sin(), -2.0 * t)
            }))),
            other => Err(Error::Unsupported(format!("{other} has no closed-form solution"))),
        }
    }

    /// `ω(x, y)` of the Schrödinger models.
    pub fn potential(&self, grid: &Arc<SpectralGrid>) -> Result<Field> {
        match (self.id, self.nls_potential) {
            (ModelId::NlsLinear, _) => Ok(Field::from_fn_real(grid, |x, y| {
                3.0 - 2.0 * x.tanh().powi(2) - 2.0 * y.tanh().powi(2)
            })),
            (ModelId::NlsNonlinear, NlsPotential::Consistent) => {
                Ok(Field::from_fn_real(grid, |x, y| (x.sin() * y.sin()).powi(2) - 1.0))
            }
            (ModelId::NlsNonlinear, NlsPotential::Additive) => Ok(Field::from_fn_real(grid, |x, y| {
                x.sin().powi(2) + y.sin().powi(2) - 1.0
            })),
            (other, _) => Err(Error::Unsupported(format!("{other} has no potential"))),
        }
    }

    /// Plain `∫u` for real models (summed over components for rd_system),
    /// `∫|u|²` for the Schrödinger models.
    pub fn mass(&self, state: &State) -> f64 {
        if self.id.is_complex() {
            let f = state.primary();
            let mut acc = CompensatedSum::default();
            f.values().iter().for_each(|v| acc.add(v.norm_sqr()));
            acc.value() * f.grid().cell_volume()
        } else {
            state.components().iter().map(|c| c.integral().re).sum()
        }
    }

    pub fn max_norm(&self, state: &State) -> f64 {
        state.max_norm()
    }

    pub fn energy(&self, state: &State) -> Result<f64> {
        let u = state.primary();
        let h2 = u.grid().cell_volume();
        let integrate = |g: &dyn Fn(usize, Complex64) -> f64| {
            let mut acc = CompensatedSum::default();
            for (i, v) in u.values().iter().enumerate() {
                acc.add(g(i, *v));
            }
            acc.value() * h2
        };
        match self.id {
            ModelId::Toy | ModelId::Ac | ModelId::Cac | ModelId::Fkpp => {
                let coef = if self.id == ModelId::Fkpp {
                    self.diffusion
                } else {
                    self.epsilon * self.epsilon
                };
                let (ux, uy) = (u.derivative(0), u.derivative(1));
                let k = self.fkpp_k();
                let (lambda, p, q) = (self.lambda, self.p, self.q);
                let id = self.id;
                Ok(integrate(&|i, v| {
                    let grad = ux.values()[i].norm_sqr() + uy.values()[i].norm_sqr();
                    let s = v.re;
                    let potential = match id {
                        ModelId::Toy => -lambda * s.cosh().ln(),
                        ModelId::Fkpp => -k * fkpp_antiderivative(s, p, q),
                        _ => (s * s - 1.0).powi(2) / 4.0,
                    };
                    coef / 2.0 * grad + potential
                }))
            }
            ModelId::NlsLinear | ModelId::NlsNonlinear => {
                let lap = u.laplacian();
                let omega = self.potential(u.grid())?;
                let mut re = CompensatedSum::default();
                let mut im = CompensatedSum::default();
                for (i, v) in u.values().iter().enumerate() {
                    let m2 = v.norm_sqr();
                    let z = -self.epsilon * v.conj() * lap.values()[i]
                        - omega.values()[i].re * m2
                        - self.rho / 2.0 * m2 * m2;
                    re.add(z.re);
                    im.add(z.im);
                }
                let (e, residue) = (re.value() * h2, im.value() * h2);
                if residue.abs() > 1e-10 * e.abs().max(1.0) {
                    return Err(Error::Energy(format!("imaginary residue {residue:e}")));
                }
                Ok(e)
            }
            ModelId::RdSystem => self.rd_energy_value(state),
        }
    }

    fn rd_energy_value(&self, state: &State) -> Result<f64> {
        let [u, v] = state.components() else {
            return Err(Error::Energy("rd_system needs a paired state".into()));
        };
        let (uu, uv) = (self.k_plus.ln(), self.k_minus.ln());
        let mut acc = CompensatedSum::default();
        for (a, b) in u.values().iter().zip(v.values()) {
            let (a, b) = (a.re, b.re);
            let term = match self.rd_energy {
                RdEnergy::Entropy => {
                    if a <= 0.0 || b <= 0.0 {
                        return Err(Error::Energy(format!("nonpositive concentration ({a}, {b})")));
                    }
                    a * (a.ln() - 1.0 + uu) + b * (b.ln() - 1.0 + uv)
                }
                RdEnergy::LogShifted => {
                    let (la, lb) = (a - 1.0 + uu, b - 1.0 + uv);
                    if la <= 0.0 || lb <= 0.0 {
                        return Err(Error::Energy(format!(
                            "log argument not positive: u-1+U_u = {la}, v-1+U_v = {lb}"
                        )));
                    }
                    a * la.ln() + b * lb.ln()
                }
            };
            acc.add(term);
        }
        Ok(acc.value() * u.grid().cell_volume())
    }
}

/// `∫₀^s t^p (1−t)^q dt` expanded as a polynomial.
pub fn fkpp_antiderivative(s: f64, p: u32, q: u32) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=q {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let e = (p + j + 1) as i32;
        acc += sign * binom * s.powi(e) / e as f64;
        binom = binom * (q - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// `E_A` per component and the model's `E_B`.
#[derive(Clone, Debug)]
pub struct ModelFlows {
    pub linear: Vec<LinearPropagator>,
    pub nonlinear: NonlinearFlow,
}

impl FlowPair<State> for ModelFlows {
    fn flow_a(&self, tau: f64, state: &State) -> Result<State> {
        let mut out = state.clone();
        for (c, prop) in out.components_mut().iter_mut().zip(&self.linear) {
            *c = prop.apply(c, tau)?;
        }
        Ok(out)
    }

    fn flow_b(&self, tau: f64, state: &State) -> Result<State> {
        self.nonlinear.apply(state, tau)
    }
}

/// Builds a real state of the model's shape from per-node values.
pub fn real_state(spec: &ModelSpec, grid: &Arc<SpectralGrid>, f: impl Fn(usize, f64, f64) -> f64) -> State {
    let comps = (0..spec.components())
        .map(|k| Field::from_fn_real(grid, |x, y| f(k, x, y)))
        .collect::<Vec<_>>();
    match comps.len() {
        1 => State::single(comps.into_iter().next().expect("one")),
        _ => {
            let mut it = comps.into_iter();
            State::pair(it.next().expect("u"), it.next().expect("v"))
        }
    }
}

/// A complex zero state of the model's shape.
pub fn zero_state(spec: &ModelSpec, grid: &Arc<SpectralGrid>) -> State {
    let kind = if spec.id.is_complex() {
        ScalarKind::Complex
    } else {
        ScalarKind::Real
    };
    let f = Field::zeros(grid, kind);
    if spec.components() == 2 {
        State::pair(f.clone(), f)
    } else {
        State::single(f)
    }
}
