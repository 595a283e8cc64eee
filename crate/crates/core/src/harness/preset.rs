//! Named experiment configurations.

use serde::Serialize;

use super::convergence::{convergence_study, halving_ladder, ConvergenceReport, Reference, StepPlan};
use super::{integrate, resolve_scheme, uniform_steps, AdaptiveConfig, RunConfig};
use crate::error::{Error, Result};
use crate::models::{ModelId, ModelSpec};

/// How a study obtains its reference state.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceSpec {
    Exact,
    /// A fine run of `scheme` with uniform step `tau`.
    Computed {
        scheme: String,
        tau: f64,
    },
}

/// A convergence table: each scheme over the same ladder and reference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudySpec {
    pub schemes: Vec<String>,
    pub t_final: f64,
    pub ladder: Vec<f64>,
    /// Seed for random subintervals; uniform steps when absent.
    pub random_seed: Option<u64>,
    pub reference: ReferenceSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// The headline run.
    pub config: RunConfig,
    /// Schemes the experiment compares; `config.scheme` is the first.
    pub schemes: Vec<String>,
    pub study: Option<StudySpec>,
}

pub const PRESET_NAMES: [&str; 8] = [
    "toy_accuracy",
    "ac_compare",
    "cac_adaptive",
    "fkpp",
    "nls_linear_accuracy",
    "nls_nonlinear",
    "rd_system",
    "rd_accuracy",
];

pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn base(model: ModelId, scheme: &str, tau: f64, t_final: f64) -> RunConfig {
    RunConfig {
        model,
        scheme: scheme.into(),
        tau,
        t_final,
        ..Default::default()
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "toy_accuracy" => Preset {
            name: "toy_accuracy",
            description: "tanh toy model: s6 reference at tau = 1/200, T = 6; third- and fourth-order tables",
            config: base(ModelId::Toy, "s6", 1.0 / 200.0, 6.0),
            schemes: names(&["s6"]),
            study: Some(StudySpec {
                schemes: names(&["s3_1", "s3_2", "s4_1", "s4_2", "s4_3", "s4_4"]),
                t_final: 6.0,
                ladder: halving_ladder(5.0, 5),
                random_seed: None,
                reference: ReferenceSpec::Computed {
                    scheme: "s6".into(),
                    tau: 1.0 / 200.0,
                },
            }),
        },
        "ac_compare" => Preset {
            name: "ac_compare",
            description: "Allen-Cahn seven circles, tau = 1/40 to T = 10: Strang vs s4_4 vs the negative-step s4_neg",
            config: RunConfig {
                allow_backward: true,
                ..base(ModelId::Ac, "strang_a", 1.0 / 40.0, 10.0)
            },
            schemes: names(&["strang_a", "s4_4", "s4_neg"]),
            study: None,
        },
        "cac_adaptive" => Preset {
            name: "cac_adaptive",
            description:
                "conservative Allen-Cahn bubble merging, adaptive s4_3 to T = 60; random-grid table at T = 0.5",
            config: RunConfig {
                adaptive: Some(AdaptiveConfig {
                    tau_min: 0.01,
                    tau_max: 0.1,
                    alpha: 1e6,
                }),
                ..base(ModelId::Cac, "s4_3", 0.1, 60.0)
            },
            schemes: names(&["s4_3", "s3_1", "s4_2"]),
            study: Some(StudySpec {
                schemes: names(&["s3_1", "s4_2", "s4_3"]),
                t_final: 0.5,
                ladder: [10.0, 20.0, 40.0, 80.0].iter().map(|n| 0.5 / n).collect(),
                random_seed: Some(0),
                reference: ReferenceSpec::Computed {
                    scheme: "s4_3".into(),
                    tau: 1e-4,
                },
            }),
        },
        "fkpp" => Preset {
            name: "fkpp",
            description: "truncated Fisher-KPP: s4_1 reference at tau = 1e-3, T = 1; ladder 1/25 to 1/400",
            config: base(ModelId::Fkpp, "s4_1", 1e-3, 1.0),
            schemes: names(&["s4_1", "s3_2", "s4_4"]),
            study: Some(StudySpec {
                schemes: names(&["s3_2", "s4_1", "s4_4"]),
                t_final: 1.0,
                ladder: halving_ladder(25.0, 5),
                random_seed: None,
                reference: ReferenceSpec::Computed {
                    scheme: "s4_1".into(),
                    tau: 1e-3,
                },
            }),
        },
        "nls_linear_accuracy" => Preset {
            name: "nls_linear_accuracy",
            description: "linear Schroedinger with sech profile: exact solution at T = 1; conservation run to T = 10",
            config: base(ModelId::NlsLinear, "s4_2", 0.01, 10.0),
            schemes: names(&["s4_2", "s3_2", "s4_4"]),
            study: Some(StudySpec {
                schemes: names(&["s3_2", "s4_2", "s4_4"]),
                t_final: 1.0,
                ladder: halving_ladder(10.0, 5),
                random_seed: None,
                reference: ReferenceSpec::Exact,
            }),
        },
        "nls_nonlinear" => Preset {
            name: "nls_nonlinear",
            description: "cubic Schroedinger with standing wave sin x sin y e^{-2it}: exact solution at T = 1",
            config: base(ModelId::NlsNonlinear, "s4_2", 0.01, 1.0),
            schemes: names(&["s4_2", "s3_2", "s4_4"]),
            study: Some(StudySpec {
                schemes: names(&["s3_2", "s4_2", "s4_4"]),
                t_final: 1.0,
                ladder: halving_ladder(10.0, 5),
                random_seed: None,
                reference: ReferenceSpec::Exact,
            }),
        },
        "rd_system" => Preset {
            name: "rd_system",
            description: "reversible reaction-diffusion pair, s3_1 at tau = 0.01 to T = 1",
            config: base(ModelId::RdSystem, "s3_1", 0.01, 1.0),
            schemes: names(&["s3_1"]),
            study: None,
        },
        "rd_accuracy" => Preset {
            name: "rd_accuracy",
            description: "reaction-diffusion accuracy at T = 0.2: s4_1 reference at tau = 1/1600; ladder 1/50 to 1/800",
            config: base(ModelId::RdSystem, "s4_1", 1.0 / 1600.0, 0.2),
            schemes: names(&["s4_1", "s3_1", "s4_3"]),
            study: Some(StudySpec {
                schemes: names(&["s3_1", "s4_1", "s4_3"]),
                t_final: 0.2,
                ladder: halving_ladder(50.0, 5),
                random_seed: None,
                reference: ReferenceSpec::Computed {
                    scheme: "s4_1".into(),
                    tau: 1.0 / 1600.0,
                },
            }),
        },
        other => return Err(Error::UnknownPreset(other.into())),
    };
    Ok(p)
}

/// Runs every scheme of `study` on `model` against its reference.
pub fn run_study(study: &StudySpec, model: &ModelSpec, allow_backward: bool) -> Result<Vec<ConvergenceReport>> {
    let reference = match &study.reference {
        ReferenceSpec::Exact => Reference::Exact,
        ReferenceSpec::Computed { scheme, tau } => {
            let grid = model.grid()?;
            let flows = model.flows(&grid, allow_backward)?;
            let u0 = model.initial_condition(&grid)?;
            let steps = uniform_steps(*tau, study.t_final);
            Reference::State(integrate(&resolve_scheme(scheme)?, &flows, &u0, &steps)?)
        }
    };
    let plan = match study.random_seed {
        Some(seed) => StepPlan::Random { seed },
        None => StepPlan::Uniform,
    };
    study
        .schemes
        .iter()
        .map(|name| {
            convergence_study(
                model,
                &resolve_scheme(name)?,
                study.t_final,
                &study.ladder,
                plan,
                &reference,
                allow_backward,
            )
        })
        .collect()
}
