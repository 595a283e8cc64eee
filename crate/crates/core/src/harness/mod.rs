//! Time stepping, adaptive control, convergence studies and experiment presets.

pub mod adaptive;
pub mod convergence;
pub mod preset;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::models::{ModelFlows, ModelId, ModelOverrides, ModelSpec};
use crate::scheme::{apply_parallel, catalog, SchemeClass, SplitScheme};
use crate::state::State;

pub use adaptive::{adaptive_tau, estimate_e_prime, AdaptiveConfig, StepController};
pub use convergence::{
    convergence_rates, convergence_study, halving_ladder, random_subdivision, ConvergenceReport, ConvergenceRow,
    Reference, StepPlan,
};
pub use preset::{preset, preset_names, run_study, Preset, ReferenceSpec, StudySpec, PRESET_NAMES};

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelId,
    /// Catalog name or path to a scheme JSON file.
    pub scheme: String,
    /// Grid points per axis; the model default when absent.
    pub n: Option<usize>,
    pub tau: f64,
    pub t_final: f64,
    pub adaptive: Option<AdaptiveConfig>,
    /// Record diagnostics every this many steps (the final step is always recorded).
    pub diagnostics_every: usize,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub allow_backward: bool,
    pub params: ModelOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelId::Toy,
            scheme: "strang_a".into(),
            n: None,
            tau: 0.01,
            t_final: 1.0,
            adaptive: None,
            diagnostics_every: 1,
            out_dir: None,
            seed: 0,
            allow_backward: false,
            params: ModelOverrides::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut spec = ModelSpec::defaults(self.model).with_overrides(&self.params)?;
        if let Some(n) = self.n {
            spec.n = n;
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!(
                "t_final must be finite and >= 0, got {}",
                self.t_final
            )));
        }
        match &self.adaptive {
            Some(a) => a.validate()?,
            None if !(self.tau > 0.0) => {
                return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
            }
            None => {}
        }
        if self.diagnostics_every == 0 {
            return Err(Error::Config("diagnostics_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Looks up a catalog name, falling back to a scheme JSON file path.
pub fn resolve_scheme(name: &str) -> Result<SplitScheme> {
    match catalog(name) {
        Err(Error::UnknownScheme(_)) if Path::new(name).is_file() => {
            SplitScheme::from_json(&std::fs::read_to_string(name)?)
        }
        other => other,
    }
}

/// Refuses negative-step schemes unless backward linear steps are allowed.
pub fn check_compatible(scheme: &SplitScheme, allow_backward: bool) -> Result<()> {
    if scheme.class == SchemeClass::SpeNegative && !allow_backward {
        return Err(Error::Config(format!(
            "{} has negative step coefficients; pass allow_backward to run it",
            scheme.name
        )));
    }
    Ok(())
}

/// One diagnostics sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub step: usize,
    pub t: f64,
    /// Step that produced this sample; 0 for the initial state.
    pub tau: f64,
    /// NaN when the energy is undefined for the state.
    pub energy: f64,
    pub mass: f64,
    pub max_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RunStatus {
    Completed,
    /// Non-finite values appeared at `step`; the run stopped there.
    Diverged {
        step: usize,
        t: f64,
    },
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub model: ModelSpec,
    pub scheme: String,
    pub samples: Vec<Diagnostics>,
    pub final_state: State,
    pub final_time: f64,
    pub steps: usize,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    /// CSV with columns `step,t,tau,energy,mass,max_norm`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "step,t,tau,energy,mass,max_norm")?;
        for d in &self.samples {
            writeln!(w, "{},{},{},{},{},{}", d.step, d.t, d.tau, d.energy, d.mass, d.max_norm)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            model: &'a ModelSpec,
            scheme: &'a str,
            final_time: f64,
            steps: usize,
            status: &'a RunStatus,
            samples: &'a [Diagnostics],
        }
        Ok(serde_json::to_string_pretty(&Out {
            model: &self.model,
            scheme: &self.scheme,
            final_time: self.final_time,
            steps: self.steps,
            status: &self.status,
            samples: &self.samples,
        })?)
    }
}

fn sample(spec: &ModelSpec, state: &State, step: usize, t: f64, tau: f64) -> Diagnostics {
    Diagnostics {
        step,
        t,
        tau,
        energy: spec.energy(state).unwrap_or(f64::NAN),
        mass: spec.mass(state),
        max_norm: state.max_norm(),
    }
}

/// Uniform steps of `tau` covering `[0, t_final]`, the last one shortened
/// when `t_final` is not a multiple of `tau`.
pub fn uniform_steps(tau: f64, t_final: f64) -> Vec<f64> {
    if t_final <= 0.0 {
        return Vec::new();
    }
    let ratio = t_final / tau;
    let full = (ratio * (1.0 + 1e-12)).floor() as usize;
    let mut steps = vec![tau; full];
    let rest = t_final - full as f64 * tau;
    if rest > 1e-12 * t_final {
        steps.push(rest);
    }
    steps
}

/// Advances `state` through `steps` without diagnostics.
pub fn integrate(scheme: &SplitScheme, flows: &ModelFlows, state: &State, steps: &[f64]) -> Result<State> {
    let mut cur = state.clone();
    for (k, &tau) in steps.iter().enumerate() {
        cur = apply_parallel(scheme, flows, tau, &cur)?;
        if !cur.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
    }
    Ok(cur)
}

fn check_start(spec: &ModelSpec, state: &State) -> Result<()> {
    let max = state.max_norm();
    if max > spec.bound {
        return Err(Error::BoundExceeded { max, bound: spec.bound });
    }
    if spec.id == ModelId::Fkpp {
        let (lo, hi) = state
            .primary()
            .values()
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v.re), b.max(v.re)));
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::Config(format!("fkpp initial data leaves [0, 1]: [{lo}, {hi}]")));
        }
    }
    Ok(())
}

/// Runs a configuration from the model's initial data.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let spec = config.model_spec()?;
    let grid = spec.grid()?;
    let state = spec.initial_condition(&grid)?;
    run_from(config, &spec, &grid, state)
}

/// Runs a configuration from an explicit starting state.
pub fn run_from(config: &RunConfig, spec: &ModelSpec, grid: &Arc<SpectralGrid>, state: State) -> Result<RunRecord> {
    config.validate()?;
    let scheme = resolve_scheme(&config.scheme)?;
    check_compatible(&scheme, config.allow_backward)?;
    check_start(spec, &state)?;
    let flows = spec.flows(grid, config.allow_backward)?;
    let t_final = config.t_final;

    let mut samples = vec![sample(spec, &state, 0, 0.0, 0.0)];
    let mut controller = config.adaptive.map(StepController::new).transpose()?;
    if let Some(c) = controller.as_mut() {
        c.record(0.0, samples[0].energy);
    }
    let planned = if controller.is_none() {
        uniform_steps(config.tau, t_final)
    } else {
        Vec::new()
    };

    let mut cur = state;
    let mut t = 0.0;
    let mut step = 0;
    let mut status = RunStatus::Completed;
    loop {
        let tau = match controller.as_ref() {
            None => match planned.get(step) {
                Some(&tau) => tau,
                None => break,
            },
            Some(c) => {
                let remaining = t_final - t;
                if remaining <= 1e-12 * t_final.max(1.0) {
                    break;
                }
                c.next_tau()?.min(remaining)
            }
        };
        let next = apply_parallel(&scheme, &flows, tau, &cur)?;
        step += 1;
        t = if controller.is_none() && step == planned.len() {
            t_final
        } else {
            t + tau
        };
        if !next.is_finite() {
            samples.push(sample(spec, &next, step, t, tau));
            cur = next;
            status = RunStatus::Diverged { step, t };
            break;
        }
        cur = next;
        let last = match controller {
            None => step == planned.len(),
            Some(_) => t_final - t <= 1e-12 * t_final.max(1.0),
        };
        let needs_energy = controller.is_some();
        if needs_energy || last || step % config.diagnostics_every == 0 {
            let d = sample(spec, &cur, step, t, tau);
            if spec.id == ModelId::RdSystem && d.max_norm > spec.bound {
                return Err(Error::BoundExceeded {
                    max: d.max_norm,
                    bound: spec.bound,
                });
            }
            if let Some(c) = controller.as_mut() {
                c.record(t, d.energy);
            }
            if last || step % config.diagnostics_every == 0 {
                samples.push(d);
            }
        }
    }

    let record = RunRecord {
        model: spec.clone(),
        scheme: scheme.name.clone(),
        samples,
        final_state: cur,
        final_time: t,
        steps: step,
        status,
    };
    if let Some(dir) = &config.out_dir {
        write_outputs(&record, dir)?;
    }
    Ok(record)
}

/// Writes `run.csv` and the final state (`final_c<k>.bin` plus sidecars).
pub fn write_outputs(record: &RunRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    record.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("run.csv"))?))?;
    save_state(&record.final_state, dir, "final")
}

/// Saves each component as `<stem>_c<k>.bin` with a JSON sidecar.
pub fn save_state(state: &State, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, c) in state.components().iter().enumerate() {
        c.write_binary(dir.join(format!("{stem}_c{k}.bin")))?;
    }
    Ok(())
}

/// Loads the components written by [`save_state`].
pub fn load_state(dir: &Path, stem: &str) -> Result<State> {
    let mut comps = Vec::new();
    while dir.join(format!("{stem}_c{}.bin", comps.len())).is_file() {
        comps.push(Field::read_binary(dir.join(format!("{stem}_c{}.bin", comps.len())))?);
    }
    let mut it = comps.into_iter();
    match (it.next(), it.next(), it.next()) {
        (Some(u), None, _) => Ok(State::single(u)),
        (Some(u), Some(v), None) => Ok(State::pair(u, v)),
        (None, ..) => Err(Error::Config(format!("no state `{stem}` in {}", dir.display()))),
        _ => Err(Error::Config("states have at most two components".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(model: ModelId, scheme: &str, tau: f64, t_final: f64) -> RunConfig {
        RunConfig {
            model,
            scheme: scheme.into(),
            n: Some(16),
            tau,
            t_final,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_steps_shorten_last() {
        assert_eq!(uniform_steps(0.1, 0.0), Vec::<f64>::new());
        let s = uniform_steps(0.25, 1.0);
        assert_eq!(s, vec![0.25; 4]);
        let s = uniform_steps(0.3, 1.0);
        assert_eq!(s.len(), 4);
        assert!((s[3] - 0.1).abs() < 1e-15);
        assert_eq!(uniform_steps(0.1, 1.0).len(), 10);
        assert_eq!(uniform_steps(1.0 / 3.0, 1.0).len(), 3);
    }

    #[test]
    fn zero_time_run_returns_initial_state() {
        let rec = run(&small(ModelId::Toy, "s4_1", 0.1, 0.0)).unwrap();
        assert_eq!(rec.samples.len(), 1);
        assert_eq!(rec.steps, 0);
        let spec = ModelSpec::defaults(ModelId::Toy).with_n(16);
        let u0 = spec.initial_condition(&spec.grid().unwrap()).unwrap();
        assert_eq!(rec.final_state.distance_inf(&u0).unwrap(), 0.0);
    }

    #[test]
    fn shortened_final_step_is_recorded() {
        let rec = run(&small(ModelId::Ac, "strang_a", 0.3, 1.0)).unwrap();
        let last = rec.samples.last().unwrap();
        assert_eq!(last.t, 1.0);
        assert!((last.tau - 0.1).abs() < 1e-12);
        assert_eq!(rec.steps, 4);
    }

    #[test]
    fn negative_scheme_needs_opt_in() {
        let cfg = small(ModelId::Ac, "s4_neg", 0.1, 0.2);
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        let cfg = RunConfig {
            allow_backward: true,
            ..cfg
        };
        assert!(run(&cfg).is_ok());
    }

    #[test]
    fn csv_header_and_rows() {
        let rec = run(&small(ModelId::Toy, "lie1", 0.5, 1.0)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,tau,energy,mass,max_norm");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,0,"));
        assert!(lines[3].starts_with("2,1,0.5,"), "{text}");
    }

    #[test]
    fn adaptive_run_stays_in_bounds() {
        let cfg = RunConfig {
            adaptive: Some(AdaptiveConfig {
                tau_min: 0.01,
                tau_max: 0.1,
                alpha: 1e6,
            }),
            ..small(ModelId::Cac, "strang_a", 0.0, 0.5)
        };
        let rec = run(&cfg).unwrap();
        assert_eq!(rec.samples[1].tau, 0.1);
        assert!(rec.samples[1..].iter().all(|d| d.tau <= 0.1 + 1e-15 && d.tau > 0.0));
        assert!((rec.final_time - 0.5).abs() < 1e-12);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig {
            adaptive: Some(AdaptiveConfig {
                tau_min: 0.01,
                tau_max: 0.1,
                alpha: 1e6,
            }),
            ..small(ModelId::Cac, "s4_3", 0.0, 60.0)
        };
        assert_eq!(RunConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        assert!(RunConfig::from_json(r#"{"model": "ac", "bogus": 1}"#).is_err());
        let partial = RunConfig::from_json(r#"{"model": "fkpp", "tau": 0.02}"#).unwrap();
        assert_eq!(
            (partial.model, partial.tau, partial.scheme.as_str()),
            (ModelId::Fkpp, 0.02, "strang_a")
        );
    }

    #[test]
    fn state_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ModelSpec::defaults(ModelId::RdSystem).with_n(8);
        let s = spec.initial_condition(&spec.grid().unwrap()).unwrap();
        save_state(&s, dir.path(), "ref").unwrap();
        let back = load_state(dir.path(), "ref").unwrap();
        assert_eq!(back.components().len(), 2);
        assert_eq!(back.distance_inf(&s).unwrap(), 0.0);
        assert!(load_state(dir.path(), "missing").is_err());
    }
}
