//! Error ladders against a reference solution.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_compatible, integrate, load_state, uniform_steps};
use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::models::ModelSpec;
use crate::scheme::SplitScheme;
use crate::state::State;

/// How each ladder entry divides `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPlan {
    /// Steps of the ladder `τ`, last one shortened if needed.
    Uniform,
    /// `N = round(T/τ)` random subintervals; the reported step is the largest.
    Random { seed: u64 },
}

/// What the errors are measured against.
#[derive(Clone, Debug)]
pub enum Reference {
    /// The model's closed-form solution at `T`.
    Exact,
    State(State),
    /// A state saved with `save_state(dir, stem)`.
    File {
        dir: PathBuf,
        stem: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub steps: usize,
    pub error_inf: f64,
    pub error_l2: f64,
    /// Rate against the previous row; absent for the first.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub model: String,
    pub scheme: String,
    pub t_final: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    /// CSV with columns `tau,error_inf,rate` (rate empty on the first row).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "tau,error_inf,rate")?;
        for r in &self.rows {
            match r.rate {
                Some(rate) => writeln!(w, "{},{},{}", r.tau, r.error_inf, rate)?,
                None => writeln!(w, "{},{},", r.tau, r.error_inf)?,
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `log(e_{i−1}/e_i) / log(τ_{i−1}/τ_i)` for each adjacent pair.
pub fn convergence_rates(taus: &[f64], errors: &[f64]) -> Vec<f64> {
    taus.windows(2)
        .zip(errors.windows(2))
        .map(|(t, e)| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        .collect()
}

/// `N` steps `τ_i = T ε_i / Σε` with `ε_i` uniform on the open interval (0, 1).
pub fn random_subdivision(t_final: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let eps: Vec<f64> = (0..n)
        .map(|_| loop {
            let e: f64 = rng.gen();
            if e > 0.0 && e < 1.0 {
                break e;
            }
        })
        .collect();
    let total: f64 = eps.iter().sum();
    eps.into_iter().map(|e| t_final * e / total).collect()
}

fn plan_steps(plan: StepPlan, tau: f64, t_final: f64, index: usize) -> Vec<f64> {
    match plan {
        StepPlan::Uniform => uniform_steps(tau, t_final),
        StepPlan::Random { seed } => {
            let n = ((t_final / tau).round() as usize).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            random_subdivision(t_final, n, &mut rng)
        }
    }
}

fn resolve_reference(reference: &Reference, spec: &ModelSpec, grid: &Arc<SpectralGrid>, t_final: f64) -> Result<State> {
    let state = match reference {
        Reference::Exact => spec.exact_solution(t_final, grid)?,
        Reference::State(s) => s.clone(),
        Reference::File { dir, stem } => load_state(dir, stem)?,
    };
    if state.components().len() != spec.components() {
        return Err(Error::GridMismatch(format!(
            "reference has {} components, model has {}",
            state.components().len(),
            spec.components()
        )));
    }
    for c in state.components() {
        if !c.grid().same_as(grid) {
            return Err(Error::GridMismatch(format!(
                "reference grid n = {}, L = {} differs from the run grid n = {}, L = {}",
                c.grid().n(),
                c.grid().length(),
                grid.n(),
                grid.length()
            )));
        }
    }
    Ok(state)
}

/// Runs `scheme` over every ladder entry in parallel and tabulates the
/// errors at `t_final` against `reference`.
pub fn convergence_study(
    spec: &ModelSpec,
    scheme: &SplitScheme,
    t_final: f64,
    ladder: &[f64],
    plan: StepPlan,
    reference: &Reference,
    allow_backward: bool,
) -> Result<ConvergenceReport> {
    if ladder.is_empty() || ladder.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Config("ladder needs positive step sizes".into()));
    }
    check_compatible(scheme, allow_backward)?;
    let grid = spec.grid()?;
    let target = resolve_reference(reference, spec, &grid, t_final)?;
    let flows = spec.flows(&grid, allow_backward)?;
    let u0 = spec.initial_condition(&grid)?;

    let measured: Vec<(f64, usize, f64, f64)> = ladder
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let steps = plan_steps(plan, tau, t_final, i);
            let end = integrate(scheme, &flows, &u0, &steps)?;
            let reported = steps.iter().copied().fold(0.0, f64::max);
            Ok((
                reported,
                steps.len(),
                end.distance_inf(&target)?,
                end.distance_l2(&target)?,
            ))
        })
        .collect::<Result<_>>()?;

    let taus: Vec<f64> = measured.iter().map(|m| m.0).collect();
    let errors: Vec<f64> = measured.iter().map(|m| m.2).collect();
    let rates = convergence_rates(&taus, &errors);
    let rows = measured
        .iter()
        .enumerate()
        .map(|(i, &(tau, steps, error_inf, error_l2))| ConvergenceRow {
            tau,
            steps,
            error_inf,
            error_l2,
            rate: i.checked_sub(1).map(|j| rates[j]),
        })
        .collect();
    Ok(ConvergenceReport {
        model: spec.id.name().into(),
        scheme: scheme.name.clone(),
        t_final,
        rows,
    })
}

/// `[1/start, 1/(2·start), …]` with `count` entries.
pub fn halving_ladder(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| 1.0 / (start * f64::powi(2.0, k as i32))).collect()
}
