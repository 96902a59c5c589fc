use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::output::{fmt_f64, CsvWriter};
use super::GradcheckSection;
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::tabular::{
    angle_degrees, check_multiagent_decomposition, estimate_gradient, exact_grad_eta, load_fixture,
    AgentLayout, DecompositionReport, PomdpFixture, TabularPolicy,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub beta: f64,
    pub steps: u64,
    /// Angle in degrees between each seed's estimate and the exact
    /// gradient, in seed order.
    pub angles: Vec<f64>,
    /// `‖estimate − exact‖ / ‖exact‖` per seed.
    pub relative_errors: Vec<f64>,
    pub high_variance: bool,
}

impl BetaRow {
    pub fn mean_angle(&self) -> f64 {
        mean(&self.angles)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct GradcheckOutcome {
    pub fixture: PathBuf,
    pub exact_gradient_norm: f64,
    pub rows: Vec<BetaRow>,
    pub decomposition: Vec<(PathBuf, DecompositionReport)>,
}

impl GradcheckOutcome {
    pub fn max_decomposition_discrepancy(&self) -> f64 {
        self.decomposition
            .iter()
            .map(|(_, r)| r.max_discrepancy())
            .fold(0.0, f64::max)
    }
}

/// Fewer steps than ten trace horizons leave the estimate dominated by
/// noise and start-up transients.
pub fn is_high_variance(beta: f64, steps: u64) -> bool {
    (steps as f64) < 10.0 / (1.0 - beta)
}

fn policy_of(fixture: &PomdpFixture) -> TabularPolicy {
    fixture.policy.clone().unwrap_or_else(|| {
        TabularPolicy::zeros(fixture.pomdp.n_observations(), fixture.pomdp.n_actions())
    })
}

fn decomposition_inputs(fixture: &PomdpFixture) -> (AgentLayout, Vec<TabularPolicy>) {
    match (&fixture.agents, &fixture.agent_policies) {
        (Some(layout), Some(policies)) => (layout.clone(), policies.clone()),
        (Some(layout), None) => (
            layout.clone(),
            layout
                .observations
                .iter()
                .zip(&layout.actions)
                .map(|(&o, &a)| TabularPolicy::zeros(o, a))
                .collect(),
        ),
        _ => {
            let layout =
                AgentLayout::single(fixture.pomdp.n_observations(), fixture.pomdp.n_actions());
            (layout, vec![policy_of(fixture)])
        }
    }
}

pub fn run_gradcheck(section: &GradcheckSection, seed: u64) -> Result<GradcheckOutcome> {
    let fixture = load_fixture(&section.fixture)?;
    let extra = section
        .decomposition_fixtures
        .iter()
        .map(|p| load_fixture(p).map(|f| (p.clone(), f)))
        .collect::<Result<Vec<_>>>()?;
    let policy = policy_of(&fixture);
    let exact = exact_grad_eta(&fixture.pomdp, &policy)?;
    let exact_norm = exact.norm();
    if exact_norm == 0.0 {
        return Err(Error::Oracle(
            "exact gradient is zero at the fixture policy; angles are undefined".into(),
        ));
    }

    let jobs: Vec<(usize, usize)> = (0..section.betas.len())
        .flat_map(|b| (0..section.seeds).map(move |s| (b, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(b, s)| {
            let mut rng = stream(seed, &[domain::ESTIMATOR, b as u64, s as u64]);
            let est = estimate_gradient(
                &fixture.pomdp,
                &policy,
                section.betas[b],
                section.steps,
                &mut rng,
            )?;
            Ok((
                angle_degrees(&est, &exact),
                (&est - &exact).norm() / exact_norm,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = section
        .betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            let mine = &results[b * section.seeds..(b + 1) * section.seeds];
            BetaRow {
                beta,
                steps: section.steps,
                angles: mine.iter().map(|r| r.0).collect(),
                relative_errors: mine.iter().map(|r| r.1).collect(),
                high_variance: is_high_variance(beta, section.steps),
            }
        })
        .collect();

    let mut decomposition = Vec::new();
    for (i, (path, f)) in std::iter::once((section.fixture.clone(), fixture))
        .chain(extra)
        .enumerate()
    {
        let (layout, agents) = decomposition_inputs(&f);
        let mut rng = stream(seed, &[domain::DECOMPOSITION, i as u64]);
        let report = check_multiagent_decomposition(
            &f.pomdp,
            &layout,
            &agents,
            section.decomposition_beta,
            section.decomposition_gamma,
            section.decomposition_steps,
            &mut rng,
        )?;
        decomposition.push((path, report));
    }
    Ok(GradcheckOutcome {
        fixture: section.fixture.clone(),
        exact_gradient_norm: exact_norm,
        rows,
        decomposition,
    })
}

/// Writes `gradcheck.csv` (one row per β), `gradcheck_runs.csv` (one row
/// per β and seed) and `decomposition.csv`.
pub fn emit_gradcheck(out: &GradcheckOutcome, dir: &Path) -> Result<()> {
    if out.rows.is_empty() {
        return Err(Error::config("no gradcheck rows to emit"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = CsvWriter::create(
        &dir.join("gradcheck.csv"),
        &[
            "beta",
            "steps",
            "seeds",
            "mean_angle_deg",
            "std_angle_deg",
            "mean_relative_error",
            "std_relative_error",
            "high_variance",
        ],
    )?;
    for row in &out.rows {
        w.row([
            fmt_f64(row.beta),
            row.steps.to_string(),
            row.angles.len().to_string(),
            fmt_f64(mean(&row.angles)),
            fmt_f64(std(&row.angles)),
            fmt_f64(mean(&row.relative_errors)),
            fmt_f64(std(&row.relative_errors)),
            u8::from(row.high_variance).to_string(),
        ])?;
    }
    w.finish()?;

    let mut w = CsvWriter::create(
        &dir.join("gradcheck_runs.csv"),
        &["beta", "seed", "angle_deg", "relative_error"],
    )?;
    for row in &out.rows {
        for (s, (a, e)) in row.angles.iter().zip(&row.relative_errors).enumerate() {
            w.row([fmt_f64(row.beta), s.to_string(), fmt_f64(*a), fmt_f64(*e)])?;
        }
    }
    w.finish()?;

    let mut w = CsvWriter::create(
        &dir.join("decomposition.csv"),
        &[
            "fixture",
            "steps",
            "max_increment_discrepancy",
            "max_trace_discrepancy",
            "max_weight_discrepancy",
        ],
    )?;
    for (path, r) in &out.decomposition {
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into(),
        );
        w.row([
            name,
            r.steps.to_string(),
            fmt_f64(r.max_increment_discrepancy),
            fmt_f64(r.max_trace_discrepancy),
            fmt_f64(r.max_weight_discrepancy),
        ])?;
    }
    w.finish()
}
