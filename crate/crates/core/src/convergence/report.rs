//! Pointwise convergence reports and the singular-decay experiment.

use serde::{Deserialize, Serialize};

use super::{PredictedLimit, SplineMartingale};
use crate::basis::SplineSpace;
use crate::error::{Error, Result};
use crate::functions::{norm, MeasureSpec};
use crate::gram::fit_decay;
use crate::knots::KnotProgram;
use crate::projection::Projector;

/// Pass thresholds of a convergence report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest admissible gap at the last schedule entry.
    pub final_gap: f64,
    /// Largest admissible truncation certificate.
    pub certificate: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            final_gap: 1e-6,
            certificate: 1e-8,
        }
    }
}

/// `|g_n(t) − target(t)|` together with the bound attached to the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub point: f64,
    pub n: usize,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    pub schedule: Vec<usize>,
    /// Points at which the target is defined.
    pub points: Vec<f64>,
    /// Requested points left out (exceptional or without a basis).
    pub skipped: Vec<f64>,
    pub max_final_gap: f64,
    pub max_bound: f64,
    pub thresholds: Thresholds,
    pub pass: bool,
}

impl ConvergenceReport {
    /// Gaps at the last schedule entry, per point.
    pub fn final_gaps(&self) -> Vec<(f64, f64)> {
        let last = *self.schedule.last().unwrap_or(&0);
        self.rows.iter().filter(|r| r.n == last).map(|r| (r.point, r.gap)).collect()
    }
}

/// Tabulates `|g_n(t) − target(t)|` over the schedule of `mart`. `target`
/// returns the limit value and its error bound, or `None` where undefined.
pub fn convergence_report(
    mart: &SplineMartingale,
    points: &[f64],
    target: &dyn Fn(f64) -> Option<(Vec<f64>, f64)>,
    thresholds: Thresholds,
) -> ConvergenceReport {
    let schedule = mart.schedule();
    let last = *schedule.last().expect("non-empty schedule");
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    let mut max_final_gap: f64 = 0.0;
    let mut max_bound: f64 = 0.0;
    for &t in points {
        let Some((want, bound)) = target(t) else {
            skipped.push(t);
            continue;
        };
        kept.push(t);
        max_bound = max_bound.max(bound);
        for m in &mart.members {
            let got = m.g.eval(t);
            let gap = norm(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>());
            if m.n == last {
                max_final_gap = max_final_gap.max(gap);
            }
            rows.push(ReportRow {
                point: t,
                n: m.n,
                gap,
                bound,
            });
        }
    }
    let pass = !kept.is_empty()
        && max_final_gap <= thresholds.final_gap
        && max_bound <= thresholds.certificate;
    ConvergenceReport {
        rows,
        schedule,
        points: kept,
        skipped,
        max_final_gap,
        max_bound,
        thresholds,
        pass,
    }
}

impl PredictedLimit {
    /// Report against this predicted limit.
    pub fn report(&self, mart: &SplineMartingale, points: &[f64], thresholds: Thresholds) -> ConvergenceReport {
        convergence_report(mart, points, &|t| self.eval(t), thresholds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularRow {
    pub point: f64,
    pub n: usize,
    pub value: f64,
    pub majorant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDecayReport {
    pub rows: Vec<SingularRow>,
    pub points: Vec<f64>,
    pub schedule: Vec<usize>,
    /// Decay constants fitted on the largest space.
    pub c_hat: f64,
    pub q_hat: f64,
    /// `min_t |g_first(t)| / |g_last(t)|`.
    pub min_drop: f64,
    /// Every value is at most its majorant plus `1e-12 |ν|`.
    pub dominated: bool,
    pub pass: bool,
}

/// Required drop between the first and last schedule entries.
pub const REQUIRED_DROP: f64 = 10.0;

/// Up to `count` points of `[0, 1]`, evenly spread over the set at
/// distance `≥ margin` from the singular support of `measure`.
pub fn points_off_support(measure: &MeasureSpec, margin: f64, count: usize) -> Vec<f64> {
    let lattice = 20_000;
    let far: Vec<f64> = (0..=lattice)
        .map(|i| i as f64 / lattice as f64)
        .filter(|&t| measure.singular_support_distance(t) >= margin)
        .collect();
    if far.len() <= count {
        return far;
    }
    (0..count)
        .map(|i| far[(i * (far.len() - 1)) / (count - 1).max(1)])
        .collect()
}

/// `Σ_{i,j} C q^{|i−j|} θ_i N_j(t) / h_ij` with
/// `θ_i ≥ |ν|(supp N_i)` and `|⟨ν, N_i⟩|`.
fn majorant(space: &SplineSpace, theta: &[f64], c: f64, q: f64, t: f64) -> f64 {
    space
        .nonzero_basis(t)
        .into_iter()
        .map(|(j, nj)| {
            nj * theta
                .iter()
                .enumerate()
                .filter(|(_, th)| **th > 0.0)
                .map(|(i, th)| {
                    c * q.powi((i as i64 - j as i64).unsigned_abs() as i32) * th / space.hull_length(i, j)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Projects a singular measure onto the spaces of `schedule` and
/// compares `|g_n(t)|` away from its support with the Gram-decay majorant.
pub fn singular_decay_experiment(
    program: &KnotProgram,
    measure: &MeasureSpec,
    schedule: &[usize],
    points: &[f64],
    quad_depth: usize,
) -> Result<SingularDecayReport> {
    super::validate_schedule(schedule)?;
    measure.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidArgument("no evaluation points".into()));
    }
    let k = program.order;
    let mut members = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let space = SplineSpace::from_grid(&program.realize(n)?);
        let projector = Projector::new(&space)?;
        let moments = projector.measure_moments(measure, quad_depth)?;
        let g = projector.from_moments(&moments)?;
        members.push((n, projector, moments, g));
    }
    let (_, last_proj, _, _) = members.last().expect("non-empty schedule");
    let fit = fit_decay(last_proj.space(), last_proj.duals())?;
    let (c_hat, q_hat) = (fit.c_hat, fit.q_hat);
    let slack = 1e-12 * measure.total_variation();

    let mut rows = Vec::new();
    let mut dominated = true;
    for (n, projector, moments, g) in &members {
        let space = projector.space();
        let theta: Vec<f64> = (0..space.dim())
            .map(|i| {
                let (lo, hi) = space.support(i);
                measure.variation_on(lo, hi, k).max(norm(&moments.row(i).to_vec()))
            })
            .collect();
        for &t in points {
            let value = norm(&g.eval(t));
            let bound = majorant(space, &theta, c_hat, q_hat, t);
            dominated &= value <= bound + slack;
            rows.push(SingularRow {
                point: t,
                n: *n,
                value,
                majorant: bound,
            });
        }
    }
    let first = schedule[0];
    let last = *schedule.last().expect("non-empty schedule");
    let at = |n: usize, t: f64| rows.iter().find(|r| r.n == n && r.point == t).map(|r| r.value);
    let min_drop = points
        .iter()
        .map(|&t| {
            let (a, b) = (at(first, t).unwrap_or(0.0), at(last, t).unwrap_or(0.0));
            if b == 0.0 {
                f64::INFINITY
            } else {
                a / b
            }
        })
        .fold(f64::INFINITY, f64::min);
    let pass = dominated && min_drop >= REQUIRED_DROP && schedule.len() > 1;
    Ok(SingularDecayReport {
        rows,
        points: points.to_vec(),
        schedule: schedule.to_vec(),
        c_hat,
        q_hat,
        min_drop,
        dominated,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::KnotFamily;

    #[test]
    fn dirac_decays_away_from_its_atom() {
        let p = KnotProgram::new(KnotFamily::DyadicDense, 2).unwrap();
        let nu = MeasureSpec::dirac(1.0 / 3.0, vec![1.0]);
        let pts = points_off_support(&nu, 0.05, 20);
        assert_eq!(pts.len(), 20);
        assert!(pts.iter().all(|t| (t - 1.0 / 3.0).abs() >= 0.05));
        let r = singular_decay_experiment(&p, &nu, &[31, 127], &pts, 2).unwrap();
        assert!(r.dominated);
        assert!(r.min_drop >= REQUIRED_DROP);
        assert!(r.pass);
    }

    #[test]
    fn empty_points_are_rejected() {
        let p = KnotProgram::new(KnotFamily::DyadicDense, 2).unwrap();
        let nu = MeasureSpec::dirac(0.5, vec![1.0, 2.0]);
        assert!(singular_decay_experiment(&p, &nu, &[7], &[], 2).is_err());
    }

    #[test]
    fn report_against_exact_target() {
        use crate::convergence::{make_martingale, Source};
        use crate::functions::{FunctionSpec, ScalarFn};
        let p = KnotProgram::new(KnotFamily::DyadicDense, 2).unwrap();
        let f = FunctionSpec::Scalar(ScalarFn::Polynomial { coeffs: vec![0.5, 2.0] });
        let mart = make_martingale(&p, Source::function(f.clone()), &[3, 7], 1).unwrap();
        let r = convergence_report(&mart, &[0.2, 0.7], &|t| Some((f.eval(t), 0.0)), Thresholds::default());
        assert!(r.pass, "{r:?}");
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.final_gaps().len(), 2);
        let none = convergence_report(&mart, &[0.2], &|_| None, Thresholds::default());
        assert!(!none.pass);
        assert_eq!(none.skipped, vec![0.2]);
    }
}
