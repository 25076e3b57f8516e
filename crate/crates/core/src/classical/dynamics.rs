//! Velocity-Verlet trajectories, the classical correlation function and
//! the classical fluctuation-correlation check.

use crate::classical::sampling::{mean_and_stderr, ClassicalEnsemble, Estimate};
use crate::classical::system::{ClassicalFastSystem, Observable, PhasePoint};
use crate::correlation::extrapolate_to_zero;
use crate::correlation::TAIL_FRACTION;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Allowed relative energy drift along a trajectory.
pub const DRIFT_BOUND: f64 = 1e-6;

fn check_grid(times: &[f64], dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if times.is_empty() || times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("time grid must be finite, non-empty and start at t >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("time grid must be ascending".into()));
    }
    Ok(())
}

/// Integrates from `t = 0` and records the state at each grid time. Steps
/// between grid times are equal and no longer than `dt`.
pub fn trajectory(
    sys: &ClassicalFastSystem,
    big_r: &[f64],
    start: &PhasePoint,
    times: &[f64],
    dt: f64,
) -> Result<Vec<PhasePoint>> {
    sys.check_parameters(big_r)?;
    check_grid(times, dt)?;
    if start.r.len() != sys.dof() || start.p.len() != sys.dof() {
        return Err(Error::DimensionMismatch { what: "phase point", expected: sys.dof(), found: start.r.len() });
    }
    let pot = sys.potential();
    let n = sys.dof();
    let mut r = start.r.clone();
    let mut p = start.p.clone();
    let mut force = vec![0.0; n];
    pot.gradient(&r, big_r, &mut force);
    let e0 = sys.energy(start, big_r);
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let mut drift = 0.0_f64;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let steps = (span / dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                for k in 0..n {
                    p[k] -= 0.5 * h * force[k];
                    r[k] += h * p[k] / sys.mass[k];
                }
                pot.gradient(&r, big_r, &mut force);
                for k in 0..n {
                    p[k] -= 0.5 * h * force[k];
                }
            }
        }
        t = target;
        let z = PhasePoint { r: r.clone(), p: p.clone() };
        drift = drift.max((sys.energy(&z, big_r) - e0).abs() / scale);
        out.push(z);
    }
    if drift > DRIFT_BOUND {
        return Err(Error::StepSizeTooLarge { drift, bound: DRIFT_BOUND });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrace {
    pub times: Vec<f64>,
    /// `q[i][k]`: ensemble mean of `A(z(t_k)) B_i(z) - B_i(z(t_k)) A(z)`.
    pub q: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

/// Per-sample values `A(z_t) B_i(z) - B_i(z_t) A(z)` as `[sample][i][k]`.
fn per_sample_products(
    sys: &ClassicalFastSystem,
    ensemble: &ClassicalEnsemble,
    a: &Observable,
    b: &[Observable],
    times: &[f64],
    dt: f64,
    execution: Execution,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let big_r = &ensemble.parameters;
    par::try_map(execution, &ensemble.samples, |z| {
        let path = trajectory(sys, big_r, z, times, dt)?;
        let a0 = a.eval(z);
        Ok(b.iter()
            .map(|bi| {
                let b0 = bi.eval(z);
                path.iter().map(|zt| a.eval(zt) * b0 - bi.eval(zt) * a0).collect()
            })
            .collect())
    })
}

fn reduce(values: &[Vec<Vec<f64>>], components: usize, len: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut q = vec![vec![0.0; len]; components];
    let mut se = vec![vec![0.0; len]; components];
    let mut column = Vec::with_capacity(values.len());
    for i in 0..components {
        for k in 0..len {
            column.clear();
            column.extend(values.iter().map(|s| s[i][k]));
            let e = mean_and_stderr(&column);
            q[i][k] = e.mean;
            se[i][k] = e.stderr;
        }
    }
    (q, se)
}

/// Monte Carlo estimate of `Q_c(t) = <A(z(t)) B_i(z) - B_i(z(t)) A(z)>`.
pub fn classical_correlation(
    sys: &ClassicalFastSystem,
    ensemble: &ClassicalEnsemble,
    a: &Observable,
    b: &[Observable],
    times: &[f64],
    dt: f64,
    execution: Execution,
) -> Result<ClassicalTrace> {
    if ensemble.samples.len() < 2 {
        return Err(Error::SamplingFailure { reason: "ensemble needs at least two samples".into() });
    }
    let values = per_sample_products(sys, ensemble, a, b, times, dt, execution)?;
    let (q, stderr) = reduce(&values, b.len(), times.len());
    Ok(ClassicalTrace { times: times.to_vec(), q, stderr })
}

/// `int_0^T e^{-st} f(t) dt` by composite Simpson on a uniform grid
/// starting at 0 (odd number of points; a trailing interval uses the
/// trapezoid rule).
fn laplace_on_grid(step: f64, values: &[f64], s: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let g = |k: usize| (-s * step * k as f64).exp() * values[k];
    let pairs = (n - 1) / 2;
    let mut acc = 0.0;
    for j in 0..pairs {
        let k = 2 * j;
        acc += step / 3.0 * (g(k) + 4.0 * g(k + 1) + g(k + 2));
    }
    if (n - 1) % 2 == 1 {
        acc += 0.5 * step * (g(n - 2) + g(n - 1));
    }
    acc
}

/// Largest `|f|` in the first and last 10% of the grid, and their ratio.
pub fn envelope_decay(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    let w = (n / 10).max(1);
    let early = values[..w].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let late = values[n - w..].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let ratio = if early > 0.0 { late / early } else { 0.0 };
    (early, late, ratio)
}

#[derive(Debug, Clone)]
pub struct ClassicalTheoremInput {
    pub a: Observable,
    /// Correlated observables; `dh/dR_i` when empty.
    pub b: Vec<Observable>,
    /// Generator observables whose variance forms the right side.
    pub generators: Vec<Observable>,
    pub lambda: f64,
    /// Descending convergence factors.
    pub s_values: Vec<f64>,
    /// Trace length; extended when the smallest `s` needs a longer tail.
    pub t_max: f64,
    pub time_step: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTheoremReport {
    /// Regularized `int Q_c dt`, extrapolated to `s = 0` per sample.
    pub lhs: Vec<Estimate>,
    /// `-2 hbar lambda Var(G_i)`.
    pub rhs: Vec<Estimate>,
    pub residuals: Vec<f64>,
    pub combined_stderr: Vec<f64>,
    pub s_values: Vec<f64>,
    /// Ensemble means of the regularized integral at each `s`, `[i][k]`.
    pub lhs_at_s: Vec<Vec<f64>>,
    /// Late-to-early envelope ratio of `Q_c`, per component.
    pub decay: Vec<f64>,
    pub trace: ClassicalTrace,
}

/// Variance of `g` over the ensemble with a delta-method standard error.
fn variance(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let centered: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    let e = mean_and_stderr(&centered);
    Estimate { mean: e.mean * n / (n - 1.0), stderr: e.stderr }
}

pub fn classical_theorem_check(
    sys: &ClassicalFastSystem,
    ensemble: &ClassicalEnsemble,
    input: &ClassicalTheoremInput,
    execution: Execution,
) -> Result<ClassicalTheoremReport> {
    let s_values = &input.s_values;
    if s_values.is_empty() || s_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) || s_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("s values must be positive and strictly descending".into()));
    }
    if !(input.time_step.is_finite() && input.time_step > 0.0) {
        return Err(Error::InvalidInput("time step must be positive".into()));
    }
    if ensemble.samples.len() < 2 {
        return Err(Error::SamplingFailure { reason: "ensemble needs at least two samples".into() });
    }
    let big_r = ensemble.parameters.clone();
    let b: Vec<Observable> = if input.b.is_empty() {
        (0..sys.param_dim()).map(|i| Observable::parameter_force(sys, &big_r, i)).collect()
    } else {
        input.b.clone()
    };
    if input.generators.len() != b.len() {
        return Err(Error::DimensionMismatch { what: "generator observables", expected: b.len(), found: input.generators.len() });
    }
    let s_min = s_values[s_values.len() - 1];
    let t_end = input.t_max.max(-TAIL_FRACTION.ln() / s_min);
    let points = (t_end / input.time_step).ceil() as usize + 1;
    let times: Vec<f64> = (0..points).map(|k| k as f64 * input.time_step).collect();
    let values = per_sample_products(sys, ensemble, &input.a, &b, &times, input.dt, execution)?;
    let d = b.len();
    let (q, stderr) = reduce(&values, d, times.len());

    let mut lhs = Vec::with_capacity(d);
    let mut lhs_at_s = Vec::with_capacity(d);
    for i in 0..d {
        let per_sample: Vec<Vec<f64>> = values
            .iter()
            .map(|v| s_values.iter().map(|&s| laplace_on_grid(input.time_step, &v[i], s)).collect())
            .collect();
        let extrapolated: Vec<f64> = per_sample.iter().map(|row| extrapolate_to_zero(s_values, row).0).collect();
        lhs.push(mean_and_stderr(&extrapolated));
        lhs_at_s.push(
            (0..s_values.len())
                .map(|k| per_sample.iter().map(|row| row[k]).sum::<f64>() / per_sample.len() as f64)
                .collect(),
        );
    }
    let factor = -2.0 * sys.hbar * input.lambda;
    let rhs: Vec<Estimate> = input
        .generators
        .iter()
        .map(|g| {
            let v: Vec<f64> = ensemble.samples.iter().map(|z| g.eval(z)).collect();
            let var = variance(&v);
            Estimate { mean: factor * var.mean, stderr: factor.abs() * var.stderr }
        })
        .collect();
    let residuals = lhs.iter().zip(&rhs).map(|(l, r)| (l.mean - r.mean).abs()).collect();
    let combined_stderr = lhs.iter().zip(&rhs).map(|(l, r)| l.stderr.hypot(r.stderr)).collect();
    let decay = q.iter().map(|qi| envelope_decay(qi).2).collect();
    Ok(ClassicalTheoremReport {
        lhs,
        rhs,
        residuals,
        combined_stderr,
        s_values: s_values.clone(),
        lhs_at_s,
        decay,
        trace: ClassicalTrace { times, q, stderr },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_on_grid_matches_closed_form() {
        let step = 0.01;
        let values: Vec<f64> = (0..20001).map(|k| (k as f64 * step).sin()).collect();
        // int_0^200 e^{-st} sin t ~ 1 / (1 + s^2) when the tail is negligible
        let v = laplace_on_grid(step, &values, 0.1);
        assert!((v - 1.0 / 1.01).abs() < 1e-8, "{v}");
    }

    #[test]
    fn envelope_of_constant_is_one() {
        let (e, l, r) = envelope_decay(&[2.0; 50]);
        assert_eq!((e, l, r), (2.0, 2.0, 1.0));
    }
}
