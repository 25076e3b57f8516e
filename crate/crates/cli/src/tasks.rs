//! One runner per task. Each returns a [`TaskOutput`]; failures at a point
//! or route are recorded and the remaining rows are still produced.

use geomflux::classical::{
    classical_theorem_check, sample_energy_shell, sample_torus, ClassicalFastSystem, ClassicalTheoremInput, Observable,
};
use geomflux::correlation::{
    gii_from_force_correlation, q_correlation, susceptibility, theorem_check, QForm,
};
use geomflux::geometry::{
    cyclic_berry_phase, fluctuation_data, metric_and_geometric_tensor, open_path_phase, wrap_phase, PhaseRoute,
    TensorRoute,
};
use geomflux::par::Execution;
use geomflux::{HamiltonianFamily, ParameterPoint};
use serde_json::json;

use crate::config::{ClassicalConfig, EnsembleConfig, ObservableSpec, RunConfig, SystemConfig, Task};
use crate::report::{Cell, Check, Failure, Table, TaskOutput};

pub const PHASE_HEADER: [&str; 6] = ["route", "phase", "trapezoid", "overlap_product", "error_estimate", "status"];
pub const TENSOR_HEADER: [&str; 10] =
    ["point", "i", "j", "g_derivative", "v_derivative", "g_states", "v_states", "g_force", "delta_b_sq", "status"];
pub const CORRELATION_HEADER: [&str; 8] = ["point", "component", "t", "q", "q_heisenberg", "c_ab", "c_ba", "status"];
pub const THEOREM_HEADER: [&str; 9] = ["point", "component", "lhs", "rhs", "residual", "delta_b", "lambda", "active", "status"];
pub const SUSCEPTIBILITY_HEADER: [&str; 8] =
    ["point", "component", "z", "chi_ab_re", "chi_ab_im", "chi_ba_re", "chi_ba_im", "status"];
pub const CLASSICAL_HEADER: [&str; 4] = ["component", "t", "q", "stderr"];

pub fn header(task: Task) -> &'static [&'static str] {
    match task {
        Task::Phase => &PHASE_HEADER,
        Task::Tensor => &TENSOR_HEADER,
        Task::Correlation => &CORRELATION_HEADER,
        Task::Theorem => &THEOREM_HEADER,
        Task::Susceptibility => &SUSCEPTIBILITY_HEADER,
        Task::Classical => &CLASSICAL_HEADER,
        Task::VerifyAll => &crate::verify::VERIFY_HEADER,
    }
}

/// Runs the configured task.
pub fn run(config: &RunConfig) -> TaskOutput {
    match config.task {
        Task::Phase => phase(config),
        Task::Tensor => tensor(config),
        Task::Correlation => correlation(config),
        Task::Theorem => theorem(config),
        Task::Susceptibility => susceptibility_task(config),
        Task::Classical => classical(config),
        Task::VerifyAll => crate::verify::run(config.seed),
    }
}

/// Builds the family or records the failure; validation already built it
/// once, so this only fails on programming errors.
fn family(config: &RunConfig, out: &mut TaskOutput) -> Option<HamiltonianFamily> {
    let fam = config.family.as_ref().expect("validated config has a family");
    match fam.build() {
        Ok(f) => Some(f),
        Err(e) => {
            out.failures.push(Failure::from_error("family", &e));
            None
        }
    }
}

fn point(coords: &[f64]) -> ParameterPoint {
    ParameterPoint::new(coords.to_vec()).expect("validated coordinates are finite")
}

fn status(err: &geomflux::Error) -> Cell {
    Cell::Text(err.code().to_string())
}

fn phase(config: &RunConfig) -> TaskOutput {
    let mut out = TaskOutput::new(Table::new(&PHASE_HEADER));
    let Some(fam) = family(config, &mut out) else { return out };
    let path = match config.path.as_ref().expect("validated phase config has a path").build() {
        Ok(p) => p,
        Err(e) => {
            out.failures.push(Failure::from_error("path", &e));
            return out;
        }
    };
    let n = config.level;
    let tol = config.tolerances.phase;
    let mut cyclic_value = None;
    if path.is_closed() {
        match cyclic_berry_phase(&fam, &path, n) {
            Ok(c) => {
                out.table.push(vec![
                    "cyclic".into(),
                    c.phase.into(),
                    Cell::Empty,
                    c.overlap_product.into(),
                    c.error_estimate.into(),
                    "ok".into(),
                ]);
                cyclic_value = Some(c.phase);
            }
            Err(e) => {
                out.table.push(vec!["cyclic".into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, status(&e)]);
                out.failures.push(Failure::from_error("route cyclic", &e));
            }
        }
    }
    let mut open = Vec::new();
    for route in PhaseRoute::ALL {
        match open_path_phase(&fam, &path, n, route) {
            Ok(p) => {
                out.table.push(vec![
                    route.name().into(),
                    p.phase.into(),
                    p.trapezoid.into(),
                    Cell::Empty,
                    p.error_estimate.into(),
                    "ok".into(),
                ]);
                open.push((route, p));
            }
            Err(e) => {
                out.table.push(vec![route.name().into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, status(&e)]);
                out.failures.push(Failure::from_error(format!("route {}", route.name()), &e));
            }
        }
    }
    if let Some((first, reference)) = open.first() {
        for (route, p) in &open[1..] {
            out.checks.push(Check::at_most(
                format!("{} vs {}", route.name(), first.name()),
                (p.phase - reference.phase).abs(),
                tol,
            ));
        }
    }
    if let Some(c) = cyclic_value {
        for (route, p) in &open {
            out.checks.push(Check::at_most(
                format!("{} vs cyclic (mod 2pi)", route.name()),
                wrap_phase(p.phase - c).abs(),
                tol,
            ));
        }
    }
    out.results = json!({
        "level": n,
        "closed": path.is_closed(),
        "samples": path.len(),
        "cyclic": cyclic_value,
        "open": open.iter().map(|(r, p)| json!({
            "route": r.name(), "phase": p.phase, "trapezoid": p.trapezoid, "error_estimate": p.error_estimate,
        })).collect::<Vec<_>>(),
    });
    out
}

fn tensor(config: &RunConfig) -> TaskOutput {
    let mut out = TaskOutput::new(Table::new(&TENSOR_HEADER));
    let Some(fam) = family(config, &mut out) else { return out };
    let n = config.level;
    let d = fam.param_dim();
    let tol = &config.tolerances;
    let mut results = Vec::new();
    for (k, coords) in config.points.iter().enumerate() {
        let r = point(coords);
        let r0 = config.reference_point.as_deref().map(point).unwrap_or_else(|| r.clone());
        let computed = (|| -> geomflux::Result<_> {
            let deriv = metric_and_geometric_tensor(&fam, &r, n, TensorRoute::Derivative)?;
            let states = metric_and_geometric_tensor(&fam, &r, n, TensorRoute::ForceStates)?;
            let force = gii_from_force_correlation(&fam, &r, n, 1e-3)?;
            let fluct = fluctuation_data(&fam, &r, &r0, n)?;
            Ok((deriv, states, force, fluct))
        })();
        match computed {
            Ok((deriv, states, force, fluct)) => {
                let mut route_dev = 0.0_f64;
                let mut force_dev = 0.0_f64;
                let mut fluct_dev = 0.0_f64;
                for i in 0..d {
                    for j in 0..d {
                        let diag = i == j;
                        out.table.push(vec![
                            k.into(),
                            i.into(),
                            j.into(),
                            deriv.g[(i, j)].into(),
                            deriv.v[(i, j)].into(),
                            states.g[(i, j)].into(),
                            states.v[(i, j)].into(),
                            diag.then(|| force[i].limit).into(),
                            diag.then(|| fluct.delta_b[i].powi(2)).into(),
                            "ok".into(),
                        ]);
                        route_dev = route_dev
                            .max((deriv.g[(i, j)] - states.g[(i, j)]).abs())
                            .max((deriv.v[(i, j)] - states.v[(i, j)]).abs());
                    }
                    force_dev = force_dev.max((force[i].limit - deriv.g[(i, i)]).abs());
                    fluct_dev = fluct_dev.max((fluct.delta_b[i].powi(2) - states.g[(i, i)]).abs());
                }
                out.checks.push(Check::at_most(format!("point {k}: derivative vs sum-over-states tensor"), route_dev, tol.metric_route));
                out.checks.push(Check::at_most(format!("point {k}: force-force g_ii"), force_dev, tol.metric));
                out.checks.push(Check::at_most(format!("point {k}: delta_b^2 vs g_ii"), fluct_dev, tol.metric));
                let rows = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
                    (0..d).map(|i| (0..d).map(|j| f(i, j)).collect()).collect()
                };
                results.push(json!({
                    "point": k,
                    "g": rows(&|i, j| states.g[(i, j)]),
                    "v": rows(&|i, j| states.v[(i, j)]),
                    "min_metric_eigenvalue": states.min_metric_eigenvalue(),
                }));
            }
            Err(e) => {
                out.table.push(vec![
                    k.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    status(&e),
                ]);
                out.failures.push(Failure::from_error(format!("point {k}"), &e));
            }
        }
    }
    out.results = json!({ "level": n, "points": results });
    out
}

fn reference(config: &RunConfig) -> ParameterPoint {
    point(config.reference_point.as_deref().expect("validated config has a reference point"))
}

fn correlation(config: &RunConfig) -> TaskOutput {
    let mut out = TaskOutput::new(Table::new(&CORRELATION_HEADER));
    let Some(fam) = family(config, &mut out) else { return out };
    let n = config.level;
    let r0 = reference(config);
    let mut results = Vec::new();
    for (k, coords) in config.points.iter().enumerate() {
        let r = point(coords);
        let traces = q_correlation(&fam, &r, &r0, n, &config.times, QForm::Spectral)
            .and_then(|s| Ok((s, q_correlation(&fam, &r, &r0, n, &config.times, QForm::Heisenberg)?)));
        match traces {
            Ok((spectral, heis)) => {
                let mut dev = 0.0_f64;
                for i in 0..spectral.q.len() {
                    for (t, &time) in config.times.iter().enumerate() {
                        out.table.push(vec![
                            k.into(),
                            i.into(),
                            time.into(),
                            spectral.q[i][t].into(),
                            heis.q[i][t].into(),
                            spectral.c_ab[i][t].into(),
                            spectral.c_ba[i][t].into(),
                            "ok".into(),
                        ]);
                        dev = dev.max((spectral.q[i][t] - heis.q[i][t]).abs());
                    }
                }
                out.checks.push(Check::at_most(format!("point {k}: spectral vs Heisenberg"), dev, config.tolerances.spectral));
                results.push(json!({
                    "point": k,
                    "max_deviation": dev,
                    "max_imaginary_residue": spectral.max_imaginary_residue.max(heis.max_imaginary_residue),
                }));
            }
            Err(e) => {
                out.table.push(vec![
                    k.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    status(&e),
                ]);
                out.failures.push(Failure::from_error(format!("point {k}"), &e));
            }
        }
    }
    out.results = json!({ "level": n, "times": config.times.len(), "points": results });
    out
}

fn theorem(config: &RunConfig) -> TaskOutput {
    let mut out = TaskOutput::new(Table::new(&THEOREM_HEADER));
    let Some(fam) = family(config, &mut out) else { return out };
    let n = config.level;
    let r0 = reference(config);
    let mut results = Vec::new();
    for (k, coords) in config.points.iter().enumerate() {
        match theorem_check(&fam, &point(coords), &r0, n, &config.s_values) {
            Ok(rep) => {
                for i in 0..rep.lhs.len() {
                    out.table.push(vec![
                        k.into(),
                        i.into(),
                        rep.lhs[i].into(),
                        rep.rhs[i].into(),
                        rep.residuals[i].into(),
                        rep.delta_b[i].into(),
                        rep.lambda[i].into(),
                        rep.active[i].into(),
                        "ok".into(),
                    ]);
                }
                out.checks.push(Check::at_most(
                    format!("point {k}: theorem residual"),
                    rep.max_active_residual(),
                    config.tolerances.theorem,
                ));
                // quadrature must land within its own error estimate
                let excess = rep
                    .quadrature
                    .iter()
                    .flat_map(|q| (0..q.quadrature.len()).map(move |i| (q.quadrature[i] - q.mode_sum[i]).abs() - q.error_estimate[i]))
                    .fold(f64::NEG_INFINITY, f64::max);
                out.checks.push(Check::at_most(format!("point {k}: quadrature minus its error estimate"), excess, 0.0));
                results.push(json!({
                    "point": k,
                    "quadrature": rep.quadrature.iter().map(|q| json!({
                        "s": q.s, "quadrature": q.quadrature, "mode_sum": q.mode_sum, "error_estimate": q.error_estimate,
                    })).collect::<Vec<_>>(),
                    "extrapolated": rep.extrapolated,
                    "extrapolation_error": rep.extrapolation_error,
                }));
            }
            Err(e) => {
                out.table.push(vec![
                    k.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    status(&e),
                ]);
                out.failures.push(Failure::from_error(format!("point {k}"), &e));
            }
        }
    }
    out.results = json!({ "level": n, "s_values": config.s_values, "points": results });
    out
}

fn susceptibility_task(config: &RunConfig) -> TaskOutput {
    let mut out = TaskOutput::new(Table::new(&SUSCEPTIBILITY_HEADER));
    let Some(fam) = family(config, &mut out) else { return out };
    let n = config.level;
    let r0 = reference(config);
    let mut results = Vec::new();
    for (k, coords) in config.points.iter().enumerate() {
        let r = point(coords);
        let computed = susceptibility(&fam, &r, &r0, n, &config.z_values)
            .and_then(|s| Ok((s, theorem_check(&fam, &r, &r0, n, &config.s_values)?)));
        match computed {
            Ok((rep, thm)) => {
                for i in 0..rep.chi_ab.len() {
                    for (zk, &z) in rep.z_values.iter().enumerate() {
                        let (a, b) = (rep.chi_ab[i][zk], rep.chi_ba[i][zk]);
                        out.table.push(vec![
                            k.into(),
                            i.into(),
                            z.into(),
                            a.re.into(),
                            a.im.into(),
                            b.re.into(),
                            b.im.into(),
                            "ok".into(),
                        ]);
                    }
                }
                let residual = rep.residuals.iter().fold(0.0_f64, |m, r| m.max(*r));
                // the theorem's left side is -(1/2 hbar) int Q, so int Q = -2 hbar lhs
                let integral: Vec<f64> = thm.lhs.iter().map(|l| -2.0 * fam.hbar() * l).collect();
                let vs_integral = rep
                    .extrapolated_difference
                    .iter()
                    .zip(&integral)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                let tol = config.tolerances.susceptibility;
                out.checks.push(Check::at_most(format!("point {k}: limit vs fluctuation value"), residual, tol));
                out.checks.push(Check::at_most(format!("point {k}: limit vs integral of Q"), vs_integral, tol));
                results.push(json!({
                    "point": k,
                    "extrapolated_difference": rep.extrapolated_difference,
                    "fluctuation_value": rep.fluctuation_value,
                    "integral_of_q": integral,
                    "residuals": rep.residuals,
                }));
            }
            Err(e) => {
                out.table.push(vec![
                    k.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    status(&e),
                ]);
                out.failures.push(Failure::from_error(format!("point {k}"), &e));
            }
        }
    }
    out.results = json!({ "level": n, "z_values": config.z_values, "points": results });
    out
}

pub fn build_system(c: &ClassicalConfig) -> geomflux::Result<ClassicalFastSystem> {
    let sys = match &c.system {
        SystemConfig::Harmonic { mass, omega } => ClassicalFastSystem::harmonic(mass.clone(), omega.clone())?,
        SystemConfig::QuarticCoupled { beta } => ClassicalFastSystem::quartic_coupled(*beta)?,
    };
    sys.with_hbar(c.hbar)
}

fn observable(spec: ObservableSpec, sys: &ClassicalFastSystem, c: &ClassicalConfig, center: &geomflux::classical::PhasePoint) -> Observable {
    match spec {
        ObservableSpec::Window => Observable::gaussian_window(center.clone(), c.window_sigma),
        ObservableSpec::Position(k) => Observable::position(k),
        ObservableSpec::Momentum(k) => Observable::momentum(k),
        ObservableSpec::Force(i) => Observable::parameter_force(sys, &c.parameters, i),
        ObservableSpec::ForceRate(i) => Observable::parameter_force_rate(sys, &c.parameters, i),
    }
}

fn classical(config: &RunConfig) -> TaskOutput {
    let mut out = TaskOutput::new(Table::new(&CLASSICAL_HEADER));
    let c = config.classical.as_ref().expect("validated classical config");
    let computed = (|| -> geomflux::Result<_> {
        let sys = build_system(c)?;
        let ensemble = match &c.ensemble {
            EnsembleConfig::Shell { energy } => {
                sample_energy_shell(&sys, &c.parameters, *energy, c.samples, config.seed, Execution::default())?
            }
            EnsembleConfig::Torus { actions } => sample_torus(&sys, &c.parameters, actions, c.samples, config.seed)?,
        };
        let energy = match &c.ensemble {
            EnsembleConfig::Shell { energy } => *energy,
            EnsembleConfig::Torus { .. } => sys.energy(&ensemble.samples[0], &c.parameters),
        };
        let center = ensemble.samples[0].clone();
        let b_specs: Vec<ObservableSpec> =
            if c.b.is_empty() { (0..sys.param_dim()).map(ObservableSpec::Force).collect() } else { c.b.clone() };
        let g_specs = if c.generators.is_empty() { b_specs.clone() } else { c.generators.clone() };
        let input = ClassicalTheoremInput {
            a: observable(c.a, &sys, c, &center),
            b: b_specs.iter().map(|&s| observable(s, &sys, c, &center)).collect(),
            generators: g_specs.iter().map(|&s| observable(s, &sys, c, &center)).collect(),
            lambda: c.lambda,
            s_values: c.s_values.clone(),
            t_max: c.t_max,
            time_step: c.time_step,
            dt: c.dt.unwrap_or_else(|| sys.recommended_dt(&c.parameters, energy)),
        };
        let rep = classical_theorem_check(&sys, &ensemble, &input, Execution::default())?;
        Ok((sys, ensemble, input, rep))
    })();
    let (sys, ensemble, input, rep) = match computed {
        Ok(x) => x,
        Err(e) => {
            out.failures.push(Failure::from_error("classical", &e));
            return out;
        }
    };
    for i in 0..rep.trace.q.len() {
        for (k, &t) in rep.trace.times.iter().enumerate() {
            out.table.push(vec![i.into(), t.into(), rep.trace.q[i][k].into(), rep.trace.stderr[i][k].into()]);
        }
    }
    let sigma = config.tolerances.classical_sigma;
    for i in 0..rep.lhs.len() {
        if c.checks.theorem {
            let (res, se) = (rep.residuals[i], rep.combined_stderr[i]);
            let z = if se > 0.0 { res / se } else if res == 0.0 { 0.0 } else { f64::INFINITY };
            out.checks.push(Check::at_most(format!("component {i}: residual / combined stderr"), z, sigma));
        }
        if let Some(max) = c.checks.max_decay {
            out.checks.push(Check::at_most(format!("component {i}: late/early envelope"), rep.decay[i], max));
        }
        if let Some(min) = c.checks.min_decay {
            out.checks.push(Check::at_least(format!("component {i}: late/early envelope"), rep.decay[i], min));
        }
    }
    let est = |e: &geomflux::classical::Estimate| json!({ "mean": e.mean, "stderr": e.stderr });
    out.results = json!({
        "system": sys.name(),
        "samples": ensemble.samples.len(),
        "attempts": ensemble.attempts,
        "dt": input.dt,
        "lambda": input.lambda,
        "s_values": rep.s_values,
        "lhs": rep.lhs.iter().map(est).collect::<Vec<_>>(),
        "rhs": rep.rhs.iter().map(est).collect::<Vec<_>>(),
        "residuals": rep.residuals,
        "combined_stderr": rep.combined_stderr,
        "lhs_at_s": rep.lhs_at_s,
        "decay": rep.decay,
    });
    out
}
