//! `verify-all`: the invariant suite on built-in families, one row per
//! check with the worst deviation found.

use std::f64::consts::PI;

use geomflux::classical::{
    classical_correlation, envelope_decay, microcanonical_average, sample_energy_shell, torus_average,
    ClassicalFastSystem, Observable,
};
use geomflux::correlation::{gii_from_force_correlation, q_correlation, susceptibility, theorem_check, QForm};
use geomflux::geometry::{
    cyclic_berry_phase, cyclic_berry_phase_with, fluctuation_data, gauge_potentials, gauge_transform_check,
    metric_and_geometric_tensor, open_path_phase, open_path_phase_with, wrap_phase, OmegaRoute, ParameterPath,
    PhaseOptions, PhaseRoute, PolynomialGauge, TensorRoute,
};
use geomflux::par::{self, Execution};
use geomflux::{HamiltonianFamily, ParameterPoint};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::{Check, Failure, Table, TaskOutput};

pub const VERIFY_HEADER: [&str; 5] = ["criterion", "check", "value", "tolerance", "passed"];

const FAMILIES: u64 = 20;
const PAIRS: usize = 20;
const FAMILY_DIM: usize = 5;
const PARAM_DIM: usize = 3;
const MIN_OVERLAP: f64 = 1e-3;

/// Checks and failures of one criterion.
#[derive(Debug, Clone, Default)]
pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
}

impl Criterion {
    fn new(id: usize, title: &'static str) -> Criterion {
        Criterion { id, title, ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn fail(&mut self, context: impl Into<String>, e: &geomflux::Error) {
        self.failures.push(Failure::from_error(context, e));
    }
}

/// Running maximum of a deviation.
#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn add(&mut self, x: f64) {
        // NaN must not be swallowed by max
        self.0 = if x.is_nan() || self.0.is_nan() { f64::NAN } else { self.0.max(x) };
    }
}

fn pt(c: &[f64]) -> ParameterPoint {
    ParameterPoint::new(c.to_vec()).expect("finite coordinates")
}

/// One seeded family with its random `(R, R0)` pairs and a level per pair.
struct Case {
    seed: u64,
    family: HamiltonianFamily,
    pairs: Vec<(ParameterPoint, ParameterPoint, usize)>,
}

fn cases(seed: u64) -> Vec<Case> {
    (1..=FAMILIES)
        .map(|k| {
            let family =
                HamiltonianFamily::seeded_random_polynomial(FAMILY_DIM, PARAM_DIM, 2, k).expect("valid family");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let mut draw = || pt(&(0..PARAM_DIM).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<_>>());
            let pairs = (0..PAIRS).map(|j| (draw(), draw(), j % FAMILY_DIM)).collect();
            Case { seed: k, family, pairs }
        })
        .collect()
}

fn spin_circle(theta: f64, samples: usize) -> ParameterPath {
    let (s, c) = theta.sin_cos();
    ParameterPath::circle(&[0.0, 0.0, c], &[s, 0.0, 0.0], &[0.0, s, 0.0], (0.0, 1.0), samples).expect("valid circle")
}

fn criterion_1() -> Criterion {
    let mut c = Criterion::new(1, "spin Berry phase vs solid angle");
    let fam = HamiltonianFamily::spin_half();
    for theta in [0.5, PI / 2.0, 2.0] {
        match cyclic_berry_phase(&fam, &spin_circle(theta, 2048), 0) {
            Ok(p) => {
                let magnitude = PI * (1.0 - theta.cos());
                // the sign is whichever matches the discrete overlap product
                let expected = [magnitude, -magnitude]
                    .into_iter()
                    .min_by(|a, b| wrap_phase(a - p.overlap_product).abs().total_cmp(&wrap_phase(b - p.overlap_product).abs()))
                    .expect("two candidates");
                c.checks.push(Check::at_most(format!("theta0 = {theta}"), wrap_phase(p.phase - expected).abs(), 1e-6));
            }
            Err(e) => c.fail(format!("theta0 = {theta}"), &e),
        }
    }
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::new(2, "open-path phase on closed loops equals cyclic phase");
    let mut loops = vec![("spin theta0 = 1".to_string(), HamiltonianFamily::spin_half(), spin_circle(1.0, 2048))];
    for seed in 1..=3 {
        let fam = HamiltonianFamily::seeded_random_polynomial(4, 2, 2, seed).expect("valid family");
        let path = ParameterPath::circle(&[0.1, 0.0], &[0.3, 0.0], &[0.0, 0.3], (0.0, 1.0), 2048).expect("valid circle");
        loops.push((format!("random family {seed}"), fam, path));
    }
    for (name, fam, path) in &loops {
        let cyclic = match cyclic_berry_phase(fam, path, 0) {
            Ok(p) => p.phase,
            Err(e) => {
                c.fail(name.clone(), &e);
                continue;
            }
        };
        let mut worst = Worst::default();
        for route in PhaseRoute::ALL {
            match open_path_phase(fam, path, 0, route) {
                Ok(p) => worst.add(wrap_phase(p.phase - cyclic).abs()),
                Err(e) => c.fail(format!("{name}, {}", route.name()), &e),
            }
        }
        c.checks.push(Check::at_most(name.clone(), worst.0, 1e-6));
    }
    c
}

/// Runs `f` over the cases in parallel; outcomes come back in case order.
fn over_cases<T: Send>(cases: &[Case], f: impl Fn(&Case) -> T + Sync + Send) -> Vec<T> {
    par::map(Execution::default(), cases, f)
}

type PairOutcome = (Vec<(usize, f64)>, Vec<Failure>);

/// Folds per-case worst deviations (indexed by check) into the criterion.
fn collect(c: &mut Criterion, names: &[&str], tolerances: &[f64], outcomes: Vec<PairOutcome>) {
    let mut worst: Vec<Worst> = names.iter().map(|_| Worst::default()).collect();
    for (devs, failures) in outcomes {
        for (k, d) in devs {
            worst[k].add(d);
        }
        c.failures.extend(failures);
    }
    for ((name, tol), w) in names.iter().zip(tolerances).zip(worst) {
        c.checks.push(Check::at_most(*name, w.0, *tol));
    }
}

fn criterion_3(cases: &[Case]) -> (Criterion, usize) {
    let mut c = Criterion::new(3, "Omega routes agree");
    let outcomes = over_cases(cases, |case| {
        let mut devs = Vec::new();
        let mut failures = Vec::new();
        let mut used = 0;
        for (j, (r, r0, n)) in case.pairs.iter().enumerate() {
            let ctx = format!("family {} pair {j}", case.seed);
            let overlap = match fluctuation_data(&case.family, r, r0, *n) {
                Ok(f) => f.overlap.norm(),
                Err(e) => {
                    failures.push(Failure::from_error(ctx, &e));
                    continue;
                }
            };
            if overlap <= MIN_OVERLAP {
                continue;
            }
            used += 1;
            let routes: geomflux::Result<Vec<_>> = [OmegaRoute::AP, OmegaRoute::Fluctuation, OmegaRoute::SumOverStates]
                .iter()
                .map(|&route| gauge_potentials(&case.family, r, r0, *n, route))
                .collect();
            match routes {
                Ok(p) => {
                    for i in 0..PARAM_DIM {
                        devs.push((0, (p[0].omega[i] - p[2].omega[i]).abs()));
                        devs.push((0, (p[1].omega[i] - p[2].omega[i]).abs()));
                        devs.push((0, (p[0].omega[i] - p[1].omega[i]).abs()));
                    }
                }
                Err(e) => failures.push(Failure::from_error(ctx, &e)),
            }
        }
        ((devs, failures), used)
    });
    let used = outcomes.iter().map(|(_, u)| u).sum();
    collect(&mut c, &["max route deviation"], &[1e-7], outcomes.into_iter().map(|(o, _)| o).collect());
    (c, used)
}

fn criterion_4(cases: &[Case], seed: u64) -> Criterion {
    let mut c = Criterion::new(4, "gauge invariance");
    let outcomes = over_cases(cases, |case| {
        let mut devs = Vec::new();
        let mut failures = Vec::new();
        let fam = &case.family;
        let loop_path = ParameterPath::circle(&[0.0, 0.1, 0.0], &[0.3, 0.0, 0.0], &[0.0, 0.3, 0.1], (0.0, 1.0), 129)
            .expect("valid circle");
        let arc = ParameterPath::circle(&[0.0, 0.1, 0.0], &[0.3, 0.0, 0.0], &[0.0, 0.3, 0.1], (0.0, 0.4), 65)
            .expect("valid arc");
        let plain = cyclic_berry_phase(fam, &loop_path, 0)
            .and_then(|cy| Ok((cy, open_path_phase(fam, &arc, 0, PhaseRoute::AP)?)));
        let (cyclic, open) = match plain {
            Ok(x) => x,
            Err(e) => {
                failures.push(Failure::from_error(format!("family {}", case.seed), &e));
                return (devs, failures);
            }
        };
        let (r, r0, n) = &case.pairs[0];
        for g in 0..10u64 {
            let gauge = PolynomialGauge::random_cubic(PARAM_DIM, seed.wrapping_mul(1000).wrapping_add(case.seed * 10 + g));
            let ctx = format!("family {} gauge {g}", case.seed);
            match gauge_transform_check(fam, r, r0, *n, &gauge) {
                Ok(rep) => devs.push((0, rep.omega_deviation)),
                Err(e) => failures.push(Failure::from_error(ctx.clone(), &e)),
            }
            let opts = PhaseOptions { gauge: Some(gauge), ..Default::default() };
            match cyclic_berry_phase_with(fam, &loop_path, 0, &opts) {
                Ok(p) => devs.push((1, wrap_phase(p.phase - cyclic.phase).abs())),
                Err(e) => failures.push(Failure::from_error(ctx.clone(), &e)),
            }
            match open_path_phase_with(fam, &arc, 0, PhaseRoute::AP, &opts) {
                Ok(p) => devs.push((2, (p.phase - open.phase).abs())),
                Err(e) => failures.push(Failure::from_error(ctx, &e)),
            }
        }
        (devs, failures)
    });
    collect(&mut c, &["Omega", "cyclic phase", "open-path phase"], &[1e-9; 3], outcomes);
    c
}

fn criterion_5(cases: &[Case]) -> Criterion {
    let mut c = Criterion::new(5, "fluctuation-correlation theorem");
    let s_values = [0.2, 0.1, 0.05];
    let outcomes = over_cases(cases, |case| {
        let mut devs = Vec::new();
        let mut failures = Vec::new();
        for (j, (r, r0, n)) in case.pairs.iter().enumerate() {
            match theorem_check(&case.family, r, r0, *n, &s_values) {
                Ok(rep) => {
                    devs.push((0, rep.max_active_residual()));
                    for q in &rep.quadrature {
                        for i in 0..q.quadrature.len() {
                            devs.push((1, (q.quadrature[i] - q.mode_sum[i]).abs() - q.error_estimate[i]));
                        }
                    }
                }
                Err(geomflux::Error::ReferenceOverlapVanishing { .. }) => {}
                Err(e) => failures.push(Failure::from_error(format!("family {} pair {j}", case.seed), &e)),
            }
        }
        (devs, failures)
    });
    collect(
        &mut c,
        &["mode-sum residual", "quadrature deviation beyond its estimate"],
        &[1e-8, 0.0],
        outcomes,
    );
    c
}

fn criterion_6(cases: &[Case]) -> Criterion {
    let mut c = Criterion::new(6, "spectral vs Heisenberg Q(t)");
    let times: Vec<f64> = (0..100).map(|k| 50.0 * k as f64 / 99.0).collect();
    let outcomes = over_cases(cases, |case| {
        let (r, r0, n) = &case.pairs[0];
        let traces = q_correlation(&case.family, r, r0, *n, &times, QForm::Spectral)
            .and_then(|a| Ok((a, q_correlation(&case.family, r, r0, *n, &times, QForm::Heisenberg)?)));
        match traces {
            Ok((a, b)) => {
                let dev = a.q.iter().flatten().zip(b.q.iter().flatten()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
                (vec![(0, dev)], Vec::new())
            }
            Err(e) => (Vec::new(), vec![Failure::from_error(format!("family {}", case.seed), &e)]),
        }
    });
    collect(&mut c, &["max deviation"], &[1e-10], outcomes);
    c
}

fn criterion_7(cases: &[Case]) -> Criterion {
    let mut c = Criterion::new(7, "metric identities");
    let outcomes = over_cases(cases, |case| {
        let mut devs = Vec::new();
        let mut failures = Vec::new();
        for (j, (r, r0, n)) in case.pairs.iter().enumerate() {
            let fam = &case.family;
            let computed = (|| -> geomflux::Result<_> {
                let fl = fluctuation_data(fam, r, r0, *n)?;
                let d = metric_and_geometric_tensor(fam, r, *n, TensorRoute::Derivative)?;
                let s = metric_and_geometric_tensor(fam, r, *n, TensorRoute::ForceStates)?;
                let f = gii_from_force_correlation(fam, r, *n, 1e-3)?;
                let ap = gauge_potentials(fam, r, r0, *n, OmegaRoute::AP)?;
                Ok((fl, d, s, f, ap))
            })();
            match computed {
                Ok((fl, d, s, f, ap)) => {
                    for i in 0..PARAM_DIM {
                        devs.push((0, (fl.delta_b[i].powi(2) - s.g[(i, i)]).abs()));
                        devs.push((3, (f[i].limit - d.g[(i, i)]).abs()));
                        if fl.overlap.norm() > MIN_OVERLAP {
                            let metric_omega = fl.lambda[i] * s.g[(i, i)].sqrt() / fl.overlap.norm_sqr();
                            devs.push((2, (metric_omega - ap.omega[i]).abs()));
                        }
                        for k in 0..PARAM_DIM {
                            devs.push((1, (d.g[(i, k)] - s.g[(i, k)]).abs().max((d.v[(i, k)] - s.v[(i, k)]).abs())));
                        }
                    }
                }
                Err(geomflux::Error::ReferenceOverlapVanishing { .. }) => {}
                Err(e) => failures.push(Failure::from_error(format!("family {} pair {j}", case.seed), &e)),
            }
        }
        (devs, failures)
    });
    collect(
        &mut c,
        &["delta_b^2 vs g_ii", "derivative vs sum-over-states tensor", "metric-route Omega vs A - P", "force-force g_ii"],
        &[1e-8, 1e-7, 1e-7, 1e-8],
        outcomes,
    );

    // spin-1/2 on the unit sphere: g_theta_theta = 1/4, g_phi_phi = sin^2(theta)/4
    let fam = HamiltonianFamily::spin_half();
    let mut worst = Worst::default();
    for (theta, phi) in [(0.7, 0.3), (1.9, -2.0), (0.2, 1.1)] {
        let (st, ct) = f64::sin_cos(theta);
        let (sp, cp) = f64::sin_cos(phi);
        let r = pt(&[st * cp, st * sp, ct]);
        let jac = DMatrix::from_row_slice(3, 2, &[ct * cp, -st * sp, ct * sp, st * cp, -st, 0.0]);
        match metric_and_geometric_tensor(&fam, &r, 0, TensorRoute::Derivative) {
            Ok(t) => {
                let g = t.pullback(&jac).g;
                worst.add((g[(0, 0)] - 0.25).abs());
                worst.add((g[(1, 1)] - st * st / 4.0).abs());
            }
            Err(e) => c.fail(format!("spin theta = {theta}"), &e),
        }
    }
    c.checks.push(Check::at_most("spin sphere metric", worst.0, 1e-7));
    c
}

fn criterion_8(cases: &[Case]) -> Criterion {
    let mut c = Criterion::new(8, "susceptibility limit");
    let z_values = [0.1, 0.05, 0.02, 0.01];
    let outcomes = over_cases(cases, |case| {
        let mut devs = Vec::new();
        let mut failures = Vec::new();
        for (j, (r, r0, n)) in case.pairs.iter().enumerate() {
            let fam = &case.family;
            let both = susceptibility(fam, r, r0, *n, &z_values)
                .and_then(|s| Ok((s, theorem_check(fam, r, r0, *n, &[0.1])?)));
            match both {
                Ok((s, t)) => {
                    for i in 0..PARAM_DIM {
                        devs.push((0, s.residuals[i]));
                        devs.push((1, (s.extrapolated_difference[i] + 2.0 * fam.hbar() * t.lhs[i]).abs()));
                    }
                }
                Err(geomflux::Error::ReferenceOverlapVanishing { .. }) => {}
                Err(e) => failures.push(Failure::from_error(format!("family {} pair {j}", case.seed), &e)),
            }
        }
        (devs, failures)
    });
    collect(&mut c, &["limit vs -2 hbar lambda delta_b", "limit vs integral of Q"], &[1e-8, 1e-8], outcomes);
    c
}

fn criterion_9(seed: u64) -> Criterion {
    let mut c = Criterion::new(9, "classical limit");

    let osc = ClassicalFastSystem::harmonic(vec![1.0], vec![1.0]).expect("valid system");
    let kinetic = Observable::from_fn("p^2/2", |z| 0.5 * z.p[0] * z.p[0]);
    match microcanonical_average(&osc, &[0.0], 1.0, &kinetic, 100_000, seed) {
        Ok(e) => c.checks.push(Check::at_most("harmonic <p^2/2> - E/2 in stderr units", (e.mean - 0.5).abs() / e.stderr, 3.0)),
        Err(e) => c.fail("equipartition", &e),
    }

    let (m, w, action) = (1.3, 0.8, 0.9);
    let sys = ClassicalFastSystem::harmonic(vec![m], vec![w]).expect("valid system");
    let energy = Observable::from_fn("h", move |z| 0.5 * z.p[0] * z.p[0] / m + 0.5 * m * w * w * z.r[0] * z.r[0]);
    let torus = [
        ("torus h - omega I", energy, w * action),
        ("torus r", Observable::position(0), 0.0),
        ("torus r^2 - I/(m omega)", Observable::from_fn("r^2", |z| z.r[0] * z.r[0]), action / (m * w)),
    ];
    let mut worst = Worst::default();
    for (name, obs, expected) in &torus {
        match torus_average(&sys, &[0.0], &[action], obs, 256) {
            Ok(v) => worst.add((v - expected).abs()),
            Err(e) => c.fail(*name, &e),
        }
    }
    c.checks.push(Check::at_most("torus closed forms", worst.0, 1e-8));

    let times: Vec<f64> = (0..=2000).map(|k| 0.1 * k as f64).collect();
    let decay = |sys: &ClassicalFastSystem, big_r: f64, count: usize| -> geomflux::Result<f64> {
        let ens = sample_energy_shell(sys, &[big_r], 1.0, count, seed, Execution::default())?;
        let a = Observable::parameter_force_rate(sys, &[big_r], 0);
        let b = Observable::parameter_force(sys, &[big_r], 0);
        let dt = sys.recommended_dt(&[big_r], 1.0);
        let trace = classical_correlation(sys, &ens, &a, &[b], &times, dt, Execution::default())?;
        Ok(envelope_decay(&trace.q[0]).2)
    };
    let quartic = ClassicalFastSystem::quartic_coupled(0.05).expect("valid system");
    match decay(&quartic, 1.0, 1000) {
        Ok(r) => c.checks.push(Check::at_most("quartic late/early envelope", r, 0.2)),
        Err(e) => c.fail("quartic decay", &e),
    }
    match decay(&osc, 0.0, 400) {
        Ok(r) => c.checks.push(Check::at_least("harmonic late/early envelope", r, 0.1)),
        Err(e) => c.fail("harmonic decay", &e),
    }
    c
}

/// Runs criteria 1 to 9.
pub fn criteria(seed: u64) -> Vec<Criterion> {
    let cases = cases(seed);
    let (c3, used) = criterion_3(&cases);
    let mut c3 = c3;
    c3.checks.push(Check::at_least("pairs with overlap > 1e-3", used as f64, (FAMILIES as usize * PAIRS / 2) as f64));
    vec![
        criterion_1(),
        criterion_2(),
        c3,
        criterion_4(&cases, seed),
        criterion_5(&cases),
        criterion_6(&cases),
        criterion_7(&cases),
        criterion_8(&cases),
        criterion_9(seed),
    ]
}

pub fn run(seed: u64) -> TaskOutput {
    let results = criteria(seed);
    let mut out = TaskOutput::new(Table::new(&VERIFY_HEADER));
    for c in &results {
        for check in &c.checks {
            out.table.push(vec![
                c.id.into(),
                check.name.as_str().into(),
                check.value.into(),
                check.tolerance.into(),
                check.passed.into(),
            ]);
            out.checks.push(Check { name: format!("{}: {}", c.id, check.name), ..check.clone() });
        }
        out.failures.extend(c.failures.iter().map(|f| Failure { context: format!("criterion {}: {}", c.id, f.context), ..f.clone() }));
    }
    out.results = json!({
        "criteria": results.iter().map(|c| json!({
            "id": c.id, "title": c.title, "passed": c.passed(),
        })).collect::<Vec<_>>(),
    });
    out
}

/// Plain-text pass/fail table.
pub fn render(results: &serde_json::Value, out: &TaskOutput) -> String {
    let mut s = String::new();
    if let Some(list) = results["criteria"].as_array() {
        for c in list {
            let id = c["id"].as_u64().unwrap_or(0);
            let mark = if c["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            s.push_str(&format!("[{mark}] {id}. {}\n", c["title"].as_str().unwrap_or("")));
            for check in out.checks.iter().filter(|k| k.name.starts_with(&format!("{id}: "))) {
                let mark = if check.passed { "ok  " } else { "FAIL" };
                s.push_str(&format!("         {mark} {:<48} {:>12.3e} (tol {:.1e})\n", &check.name[format!("{id}: ").len()..], check.value, check.tolerance));
            }
        }
    }
    for f in &out.failures {
        s.push_str(&format!("error: {} [{}] {}\n", f.context, f.code, f.message));
    }
    s
}
