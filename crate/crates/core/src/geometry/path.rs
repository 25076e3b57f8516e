//! Line integrals along parameter paths: the open-path phase `int Omega . dR`
//! and the cyclic Berry phase `oint A . dR`.
//!
//! Each segment is integrated with the trapezoid rule on its endpoints and
//! again with the midpoint added; the reported value is the Richardson
//! combination (Simpson) and the error estimate is `|T_h - T_2h| / 3`.
//! Paths built from a parametric curve carry tangents and their segments are
//! cubic Hermite arcs, otherwise segments are straight.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::family::{HamiltonianFamily, ParameterPoint};
use crate::geometry::frame::{check_level, Frame, GaugeSpec};
use crate::geometry::gauge::PolynomialGauge;
use crate::geometry::point::{fluctuations, omega_from, LocalGeometry, OmegaRoute, OVERLAP_TOLERANCE};
use crate::linalg::{inner, CVector, C64};
use crate::par::{self, Execution};

/// Endpoint mismatch allowed for closed paths.
pub const CLOSURE_TOLERANCE: f64 = 1e-12;

/// Minimum `|<n(R_k)|n(R_k+1)>|^2` between consecutive nodes.
pub const TRACKING_FIDELITY: f64 = 0.5;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPath {
    points: Vec<ParameterPoint>,
    /// `dR/dt` at each sample, with `t` the knot parameter.
    tangents: Option<Vec<Vec<f64>>>,
    knots: Vec<f64>,
    closed: bool,
}

/// Node of a segment: position and `dR/du` for the local `u in [0, 1]`.
struct SegmentNode {
    point: ParameterPoint,
    velocity: Vec<f64>,
}

impl ParameterPath {
    pub fn polyline(points: Vec<ParameterPoint>, closed: bool) -> Result<Self> {
        let knots = (0..points.len()).map(|k| k as f64).collect();
        let path = ParameterPath { points, tangents: None, knots, closed };
        path.validate()?;
        Ok(path)
    }

    /// Samples `curve` at `samples` uniform parameter values in `[t0, t1]`
    /// and keeps the tangents `derivative(t)` for Hermite segments.
    pub fn from_curve<F, D>(curve: F, derivative: D, t0: f64, t1: f64, samples: usize, closed: bool) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
        D: Fn(f64) -> Vec<f64>,
    {
        if samples < 2 {
            return Err(Error::InvalidInput("a path needs at least 2 samples".into()));
        }
        let knots: Vec<f64> = (0..samples)
            .map(|k| t0 + (t1 - t0) * k as f64 / (samples - 1) as f64)
            .collect();
        let mut points = knots
            .iter()
            .map(|&t| ParameterPoint::new(curve(t)))
            .collect::<Result<Vec<_>>>()?;
        let tangents: Vec<Vec<f64>> = knots.iter().map(|&t| derivative(t)).collect();
        if closed {
            let first = points[0].clone();
            if first.distance(&points[samples - 1]) <= 1e-9 * (1.0 + first.coords().iter().map(|x| x.abs()).fold(0.0, f64::max)) {
                points[samples - 1] = first;
            }
        }
        let path = ParameterPath { points, tangents: Some(tangents), knots, closed };
        path.validate()?;
        Ok(path)
    }

    /// `R(t) = center + u cos(2 pi t) + v sin(2 pi t)` for `t` in `turns`.
    /// Closed when the turns span exactly one revolution.
    pub fn circle(center: &[f64], u: &[f64], v: &[f64], turns: (f64, f64), samples: usize) -> Result<Self> {
        let d = center.len();
        if u.len() != d || v.len() != d {
            return Err(Error::DimensionMismatch { what: "circle axis vectors", expected: d, found: u.len().min(v.len()) });
        }
        let closed = ((turns.1 - turns.0).abs() - 1.0).abs() < 1e-14;
        let (c, uu, vv) = (center.to_vec(), u.to_vec(), v.to_vec());
        let w = 2.0 * PI;
        Self::from_curve(
            |t| (0..d).map(|i| c[i] + uu[i] * (w * t).cos() + vv[i] * (w * t).sin()).collect(),
            |t| (0..d).map(|i| w * (-uu[i] * (w * t).sin() + vv[i] * (w * t).cos())).collect(),
            turns.0,
            turns.1,
            samples,
            closed,
        )
    }

    /// Straight segment from `a` to `b`.
    pub fn line(a: &[f64], b: &[f64], samples: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { what: "line endpoints", expected: a.len(), found: b.len() });
        }
        let (a, b) = (a.to_vec(), b.to_vec());
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        Self::from_curve(
            |t| a.iter().zip(&d).map(|(x, dx)| x + t * dx).collect(),
            |_| d.clone(),
            0.0,
            1.0,
            samples,
            false,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least 2 samples".into()));
        }
        let d = self.points[0].dim();
        for p in &self.points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { what: "path sample", expected: d, found: p.dim() });
            }
        }
        if let Some(t) = &self.tangents {
            if t.len() != self.points.len() || t.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
                return Err(Error::InvalidInput("tangents must be finite and match the samples".into()));
            }
        }
        if self.closed {
            let mismatch = self.points[0].distance(&self.points[self.points.len() - 1]);
            if mismatch > CLOSURE_TOLERANCE {
                return Err(Error::PathNotClosed { mismatch });
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn param_dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Start, midpoint and end of segment `k` with `dR/du`.
    fn segment_nodes(&self, k: usize) -> [SegmentNode; 3] {
        let a = self.points[k].coords();
        let b = self.points[k + 1].coords();
        let d = a.len();
        match &self.tangents {
            None => {
                let vel: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
                let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                [
                    SegmentNode { point: self.points[k].clone(), velocity: vel.clone() },
                    SegmentNode { point: ParameterPoint::new(mid).expect("finite"), velocity: vel.clone() },
                    SegmentNode { point: self.points[k + 1].clone(), velocity: vel },
                ]
            }
            Some(t) => {
                let dt = self.knots[k + 1] - self.knots[k];
                let (ta, tb) = (&t[k], &t[k + 1]);
                let mid: Vec<f64> = (0..d)
                    .map(|i| 0.5 * a[i] + 0.125 * dt * ta[i] + 0.5 * b[i] - 0.125 * dt * tb[i])
                    .collect();
                let vmid: Vec<f64> = (0..d)
                    .map(|i| -1.5 * a[i] - 0.25 * dt * ta[i] + 1.5 * b[i] - 0.25 * dt * tb[i])
                    .collect();
                [
                    SegmentNode { point: self.points[k].clone(), velocity: ta.iter().map(|x| x * dt).collect() },
                    SegmentNode { point: ParameterPoint::new(mid).expect("finite"), velocity: vmid },
                    SegmentNode { point: self.points[k + 1].clone(), velocity: tb.iter().map(|x| x * dt).collect() },
                ]
            }
        }
    }

    /// Path with every segment split at its midpoint.
    pub fn refined(&self) -> ParameterPath {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        let mut knots = Vec::with_capacity(points.capacity());
        let mut tangents = self.tangents.as_ref().map(|_| Vec::with_capacity(points.capacity()));
        for k in 0..self.segments() {
            let [start, mid, _] = self.segment_nodes(k);
            let dt = self.knots[k + 1] - self.knots[k];
            points.push(start.point);
            points.push(mid.point);
            knots.push(self.knots[k]);
            knots.push(self.knots[k] + 0.5 * dt);
            if let (Some(out), Some(t)) = (tangents.as_mut(), &self.tangents) {
                out.push(t[k].clone());
                out.push(mid.velocity.iter().map(|x| x / dt).collect());
            }
        }
        points.push(self.points[self.points.len() - 1].clone());
        knots.push(self.knots[self.knots.len() - 1]);
        if let (Some(out), Some(t)) = (tangents.as_mut(), &self.tangents) {
            out.push(t[t.len() - 1].clone());
        }
        ParameterPath { points, tangents, knots, closed: self.closed }
    }

    /// Cumulative chord length at each sample.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut s = vec![0.0];
        for k in 0..self.segments() {
            let next = s[k] + self.points[k].distance(&self.points[k + 1]);
            s.push(next);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseRoute {
    AP,
    Fluctuation,
    SumOverStates,
    /// `Omega_i = lambda_i sqrt(g_ii) / |<n0|n>|^2`.
    Metric,
}

impl PhaseRoute {
    pub const ALL: [PhaseRoute; 4] = [PhaseRoute::AP, PhaseRoute::Fluctuation, PhaseRoute::SumOverStates, PhaseRoute::Metric];

    pub fn name(self) -> &'static str {
        match self {
            PhaseRoute::AP => "ap",
            PhaseRoute::Fluctuation => "fluctuation",
            PhaseRoute::SumOverStates => "sum-over-states",
            PhaseRoute::Metric => "metric",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PhaseOptions {
    pub execution: Execution,
    /// Extra gauge `|n> -> e^{i alpha}|n>`; physical outputs must not change.
    pub gauge: Option<PolynomialGauge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPhase {
    /// Richardson (Simpson) value of the line integral.
    pub phase: f64,
    /// Plain trapezoid on the samples.
    pub trapezoid: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicPhase {
    /// `oint A . dR` wrapped into `(-pi, pi]`.
    pub phase: f64,
    /// `-arg prod_k <n_k|n_k+1>` on the samples.
    pub overlap_product: f64,
    /// `|wrap(phase - overlap_product)|`.
    pub cross_check_deviation: f64,
    pub error_estimate: f64,
}

/// Per-node result of the Omega evaluation.
struct OmegaNode {
    omega: Vec<f64>,
    state: CVector,
    overlap: f64,
}

fn omega_node(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    n0: &CVector,
    n: usize,
    route: PhaseRoute,
    gauge: GaugeSpec<'_>,
) -> Result<OmegaNode> {
    let all = matches!(route, PhaseRoute::Fluctuation | PhaseRoute::Metric);
    let geo = LocalGeometry::new(family, r, n, all, gauge)?;
    let c = inner(n0, geo.state());
    let overlap = c.norm();
    if overlap <= OVERLAP_TOLERANCE {
        return Ok(OmegaNode { omega: Vec::new(), state: geo.state().clone(), overlap });
    }
    let omega = match route {
        PhaseRoute::AP => omega_from(&geo, n0, OmegaRoute::AP).0,
        PhaseRoute::Fluctuation => omega_from(&geo, n0, OmegaRoute::Fluctuation).0,
        PhaseRoute::SumOverStates => omega_from(&geo, n0, OmegaRoute::SumOverStates).0,
        PhaseRoute::Metric => {
            let (_, lambda, _) = fluctuations(&geo.b_operators(), geo.state(), n0);
            let t = geo.tensor_from_states();
            let c2 = c.norm_sqr();
            (0..lambda.len()).map(|i| lambda[i] * t[(i, i)].re.max(0.0).sqrt() / c2).collect()
        }
    };
    Ok(OmegaNode { omega, state: geo.state().clone(), overlap })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Node list `[s0, m0, s1, m1, ..., s_N]` as (point, velocity-per-segment).
fn interleaved_nodes(path: &ParameterPath) -> (Vec<ParameterPoint>, Vec<[Vec<f64>; 3]>) {
    let mut points = Vec::with_capacity(2 * path.len() - 1);
    let mut velocities = Vec::with_capacity(path.segments());
    for k in 0..path.segments() {
        let [a, m, b] = path.segment_nodes(k);
        points.push(a.point);
        points.push(m.point);
        velocities.push([a.velocity, m.velocity, b.velocity]);
    }
    points.push(path.points[path.len() - 1].clone());
    (points, velocities)
}

fn check_tracking(states: &[CVector]) -> Result<()> {
    for (k, w) in states.windows(2).enumerate() {
        let fidelity = inner(&w[0], &w[1]).norm_sqr();
        if fidelity <= TRACKING_FIDELITY {
            // node index k is sample k/2 (midpoints have odd indices)
            return Err(Error::LevelTrackingLost { from: k / 2, to: (k + 2) / 2, fidelity });
        }
    }
    Ok(())
}

/// Simpson value, trapezoid value, and error estimate from per-segment
/// integrand values `(f0, fmid, f1)`.
fn integrate(segments: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let mut t2 = 0.0;
    let mut t1 = 0.0;
    for &(a, m, b) in segments {
        t2 += 0.5 * (a + b);
        t1 += 0.25 * (a + 2.0 * m + b);
    }
    let simpson = (4.0 * t1 - t2) / 3.0;
    (simpson, t2, (t1 - t2).abs() / 3.0)
}

pub fn open_path_phase(family: &HamiltonianFamily, path: &ParameterPath, n: usize, route: PhaseRoute) -> Result<PathPhase> {
    open_path_phase_with(family, path, n, route, &PhaseOptions::default())
}

/// `gamma(Gamma) = int_Gamma Omega_n . dR` with the reference eigenstate
/// taken at the first sample.
pub fn open_path_phase_with(
    family: &HamiltonianFamily,
    path: &ParameterPath,
    n: usize,
    route: PhaseRoute,
    options: &PhaseOptions,
) -> Result<PathPhase> {
    if path.param_dim() != family.param_dim() {
        return Err(Error::DimensionMismatch { what: "path parameter dimension", expected: family.param_dim(), found: path.param_dim() });
    }
    let gauge = GaugeSpec { alpha: options.gauge.as_ref(), pivot: None };
    let start = Frame::at(family, &path.points[0], gauge)?;
    check_level(&start.eig, n)?;
    let n0 = start.states[n].clone();
    let (nodes, velocities) = interleaved_nodes(path);
    let values = par::try_map(options.execution, &nodes, |r| omega_node(family, r, &n0, n, route, gauge))?;

    let arcs = path.arc_lengths();
    for (k, v) in values.iter().enumerate() {
        if v.overlap <= OVERLAP_TOLERANCE {
            let arc = if k % 2 == 0 {
                arcs[k / 2]
            } else {
                0.5 * (arcs[k / 2] + arcs[k / 2 + 1])
            };
            return Err(Error::ReferenceOverlapVanishing { overlap: v.overlap, arc_length: arc });
        }
    }
    let states: Vec<CVector> = values.iter().map(|v| v.state.clone()).collect();
    check_tracking(&states)?;

    let segs: Vec<(f64, f64, f64)> = velocities
        .iter()
        .enumerate()
        .map(|(k, [va, vm, vb])| {
            (
                dot(&values[2 * k].omega, va),
                dot(&values[2 * k + 1].omega, vm),
                dot(&values[2 * k + 2].omega, vb),
            )
        })
        .collect();
    let (phase, trapezoid, error_estimate) = integrate(&segs);
    Ok(PathPhase { phase, trapezoid, error_estimate })
}

pub fn cyclic_berry_phase(family: &HamiltonianFamily, path: &ParameterPath, n: usize) -> Result<CyclicPhase> {
    cyclic_berry_phase_with(family, path, n, &PhaseOptions::default())
}

/// `gamma_n(C) = oint A_n . dR`.
///
/// `A` is evaluated in the pivot gauge; each segment uses the pivot of its
/// start sample at all three of its nodes, and wherever consecutive segments
/// use different pivots the gauge-invariant jump
/// `arg(n[q_prev] conj(n[q_next]))` is removed, so the sum is the connection
/// integral in a single smooth gauge.
pub fn cyclic_berry_phase_with(
    family: &HamiltonianFamily,
    path: &ParameterPath,
    n: usize,
    options: &PhaseOptions,
) -> Result<CyclicPhase> {
    if !path.is_closed() {
        let mismatch = path.points[0].distance(&path.points[path.len() - 1]);
        return Err(Error::PathNotClosed { mismatch });
    }
    if path.param_dim() != family.param_dim() {
        return Err(Error::DimensionMismatch { what: "path parameter dimension", expected: family.param_dim(), found: path.param_dim() });
    }
    let exec = options.execution;
    let alpha = options.gauge.as_ref();
    let samples = path.len();
    let segments = path.segments();

    let frames = par::try_map(exec, &path.points, |r| {
        let f = Frame::at(family, r, GaugeSpec { alpha, pivot: None })?;
        check_level(&f.eig, n)?;
        Ok::<_, Error>((f.pivots[n], f.eig.eigenvector(n), f.states[n].clone()))
    })?;
    // pivot used by each segment
    let seg_pivot: Vec<usize> = (0..segments).map(|k| frames[k].0).collect();

    // (point, pivot) jobs: segment start, mid and end, each in the segment pivot
    let mut jobs: Vec<(ParameterPoint, usize)> = Vec::with_capacity(3 * segments);
    let mut vels: Vec<[Vec<f64>; 3]> = Vec::with_capacity(segments);
    for k in 0..segments {
        let [a, m, b] = path.segment_nodes(k);
        let q = seg_pivot[k];
        jobs.push((a.point, q));
        jobs.push((m.point, q));
        jobs.push((b.point, q));
        vels.push([a.velocity, m.velocity, b.velocity]);
    }
    let connections = par::try_map(exec, &jobs, |(r, q)| {
        let geo = LocalGeometry::new(family, r, n, false, GaugeSpec { alpha, pivot: Some((n, *q)) })?;
        Ok::<_, Error>((geo.connection(), geo.state().clone()))
    })?;
    let tracked: Vec<CVector> = (0..segments)
        .flat_map(|k| [connections[3 * k].1.clone(), connections[3 * k + 1].1.clone()])
        .chain(std::iter::once(connections[3 * segments - 1].1.clone()))
        .collect();
    check_tracking(&tracked)?;

    let segs: Vec<(f64, f64, f64)> = (0..segments)
        .map(|k| {
            let [va, vm, vb] = &vels[k];
            (
                dot(&connections[3 * k].0, va),
                dot(&connections[3 * k + 1].0, vm),
                dot(&connections[3 * k + 2].0, vb),
            )
        })
        .collect();
    let (mut integral, _, error_estimate) = integrate(&segs);

    // pivot changes at interior samples and at the closing sample
    for j in 1..samples {
        let prev = seg_pivot[j - 1];
        let next = if j == samples - 1 { seg_pivot[0] } else { seg_pivot[j] };
        if prev != next {
            let v = &frames[j].1;
            integral -= (v[prev] * v[next].conj()).arg();
        }
    }

    let mut prod = C64::new(1.0, 0.0);
    for k in 0..segments {
        let next = if k + 1 == samples - 1 { &frames[0].2 } else { &frames[k + 1].2 };
        let o = inner(&frames[k].2, next);
        prod *= o / o.norm();
    }
    let overlap_product = -prod.arg();
    let phase = wrap_phase(integral);
    Ok(CyclicPhase {
        phase,
        overlap_product,
        cross_check_deviation: wrap_phase(phase - overlap_product).abs(),
        error_estimate,
    })
}
