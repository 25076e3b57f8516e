//! Run configuration: a single JSON document, validated into [`RunConfig`].
//!
//! Validation walks the whole document and collects every problem it finds,
//! each tagged with a path such as `family.terms[1].matrix`. Unknown keys are
//! rejected with the nearest allowed key as a suggestion.

use std::fmt;

use geomflux::geometry::ParameterPath;
use geomflux::{CMatrix, HamiltonianFamily, Monomial, ParameterPoint, C64};
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

pub const DEFAULT_PATH_SAMPLES: usize = 512;
pub const DEFAULT_HBAR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Phase,
    Tensor,
    Correlation,
    Theorem,
    Susceptibility,
    Classical,
    VerifyAll,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Phase,
        Task::Tensor,
        Task::Correlation,
        Task::Theorem,
        Task::Susceptibility,
        Task::Classical,
        Task::VerifyAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Phase => "phase",
            Task::Tensor => "tensor",
            Task::Correlation => "correlation",
            Task::Theorem => "theorem",
            Task::Susceptibility => "susceptibility",
            Task::Classical => "classical",
            Task::VerifyAll => "verify-all",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }

    fn needs_family(self) -> bool {
        !matches!(self, Task::Classical | Task::VerifyAll)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermConfig {
    pub powers: Vec<u32>,
    /// Rows of `[re, im]` pairs.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyConfig {
    Spin { spin: f64, hbar: f64 },
    AvoidedCrossing { delta: f64, hbar: f64 },
    MatrixPolynomial { dim: usize, param_dim: usize, terms: Vec<TermConfig>, hbar: f64 },
    SeededRandomPolynomial { dim: usize, param_dim: usize, degree: u32, seed: u64, hbar: f64 },
}

impl FamilyConfig {
    pub fn param_dim(&self) -> usize {
        match self {
            FamilyConfig::Spin { .. } => 3,
            FamilyConfig::AvoidedCrossing { .. } => 2,
            FamilyConfig::MatrixPolynomial { param_dim, .. } | FamilyConfig::SeededRandomPolynomial { param_dim, .. } => *param_dim,
        }
    }

    pub fn build(&self) -> geomflux::Result<HamiltonianFamily> {
        let (family, hbar) = match self {
            FamilyConfig::Spin { spin, hbar } => (HamiltonianFamily::spin(*spin)?, *hbar),
            FamilyConfig::AvoidedCrossing { delta, hbar } => (HamiltonianFamily::avoided_crossing(*delta)?, *hbar),
            FamilyConfig::MatrixPolynomial { dim, param_dim, terms, hbar } => {
                let terms = terms
                    .iter()
                    .map(|t| Monomial {
                        powers: t.powers.clone(),
                        matrix: CMatrix::from_fn(*dim, *dim, |i, j| C64::new(t.matrix[i][j][0], t.matrix[i][j][1])),
                    })
                    .collect();
                (HamiltonianFamily::matrix_polynomial(*dim, *param_dim, terms)?, *hbar)
            }
            FamilyConfig::SeededRandomPolynomial { dim, param_dim, degree, seed, hbar } => {
                (HamiltonianFamily::seeded_random_polynomial(*dim, *param_dim, *degree, *seed)?, *hbar)
            }
        };
        family.with_hbar(hbar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathConfig {
    /// `center + cos(2 pi t) u + sin(2 pi t) v` for `t` in `turns`.
    Circle { center: Vec<f64>, u: Vec<f64>, v: Vec<f64>, turns: [f64; 2], samples: usize },
    Line { from: Vec<f64>, to: Vec<f64>, samples: usize },
    Polyline { points: Vec<Vec<f64>>, closed: bool },
}

impl PathConfig {
    pub fn build(&self) -> geomflux::Result<ParameterPath> {
        match self {
            PathConfig::Circle { center, u, v, turns, samples } => {
                ParameterPath::circle(center, u, v, (turns[0], turns[1]), *samples)
            }
            PathConfig::Line { from, to, samples } => ParameterPath::line(from, to, *samples),
            PathConfig::Polyline { points, closed } => {
                let pts = points.iter().map(|p| ParameterPoint::new(p.clone())).collect::<geomflux::Result<Vec<_>>>()?;
                ParameterPath::polyline(pts, *closed)
            }
        }
    }

    fn dims(&self) -> Vec<(String, usize)> {
        match self {
            PathConfig::Circle { center, u, v, .. } => {
                vec![("center".into(), center.len()), ("u".into(), u.len()), ("v".into(), v.len())]
            }
            PathConfig::Line { from, to, .. } => vec![("from".into(), from.len()), ("to".into(), to.len())],
            PathConfig::Polyline { points, .. } => {
                points.iter().enumerate().map(|(k, p)| (format!("points[{k}]"), p.len())).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    /// Integrated phases: route agreement and open-vs-cyclic on closed loops.
    pub phase: f64,
    /// Geometric tensor routes against each other.
    pub metric_route: f64,
    /// `Delta B^2 = g_ii` and the force-force metric.
    pub metric: f64,
    /// Spectral against Heisenberg correlation.
    pub spectral: f64,
    pub theorem: f64,
    pub susceptibility: f64,
    /// Classical residuals in units of the combined standard error.
    pub classical_sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            phase: 1e-6,
            metric_route: 1e-7,
            metric: 1e-8,
            spectral: 1e-10,
            theorem: 1e-8,
            susceptibility: 1e-8,
            classical_sigma: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemConfig {
    Harmonic { mass: Vec<f64>, omega: Vec<f64> },
    QuarticCoupled { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleConfig {
    Shell { energy: f64 },
    Torus { actions: Vec<f64> },
}

/// Phase-space observable named in the config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservableSpec {
    /// Gaussian window centred on the first ensemble sample.
    Window,
    Position(usize),
    Momentum(usize),
    /// `dh/dR_i`.
    Force(usize),
    /// `{dh/dR_i, h}`.
    ForceRate(usize),
}

impl ObservableSpec {
    fn parse(s: &str) -> Option<ObservableSpec> {
        if s == "window" {
            return Some(ObservableSpec::Window);
        }
        let (name, idx) = s.split_once(':')?;
        let idx: usize = idx.parse().ok()?;
        match name {
            "position" => Some(ObservableSpec::Position(idx)),
            "momentum" => Some(ObservableSpec::Momentum(idx)),
            "force" => Some(ObservableSpec::Force(idx)),
            "force-rate" => Some(ObservableSpec::ForceRate(idx)),
            _ => None,
        }
    }

    fn index(self) -> Option<(bool, usize)> {
        match self {
            ObservableSpec::Window => None,
            ObservableSpec::Position(k) | ObservableSpec::Momentum(k) => Some((false, k)),
            ObservableSpec::Force(i) | ObservableSpec::ForceRate(i) => Some((true, i)),
        }
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableSpec::Window => f.write_str("window"),
            ObservableSpec::Position(k) => write!(f, "position:{k}"),
            ObservableSpec::Momentum(k) => write!(f, "momentum:{k}"),
            ObservableSpec::Force(i) => write!(f, "force:{i}"),
            ObservableSpec::ForceRate(i) => write!(f, "force-rate:{i}"),
        }
    }
}

impl Serialize for ObservableSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ClassicalChecks {
    /// Require `|lhs - rhs| <= classical_sigma * stderr`.
    pub theorem: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_decay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalConfig {
    pub system: SystemConfig,
    pub hbar: f64,
    pub parameters: Vec<f64>,
    pub ensemble: EnsembleConfig,
    pub samples: usize,
    pub a: ObservableSpec,
    /// Empty means `force:i` for every parameter.
    pub b: Vec<ObservableSpec>,
    /// Empty means the same observables as `b`.
    pub generators: Vec<ObservableSpec>,
    pub window_sigma: f64,
    pub lambda: f64,
    pub s_values: Vec<f64>,
    pub t_max: f64,
    pub time_step: f64,
    /// Integrator step; the system's recommended step when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub checks: ClassicalChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    pub level: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<Vec<f64>>,
    pub times: Vec<f64>,
    pub s_values: Vec<f64>,
    pub z_values: Vec<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalConfig>,
    pub tolerances: Tolerances,
}

impl RunConfig {
    /// Canonical JSON form; validating it again yields an equal config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "<root>" } else { &self.path };
        write!(f, "{path}: {}", self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub errors: Vec<SchemaError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.errors.len())?;
        for e in &self.errors {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

/// Time grid used when a task needs one and the config gives none.
pub fn default_times() -> Vec<f64> {
    linspace(0.0, 50.0, 100)
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Nearest allowed key within edit distance 2.
fn suggestion(key: &str, allowed: &[&str]) -> Option<String> {
    allowed
        .iter()
        .map(|a| (strsim::levenshtein(key, a), *a))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, a)| a.to_string())
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

struct Walker {
    errors: Vec<SchemaError>,
}

/// A JSON object whose keys have been checked against an allow-list.
struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl Walker {
    fn err(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        self.errors.push(SchemaError { path: path.into(), reason: reason.into() });
    }

    fn object<'a>(&mut self, path: &str, v: &'a Value, allowed: &[&str]) -> Option<Obj<'a>> {
        let Some(map) = v.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                let reason = match suggestion(key, allowed) {
                    Some(s) => format!("unknown key \"{key}\" (did you mean \"{s}\"?)"),
                    None => format!("unknown key \"{key}\"; allowed: {}", allowed.join(", ")),
                };
                self.err(join(path, key), reason);
            }
        }
        Some(Obj { path: path.to_string(), map })
    }

    /// Parses an optional field; `None` when absent or invalid.
    fn opt<T>(&mut self, o: &Obj<'_>, key: &str, parse: impl FnOnce(&mut Self, &str, &Value) -> Option<T>) -> Option<T> {
        let path = join(&o.path, key);
        o.map.get(key).and_then(|v| parse(self, &path, v))
    }

    /// Parses a required field.
    fn req<T>(&mut self, o: &Obj<'_>, key: &str, parse: impl FnOnce(&mut Self, &str, &Value) -> Option<T>) -> Option<T> {
        let path = join(&o.path, key);
        match o.map.get(key) {
            Some(v) => parse(self, &path, v),
            None => {
                self.err(path, "required key is missing");
                None
            }
        }
    }

    /// Parses a field with a default. Returns `None` only when present and invalid.
    fn def<T>(&mut self, o: &Obj<'_>, key: &str, default: T, parse: impl FnOnce(&mut Self, &str, &Value) -> Option<T>) -> Option<T> {
        let path = join(&o.path, key);
        match o.map.get(key) {
            Some(v) => parse(self, &path, v),
            None => Some(default),
        }
    }
}

fn real(w: &mut Walker, path: &str, v: &Value) -> Option<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            w.err(path, "expected a finite number");
            None
        }
    }
}

fn positive(w: &mut Walker, path: &str, v: &Value) -> Option<f64> {
    let x = real(w, path, v)?;
    if x > 0.0 {
        Some(x)
    } else {
        w.err(path, format!("must be positive, got {x}"));
        None
    }
}

fn count(w: &mut Walker, path: &str, v: &Value) -> Option<usize> {
    match v.as_u64() {
        Some(x) => Some(x as usize),
        None => {
            w.err(path, "expected a non-negative integer");
            None
        }
    }
}

fn seed(w: &mut Walker, path: &str, v: &Value) -> Option<u64> {
    match v.as_u64() {
        Some(x) => Some(x),
        None => {
            w.err(path, "expected a non-negative integer");
            None
        }
    }
}

fn boolean(w: &mut Walker, path: &str, v: &Value) -> Option<bool> {
    match v.as_bool() {
        Some(b) => Some(b),
        None => {
            w.err(path, "expected true or false");
            None
        }
    }
}

fn string<'a>(w: &mut Walker, path: &str, v: &'a Value) -> Option<&'a str> {
    match v.as_str() {
        Some(s) => Some(s),
        None => {
            w.err(path, "expected a string");
            None
        }
    }
}

fn array<'a>(w: &mut Walker, path: &str, v: &'a Value) -> Option<&'a Vec<Value>> {
    match v.as_array() {
        Some(a) => Some(a),
        None => {
            w.err(path, "expected an array");
            None
        }
    }
}

fn each<T>(w: &mut Walker, path: &str, v: &Value, mut f: impl FnMut(&mut Walker, &str, &Value) -> Option<T>) -> Option<Vec<T>> {
    let items = array(w, path, v)?;
    let mut out = Vec::with_capacity(items.len());
    let mut ok = true;
    for (k, item) in items.iter().enumerate() {
        match f(w, &format!("{path}[{k}]"), item) {
            Some(x) => out.push(x),
            None => ok = false,
        }
    }
    ok.then_some(out)
}

fn reals(w: &mut Walker, path: &str, v: &Value) -> Option<Vec<f64>> {
    each(w, path, v, real)
}

fn nonempty_reals(w: &mut Walker, path: &str, v: &Value) -> Option<Vec<f64>> {
    let x = reals(w, path, v)?;
    if x.is_empty() {
        w.err(path, "must not be empty");
        return None;
    }
    Some(x)
}

fn descending(w: &mut Walker, path: &str, v: &Value) -> Option<Vec<f64>> {
    let x = each(w, path, v, positive)?;
    if x.is_empty() {
        w.err(path, "must not be empty");
        return None;
    }
    if x.windows(2).any(|p| p[1] >= p[0]) {
        w.err(path, "must be strictly descending");
        return None;
    }
    Some(x)
}

fn complex_entry(w: &mut Walker, path: &str, v: &Value) -> Option<[f64; 2]> {
    let x = reals(w, path, v)?;
    if x.len() != 2 {
        w.err(path, "complex entries are [re, im] pairs");
        return None;
    }
    Some([x[0], x[1]])
}

fn family(w: &mut Walker, path: &str, v: &Value) -> Option<FamilyConfig> {
    const KEYS: [&str; 9] = ["kind", "spin", "delta", "dim", "param_dim", "terms", "degree", "seed", "hbar"];
    let o = w.object(path, v, &KEYS)?;
    let kind = w.req(&o, "kind", |w, p, v| string(w, p, v).map(str::to_string))?;
    let hbar = w.def(&o, "hbar", DEFAULT_HBAR, positive);
    let allowed_for: &[&str] = match kind.as_str() {
        "spin" => &["kind", "spin", "hbar"],
        "avoided-crossing" => &["kind", "delta", "hbar"],
        "matrix-polynomial" => &["kind", "dim", "param_dim", "terms", "hbar"],
        "seeded-random-polynomial" => &["kind", "dim", "param_dim", "degree", "seed", "hbar"],
        other => {
            w.err(
                join(path, "kind"),
                format!("unknown family kind \"{other}\"; expected spin, avoided-crossing, matrix-polynomial or seeded-random-polynomial"),
            );
            return None;
        }
    };
    for key in o.map.keys() {
        if KEYS.contains(&key.as_str()) && !allowed_for.contains(&key.as_str()) {
            w.err(join(path, key), format!("not used by family kind \"{kind}\""));
        }
    }
    let fam = match kind.as_str() {
        "spin" => FamilyConfig::Spin { spin: w.def(&o, "spin", 0.5, positive)?, hbar: hbar? },
        "avoided-crossing" => FamilyConfig::AvoidedCrossing { delta: w.req(&o, "delta", real)?, hbar: hbar? },
        "matrix-polynomial" => {
            let dim = w.req(&o, "dim", count);
            let param_dim = w.req(&o, "param_dim", count);
            let terms = w.req(&o, "terms", |w, p, v| {
                each(w, p, v, |w, p, v| {
                    let t = w.object(p, v, &["powers", "matrix"])?;
                    let powers = w.req(&t, "powers", |w, p, v| {
                        each(w, p, v, |w, p, v| match v.as_u64() {
                            Some(x) if x <= 16 => Some(x as u32),
                            _ => {
                                w.err(p, "expected an integer power in 0..=16");
                                None
                            }
                        })
                    });
                    let matrix = w.req(&t, "matrix", |w, p, v| each(w, p, v, |w, p, v| each(w, p, v, complex_entry)));
                    Some(TermConfig { powers: powers?, matrix: matrix? })
                })
            });
            let (dim, param_dim, terms) = (dim?, param_dim?, terms?);
            let mut ok = true;
            for (k, t) in terms.iter().enumerate() {
                let tp = format!("{path}.terms[{k}]");
                if t.powers.len() != param_dim {
                    w.err(format!("{tp}.powers"), format!("has {} entries but family.param_dim is {param_dim}", t.powers.len()));
                    ok = false;
                }
                if t.matrix.len() != dim || t.matrix.iter().any(|row| row.len() != dim) {
                    w.err(format!("{tp}.matrix"), format!("must be {dim}x{dim} to match family.dim"));
                    ok = false;
                }
            }
            if !ok {
                return None;
            }
            FamilyConfig::MatrixPolynomial { dim, param_dim, terms, hbar: hbar? }
        }
        _ => FamilyConfig::SeededRandomPolynomial {
            dim: w.req(&o, "dim", count)?,
            param_dim: w.req(&o, "param_dim", count)?,
            degree: w.def(&o, "degree", 2, |w, p, v| count(w, p, v).map(|d| d as u32))?,
            seed: w.def(&o, "seed", 0, seed)?,
            hbar: hbar?,
        },
    };
    if let Err(e) = fam.build() {
        w.err(path, format!("family cannot be built: {e}"));
        return None;
    }
    Some(fam)
}

const PATH_KEYS: [&str; 10] = ["kind", "center", "u", "v", "turns", "samples", "from", "to", "points", "closed"];

fn path_config(w: &mut Walker, path: &str, v: &Value) -> Option<PathConfig> {
    let o = w.object(path, v, &PATH_KEYS)?;
    let kind = w.req(&o, "kind", |w, p, v| string(w, p, v).map(str::to_string))?;
    let allowed: &[&str] = match kind.as_str() {
        "circle" => &["kind", "center", "u", "v", "turns", "samples"],
        "line" => &["kind", "from", "to", "samples"],
        "polyline" => &["kind", "points", "closed"],
        other => {
            w.err(join(path, "kind"), format!("unknown path kind \"{other}\"; expected circle, line or polyline"));
            return None;
        }
    };
    for key in o.map.keys() {
        if PATH_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            w.err(join(path, key), format!("not used by path kind \"{kind}\""));
        }
    }
    let samples = |w: &mut Walker, p: &str, v: &Value| {
        let n = count(w, p, v)?;
        if n < 2 {
            w.err(p, "a path needs at least 2 samples");
            return None;
        }
        Some(n)
    };
    match kind.as_str() {
        "circle" => {
            let center = w.req(&o, "center", nonempty_reals);
            let u = w.req(&o, "u", nonempty_reals);
            let vv = w.req(&o, "v", nonempty_reals);
            let turns = w.def(&o, "turns", [0.0, 1.0], |w, p, v| {
                let t = reals(w, p, v)?;
                if t.len() != 2 {
                    w.err(p, "expected [start, end] in turns");
                    return None;
                }
                Some([t[0], t[1]])
            });
            let samples = w.def(&o, "samples", DEFAULT_PATH_SAMPLES, samples);
            Some(PathConfig::Circle { center: center?, u: u?, v: vv?, turns: turns?, samples: samples? })
        }
        "line" => {
            let from = w.req(&o, "from", nonempty_reals);
            let to = w.req(&o, "to", nonempty_reals);
            let samples = w.def(&o, "samples", DEFAULT_PATH_SAMPLES, samples);
            Some(PathConfig::Line { from: from?, to: to?, samples: samples? })
        }
        _ => {
            let points = w.req(&o, "points", |w, p, v| each(w, p, v, nonempty_reals));
            let closed = w.def(&o, "closed", false, boolean);
            Some(PathConfig::Polyline { points: points?, closed: closed? })
        }
    }
}

fn times(w: &mut Walker, path: &str, v: &Value) -> Option<Vec<f64>> {
    let t = if v.is_object() {
        let o = w.object(path, v, &["start", "stop", "count"])?;
        let start = w.def(&o, "start", 0.0, real);
        let stop = w.req(&o, "stop", real);
        let n = w.req(&o, "count", count);
        linspace(start?, stop?, n?)
    } else {
        reals(w, path, v)?
    };
    if t.is_empty() {
        w.err(path, "time grid must not be empty");
        return None;
    }
    Some(t)
}

fn tolerances(w: &mut Walker, path: &str, v: &Value) -> Option<Tolerances> {
    let d = Tolerances::default();
    let o = w.object(
        path,
        v,
        &["phase", "metric_route", "metric", "spectral", "theorem", "susceptibility", "classical_sigma"],
    )?;
    Some(Tolerances {
        phase: w.def(&o, "phase", d.phase, positive)?,
        metric_route: w.def(&o, "metric_route", d.metric_route, positive)?,
        metric: w.def(&o, "metric", d.metric, positive)?,
        spectral: w.def(&o, "spectral", d.spectral, positive)?,
        theorem: w.def(&o, "theorem", d.theorem, positive)?,
        susceptibility: w.def(&o, "susceptibility", d.susceptibility, positive)?,
        classical_sigma: w.def(&o, "classical_sigma", d.classical_sigma, positive)?,
    })
}

fn observable(w: &mut Walker, path: &str, v: &Value) -> Option<ObservableSpec> {
    let s = string(w, path, v)?;
    let parsed = ObservableSpec::parse(s);
    if parsed.is_none() {
        w.err(path, format!("unknown observable \"{s}\"; expected window, position:K, momentum:K, force:I or force-rate:I"));
    }
    parsed
}

fn classical(w: &mut Walker, path: &str, v: &Value) -> Option<ClassicalConfig> {
    let o = w.object(
        path,
        v,
        &[
            "system", "hbar", "parameters", "ensemble", "samples", "a", "b", "generators", "window_sigma", "lambda",
            "s_values", "t_max", "time_step", "dt", "checks",
        ],
    )?;
    let system = w.req(&o, "system", |w, p, v| {
        let s = w.object(p, v, &["kind", "mass", "omega", "beta"])?;
        let kind = w.req(&s, "kind", |w, p, v| string(w, p, v).map(str::to_string))?;
        match kind.as_str() {
            "harmonic" => {
                let mass = w.req(&s, "mass", |w, p, v| each(w, p, v, positive));
                let omega = w.req(&s, "omega", |w, p, v| each(w, p, v, positive));
                let (mass, omega) = (mass?, omega?);
                if mass.len() != omega.len() || mass.is_empty() {
                    w.err(p, format!("mass ({}) and omega ({}) must be non-empty and of equal length", mass.len(), omega.len()));
                    return None;
                }
                Some(SystemConfig::Harmonic { mass, omega })
            }
            "quartic-coupled" => Some(SystemConfig::QuarticCoupled { beta: w.def(&s, "beta", 0.05, positive)? }),
            other => {
                w.err(join(p, "kind"), format!("unknown system kind \"{other}\"; expected harmonic or quartic-coupled"));
                None
            }
        }
    });
    let ensemble = w.req(&o, "ensemble", |w, p, v| {
        let e = w.object(p, v, &["kind", "energy", "actions"])?;
        let kind = w.req(&e, "kind", |w, p, v| string(w, p, v).map(str::to_string))?;
        match kind.as_str() {
            "shell" => Some(EnsembleConfig::Shell { energy: w.req(&e, "energy", real)? }),
            "torus" => Some(EnsembleConfig::Torus { actions: w.req(&e, "actions", |w, p, v| each(w, p, v, positive))? }),
            other => {
                w.err(join(p, "kind"), format!("unknown ensemble kind \"{other}\"; expected shell or torus"));
                None
            }
        }
    });
    let checks = w.def(&o, "checks", ClassicalChecks::default(), |w, p, v| {
        let c = w.object(p, v, &["theorem", "max_decay", "min_decay"])?;
        Some(ClassicalChecks {
            theorem: w.def(&c, "theorem", false, boolean)?,
            max_decay: w.opt(&c, "max_decay", positive),
            min_decay: w.opt(&c, "min_decay", positive),
        })
    });
    let cfg = ClassicalConfig {
        system: system?,
        hbar: w.def(&o, "hbar", DEFAULT_HBAR, positive)?,
        parameters: w.req(&o, "parameters", nonempty_reals)?,
        ensemble: ensemble?,
        samples: w.def(&o, "samples", 1000, count)?,
        a: w.def(&o, "a", ObservableSpec::Window, observable)?,
        b: w.def(&o, "b", Vec::new(), |w, p, v| each(w, p, v, observable))?,
        generators: w.def(&o, "generators", Vec::new(), |w, p, v| each(w, p, v, observable))?,
        window_sigma: w.def(&o, "window_sigma", 0.5, positive)?,
        lambda: w.def(&o, "lambda", 1.0, real)?,
        s_values: w.def(&o, "s_values", vec![0.4, 0.2, 0.1], descending)?,
        t_max: w.def(&o, "t_max", 200.0, positive)?,
        time_step: w.def(&o, "time_step", 0.1, positive)?,
        dt: w.opt(&o, "dt", positive),
        checks: checks?,
    };
    let (dof, pdim) = match &cfg.system {
        SystemConfig::Harmonic { mass, .. } => (mass.len(), mass.len()),
        SystemConfig::QuarticCoupled { .. } => (2, 1),
    };
    let mut ok = true;
    if cfg.parameters.len() != pdim {
        w.err(join(path, "parameters"), format!("has {} entries but classical.system takes {pdim}", cfg.parameters.len()));
        ok = false;
    }
    if let EnsembleConfig::Torus { actions } = &cfg.ensemble {
        if actions.len() != dof {
            w.err(join(path, "ensemble.actions"), format!("has {} entries but classical.system has {dof} degrees of freedom", actions.len()));
            ok = false;
        }
    }
    if cfg.samples < 2 {
        w.err(join(path, "samples"), "need at least 2 samples");
        ok = false;
    }
    let obs = std::iter::once(("a", cfg.a)).chain(cfg.b.iter().map(|b| ("b", *b))).chain(cfg.generators.iter().map(|g| ("generators", *g)));
    for (key, spec) in obs {
        if let Some((is_param, k)) = spec.index() {
            let bound = if is_param { pdim } else { dof };
            if k >= bound {
                w.err(join(path, key), format!("observable {spec} is out of range (limit {bound})"));
                ok = false;
            }
        }
    }
    let b_len = if cfg.b.is_empty() { pdim } else { cfg.b.len() };
    if !cfg.generators.is_empty() && cfg.generators.len() != b_len {
        w.err(join(path, "generators"), format!("needs one entry per b observable ({b_len})"));
        ok = false;
    }
    ok.then_some(cfg)
}

const TOP_KEYS: [&str; 13] = [
    "task", "family", "level", "path", "points", "reference_point", "times", "s_values", "z_values", "seed", "classical",
    "tolerances", "out_dir",
];

/// Validates a config document. `task` comes from the document unless the
/// caller supplies one, in which case the two must agree.
pub fn validate_config_for(text: &str, task: Option<Task>) -> Result<RunConfig, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        errors: vec![SchemaError { path: String::new(), reason: format!("not valid JSON: {e}") }],
    })?;
    let mut w = Walker { errors: Vec::new() };
    let cfg = build(&mut w, &doc, task);
    match cfg {
        Some(c) if w.errors.is_empty() => Ok(c),
        _ => Err(ConfigError { errors: w.errors }),
    }
}

/// Validates a config document that names its own task.
pub fn validate_config(text: &str) -> Result<RunConfig, ConfigError> {
    validate_config_for(text, None)
}

fn build(w: &mut Walker, doc: &Value, cli_task: Option<Task>) -> Option<RunConfig> {
    let o = w.object("", doc, &TOP_KEYS)?;
    if o.map.contains_key("out_dir") {
        w.err("out_dir", "output location is set with --out-dir or GEOMFLUX_OUT_DIR, not in the config");
    }
    let doc_task = w.opt(&o, "task", |w, p, v| {
        let s = string(w, p, v)?;
        let t = Task::parse(s);
        if t.is_none() {
            let names: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
            let hint = suggestion(s, &names).map(|n| format!(" (did you mean \"{n}\"?)")).unwrap_or_default();
            w.err(p, format!("unknown task \"{s}\"{hint}"));
        }
        t
    });
    let task = match (doc_task, cli_task) {
        (Some(a), Some(b)) if a != b => {
            w.err("task", format!("config says \"{a}\" but the command line asks for \"{b}\""));
            None
        }
        (Some(a), _) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => {
            if !o.map.contains_key("task") {
                w.err("task", "required key is missing");
            }
            None
        }
    };

    let family = w.opt(&o, "family", family);
    let level = w.def(&o, "level", 0, count);
    let path = w.opt(&o, "path", path_config);
    let points = w.def(&o, "points", Vec::new(), |w, p, v| each(w, p, v, nonempty_reals));
    let reference_point = w.opt(&o, "reference_point", nonempty_reals);
    let times = w.def(&o, "times", default_times(), times);
    let s_values = w.def(&o, "s_values", vec![0.2, 0.1, 0.05], descending);
    let z_values = w.def(&o, "z_values", vec![0.1, 0.05, 0.02, 0.01], descending);
    let seed = w.def(&o, "seed", 0, seed);
    let classical = w.opt(&o, "classical", classical);
    let tolerances = w.def(&o, "tolerances", Tolerances::default(), tolerances);
    let task = task?;

    // cross-field requirements
    if task.needs_family() && !o.map.contains_key("family") {
        w.err("family", format!("required by the {task} task"));
    }
    if task == Task::Classical && !o.map.contains_key("classical") {
        w.err("classical", "required by the classical task");
    }
    if task == Task::Phase {
        if !o.map.contains_key("path") {
            w.err("path", "required by the phase task");
        }
        if o.map.contains_key("reference_point") {
            w.err("reference_point", "the phase task uses the path start as reference");
        }
    }
    let point_task = matches!(task, Task::Tensor | Task::Correlation | Task::Theorem | Task::Susceptibility);
    if point_task && points.as_ref().is_some_and(|p| p.is_empty()) {
        w.err("points", format!("at least one point is required by the {task} task"));
    }
    if matches!(task, Task::Correlation | Task::Theorem | Task::Susceptibility) && !o.map.contains_key("reference_point") {
        w.err("reference_point", format!("required by the {task} task"));
    }
    if let (Some(fam), Some(level)) = (&family, level) {
        let d = fam.param_dim();
        if let Some(path) = &path {
            for (field, len) in path.dims() {
                if len != d {
                    w.err(format!("path.{field}"), format!("path.{field} has length {len} but family.param_dim is {d}"));
                }
            }
        }
        if let Some(points) = &points {
            for (k, p) in points.iter().enumerate() {
                if p.len() != d {
                    w.err(format!("points[{k}]"), format!("points[{k}] has length {} but family.param_dim is {d}", p.len()));
                }
            }
        }
        if let Some(r0) = &reference_point {
            if r0.len() != d {
                w.err("reference_point", format!("reference_point has length {} but family.param_dim is {d}", r0.len()));
            }
        }
        if let Ok(f) = fam.build() {
            if level >= f.dim() {
                w.err("level", format!("level {level} is out of range for family dimension {}", f.dim()));
            }
        }
    }

    Some(RunConfig {
        task,
        family,
        level: level?,
        path,
        points: points?,
        reference_point,
        times: times?,
        s_values: s_values?,
        z_values: z_values?,
        seed: seed?,
        classical,
        tolerances: tolerances?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_PHASE: &str = r#"{
        "task": "phase",
        "family": {"kind": "spin"},
        "path": {"kind": "circle", "center": [0, 0, 0.8], "u": [0.6, 0, 0], "v": [0, 0.6, 0]}
    }"#;

    #[test]
    fn minimal_phase_config_gets_defaults() {
        let cfg = validate_config(MINIMAL_PHASE).unwrap();
        assert_eq!(cfg.family, Some(FamilyConfig::Spin { spin: 0.5, hbar: 1.0 }));
        match cfg.path.unwrap() {
            PathConfig::Circle { samples, turns, .. } => {
                assert_eq!(samples, 512);
                assert_eq!(turns, [0.0, 1.0]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.level, 0);
        assert_eq!(cfg.tolerances, Tolerances::default());
    }

    #[test]
    fn dimension_mismatch_names_both_fields() {
        let text = r#"{"task": "phase", "family": {"kind": "spin"},
            "path": {"kind": "line", "from": [0, 0], "to": [1, 0]}}"#;
        let err = validate_config(text).unwrap_err();
        assert_eq!(err.errors.len(), 2);
        for (e, field) in err.errors.iter().zip(["path.from", "path.to"]) {
            let msg = e.to_string();
            assert!(msg.contains(field) && msg.contains("family.param_dim"), "{msg}");
        }
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let text = r#"{"task": "phase", "family": {"kind": "spin", "hbarr": 2.0},
            "path": {"kind": "circle", "center": [0, 0, 1], "u": [1, 0, 0], "v": [0, 1, 0]}}"#;
        let err = validate_config(text).unwrap_err();
        assert_eq!(err.errors.len(), 1);
        assert_eq!(err.errors[0].path, "family.hbarr");
        assert!(err.errors[0].reason.contains("did you mean \"hbar\""), "{}", err.errors[0]);
    }

    #[test]
    fn errors_are_aggregated() {
        let text = r#"{"task": "theorem", "famly": {}, "level": -1, "s_values": [0.1, 0.2], "points": [[0, "x"]]}"#;
        let err = validate_config(text).unwrap_err();
        let paths: Vec<&str> = err.errors.iter().map(|e| e.path.as_str()).collect();
        for expected in ["famly", "level", "s_values", "points[0][1]", "family", "reference_point"] {
            assert!(paths.contains(&expected), "missing {expected} in {paths:?}");
        }
        assert!(err.errors[0].reason.contains("did you mean \"family\""));
    }

    #[test]
    fn task_conflict_is_reported() {
        let err = validate_config_for(MINIMAL_PHASE, Some(Task::Tensor)).unwrap_err();
        assert!(err.errors.iter().any(|e| e.path == "task"));
        assert!(validate_config_for(MINIMAL_PHASE, Some(Task::Phase)).is_ok());
    }

    #[test]
    fn canonical_form_round_trips() {
        let texts = [
            MINIMAL_PHASE.to_string(),
            r#"{"task": "theorem", "family": {"kind": "seeded-random-polynomial", "dim": 4, "param_dim": 2, "seed": 9, "hbar": 0.5},
                "points": [[0.1, 0.2], [0.3, -0.1]], "reference_point": [0, 0], "times": {"stop": 3, "count": 7}}"#
                .to_string(),
            r#"{"task": "tensor", "family": {"kind": "matrix-polynomial", "dim": 2, "param_dim": 1,
                "terms": [{"powers": [0], "matrix": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]},
                          {"powers": [1], "matrix": [[[0, 0], [0, -1]], [[0, 1], [0, 0]]]}]},
                "points": [[0.3]], "tolerances": {"metric": 1e-9}}"#
                .to_string(),
            r#"{"task": "classical", "seed": 4, "classical": {"system": {"kind": "quartic-coupled"}, "parameters": [1],
                "ensemble": {"kind": "shell", "energy": 1}, "a": "force-rate:0", "dt": 1e-4,
                "checks": {"max_decay": 0.2}}}"#
                .to_string(),
        ];
        for text in texts {
            let cfg = validate_config(&text).unwrap();
            let again = validate_config(&cfg.to_json()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn non_hermitian_terms_are_schema_errors() {
        let text = r#"{"task": "tensor", "points": [[0]], "family": {"kind": "matrix-polynomial", "dim": 2, "param_dim": 1,
            "terms": [{"powers": [0], "matrix": [[[1, 0], [1, 0]], [[0, 0], [-1, 0]]]}]}}"#;
        let err = validate_config(text).unwrap_err();
        assert!(err.errors.iter().any(|e| e.path == "family" && e.reason.contains("Hermitian")), "{err}");
    }

    #[test]
    fn classical_ranges_are_checked() {
        let text = r#"{"task": "classical", "classical": {"system": {"kind": "harmonic", "mass": [1], "omega": [1]},
            "parameters": [0, 1], "ensemble": {"kind": "torus", "actions": [1, 2]}, "a": "momentum:3"}}"#;
        let err = validate_config(text).unwrap_err();
        let paths: Vec<&str> = err.errors.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["classical.parameters", "classical.ensemble.actions", "classical.a"]);
    }
}
