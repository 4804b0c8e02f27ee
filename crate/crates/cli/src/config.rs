//! Scenario configuration: a TOML subset with one section per scenario.
//!
//! ```toml
//! [collapse_revival]
//! beta = 2.0
//! lambda = [1.0, 0.0]
//! n_a = 40
//! ```
//!
//! Every key is checked against the scenario's own key set; anything else is
//! rejected with the closest valid spelling. Omitted keys take the scenario
//! defaults listed by `catqrm --list-scenarios`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use catqrm::dynamics::TimeGrid;
use catqrm::experiments::{Code, GateMethod, SpectrumModel, CHANNEL_LEVELS};
use catqrm::models::{detuning_for, ModelParams};
use catqrm::qops::{HilbertDims, C64};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    CollapseRevival,
    ErrorRobustness,
    Tunneling,
    Xgate,
    XgateSweep,
    Decoherence,
    BiasReport,
    Spectrum,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::CollapseRevival,
        Scenario::ErrorRobustness,
        Scenario::Tunneling,
        Scenario::Xgate,
        Scenario::XgateSweep,
        Scenario::Decoherence,
        Scenario::BiasReport,
        Scenario::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CollapseRevival => "collapse_revival",
            Scenario::ErrorRobustness => "error_robustness",
            Scenario::Tunneling => "tunneling",
            Scenario::Xgate => "xgate",
            Scenario::XgateSweep => "xgate_sweep",
            Scenario::Decoherence => "decoherence",
            Scenario::BiasReport => "bias_report",
            Scenario::Spectrum => "spectrum",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// What the data files reproduce.
    pub fn description(self) -> &'static str {
        match self {
            Scenario::CollapseRevival => {
                "survival of |0,C+> under the full model with the analytic and ideal-Rabi curves, \
                 cavity photon-number map and parity"
            }
            Scenario::ErrorRobustness => {
                "full model vs effective Rabi model, and final-population deviation under \
                 parametric-drive errors (delta_P, delta_omega)"
            }
            Scenario::Tunneling => {
                "populations of |0+,+x> and |n-,-x> under a linear KNR drive, one run per bias epsilon"
            }
            Scenario::Xgate => "Pauli-X gate fidelity and leakage on the pair-cat code",
            Scenario::XgateSweep => "Pauli-X gate fidelity over an (alpha, beta) grid",
            Scenario::Decoherence => "leakage out of the single-cat or pair-cat code under loss and dephasing",
            Scenario::BiasReport => "Knill-Laflamme gaps of the single-cat and pair-cat codes",
            Scenario::Spectrum => "biased Rabi spectrum versus epsilon, level crossings at integer epsilon",
        }
    }

    /// Keys accepted in this scenario's section, in echo order.
    pub fn keys(self) -> Vec<&'static str> {
        let mut keys: Vec<&'static str> = Vec::new();
        let (model, convenience): (&[&str], &[&str]) = match self {
            Scenario::CollapseRevival => (&["Delta", "delta", "lambda", "K", "P"], &["beta"]),
            Scenario::ErrorRobustness | Scenario::Tunneling => {
                (&["Delta", "delta", "lambda", "K", "P"], &["beta", "delta_tilde"])
            }
            Scenario::Xgate => (
                &[
                    "Delta",
                    "delta",
                    "lambda",
                    "K",
                    "P",
                    "Omega",
                    "delta_omega",
                    "delta_P",
                    "kappa_a",
                    "kappa_b",
                    "kappa_phi_a",
                    "kappa_phi_b",
                ],
                &["beta", "epsilon"],
            ),
            Scenario::XgateSweep => (&["Delta", "K", "delta_omega", "delta_P"], &[]),
            Scenario::Decoherence => (
                &["Delta", "delta", "lambda", "K", "P", "Omega", "kappa_a", "kappa_b", "kappa_phi_a", "kappa_phi_b"],
                &["beta", "delta_tilde", "epsilon"],
            ),
            Scenario::BiasReport => (&[], &[]),
            Scenario::Spectrum => (&["Delta", "lambda", "K", "P"], &["beta"]),
        };
        keys.extend(model);
        keys.extend(convenience);
        match self {
            Scenario::Spectrum => keys.push("n_a"),
            _ => keys.extend(["n_a", "n_b"]),
        }
        if self.has_grid() {
            keys.extend(["t_start", "t_end", "n_points"]);
        }
        keys.extend(match self {
            Scenario::CollapseRevival => &[][..],
            Scenario::ErrorRobustness => &["deviations", "t_final"],
            Scenario::Tunneling => &["epsilons", "levels"],
            Scenario::Xgate => &["alpha", "method", "levels"],
            Scenario::XgateSweep => &["alphas", "betas", "epsilon"],
            Scenario::Decoherence => &["code", "levels"],
            Scenario::BiasReport => &["alphas", "betas"],
            Scenario::Spectrum => &["epsilons", "n_levels", "model"],
        });
        keys.extend(["output", "format"]);
        keys
    }

    fn has_grid(self) -> bool {
        matches!(
            self,
            Scenario::CollapseRevival | Scenario::ErrorRobustness | Scenario::Tunneling | Scenario::Decoherence
        )
    }

    /// `epsilon` sets Ω = ε/4|β| here; in `xgate_sweep` it is a sweep input.
    fn epsilon_is_drive(self) -> bool {
        matches!(self, Scenario::Xgate | Scenario::Decoherence)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpec {
    /// File stem; data files are `<stem>.<ext>` and `<stem>_<table>.<ext>`.
    pub stem: String,
    pub format: Format,
}

/// Scenario-specific inputs beyond the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    None,
    Robustness { deviations: Vec<(f64, f64)>, t_final: f64 },
    Tunneling { epsilons: Vec<f64>, levels: usize },
    Xgate { alpha: C64, method: GateMethod, levels: usize },
    XgateSweep { alphas: Vec<f64>, betas: Vec<f64>, epsilon: f64 },
    Decoherence { code: Code, levels: usize },
    Bias { alphas: Vec<f64>, betas: Vec<f64> },
    Spectrum { epsilons: Vec<f64>, n_levels: usize, model: SpectrumModel },
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub dims: HilbertDims,
    pub grid: Option<TimeGrid>,
    pub sweep: Sweep,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    File { line: usize, column: usize },
    Flag(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub message: String,
    pub location: Option<Location>,
}

impl ConfigError {
    fn new(message: impl Into<String>, location: Option<Location>) -> Self {
        Self { message: message.into(), location }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(Location::File { line, column }) => write!(f, "line {line}, column {column}: {}", self.message),
            Some(Location::Flag(flag)) => write!(f, "--set {flag}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
enum Raw {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Array(Vec<Raw>),
}

impl Raw {
    fn kind(&self) -> &'static str {
        match self {
            Raw::Int(_) => "integer",
            Raw::Float(_) => "float",
            Raw::Bool(_) => "boolean",
            Raw::Str(_) => "string",
            Raw::Array(_) => "array",
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    raw: Raw,
    at: Option<Location>,
}

/// Raw key/value pairs of one section, before defaults are applied.
#[derive(Debug, Clone)]
struct Section {
    scenario: Scenario,
    entries: BTreeMap<String, Entry>,
}

/// Byte offset to 1-based line and column (in characters).
fn line_col(text: &str, offset: usize) -> Location {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let start = before.rfind('\n').map_or(0, |i| i + 1);
    Location::File { line, column: before[start..].chars().count() + 1 }
}

fn convert(value: &Spanned<DeValue<'_>>, text: &str, key: &str) -> CResult<Raw> {
    let at = || Some(line_col(text, value.span().start));
    Ok(match value.get_ref() {
        DeValue::Integer(i) => Raw::Int(
            i64::from_str_radix(&i.as_str().replace('_', ""), i.radix())
                .map_err(|_| ConfigError::new(format!("{key}: integer out of range"), at()))?,
        ),
        DeValue::Float(x) => Raw::Float(
            parse_toml_float(x.as_str())
                .ok_or_else(|| ConfigError::new(format!("{key}: malformed float {}", x.as_str()), at()))?,
        ),
        DeValue::Boolean(b) => Raw::Bool(*b),
        DeValue::String(s) => Raw::Str(s.to_string()),
        DeValue::Array(items) => Raw::Array(items.iter().map(|v| convert(v, text, key)).collect::<CResult<_>>()?),
        DeValue::Datetime(_) => return Err(ConfigError::new(format!("{key}: datetimes are not accepted"), at())),
        DeValue::Table(_) => return Err(ConfigError::new(format!("{key}: nested tables are not accepted"), at())),
    })
}

fn parse_toml_float(s: &str) -> Option<f64> {
    let s = s.replace('_', "");
    match s.as_str() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" | "+nan" | "-nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

fn unknown_section(name: &str, at: Option<Location>) -> ConfigError {
    let mut msg = format!("unknown scenario `{name}`");
    if let Some(s) = suggest(name, Scenario::ALL.iter().map(|s| s.name())) {
        msg.push_str(&format!("; did you mean `{s}`?"));
    }
    ConfigError::new(msg, at)
}

fn unknown_key(scenario: Scenario, key: &str, at: Option<Location>) -> ConfigError {
    let keys = scenario.keys();
    let mut msg = format!("unknown key `{key}` in [{scenario}]");
    if let Some(s) = suggest(key, keys.iter().copied()) {
        msg.push_str(&format!("; did you mean `{s}`?"));
    } else if Scenario::ALL.iter().any(|s| s.keys().contains(&key)) {
        msg.push_str(&format!(" (`{key}` is not used by this scenario)"));
    }
    ConfigError::new(msg, at)
}

fn parse_sections(text: &str) -> CResult<Vec<Section>> {
    let doc = DeTable::parse(text)
        .map_err(|e| ConfigError::new(e.message().to_owned(), e.span().map(|s| line_col(text, s.start))))?;
    let mut sections = Vec::new();
    for (name, value) in doc.get_ref().iter() {
        let at = Some(line_col(text, name.span().start));
        let DeValue::Table(table) = value.get_ref() else {
            return Err(ConfigError::new(
                format!("key `{}` must sit inside a scenario section such as [collapse_revival]", name.get_ref()),
                at,
            ));
        };
        let scenario =
            Scenario::from_name(name.get_ref()).ok_or_else(|| unknown_section(name.get_ref(), at.clone()))?;
        let allowed = scenario.keys();
        let mut entries = BTreeMap::new();
        for (key, v) in table.iter() {
            let key_at = Some(line_col(text, key.span().start));
            if !allowed.contains(&key.get_ref().as_ref()) {
                return Err(unknown_key(scenario, key.get_ref(), key_at));
            }
            let raw = convert(v, text, key.get_ref())?;
            entries.insert(key.get_ref().to_string(), Entry { raw, at: key_at });
        }
        sections.push((name.span().start, Section { scenario, entries }));
    }
    sections.sort_by_key(|(pos, _)| *pos);
    Ok(sections.into_iter().map(|(_, s)| s).collect())
}

/// Parses a config file into one resolved scenario per section, in file order.
pub fn parse_config(text: &str) -> CResult<Vec<ScenarioConfig>> {
    parse_sections(text)?.into_iter().map(resolve).collect()
}

/// What to run: the config file (if any), extra default-only scenarios,
/// and `--set` overrides.
#[derive(Debug, Clone, Default)]
pub struct Request<'a> {
    pub config_text: Option<&'a str>,
    /// Restricts the config to these scenarios, or runs them on defaults
    /// when no config is given.
    pub scenarios: Vec<Scenario>,
    /// `key=value` or `scenario.key=value`.
    pub overrides: Vec<String>,
}

pub fn build(request: &Request<'_>) -> CResult<Vec<ScenarioConfig>> {
    let mut sections = match request.config_text {
        Some(text) => {
            let mut s = parse_sections(text)?;
            if !request.scenarios.is_empty() {
                for want in &request.scenarios {
                    if !s.iter().any(|x| x.scenario == *want) {
                        return Err(ConfigError::new(format!("scenario `{want}` is not in the config file"), None));
                    }
                }
                s.retain(|x| request.scenarios.contains(&x.scenario));
            }
            s
        }
        None => request.scenarios.iter().map(|&scenario| Section { scenario, entries: BTreeMap::new() }).collect(),
    };
    if sections.is_empty() {
        return Err(ConfigError::new("nothing to run: pass --config or --scenario", None));
    }
    for flag in &request.overrides {
        apply_override(&mut sections, flag)?;
    }
    sections.into_iter().map(resolve).collect()
}

fn apply_override(sections: &mut [Section], flag: &str) -> CResult<()> {
    let at = || Some(Location::Flag(flag.to_owned()));
    let (lhs, rhs) = flag.split_once('=').ok_or_else(|| ConfigError::new("expected key=value", at()))?;
    let lhs = lhs.trim();
    let rhs = rhs.trim();
    let raw = match DeValue::parse(rhs) {
        Ok(v) => convert(&v, rhs, lhs).map_err(|e| ConfigError::new(e.message, at()))?,
        // bare words such as `format=json`
        Err(_) => Raw::Str(rhs.to_owned()),
    };
    let (target, key) = match lhs.split_once('.') {
        Some((s, k)) => (Some(Scenario::from_name(s).ok_or_else(|| unknown_section(s, at()))?), k),
        None => (None, lhs),
    };
    let mut applied = false;
    for section in sections.iter_mut() {
        if target.is_some_and(|t| t != section.scenario) {
            continue;
        }
        if !section.scenario.keys().contains(&key) {
            if target.is_some() {
                return Err(unknown_key(section.scenario, key, at()));
            }
            continue;
        }
        section.entries.insert(key.to_owned(), Entry { raw: raw.clone(), at: at() });
        applied = true;
    }
    if !applied {
        return Err(match (target, sections.first()) {
            (Some(t), _) => ConfigError::new(format!("scenario `{t}` is not being run"), at()),
            (None, Some(s)) => unknown_key(s.scenario, key, at()),
            (None, None) => ConfigError::new("no scenario to apply to", at()),
        });
    }
    Ok(())
}

/// Default parameters of one scenario. `beta`, `delta_tilde` and
/// `epsilon` are only used when the user gives neither them nor the plain
/// parameter they stand for.
struct Defaults {
    params: ModelParams,
    beta: Option<f64>,
    delta_tilde: Option<f64>,
    epsilon: Option<f64>,
    dims: (usize, usize),
    grid: Option<(f64, f64, usize)>,
}

fn defaults(scenario: Scenario) -> Defaults {
    let base = ModelParams { delta_c: 1.0, lambda: C64::new(1.0, 0.0), kerr: 10.0, ..ModelParams::zero() };
    let tunnel = ModelParams { lambda: C64::new(0.5, 0.0), kerr: 300.0, ..base };
    let four_pi = 4.0 * PI;
    let d = |params, beta: f64, dims, grid| Defaults {
        params,
        beta: Some(beta),
        delta_tilde: None,
        epsilon: None,
        dims,
        grid,
    };
    match scenario {
        Scenario::CollapseRevival => d(base, 2.0, (40, 30), Some((0.0, four_pi, 401))),
        Scenario::ErrorRobustness => d(ModelParams { delta: 0.1, ..base }, 2.0, (30, 30), Some((0.0, four_pi, 201))),
        Scenario::Tunneling => {
            Defaults { delta_tilde: Some(0.1), ..d(tunnel, 2f64.sqrt(), (16, 20), Some((0.0, 200.0, 2001))) }
        }
        Scenario::Xgate => Defaults { epsilon: Some(0.5), ..d(base, 2.0, (25, 25), None) },
        Scenario::XgateSweep => Defaults { beta: None, ..d(base, 2.0, (25, 25), None) },
        Scenario::Decoherence => Defaults {
            epsilon: Some(0.5),
            ..d(ModelParams { kappa_a: 0.01, kappa_b: 0.01, ..base }, 2.0, (24, 25), Some((0.0, 2.0 * PI, 41)))
        },
        Scenario::BiasReport => Defaults { beta: None, ..d(ModelParams::zero(), 0.0, (40, 40), None) },
        Scenario::Spectrum => d(tunnel, 2f64.sqrt(), (40, 0), None),
    }
}

const TUNNELING_EPSILONS: [f64; 6] = [0.5, 0.75, 0.95, 1.0, 2.0, 3.0];
const SWEEP_AMPLITUDES: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];

fn bias_amplitudes() -> Vec<f64> {
    vec![1.0, 2f64.sqrt(), 2.0, 2.5]
}

fn spectrum_epsilons() -> Vec<f64> {
    (0..=300).map(|k| k as f64 / 100.0).collect()
}

/// Typed access to a section's entries.
struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn at(&self, key: &str) -> Option<Location> {
        self.entries.get(key).and_then(|e| e.at.clone())
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::new(msg, self.at(key))
    }

    fn type_err(&self, key: &str, want: &str, got: &Raw) -> ConfigError {
        self.err(key, format!("{key} must be {want}, found {}", got.kind()))
    }

    fn real_of(&self, key: &str, raw: &Raw) -> CResult<f64> {
        let x = match raw {
            Raw::Int(i) => *i as f64,
            Raw::Float(x) => *x,
            other => return Err(self.type_err(key, "a number", other)),
        };
        if !x.is_finite() {
            return Err(self.err(key, format!("{key} must be finite")));
        }
        Ok(x)
    }

    fn real(&self, key: &str) -> CResult<Option<f64>> {
        self.entries.get(key).map(|e| self.real_of(key, &e.raw)).transpose()
    }

    fn complex(&self, key: &str) -> CResult<Option<C64>> {
        let Some(e) = self.entries.get(key) else { return Ok(None) };
        match &e.raw {
            Raw::Array(v) if v.len() == 2 => Ok(Some(C64::new(self.real_of(key, &v[0])?, self.real_of(key, &v[1])?))),
            Raw::Array(_) => Err(self.err(key, format!("{key} must be a number or [re, im]"))),
            other => Ok(Some(C64::new(self.real_of(key, other)?, 0.0))),
        }
    }

    fn count(&self, key: &str) -> CResult<Option<usize>> {
        let Some(e) = self.entries.get(key) else { return Ok(None) };
        match e.raw {
            Raw::Int(i) if i >= 0 => Ok(Some(i as usize)),
            Raw::Int(_) => Err(self.err(key, format!("{key} must be ≥ 0"))),
            ref other => Err(self.type_err(key, "an integer", other)),
        }
    }

    fn reals(&self, key: &str) -> CResult<Option<Vec<f64>>> {
        let Some(e) = self.entries.get(key) else { return Ok(None) };
        let Raw::Array(items) = &e.raw else { return Err(self.type_err(key, "an array of numbers", &e.raw)) };
        if items.is_empty() {
            return Err(self.err(key, format!("{key} must not be empty")));
        }
        items.iter().map(|r| self.real_of(key, r)).collect::<CResult<Vec<_>>>().map(Some)
    }

    fn pairs(&self, key: &str) -> CResult<Option<Vec<(f64, f64)>>> {
        let Some(e) = self.entries.get(key) else { return Ok(None) };
        let bad = || self.err(key, format!("{key} must be an array of [delta_P, delta_omega] pairs"));
        let Raw::Array(items) = &e.raw else { return Err(bad()) };
        if items.is_empty() {
            return Err(self.err(key, format!("{key} must not be empty")));
        }
        items
            .iter()
            .map(|item| match item {
                Raw::Array(p) if p.len() == 2 => Ok((self.real_of(key, &p[0])?, self.real_of(key, &p[1])?)),
                _ => Err(bad()),
            })
            .collect::<CResult<Vec<_>>>()
            .map(Some)
    }

    fn word(&self, key: &str, choices: &[&str]) -> CResult<Option<String>> {
        let Some(e) = self.entries.get(key) else { return Ok(None) };
        let Raw::Str(s) = &e.raw else { return Err(self.type_err(key, "a string", &e.raw)) };
        if !choices.contains(&s.as_str()) {
            let mut msg = format!("{key} must be one of {}", choices.join(", "));
            if let Some(c) = suggest(s, choices.iter().copied()) {
                msg.push_str(&format!("; did you mean `{c}`?"));
            }
            return Err(self.err(key, msg));
        }
        Ok(Some(s.clone()))
    }

    fn exclusive(&self, a: &str, b: &str) -> CResult<()> {
        if self.has(a) && self.has(b) {
            return Err(self.err(b, format!("`{a}` and `{b}` both set the same quantity; give only one")));
        }
        Ok(())
    }

    fn positive(&self, key: &str, x: f64) -> CResult<f64> {
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.err(key, format!("{key} must be > 0")))
        }
    }
}

fn resolve(section: Section) -> CResult<ScenarioConfig> {
    let scenario = section.scenario;
    let r = Reader { entries: section.entries };
    let d = defaults(scenario);

    r.exclusive("P", "beta")?;
    r.exclusive("delta", "delta_tilde")?;
    if scenario.epsilon_is_drive() {
        r.exclusive("Omega", "epsilon")?;
    }

    let mut p = d.params;
    for (key, slot) in [
        ("Delta", &mut p.delta_c),
        ("delta", &mut p.delta),
        ("K", &mut p.kerr),
        ("Omega", &mut p.omega),
        ("delta_omega", &mut p.delta_omega),
        ("kappa_a", &mut p.kappa_a),
        ("kappa_b", &mut p.kappa_b),
        ("kappa_phi_a", &mut p.kappa_phi_a),
        ("kappa_phi_b", &mut p.kappa_phi_b),
    ] {
        if let Some(x) = r.real(key)? {
            *slot = x;
        }
    }
    for (key, slot) in [("lambda", &mut p.lambda), ("P", &mut p.drive), ("delta_P", &mut p.delta_p)] {
        if let Some(z) = r.complex(key)? {
            *slot = z;
        }
    }
    if !r.has("P") {
        if let Some(beta) = r.real("beta")?.or(d.beta) {
            p = p.with_beta(C64::new(beta, 0.0));
        }
    }
    p.validate().map_err(|e| {
        let msg = match e {
            catqrm::Error::InvalidParameter(m) => m,
            other => other.to_string(),
        };
        let key = msg.split_whitespace().next().unwrap_or("").to_owned();
        r.err(&key, msg)
    })?;
    let beta = p.beta().map_err(|e| r.err("P", e.to_string()))?;

    let code = match r.word("code", &["single-cat", "pair-cat"])?.as_deref() {
        Some("single-cat") => Code::SingleCat,
        _ => Code::PairCat,
    };
    let mut delta_tilde = d.delta_tilde;
    if scenario == Scenario::Decoherence && code == Code::SingleCat {
        delta_tilde = Some(0.01);
    }
    if !r.has("delta") {
        if let Some(dt) = r.real("delta_tilde")?.or(delta_tilde) {
            p.delta = detuning_for(dt, beta);
        }
    }
    if scenario.epsilon_is_drive() && !r.has("Omega") {
        if let Some(eps) = r.real("epsilon")?.or(d.epsilon) {
            let eps = r.positive("epsilon", eps)?;
            if beta.norm() == 0.0 {
                return Err(r.err("epsilon", "epsilon needs a nonzero beta"));
            }
            p.omega = eps / (4.0 * beta.norm());
        }
    }

    let n_a = r.count("n_a")?.unwrap_or(d.dims.0);
    let n_b = match scenario {
        Scenario::Spectrum => 2,
        _ => r.count("n_b")?.unwrap_or(d.dims.1),
    };
    let dims = HilbertDims::new(n_a, n_b).map_err(|e| {
        let key = if n_a < 2 { "n_a" } else { "n_b" };
        r.err(key, e.to_string())
    })?;

    let four_pi_over_lambda = 4.0 * PI / p.lambda.norm();
    let grid = match d.grid {
        Some((t0, t1, n)) => {
            let t1 =
                if scenario == Scenario::ErrorRobustness && p.lambda.norm() > 0.0 { four_pi_over_lambda } else { t1 };
            let t_start = r.real("t_start")?.unwrap_or(t0);
            let t_end = r.real("t_end")?.unwrap_or(t1);
            let n_points = r.count("n_points")?.unwrap_or(n);
            Some(TimeGrid::new(t_start, t_end, n_points).map_err(|e| {
                let key = if n_points < 2 { "n_points" } else { "t_end" };
                r.err(key, e.to_string())
            })?)
        }
        None => None,
    };

    let sweep = match scenario {
        Scenario::CollapseRevival => Sweep::None,
        Scenario::ErrorRobustness => {
            let deviations = r
                .pairs("deviations")?
                .unwrap_or_else(|| vec![(0.0, 0.0), (0.1, 0.1), (-0.1, -0.1), (0.1, -0.1), (-0.1, 0.1)]);
            let t_final = match r.real("t_final")? {
                Some(t) => r.positive("t_final", t)?,
                None if p.lambda.norm() > 0.0 => four_pi_over_lambda,
                None => return Err(r.err("t_final", "t_final is required when lambda = 0")),
            };
            Sweep::Robustness { deviations, t_final }
        }
        Scenario::Tunneling => Sweep::Tunneling {
            epsilons: r.reals("epsilons")?.unwrap_or_else(|| TUNNELING_EPSILONS.to_vec()),
            levels: r.count("levels")?.unwrap_or(6),
        },
        Scenario::Xgate => {
            let alpha = match r.complex("alpha")? {
                Some(a) => a,
                None if p.delta_c != 0.0 => C64::new((p.lambda * beta).norm() / p.delta_c, 0.0),
                None => return Err(r.err("Delta", "Delta must be nonzero")),
            };
            let method = match r.word("method", &["ode", "expm", "lindblad"])?.as_deref() {
                Some("expm") => GateMethod::Expm,
                Some("lindblad") => GateMethod::Lindblad,
                _ => GateMethod::Ode,
            };
            if method != GateMethod::Lindblad {
                let rates = [
                    ("kappa_a", p.kappa_a),
                    ("kappa_b", p.kappa_b),
                    ("kappa_phi_a", p.kappa_phi_a),
                    ("kappa_phi_b", p.kappa_phi_b),
                ];
                if let Some((key, _)) = rates.iter().find(|(_, v)| *v > 0.0) {
                    return Err(r.err(key, format!("{key} needs method = \"lindblad\"")));
                }
            }
            Sweep::Xgate { alpha, method, levels: r.count("levels")?.unwrap_or(CHANNEL_LEVELS) }
        }
        Scenario::XgateSweep => Sweep::XgateSweep {
            alphas: r.reals("alphas")?.unwrap_or_else(|| SWEEP_AMPLITUDES.to_vec()),
            betas: r.reals("betas")?.unwrap_or_else(|| SWEEP_AMPLITUDES.to_vec()),
            epsilon: r.positive("epsilon", r.real("epsilon")?.unwrap_or(0.5))?,
        },
        Scenario::Decoherence => Sweep::Decoherence { code, levels: r.count("levels")?.unwrap_or(4) },
        Scenario::BiasReport => Sweep::Bias {
            alphas: r.reals("alphas")?.unwrap_or_else(bias_amplitudes),
            betas: r.reals("betas")?.unwrap_or_else(bias_amplitudes),
        },
        Scenario::Spectrum => Sweep::Spectrum {
            epsilons: r.reals("epsilons")?.unwrap_or_else(spectrum_epsilons),
            n_levels: r.count("n_levels")?.unwrap_or(8),
            model: match r.word("model", &["isotropic", "anisotropic"])?.as_deref() {
                Some("anisotropic") => SpectrumModel::Anisotropic,
                _ => SpectrumModel::Isotropic,
            },
        },
    };

    let stem = match r.entries.get("output") {
        Some(Entry { raw: Raw::Str(s), .. }) => {
            if s.is_empty() || s.contains(['/', '\\']) || s.starts_with('.') {
                return Err(r.err("output", "output must be a plain file stem"));
            }
            s.clone()
        }
        Some(e) => return Err(r.type_err("output", "a string", &e.raw)),
        None => scenario.name().to_owned(),
    };
    let format = match r.word("format", &["csv", "json"])? {
        Some(f) => Format::parse(&f).expect("checked"),
        None => Format::default(),
    };

    Ok(ScenarioConfig { scenario, params: p, dims, grid, sweep, output: OutputSpec { stem, format } })
}

fn float(x: f64) -> toml::Value {
    toml::Value::Float(x)
}

fn complex(z: C64) -> toml::Value {
    toml::Value::Array(vec![float(z.re), float(z.im)])
}

fn floats(v: &[f64]) -> toml::Value {
    toml::Value::Array(v.iter().map(|&x| float(x)).collect())
}

fn int(n: usize) -> toml::Value {
    toml::Value::Integer(n as i64)
}

fn string(s: &str) -> toml::Value {
    toml::Value::String(s.to_owned())
}

impl ScenarioConfig {
    /// The resolved section with canonical keys only (`P`, `delta`, `Omega`
    /// rather than `beta`, `delta_tilde`, `epsilon`). Parsing it back yields
    /// an equal config.
    pub fn to_table(&self) -> toml::Table {
        let p = &self.params;
        let mut t = toml::Table::new();
        let keys = self.scenario.keys();
        let mut put = |key: &str, v: toml::Value| {
            if keys.contains(&key) {
                t.insert(key.to_owned(), v);
            }
        };
        put("Delta", float(p.delta_c));
        put("delta", float(p.delta));
        put("lambda", complex(p.lambda));
        put("K", float(p.kerr));
        put("P", complex(p.drive));
        put("Omega", float(p.omega));
        put("delta_omega", float(p.delta_omega));
        put("delta_P", complex(p.delta_p));
        put("kappa_a", float(p.kappa_a));
        put("kappa_b", float(p.kappa_b));
        put("kappa_phi_a", float(p.kappa_phi_a));
        put("kappa_phi_b", float(p.kappa_phi_b));
        put("n_a", int(self.dims.n_a));
        put("n_b", int(self.dims.n_b));
        if let Some(g) = &self.grid {
            put("t_start", float(g.t_start));
            put("t_end", float(g.t_end));
            put("n_points", int(g.n_points));
        }
        match &self.sweep {
            Sweep::None => {}
            Sweep::Robustness { deviations, t_final } => {
                put("deviations", toml::Value::Array(deviations.iter().map(|&(a, b)| floats(&[a, b])).collect()));
                put("t_final", float(*t_final));
            }
            Sweep::Tunneling { epsilons, levels } => {
                put("epsilons", floats(epsilons));
                put("levels", int(*levels));
            }
            Sweep::Xgate { alpha, method, levels } => {
                put("alpha", complex(*alpha));
                put(
                    "method",
                    string(match method {
                        GateMethod::Ode => "ode",
                        GateMethod::Expm => "expm",
                        GateMethod::Lindblad => "lindblad",
                    }),
                );
                put("levels", int(*levels));
            }
            Sweep::XgateSweep { alphas, betas, epsilon } => {
                put("alphas", floats(alphas));
                put("betas", floats(betas));
                put("epsilon", float(*epsilon));
            }
            Sweep::Decoherence { code, levels } => {
                put(
                    "code",
                    string(match code {
                        Code::SingleCat => "single-cat",
                        Code::PairCat => "pair-cat",
                    }),
                );
                put("levels", int(*levels));
            }
            Sweep::Bias { alphas, betas } => {
                put("alphas", floats(alphas));
                put("betas", floats(betas));
            }
            Sweep::Spectrum { epsilons, n_levels, model } => {
                put("epsilons", floats(epsilons));
                put("n_levels", int(*n_levels));
                put(
                    "model",
                    string(match model {
                        SpectrumModel::Isotropic => "isotropic",
                        SpectrumModel::Anisotropic => "anisotropic",
                    }),
                );
            }
        }
        put("output", string(&self.output.stem));
        put("format", string(self.output.format.extension()));
        t
    }
}

/// Canonical config text for a set of scenarios.
pub fn echo(configs: &[ScenarioConfig]) -> String {
    let mut out = String::new();
    for c in configs {
        let mut doc = toml::Table::new();
        doc.insert(c.scenario.name().to_owned(), toml::Value::Table(c.to_table()));
        out.push_str(&toml::to_string(&doc).expect("plain values serialize"));
        out.push('\n');
    }
    out
}

/// Default section of a scenario, as canonical config text.
pub fn default_text(scenario: Scenario) -> String {
    let cfg = resolve(Section { scenario, entries: BTreeMap::new() }).expect("defaults are valid");
    echo(&[cfg])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> ScenarioConfig {
        let mut v = parse_config(text).unwrap();
        assert_eq!(v.len(), 1);
        v.remove(0)
    }

    #[test]
    fn empty_section_takes_defaults() {
        let c = one("[collapse_revival]\n");
        assert_eq!(c.params.beta().unwrap(), C64::new(2.0, 0.0));
        assert_eq!(c.params.lambda, C64::new(1.0, 0.0));
        assert_eq!(c.params.kerr, 10.0);
        assert_eq!(c.params.delta, 0.0);
        assert_eq!(c.output, OutputSpec { stem: "collapse_revival".into(), format: Format::Csv });
    }

    #[test]
    fn every_default_round_trips() {
        for s in Scenario::ALL {
            let text = default_text(s);
            let back = one(&text);
            assert_eq!(echo(std::slice::from_ref(&back)), text, "{s}");
            assert_eq!(back, resolve(Section { scenario: s, entries: BTreeMap::new() }).unwrap());
        }
    }

    #[test]
    fn edited_config_round_trips() {
        let text = "[tunneling]\nbeta = 1.3\nK = 123.456\nepsilons = [0.1, 1e-3]\n\n\
                    [xgate]\nalpha = [1.5, -0.25]\nepsilon = 0.3\nmethod = \"expm\"\n";
        let cfgs = parse_config(text).unwrap();
        assert_eq!(parse_config(&echo(&cfgs)).unwrap(), cfgs);
    }

    #[test]
    fn negative_rate_is_rejected_at_its_key() {
        let err = parse_config("[decoherence]\nkappa_a = -1\n").unwrap_err();
        assert!(err.message.contains("kappa_a must be ≥ 0"), "{err}");
        assert_eq!(err.location, Some(Location::File { line: 2, column: 1 }));
    }

    #[test]
    fn misspelled_key_gets_a_suggestion() {
        let err = parse_config("[collapse_revival]\n  lamda = 1.0\n").unwrap_err();
        assert!(err.message.contains("did you mean `lambda`"), "{err}");
        assert_eq!(err.location, Some(Location::File { line: 2, column: 3 }));
        let err = parse_config("[colapse_revival]\n").unwrap_err();
        assert!(err.message.contains("`collapse_revival`"), "{err}");
    }

    #[test]
    fn key_of_another_scenario_is_named() {
        let err = parse_config("[xgate]\nalphas = [1.0]\n").unwrap_err();
        assert!(err.message.contains("not used by this scenario") || err.message.contains("did you mean"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("[xgate]\nK = = 3\n").unwrap_err();
        assert!(matches!(err.location, Some(Location::File { line: 2, .. })), "{err:?}");
    }

    #[test]
    fn conflicting_spellings_are_rejected() {
        assert!(parse_config("[xgate]\nP = 40.0\nbeta = 2.0\n").is_err());
        assert!(parse_config("[xgate]\nOmega = 0.1\nepsilon = 0.5\n").is_err());
        assert!(parse_config("[tunneling]\ndelta = 0.1\ndelta_tilde = 0.1\n").is_err());
    }

    #[test]
    fn convenience_keys_resolve_in_order() {
        let c = one("[decoherence]\nK = 20\nbeta = 1.5\ndelta_tilde = 0.0\nepsilon = 0.6\n");
        assert_eq!(c.params.drive, C64::new(45.0, 0.0));
        assert!((c.params.omega - 0.1).abs() < 1e-15);
        // single-cat picks up a small qubit splitting by default
        let s = one("[decoherence]\ncode = \"single-cat\"\n");
        let dt = catqrm::models::renormalized_detuning(s.params.delta, s.params.beta().unwrap());
        assert!((dt - 0.01).abs() < 1e-12);
    }

    #[test]
    fn overrides_reach_matching_sections() {
        let text = "[xgate]\n[spectrum]\n";
        let cfgs = build(&Request {
            config_text: Some(text),
            overrides: vec!["n_a=30".into(), "xgate.K=12".into(), "format=json".into()],
            ..Request::default()
        })
        .unwrap();
        assert!(cfgs.iter().all(|c| c.dims.n_a == 30 && c.output.format == Format::Json));
        assert_eq!(cfgs[0].params.kerr, 12.0);
        assert_eq!(cfgs[1].params.kerr, 300.0);
        let err = build(&Request {
            config_text: Some(text),
            overrides: vec!["xgate.kappa_a=-1".into()],
            ..Request::default()
        })
        .unwrap_err();
        assert!(matches!(err.location, Some(Location::Flag(_))));
    }

    #[test]
    fn gate_rates_need_the_lindblad_method() {
        let err = parse_config("[xgate]\nkappa_b = 0.01\n").unwrap_err();
        assert!(err.message.contains("lindblad") && err.to_string().starts_with("line 2, column 1"), "{err}");
        let c = one("[xgate]\nkappa_b = 0.01\nmethod = \"lindblad\"\nlevels = 6\n");
        assert!(matches!(c.sweep, Sweep::Xgate { method: GateMethod::Lindblad, levels: 6, .. }));
        assert_eq!(parse_config(&echo(std::slice::from_ref(&c))).unwrap(), vec![c]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        assert!(parse_config("[xgate]\nK = inf\n").is_err());
        assert!(parse_config("[xgate]\nlambda = [nan, 0.0]\n").is_err());
    }

    #[test]
    fn top_level_keys_and_nested_tables_are_rejected() {
        assert!(parse_config("K = 1.0\n").is_err());
        assert!(parse_config("[xgate.inner]\nK = 1.0\n").is_err());
    }
}
