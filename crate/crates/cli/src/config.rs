//! Scenario files: one TOML document per run, energies in units of `J`.

use std::f64::consts::TAU;

use atomcurrent::Boundary;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angle::Angle;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Figure the scenario reproduces, e.g. `"Fig. 7a"`.
    pub figure: String,
    #[serde(default)]
    pub description: String,
    /// Energy unit of every quantity in the file. Only `"J"` is accepted.
    #[serde(default = "unit_j")]
    pub units: String,
    pub seed: u64,
    #[serde(rename = "case")]
    pub cases: Vec<Case>,
}

fn unit_j() -> String {
    "J".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Sse,
    Master,
    Sme,
    Tls,
    Spectrum,
    Landscape,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Sse => "sse",
            CaseKind::Master => "master",
            CaseKind::Sme => "sme",
            CaseKind::Tls => "tls",
            CaseKind::Spectrum => "spectrum",
            CaseKind::Landscape => "landscape",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub name: String,
    pub kind: CaseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsSpec>,
    #[serde(default, rename = "channel", skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default = "one")]
    pub ensemble: usize,
    /// `haar`, `mixed`, `up`, `down` or `fock:n1,n2,...`.
    #[serde(default = "haar")]
    pub initial: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeSpec>,
}

fn one() -> usize {
    1
}

fn haar() -> String {
    "haar".into()
}

fn unit() -> f64 {
    1.0
}

fn ring() -> Boundary {
    Boundary::Ring
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub sites: usize,
    pub particles: usize,
    #[serde(default = "ring")]
    pub boundary: Boundary,
    #[serde(default = "unit")]
    pub hopping: f64,
    #[serde(default)]
    pub theta: Angle,
    #[serde(default)]
    pub interaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsSpec {
    #[serde(default)]
    pub h: f64,
    pub omega: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Asym,
    Sym,
    Spontaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Links {
    /// Must be the word `"all"`.
    Word(String),
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub scheme: Scheme,
    pub links: Links,
    /// Measurement rate, asym and sym only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Coupling phase of the asymmetric scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_g: Option<Angle>,
    /// `[phi_R, phi_L, phi]` for the symmetric scheme; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<[Angle; 3]>,
    /// Spontaneous decay rate per link direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    /// Spontaneous dephasing rate per site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one")]
    pub record_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default)]
    pub theta_min: Angle,
    #[serde(default = "full_turn")]
    pub theta_max: Angle,
    pub points: usize,
}

fn full_turn() -> Angle {
    Angle(TAU)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub theta: Angle,
    /// Grid points per axis over `[0, 2pi)`.
    pub grid: usize,
    /// Flux values for the cut along `phi12 = phi23`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cuts: Vec<Angle>,
    #[serde(default = "cut_points")]
    pub cut_points: usize,
    pub particles: f64,
    #[serde(default = "unit")]
    pub hopping: f64,
}

fn cut_points() -> usize {
    361
}

/// Parsed initial-state request.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Haar,
    Mixed,
    Up,
    Down,
    Fock(Vec<u32>),
}

pub fn parse_initial(s: &str) -> Result<Initial, String> {
    match s {
        "haar" => Ok(Initial::Haar),
        "mixed" => Ok(Initial::Mixed),
        "up" => Ok(Initial::Up),
        "down" => Ok(Initial::Down),
        _ => {
            let occ = s
                .strip_prefix("fock:")
                .ok_or_else(|| format!("unknown initial state `{s}`"))?;
            occ.split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| format!("bad occupation `{t}` in `{s}`")))
                .collect::<Result<Vec<_>, _>>()
                .map(Initial::Fock)
        }
    }
}

fn bad(path: String, msg: impl Into<String>) -> CliError {
    CliError::Config(format!("{path}: {}", msg.into()))
}

fn positive(path: String, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be positive, got {v}")))
    }
}

impl Links {
    pub fn resolve(&self, sites: usize, boundary: Boundary) -> Result<Vec<usize>, String> {
        let count = match boundary {
            Boundary::Ring => sites,
            Boundary::Open => sites.saturating_sub(1),
        };
        match self {
            Links::Word(w) if w == "all" => Ok((1..=count).collect()),
            Links::Word(w) => Err(format!("expected \"all\" or a list of links, got `{w}`")),
            Links::List(v) if v.is_empty() => Err("empty link list".into()),
            Links::List(v) => {
                for &j in v {
                    if j == 0 || j > count {
                        return Err(format!("link {j} outside 1..={count}"));
                    }
                }
                Ok(v.clone())
            }
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the sorted-key JSON form without `description` and
    /// `figure`.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("scenario serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("description");
            m.remove("figure");
        }
        let text = serde_json::to_string(&v).expect("json");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn override_dt(&mut self, dt: f64) {
        for c in &mut self.cases {
            if let Some(i) = c.integrator.as_mut() {
                i.dt = dt;
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(bad("name".into(), "use letters, digits, `_` or `-`"));
        }
        if self.figure.trim().is_empty() {
            return Err(bad("figure".into(), "must name the reproduced figure"));
        }
        if self.units != "J" {
            return Err(bad("units".into(), format!("only \"J\" is supported, got `{}`", self.units)));
        }
        if self.cases.is_empty() {
            return Err(bad("case".into(), "at least one case is required"));
        }
        for (i, c) in self.cases.iter().enumerate() {
            let at = format!("case[{i}]");
            if self.cases[..i].iter().any(|o| o.name == c.name) {
                return Err(bad(format!("{at}.name"), format!("duplicate case name `{}`", c.name)));
            }
            c.validate(&at)?;
        }
        Ok(())
    }
}

impl Case {
    fn validate(&self, at: &str) -> Result<(), CliError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(bad(format!("{at}.name"), "use letters, digits, `_` or `-`"));
        }
        let k = self.kind;
        let allow = |present: bool, field: &str, wanted: &[CaseKind]| -> Result<(), CliError> {
            if present && !wanted.contains(&k) {
                Err(bad(format!("{at}.{field}"), format!("not used by kind `{}`", k.name())))
            } else {
                Ok(())
            }
        };
        use CaseKind::*;
        allow(self.model.is_some(), "model", &[Sse, Master, Sme, Spectrum])?;
        allow(self.tls.is_some(), "tls", &[Tls])?;
        allow(!self.channels.is_empty(), "channel", &[Sse, Master, Sme])?;
        allow(self.integrator.is_some(), "integrator", &[Sse, Master, Sme, Tls])?;
        allow(self.ensemble != 1, "ensemble", &[Sse, Sme, Tls])?;
        allow(self.initial != "haar", "initial", &[Sse, Master, Sme, Tls])?;
        allow(!self.probes.is_empty(), "probes", &[Sse, Master, Sme, Tls])?;
        allow(!self.snapshot_times.is_empty(), "snapshot_times", &[Master])?;
        allow(self.scan.is_some(), "scan", &[Spectrum])?;
        allow(self.landscape.is_some(), "landscape", &[Landscape])?;

        let need = |present: bool, field: &str| -> Result<(), CliError> {
            if present {
                Ok(())
            } else {
                Err(bad(format!("{at}.{field}"), format!("required by kind `{}`", k.name())))
            }
        };
        match k {
            Sse | Master | Sme => {
                need(self.model.is_some(), "model")?;
                need(self.integrator.is_some(), "integrator")?;
            }
            Tls => {
                need(self.tls.is_some(), "tls")?;
                need(self.integrator.is_some(), "integrator")?;
            }
            Spectrum => {
                need(self.model.is_some(), "model")?;
                need(self.scan.is_some(), "scan")?;
                if self.model.as_ref().is_some_and(|m| m.theta.0 != 0.0) {
                    return Err(bad(format!("{at}.model.theta"), "set by `scan` for kind `spectrum`"));
                }
            }
            Landscape => need(self.landscape.is_some(), "landscape")?,
        }
        if self.ensemble == 0 {
            return Err(bad(format!("{at}.ensemble"), "must be at least 1"));
        }
        let init = parse_initial(&self.initial).map_err(|e| bad(format!("{at}.initial"), e))?;

        if let Some(m) = &self.model {
            let mat = format!("{at}.model");
            if m.sites < 2 || (m.boundary == Boundary::Ring && m.sites < 3) {
                return Err(bad(format!("{mat}.sites"), "a ring needs 3 sites and a chain 2"));
            }
            if m.particles == 0 {
                return Err(bad(format!("{mat}.particles"), "must be at least 1"));
            }
            positive(format!("{mat}.hopping"), m.hopping)?;
            if !m.interaction.is_finite() || !m.theta.0.is_finite() {
                return Err(bad(mat, "interaction and theta must be finite"));
            }
            if let Initial::Fock(occ) = &init {
                if occ.len() != m.sites || occ.iter().sum::<u32>() as usize != m.particles {
                    return Err(bad(
                        format!("{at}.initial"),
                        format!("need {} occupations summing to {}", m.sites, m.particles),
                    ));
                }
            }
            if matches!(init, Initial::Up | Initial::Down) {
                return Err(bad(format!("{at}.initial"), "`up`/`down` are two-level states"));
            }
            if matches!(init, Initial::Mixed) && k != Master {
                return Err(bad(format!("{at}.initial"), "`mixed` needs kind `master`"));
            }
            for (j, ch) in self.channels.iter().enumerate() {
                ch.validate(&format!("{at}.channel[{j}]"), m)?;
            }
            if k == Sme && !self.channels.iter().any(|c| c.scheme != Scheme::Spontaneous) {
                return Err(bad(format!("{at}.channel"), "an sme case needs a measured channel"));
            }
            if k == Sse && self.channels.iter().any(|c| c.scheme == Scheme::Spontaneous) {
                return Err(bad(format!("{at}.channel"), "spontaneous channels need kind `sme` or `master`"));
            }
            for (j, p) in self.probes.iter().enumerate() {
                check_probe(p, m.sites, m.boundary).map_err(|e| bad(format!("{at}.probes[{j}]"), e))?;
            }
        }
        if let Some(t) = &self.tls {
            positive(format!("{at}.tls.omega"), t.omega)?;
            positive(format!("{at}.tls.gamma"), t.gamma)?;
            if !t.h.is_finite() {
                return Err(bad(format!("{at}.tls.h"), "must be finite"));
            }
            if !matches!(init, Initial::Up | Initial::Down | Initial::Haar) {
                return Err(bad(format!("{at}.initial"), "a two-level case starts from `up`, `down` or `haar`"));
            }
            for (j, p) in self.probes.iter().enumerate() {
                if !matches!(p.as_str(), "sigma_z" | "sigma_x") {
                    return Err(bad(format!("{at}.probes[{j}]"), format!("unknown two-level probe `{p}`")));
                }
            }
        }
        if let Some(i) = &self.integrator {
            positive(format!("{at}.integrator.dt"), i.dt)?;
            positive(format!("{at}.integrator.t_final"), i.t_final)?;
            if i.record_stride == 0 {
                return Err(bad(format!("{at}.integrator.record_stride"), "must be at least 1"));
            }
            if i.dt > i.t_final {
                return Err(bad(format!("{at}.integrator.dt"), "larger than t_final"));
            }
            for (j, &t) in self.snapshot_times.iter().enumerate() {
                if !(0.0..=i.t_final).contains(&t) {
                    return Err(bad(format!("{at}.snapshot_times[{j}]"), format!("{t} outside [0, t_final]")));
                }
            }
        }
        if let Some(s) = &self.scan {
            if s.points < 2 {
                return Err(bad(format!("{at}.scan.points"), "need at least 2"));
            }
            if !(s.theta_max.0 > s.theta_min.0) {
                return Err(bad(format!("{at}.scan.theta_max"), "must exceed theta_min"));
            }
        }
        if let Some(l) = &self.landscape {
            if l.grid < 2 || l.cut_points < 2 {
                return Err(bad(format!("{at}.landscape.grid"), "need at least 2 points per axis"));
            }
            positive(format!("{at}.landscape.particles"), l.particles)?;
            positive(format!("{at}.landscape.hopping"), l.hopping)?;
        }
        Ok(())
    }
}

impl ChannelSpec {
    fn validate(&self, at: &str, m: &ModelSpec) -> Result<(), CliError> {
        self.links
            .resolve(m.sites, m.boundary)
            .map_err(|e| bad(format!("{at}.links"), e))?;
        let measured = self.scheme != Scheme::Spontaneous;
        let misplaced = |present: bool, field: &str| -> Result<(), CliError> {
            if present {
                Err(bad(format!("{at}.{field}"), "not used by this scheme"))
            } else {
                Ok(())
            }
        };
        misplaced(self.phi_g.is_some() && self.scheme != Scheme::Asym, "phi_g")?;
        misplaced(self.phases.is_some() && self.scheme != Scheme::Sym, "phases")?;
        misplaced(measured && self.decay.is_some(), "decay")?;
        misplaced(measured && self.dephasing.is_some(), "dephasing")?;
        misplaced(!measured && self.gamma.is_some(), "gamma")?;
        if measured {
            let g = self.gamma.ok_or_else(|| bad(format!("{at}.gamma"), "required"))?;
            positive(format!("{at}.gamma"), g)?;
        } else {
            let d = self.decay.ok_or_else(|| bad(format!("{at}.decay"), "required"))?;
            let p = self.dephasing.ok_or_else(|| bad(format!("{at}.dephasing"), "required"))?;
            for (f, v) in [("decay", d), ("dephasing", p)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(bad(format!("{at}.{f}"), format!("must be non-negative, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Probe names: `J_tot`, `J_<link>`, `var_J_tot`, `var_J_<link>`, `n_<site>`,
/// `purity`, `dark_<link>`.
pub fn check_probe(name: &str, sites: usize, boundary: Boundary) -> Result<(), String> {
    let links = match boundary {
        Boundary::Ring => sites,
        Boundary::Open => sites - 1,
    };
    let index = |s: &str, max: usize| -> Result<(), String> {
        match s.parse::<usize>() {
            Ok(j) if (1..=max).contains(&j) => Ok(()),
            _ => Err(format!("index in `{name}` outside 1..={max}")),
        }
    };
    let base = name.strip_prefix("var_").unwrap_or(name);
    if base == "J_tot" || name == "purity" {
        return Ok(());
    }
    if let Some(j) = base.strip_prefix("J_") {
        return index(j, links);
    }
    if name.starts_with("var_") {
        return Err(format!("unknown probe `{name}`"));
    }
    if let Some(s) = name.strip_prefix("n_") {
        return index(s, sites);
    }
    if let Some(j) = name.strip_prefix("dark_") {
        if boundary != Boundary::Ring {
            return Err("dark-state probes need a ring".into());
        }
        return index(j, links);
    }
    Err(format!("unknown probe `{name}`"))
}
