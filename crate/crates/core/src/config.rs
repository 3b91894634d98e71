//! Run configuration: one TOML file with `process.*`, `catalog.*`, `marketmaker.*`, `firm.*`,
//! `diagnostics.*` and `output.*` keys. Relative paths resolve against the file's directory.
//! The fingerprint hashes the parsed configuration together with every file it pulls in.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::firm::{FirmConfig, FirmMode};
use crate::logic::{
    Atom, DeductiveProcess, LogicError, ReflectiveProcess, SaturationProcess, ScriptedProcess,
    Sentence, DEFAULT_ATOM_CAP,
};
use crate::market_maker::{MarketMakerConfig, SEARCH_ORDER_VERSION};
use crate::rational::{parse_rational, Rational};
use crate::traders::{
    build_traders, emulatable, parse_catalog_entry, CatalogEntry, NamedTrader, SentenceSeq,
    StepPoly, TraderCatalog, TraderError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("config syntax: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Trader(#[from] TraderError),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Scripted,
    Saturation,
    Reflective,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub kind: ProcessKind,
    #[serde(default)]
    pub atoms: Vec<String>,
    /// Scripted base for `scripted` and `reflective`.
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub axioms: Vec<String>,
    #[serde(default)]
    pub schedule: Vec<usize>,
    #[serde(default = "default_max_size")]
    pub max_size: usize,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default)]
    pub threshold: Option<String>,
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default = "default_atom_cap")]
    pub atom_cap: usize,
}

fn default_max_size() -> usize {
    5
}
fn default_lag() -> usize {
    1
}
fn default_atom_cap() -> usize {
    DEFAULT_ATOM_CAP
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSection {
    pub traders: Vec<String>,
    #[serde(default = "default_poly")]
    pub step_poly: Vec<u64>,
}

fn default_poly() -> Vec<u64> {
    StepPoly::default().coefficients
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketMakerSection {
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    #[serde(default = "default_accel")]
    pub accel_iters: usize,
    #[serde(default = "default_boxes")]
    pub max_boxes: usize,
}

fn default_max_level() -> u32 {
    MarketMakerConfig::default().max_level
}
fn default_accel() -> usize {
    MarketMakerConfig::default().accel_iters
}
fn default_boxes() -> usize {
    MarketMakerConfig::default().max_boxes
}

impl Default for MarketMakerSection {
    fn default() -> Self {
        MarketMakerSection {
            max_level: default_max_level(),
            accel_iters: default_accel(),
            max_boxes: default_boxes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmSection {
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub extra_b_margin: u64,
    #[serde(default = "default_cells")]
    pub interval_cells: usize,
}

fn default_mode() -> String {
    "collapsed".into()
}
fn default_cells() -> usize {
    FirmConfig::default().interval_cells
}

impl Default for FirmSection {
    fn default() -> Self {
        FirmSection {
            mode: default_mode(),
            extra_b_margin: 0,
            interval_cells: default_cells(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Sentences audited for gap (i), 1 − P(φ), once D proves them.
    #[serde(default)]
    pub theorems: Vec<String>,
    /// Sentences audited for gap (ii), P(φ), once D refutes them.
    #[serde(default)]
    pub refuted: Vec<String>,
    /// Caller-asserted mutually exclusive pairs for gap (iii).
    #[serde(default)]
    pub exclusive_pairs: Vec<[String; 2]>,
    /// The scheduled sequence φ_n tracked by the diagonal report (cycled).
    #[serde(default)]
    pub diagonal: Vec<String>,
    #[serde(default)]
    pub diagonal_template: Option<String>,
    /// Threshold the diagonal price is compared against by the trend check.
    #[serde(default)]
    pub diagonal_threshold: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_snapshot")]
    pub snapshot: String,
    #[serde(default = "default_prices")]
    pub prices_csv: String,
    #[serde(default = "default_audit")]
    pub audit_csv: String,
}

fn default_snapshot() -> String {
    "snapshot.lia".into()
}
fn default_prices() -> String {
    "prices.csv".into()
}
fn default_audit() -> String {
    "firm_audit.csv".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            snapshot: default_snapshot(),
            prices_csv: default_prices(),
            audit_csv: default_audit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub process: ProcessSection,
    pub catalog: CatalogSection,
    #[serde(default)]
    pub marketmaker: MarketMakerSection,
    #[serde(default)]
    pub firm: FirmSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: Option<RunSection>,
}

/// A parsed configuration with every referenced file already read.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub base: PathBuf,
    process_text: Option<String>,
    /// (entry, program text) for each `program:` catalog entry, in order.
    programs: Vec<(String, String)>,
    fingerprint: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = read(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_str(&text, &base)
    }

    pub fn from_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let process_text = match &file.process.file {
            Some(f) => Some(read(&base.join(f))?),
            None => None,
        };
        let mut programs = Vec::new();
        for entry in &file.catalog.traders {
            if let CatalogEntry::Program(p) = parse_catalog_entry(entry)? {
                programs.push((entry.clone(), read(&base.join(p))?));
            }
        }
        let mut cfg = RunConfig {
            file,
            base: base.to_path_buf(),
            process_text,
            programs,
            fingerprint: String::new(),
        };
        cfg.validate()?;
        cfg.fingerprint = cfg.compute_fingerprint();
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.file.process;
        match p.kind {
            ProcessKind::Scripted | ProcessKind::Reflective if self.process_text.is_none() => {
                return Err(ConfigError::Invalid(
                    "process.file is required for scripted and reflective processes".into(),
                ));
            }
            ProcessKind::Reflective if p.threshold.is_none() || p.template.is_none() => {
                return Err(ConfigError::Invalid(
                    "reflective processes need process.threshold and process.template".into(),
                ));
            }
            ProcessKind::Saturation if p.schedule.is_empty() => {
                return Err(ConfigError::Invalid(
                    "saturation processes need process.schedule".into(),
                ));
            }
            _ => {}
        }
        if !matches!(self.file.firm.mode.as_str(), "collapsed" | "literal") {
            return Err(ConfigError::Invalid(format!(
                "firm.mode must be `collapsed` or `literal`, got `{}`",
                self.file.firm.mode
            )));
        }
        if self.file.firm.interval_cells == 0 {
            return Err(ConfigError::Invalid(
                "firm.interval_cells must be positive".into(),
            ));
        }
        if !self.file.diagnostics.diagonal.is_empty()
            && self.file.diagnostics.diagonal_template.is_some()
        {
            return Err(ConfigError::Invalid(
                "give at most one of diagnostics.diagonal and diagnostics.diagonal_template".into(),
            ));
        }
        // Build once so every syntax error surfaces at load time.
        self.build_process()?;
        self.build_catalog()?;
        self.diagonal()?;
        self.sentences(&self.file.diagnostics.theorems)?;
        self.sentences(&self.file.diagnostics.refuted)?;
        self.exclusive_pairs()?;
        if let Some(t) = &self.file.diagnostics.diagonal_threshold {
            rat(t, "diagnostics.diagonal_threshold")?;
        }
        Ok(())
    }

    fn compute_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"lia-config-v1\n");
        h.update(SEARCH_ORDER_VERSION.as_bytes());
        h.update(b"\n");
        // The run section and output names do not influence committed prices.
        let mut canon = self.file.clone();
        canon.run = None;
        canon.output = OutputSection::default();
        h.update(
            toml::to_string(&canon)
                .expect("config serializes")
                .as_bytes(),
        );
        if let Some(t) = &self.process_text {
            h.update(b"\nprocess\n");
            h.update(t.as_bytes());
        }
        for (entry, text) in &self.programs {
            h.update(b"\nprogram ");
            h.update(entry.as_bytes());
            h.update(b"\n");
            h.update(text.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn atom_cap(&self) -> usize {
        self.file.process.atom_cap
    }

    pub fn horizon(&self) -> usize {
        self.file.run.as_ref().map_or(0, |r| r.horizon)
    }

    fn declared_atoms(&self) -> Result<BTreeSet<Atom>, ConfigError> {
        Ok(self
            .file
            .process
            .atoms
            .iter()
            .map(|a| Atom::new(a))
            .collect::<Result<_, _>>()?)
    }

    pub fn build_process(&self) -> Result<Box<dyn DeductiveProcess>, ConfigError> {
        let p = &self.file.process;
        let declared = self.declared_atoms()?;
        Ok(match p.kind {
            ProcessKind::Scripted => Box::new(ScriptedProcess::parse(
                self.process_text.as_deref().unwrap_or(""),
                &declared,
            )?),
            ProcessKind::Reflective => {
                let base = ScriptedProcess::parse(
                    self.process_text.as_deref().unwrap_or(""),
                    &BTreeSet::new(),
                )?;
                let threshold = rat(p.threshold.as_deref().unwrap_or(""), "process.threshold")?;
                Box::new(ReflectiveProcess::new(
                    base,
                    p.lag,
                    threshold,
                    p.template.as_deref().unwrap_or(""),
                )?)
            }
            ProcessKind::Saturation => {
                let axioms = self.sentences(&p.axioms)?;
                let atoms = p
                    .atoms
                    .iter()
                    .map(|a| Atom::new(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Box::new(SaturationProcess::new(
                    axioms,
                    atoms,
                    p.schedule.clone(),
                    p.max_size,
                )?)
            }
        })
    }

    pub fn step_poly(&self) -> StepPoly {
        StepPoly::new(self.file.catalog.step_poly.clone())
    }

    /// Fresh trader instances in configuration order; `coherence` entries without `which` expand.
    pub fn build_traders(&self) -> Result<Vec<NamedTrader>, ConfigError> {
        let mut out = Vec::new();
        for entry in &self.file.catalog.traders {
            out.extend(build_traders(entry, &self.base)?);
        }
        Ok(out)
    }

    pub fn build_catalog(&self) -> Result<TraderCatalog, ConfigError> {
        Ok(emulatable(self.build_traders()?, &self.step_poly()))
    }

    pub fn market_maker(&self) -> MarketMakerConfig {
        let m = &self.file.marketmaker;
        MarketMakerConfig {
            max_level: m.max_level,
            accel_iters: m.accel_iters,
            max_boxes: m.max_boxes,
        }
    }

    pub fn firm(&self) -> FirmConfig {
        let f = &self.file.firm;
        let mode = if f.mode == "literal" {
            FirmMode::Literal
        } else {
            FirmMode::Collapsed
        };
        FirmConfig {
            mode,
            extra_b_margin: f.extra_b_margin,
            interval_cells: f.interval_cells,
        }
    }

    pub fn sentences(&self, texts: &[String]) -> Result<Vec<Sentence>, ConfigError> {
        Ok(texts
            .iter()
            .map(|t| Sentence::parse(t))
            .collect::<Result<_, _>>()?)
    }

    pub fn exclusive_pairs(&self) -> Result<Vec<(Sentence, Sentence)>, ConfigError> {
        self.file
            .diagnostics
            .exclusive_pairs
            .iter()
            .map(|[a, b]| Ok((Sentence::parse(a)?, Sentence::parse(b)?)))
            .collect()
    }

    pub fn diagonal(&self) -> Result<Option<SentenceSeq>, ConfigError> {
        let d = &self.file.diagnostics;
        if let Some(t) = &d.diagonal_template {
            let seq = SentenceSeq::Template(t.clone());
            seq.get(1)?;
            return Ok(Some(seq));
        }
        if d.diagonal.is_empty() {
            return Ok(None);
        }
        Ok(Some(SentenceSeq::Cycle(self.sentences(&d.diagonal)?)))
    }

    pub fn diagonal_threshold(&self) -> Result<Option<Rational>, ConfigError> {
        self.file
            .diagnostics
            .diagonal_threshold
            .as_deref()
            .map(|t| rat(t, "diagnostics.diagonal_threshold"))
            .transpose()
    }
}

fn rat(text: &str, key: &str) -> Result<Rational, ConfigError> {
    parse_rational(text).map_err(|e| ConfigError::Invalid(format!("{key}: {e}")))
}
