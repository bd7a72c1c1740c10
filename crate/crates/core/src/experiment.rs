//! Config-driven orchestration: one artifact directory per experiment, one
//! method per pipeline stage, shared by the CLI and the acceptance suite.
//!
//! Layout under `output_dir`:
//!
//! ```text
//! data/{train,val}.ds
//! models/{wb,bb}.ckpt  models/{wb,bb}.log.json
//! attacks/<variant>_wb.atk
//! reports/<protocol>.{json,csv}
//! manifests/<command>.json
//! summary.{json,csv}
//! ```
//!
//! Every artifact records the hash of the config sections it depends on, so
//! a changed eval grid does not invalidate trained models but a changed
//! dataset does.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{
    gaussian_noise_attack, load_attack, save_attack, train_fourier_attack, train_uap, AttackTag, AttackVector,
    FourierAttackConfig, LossSchedule, UapConfig,
};
use crate::data::{generate_synthetic, load_dataset, load_wav_segments, save_dataset, split, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{
    asr_vs_snr, defense_auc, even_shifts, filtering_protocol, read_report, time_invariance_sweep, write_report,
    write_rows_csv, AttackSource, Calibration, EvalReport, OutputSpace, Perturbation, Protocol, ReportRow, Transform,
};
use crate::io::{read_json, write_json};
use crate::nn::{load_checkpoint, save_checkpoint, train_classifier, Classifier, TrainConfig, TrainLog};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavSource {
    /// A class-per-subdirectory corpus or a single file.
    pub path: PathBuf,
    pub segment_len: usize,
    pub max_segments: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for WavSource {
    fn default() -> Self {
        Self { path: PathBuf::new(), segment_len: 16000, max_segments: 20, val_fraction: 0.2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub synth: SynthConfig,
    /// When set, WAV audio replaces the synthetic generator.
    pub wav: Option<WavSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub train: TrainConfig,
    pub wb_seed: u64,
    pub bb_seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { train: TrainConfig::default(), wb_seed: 1, bb_seed: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    /// Settings shared by every Fourier variant; the variant decides the
    /// schedule and the time-shift toggle.
    pub fourier: FourierAttackConfig,
    pub uap: UapConfig,
    pub noise_seed: u64,
    pub variants: Vec<AttackTag>,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            fourier: FourierAttackConfig::default(),
            uap: UapConfig::default(),
            noise_seed: 3,
            variants: vec![
                AttackTag::Fft,
                AttackTag::FftNoSpectrumLoss,
                AttackTag::FftNoTimeshift,
                AttackTag::Uap,
                AttackTag::Noise,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub snr_grid: Vec<f64>,
    /// SNR of the time-shift and defense protocols, and of the filtering
    /// protocol when calibration is off.
    pub snr_db: f64,
    pub shift_count: usize,
    pub cutoff_grid: Vec<f64>,
    pub calibrate: bool,
    pub calibration: Calibration,
    pub transforms: Vec<Transform>,
    pub n_each: usize,
    pub output_space: OutputSpace,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            snr_grid: vec![0.0, 5.0, 10.0, 15.0, 20.0, 30.0],
            snr_db: 10.0,
            shift_count: 16,
            cutoff_grid: vec![1500.0, 3000.0, 5000.0, 8000.0],
            calibrate: true,
            calibration: Calibration::default(),
            transforms: Transform::DEFAULTS.to_vec(),
            n_each: 200,
            output_space: OutputSpace::Softmax,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub attack: AttackSection,
    pub eval: EvalSection,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            attack: AttackSection::default(),
            eval: EvalSection::default(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Pipeline stage an artifact belongs to; each hashes the sections it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Data,
    Models,
    Attacks,
    Reports,
}

impl ExperimentConfig {
    /// Parse TOML text, then apply `key.path=value` overrides. Values are read
    /// as TOML and fall back to plain strings.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("config", e.message()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::config("config", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.eval;
        for (name, grid) in [("eval.snr_grid", &e.snr_grid), ("eval.cutoff_grid", &e.cutoff_grid)] {
            if grid.is_empty() {
                return Err(Error::config(name, "must not be empty"));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(name, "must be strictly increasing"));
            }
        }
        if !e.snr_grid.contains(&e.snr_db) {
            return Err(Error::config("eval.snr_grid", format!("must contain eval.snr_db = {}", e.snr_db)));
        }
        if e.shift_count == 0 {
            return Err(Error::config("eval.shift_count", "must be positive"));
        }
        if e.transforms.is_empty() {
            return Err(Error::config("eval.transforms", "must not be empty"));
        }
        if e.n_each == 0 {
            return Err(Error::config("eval.n_each", "must be positive"));
        }
        if self.model.wb_seed == self.model.bb_seed {
            return Err(Error::config("model.bb_seed", "must differ from model.wb_seed"));
        }
        if self.attack.fourier.tag() != AttackTag::Fft {
            return Err(Error::config("attack.fourier", "choose ablations through attack.variants"));
        }
        self.attack.fourier.validate()?;
        if self.attack.variants.contains(&AttackTag::Fgsm) {
            return Err(Error::config("attack.variants", "fgsm is per-input and needs no training"));
        }
        if self.dataset.wav.is_none() {
            self.dataset.synth.validate()?;
        }
        Ok(())
    }

    /// The same experiment under run index `run`: every seed is offset by it.
    pub fn reseeded(&self, run: u64) -> Self {
        let mut c = self.clone();
        c.dataset.synth.seed += run;
        if let Some(w) = c.dataset.wav.as_mut() {
            w.seed += run;
        }
        c.model.wb_seed += 2 * run;
        c.model.bb_seed += 2 * run;
        c.attack.fourier.seed += run;
        c.attack.uap.seed += run;
        c.attack.noise_seed += run;
        c.eval.seed += run;
        c
    }

    /// Hex SHA-256 of the sections `stage` depends on. `output_dir` never
    /// takes part.
    pub fn hash(&self, stage: Stage) -> String {
        let mut parts = vec![serde_json::to_value(&self.dataset).unwrap()];
        if stage != Stage::Data {
            parts.push(serde_json::to_value(&self.model).unwrap());
        }
        if matches!(stage, Stage::Attacks | Stage::Reports) {
            parts.push(serde_json::to_value(&self.attack).unwrap());
        }
        if stage == Stage::Reports {
            parts.push(serde_json::to_value(&self.eval).unwrap());
        }
        let bytes = serde_json::to_vec(&parts).unwrap();
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The Fourier settings for one variant.
    pub fn fourier_variant(&self, tag: AttackTag) -> Result<FourierAttackConfig> {
        let base = self.attack.fourier.clone();
        Ok(match tag {
            AttackTag::Fft => base,
            AttackTag::FftPhase1Only => FourierAttackConfig { schedule: LossSchedule::Phase1Only, ..base },
            AttackTag::FftNoSpectrumLoss => FourierAttackConfig { schedule: LossSchedule::Off, ..base },
            AttackTag::FftNoTimeshift => FourierAttackConfig { time_shift: false, ..base },
            other => return Err(Error::invalid("variant", format!("`{other}` is not a Fourier variant"))),
        })
    }

    fn model_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.model.train.clone() }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| Error::config(item, "override must look like key.path=value"))?;
    let key = key.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| Error::config(key, "empty key"))?;
    let mut node = table;
    for p in parts {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| Error::config(key, format!("`{p}` is not a section")))?;
    }
    node.insert(leaf.to_string(), value);
    Ok(())
}

/// Provenance written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

/// One row of the cross-protocol digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool_version: String,
    pub config_hash: String,
    pub reports: BTreeMap<String, EvalReport>,
    /// Derived comparisons: min-over-shift ratios, filter retention, mean AUC.
    pub digest: Vec<ReportRow>,
}

impl Summary {
    pub fn digest_value(&self, series: &str, attack: &str, x: f64) -> Option<f64> {
        self.digest.iter().find(|r| r.series == series && r.attack_tag == attack && r.x == x).map(|r| r.metric)
    }

    pub fn report(&self, protocol: Protocol) -> Option<&EvalReport> {
        self.reports.get(protocol.as_str())
    }
}

/// A configured experiment bound to its artifact directory.
pub struct Experiment {
    cfg: ExperimentConfig,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir().join(rel)
    }

    fn meta(&self, stage: Stage) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("config_hash".to_string(), self.cfg.hash(stage)),
            ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ])
    }

    fn check(&self, path: &Path, meta: &BTreeMap<String, String>, stage: Stage) -> Result<()> {
        let expected = self.cfg.hash(stage);
        let found = meta.get("config_hash").cloned().unwrap_or_default();
        if found != expected {
            return Err(Error::HashMismatch { path: path.to_path_buf(), expected, found });
        }
        Ok(())
    }

    fn require(&self, rel: &str, command: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact { path: p, command: command.to_string() })
        }
    }

    fn manifest(&self, command: &str, stage: Stage, seeds: &[(&str, u64)], outputs: &[String]) -> Result<()> {
        let m = Manifest {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: self.cfg.hash(stage),
            seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            outputs: outputs.to_vec(),
        };
        write_json(&self.path(&format!("manifests/{}.json", command.replace(' ', "_"))), &m)
    }

    /// Generate (or ingest) the dataset and cache both splits.
    pub fn synth_data(&self) -> Result<(Dataset, Dataset)> {
        let (train, val, seed) = match &self.cfg.dataset.wav {
            Some(w) => {
                let all = load_wav_segments(&w.path, w.segment_len, w.max_segments, w.seed)?;
                let (train, val) = split(&all, 1.0 - w.val_fraction, w.seed)?;
                (train, val, w.seed)
            }
            None => {
                let (train, val) = generate_synthetic(&self.cfg.dataset.synth)?;
                (train, val, self.cfg.dataset.synth.seed)
            }
        };
        save_dataset(&train, &self.path("data/train.ds"), self.meta(Stage::Data))?;
        save_dataset(&val, &self.path("data/val.ds"), self.meta(Stage::Data))?;
        self.manifest("synth-data", Stage::Data, &[("data", seed)], &["data/train.ds".into(), "data/val.ds".into()])?;
        Ok((train, val))
    }

    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let mut out = Vec::with_capacity(2);
        for rel in ["data/train.ds", "data/val.ds"] {
            let p = self.require(rel, "synth-data")?;
            let (ds, header) = load_dataset(&p)?;
            self.check(&p, &header.meta, Stage::Data)?;
            out.push(ds);
        }
        let val = out.pop().unwrap();
        Ok((out.pop().unwrap(), val))
    }

    /// Train the white-box and black-box classifiers.
    pub fn train_classifiers(&self) -> Result<[TrainLog; 2]> {
        let (train, val) = self.load_data()?;
        let mut logs = Vec::with_capacity(2);
        for (tag, seed) in [("wb", self.cfg.model.wb_seed), ("bb", self.cfg.model.bb_seed)] {
            let (model, log) = train_classifier(&train, &val, &self.cfg.model_config(seed))?;
            save_checkpoint(&model, &self.path(&format!("models/{tag}.ckpt")), self.meta(Stage::Models))?;
            write_json(&self.path(&format!("models/{tag}.log.json")), &log)?;
            logs.push(log);
        }
        self.manifest(
            "train-classifier",
            Stage::Models,
            &[("wb", self.cfg.model.wb_seed), ("bb", self.cfg.model.bb_seed)],
            &["models/wb.ckpt".into(), "models/bb.ckpt".into()],
        )?;
        Ok(logs.try_into().unwrap())
    }

    /// `tag` is `wb` or `bb`.
    pub fn load_model(&self, tag: &str) -> Result<Classifier> {
        let p = self.require(&format!("models/{tag}.ckpt"), "train-classifier")?;
        let (model, header) = load_checkpoint(&p, None)?;
        self.check(&p, &header.meta, Stage::Models)?;
        Ok(model)
    }

    fn attack_rel(tag: AttackTag) -> String {
        format!("attacks/{tag}_wb.atk")
    }

    /// Train one universal attack against the white-box model.
    pub fn train_attack(&self, tag: AttackTag) -> Result<AttackVector> {
        let (train, _) = self.load_data()?;
        let (attack, seed) = match tag {
            AttackTag::Noise => {
                let seed = self.cfg.attack.noise_seed;
                (gaussian_noise_attack(train.length(), train.sample_rate(), seed)?, seed)
            }
            AttackTag::Uap => {
                let model = self.load_model("wb")?;
                (train_uap(&model, &train, &self.cfg.attack.uap)?, self.cfg.attack.uap.seed)
            }
            AttackTag::Fgsm => return Err(Error::invalid("variant", "fgsm is computed per input at evaluation time")),
            fourier => {
                let model = self.load_model("wb")?;
                let cfg = self.cfg.fourier_variant(fourier)?;
                let (attack, log) = train_fourier_attack(&model, &train, &cfg)?;
                write_json(&self.path(&format!("attacks/{tag}_wb.log.json")), &log)?;
                (attack, cfg.seed)
            }
        };
        let rel = Self::attack_rel(tag);
        save_attack(&attack, &self.path(&rel), self.meta(Stage::Attacks))?;
        self.manifest(&format!("train-attack {tag}"), Stage::Attacks, &[("attack", seed)], &[rel])?;
        Ok(attack)
    }

    pub fn load_attack(&self, tag: AttackTag) -> Result<AttackVector> {
        let p = self.require(&Self::attack_rel(tag), &format!("train-attack --variant {tag}"))?;
        let (attack, header) = load_attack(&p)?;
        self.check(&p, &header.meta, Stage::Attacks)?;
        Ok(attack)
    }

    /// Load the listed attacks that are configured, in configuration order.
    fn attacks(&self, wanted: &[AttackTag]) -> Result<Vec<AttackVector>> {
        self.cfg.attack.variants.iter().filter(|t| wanted.contains(t)).map(|&t| self.load_attack(t)).collect()
    }

    /// Run one protocol and write `reports/<protocol>.{json,csv}`.
    pub fn eval(&self, protocol: Protocol) -> Result<EvalReport> {
        let (train, val) = self.load_data()?;
        let wb = self.load_model("wb")?;
        let e = &self.cfg.eval;
        let seed = e.seed;
        let mut report = match protocol {
            Protocol::AsrSnr => {
                let bb = self.load_model("bb")?;
                let attacks = self.attacks(&self.cfg.attack.variants)?;
                let mut report = EvalReport::new(Protocol::AsrSnr).param("snr_grid", &e.snr_grid);
                for (model, model_tag) in [(&wb, "wb"), (&bb, "bb")] {
                    for a in &attacks {
                        let tag = a.tag().to_string();
                        let p = Perturbation::Universal(a.v_time());
                        report.extend(asr_vs_snr(model, &val, p, &e.snr_grid, &tag, model_tag, seed)?)?;
                    }
                    // FGSM is always computed on the white-box model
                    report.extend(asr_vs_snr(model, &val, Perturbation::Fgsm(&wb), &e.snr_grid, "fgsm", model_tag, seed)?)?;
                }
                report
            }
            Protocol::TimeShift => {
                let attacks = self.attacks(&[AttackTag::Fft, AttackTag::FftNoTimeshift])?;
                if attacks.is_empty() {
                    return Err(Error::config("attack.variants", "time_shift needs fft or fft_no_timeshift"));
                }
                let shifts = even_shifts(val.length(), val.sample_rate(), e.shift_count);
                let mut report = EvalReport::new(Protocol::TimeShift).param("shift_grid", &shifts).param("snr_db", e.snr_db);
                for a in &attacks {
                    report.extend(time_invariance_sweep(&wb, &val, a, &shifts, e.snr_db, "wb", seed)?)?;
                }
                report
            }
            Protocol::Filtering => {
                let attacks = self.attacks(&self.cfg.attack.variants)?;
                let tags: Vec<String> = attacks.iter().map(|a| a.tag().to_string()).collect();
                let mut sources: Vec<AttackSource<'_>> =
                    attacks.iter().zip(&tags).map(|(a, t)| AttackSource::universal(t, a.v_time())).collect();
                sources.push(AttackSource::fgsm("fgsm", &wb));
                let mut report = filtering_protocol(
                    &sources,
                    &train,
                    &val,
                    &e.cutoff_grid,
                    &self.cfg.model_config(self.cfg.model.wb_seed),
                    Some(&wb),
                    e.calibrate.then_some(&e.calibration),
                    e.snr_db,
                    seed,
                )?;
                if self.cfg.dataset.wav.is_none() {
                    report = report.param("band_edge_hz", self.cfg.dataset.synth.band_high_hz);
                }
                report
            }
            Protocol::DefenseAuc => {
                let attacks = self.attacks(&[AttackTag::Fft, AttackTag::Uap])?;
                let mut report = EvalReport::new(Protocol::DefenseAuc);
                let mut sources: Vec<(String, Perturbation<'_>)> =
                    attacks.iter().map(|a| (a.tag().to_string(), Perturbation::Universal(a.v_time()))).collect();
                sources.push(("fgsm".into(), Perturbation::Fgsm(&wb)));
                for (tag, p) in sources {
                    let r = defense_auc(&wb, &val, p, &e.transforms, e.n_each, e.snr_db, e.output_space, &tag, "wb", seed)?;
                    report.params = r.params.clone();
                    report.extend(r)?;
                }
                report
            }
        };
        report.config_hash = self.cfg.hash(Stage::Reports);
        write_report(&report, &self.path("reports"), protocol.as_str())?;
        let outputs = ["json", "csv"].map(|ext| format!("reports/{protocol}.{ext}"));
        self.manifest(&format!("eval {protocol}"), Stage::Reports, &[("eval", seed)], &outputs)?;
        Ok(report)
    }

    /// Every stage in order, then the summary.
    pub fn run_all(&self) -> Result<Summary> {
        self.synth_data()?;
        self.train_classifiers()?;
        for &tag in &self.cfg.attack.variants {
            self.train_attack(tag)?;
        }
        for p in Protocol::ALL {
            self.eval(p)?;
        }
        report(self.dir())
    }
}

/// Consolidate `reports/*.json` under `dir` into `summary.{json,csv}`.
/// Reports produced under different configs are refused.
pub fn report(dir: &Path) -> Result<Summary> {
    let mut reports = BTreeMap::new();
    let mut hash: Option<(PathBuf, String)> = None;
    for p in Protocol::ALL {
        let path = dir.join("reports").join(format!("{p}.json"));
        if !path.exists() {
            continue;
        }
        let r = read_report(&path)?;
        match &hash {
            None => hash = Some((path.clone(), r.config_hash.clone())),
            Some((first, h)) if *h != r.config_hash => {
                return Err(Error::HashMismatch {
                    path,
                    expected: format!("{h} (from {})", first.display()),
                    found: r.config_hash.clone(),
                })
            }
            _ => {}
        }
        reports.insert(p.as_str().to_string(), r);
    }
    let Some((_, config_hash)) = hash else {
        return Err(Error::MissingArtifact { path: dir.join("reports"), command: "eval".into() });
    };
    let digest = digest(&reports);
    let summary = Summary { tool_version: TOOL_VERSION.to_string(), config_hash, reports, digest };
    write_json(&dir.join("summary.json"), &summary)?;
    let rows: Vec<ReportRow> =
        summary.reports.values().flat_map(|r| r.rows.iter().cloned()).chain(summary.digest.iter().cloned()).collect();
    crate::io::write_text(&dir.join("summary.csv"), &write_rows_csv(&rows, &summary.config_hash)?)?;
    Ok(summary)
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Attack tags of a report's `asr` rows, in first-seen order.
fn attack_tags(r: &EvalReport, series: &str) -> Vec<(String, String, u64)> {
    let mut seen: Vec<(String, String, u64)> = Vec::new();
    for row in r.rows.iter().filter(|row| row.series == series) {
        if !seen.iter().any(|(a, m, _)| *a == row.attack_tag && *m == row.model_tag) {
            seen.push((row.attack_tag.clone(), row.model_tag.clone(), row.seed));
        }
    }
    seen
}

fn digest(reports: &BTreeMap<String, EvalReport>) -> Vec<ReportRow> {
    let mut out = Vec::new();
    let mut row = |protocol: Protocol, series: &str, attack: &str, model: &str, x: f64, metric: f64, seed: u64| {
        out.push(ReportRow {
            protocol,
            series: series.to_string(),
            attack_tag: attack.to_string(),
            model_tag: model.to_string(),
            x,
            metric,
            seed,
        })
    };
    if let Some(r) = reports.get(Protocol::TimeShift.as_str()) {
        for (attack, model, seed) in attack_tags(r, "asr") {
            let pts = r.series("asr", &attack, &model);
            let at0 = pts.first().map(|p| p.1).unwrap_or(0.0);
            let min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            row(Protocol::TimeShift, "min_over_shift0", &attack, &model, 0.0, ratio(min, at0), seed);
        }
    }
    if let Some(r) = reports.get(Protocol::Filtering.as_str()) {
        for (attack, model, seed) in attack_tags(r, "asr") {
            let pts = r.series("asr", &attack, &model);
            let top = pts.last().map(|p| p.1).unwrap_or(0.0);
            for (k, v) in pts {
                row(Protocol::Filtering, "retention", &attack, &model, k, ratio(v, top), seed);
            }
        }
    }
    if let Some(r) = reports.get(Protocol::DefenseAuc.as_str()) {
        let mut by_attack: Vec<(String, String, u64, Vec<f64>, f64)> = Vec::new();
        for x in r.rows.iter().filter(|x| x.series.starts_with("auc/")) {
            match by_attack.iter_mut().find(|b| b.0 == x.attack_tag && b.1 == x.model_tag) {
                Some(b) => b.3.push(x.metric),
                None => by_attack.push((x.attack_tag.clone(), x.model_tag.clone(), x.seed, vec![x.metric], x.x)),
            }
        }
        for (attack, model, seed, aucs, snr) in by_attack {
            let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
            row(Protocol::DefenseAuc, "mean_auc", &attack, &model, snr, mean, seed);
        }
    }
    out
}

/// Read a manifest written by an earlier command.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    read_json(path)
}
