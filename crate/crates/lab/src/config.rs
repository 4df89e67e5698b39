//! Experiment configuration: `[section]` headers, `key = value` lines, `#` comments.
//!
//! Keys before the first header belong to the global section, which holds
//! `seed`. Every derived seed is `fnv1a64(section name) ^ seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use advcausal_core::attacks::{AttackConfig, AttackKind, Objective, TreatmentSet};
use advcausal_core::causal::{NormChoice, DEFAULT_RESTARTS};
use advcausal_core::data::{SyntheticKind, SyntheticSpec};
use advcausal_core::defenses::{BaseDefense, DefenseConfig, DefenseKind, TauSource};
use advcausal_core::eval::DEFAULT_BOTTOM_K;
use advcausal_core::models::{Activation, ClassifierSpec, LrSchedule, TrainConfig};

use crate::error::{self, LabError, LabResult};
use crate::report::ReportFormat;

/// 64-bit FNV-1a.
pub fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn section_seed(global: u64, section: &str) -> u64 {
    fnv1a64(section) ^ global
}

/// Parsed but untyped file: section → key → (value, line).
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
    order: Vec<String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> LabResult<Self> {
        let mut raw = RawConfig::default();
        let mut current = String::new();
        raw.sections.insert(current.clone(), BTreeMap::new());
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| LabError::config(format!("line {n}: malformed section header")))?;
                if raw.sections.contains_key(name) {
                    return Err(LabError::config(format!("line {n}: duplicate section [{name}]")));
                }
                current = name.to_string();
                raw.sections.insert(current.clone(), BTreeMap::new());
                raw.order.push(current.clone());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::config(format!("line {n}: expected key = value")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(LabError::config(format!("line {n}: empty key")));
            }
            let section = raw.sections.get_mut(&current).expect("current section exists");
            if section.insert(k.to_string(), (v.to_string(), n)).is_some() {
                return Err(LabError::config(format!("line {n}: duplicate key '{k}'")));
            }
        }
        Ok(raw)
    }

    fn take(&mut self, section: &str) -> Section {
        Section {
            name: section.to_string(),
            entries: self.sections.remove(section).unwrap_or_default(),
        }
    }

    fn remaining_sections(&self) -> Vec<String> {
        self.order.iter().filter(|s| self.sections.contains_key(*s)).cloned().collect()
    }
}

struct Section {
    name: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn opt<T: FromStr>(&mut self, key: &str) -> LabResult<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| {
                LabError::config(format!("line {line}: [{}] {key}: cannot parse '{v}'", self.name))
            }),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> LabResult<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn req<T: FromStr>(&mut self, key: &str) -> LabResult<T> {
        self.opt(key)?
            .ok_or_else(|| LabError::config(format!("[{}] missing required key '{key}'", self.name)))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> LabResult<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => {
                if v.is_empty() {
                    return Ok(Some(Vec::new()));
                }
                v.split(',')
                    .map(|p| p.trim().parse::<T>())
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some)
                    .map_err(|_| LabError::config(format!("line {line}: [{}] {key}: cannot parse list '{v}'", self.name)))
            }
        }
    }

    fn finish(self) -> LabResult<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(LabError::config(format!("line {line}: [{}] unknown key '{k}'", self.name))),
        }
    }
}

fn check(r: advcausal_core::Result<()>, section: &str) -> LabResult<()> {
    r.map_err(|e| LabError::config(format!("[{section}] {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        num_classes: Option<usize>,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
        label_column: usize,
        num_classes: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedAttack {
    pub name: String,
    pub kind: AttackKind,
    pub config: AttackConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalSection {
    pub restarts: usize,
    pub norm: NormChoice,
    pub epsilon: f64,
    /// Name of the `[attack.*]` section that generates treatments.
    pub attack: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSection {
    pub out_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub svg: bool,
    pub bottom_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset_id: String,
    pub dataset: DatasetSource,
    pub model: ClassifierSpec,
    pub train: TrainConfig,
    pub attacks: Vec<NamedAttack>,
    /// Fine-tuning and inner-attack settings; `kind` is the fine-tuning kind.
    pub defense: DefenseConfig,
    pub causal: CausalSection,
    pub report: ReportSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> LabResult<Self> {
        let bytes = error::read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| LabError::config(format!("{} is not UTF-8", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, seed_override)
    }

    /// Parses `text`; relative file paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, seed_override: Option<u64>) -> LabResult<Self> {
        let mut raw = RawConfig::parse(text)?;
        let mut global = raw.take("");
        let file_seed: u64 = global.get("seed", 0)?;
        global.finish()?;
        let seed = seed_override.unwrap_or(file_seed);
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        let mut ds = raw.take("dataset");
        let dataset_id: String = ds.get("id", "dataset".to_string())?;
        let source: String = ds.get("source", "synthetic".to_string())?;
        let dataset = match source.as_str() {
            "synthetic" => {
                let kind = match ds.get("kind", "gaussian_mixture".to_string())?.as_str() {
                    "gaussian_mixture" => SyntheticKind::GaussianMixture,
                    "rings" => SyntheticKind::Rings,
                    other => return Err(LabError::config(format!("[dataset] unknown kind '{other}'"))),
                };
                let num_classes: usize = ds.req("num_classes")?;
                let samples = ds.list::<usize>("samples_per_class")?.ok_or_else(|| LabError::config("[dataset] missing required key 'samples_per_class'"))?;
                let margins = ds.list::<f64>("class_margin")?.ok_or_else(|| LabError::config("[dataset] missing required key 'class_margin'"))?;
                let spec = SyntheticSpec {
                    kind,
                    num_classes,
                    samples_per_class: broadcast(samples, num_classes),
                    input_dim: ds.get("input_dim", 2)?,
                    class_margin: broadcast(margins, num_classes),
                    noise_scale: ds.get("noise_scale", 0.1)?,
                    test_ratio: ds.get("test_ratio", 0.2)?,
                    seed: section_seed(seed, "dataset"),
                };
                check(spec.validate(), "dataset")?;
                DatasetSource::Synthetic(spec)
            }
            "idx" => DatasetSource::Idx {
                train_images: resolve(ds.req("train_images")?),
                train_labels: resolve(ds.req("train_labels")?),
                test_images: resolve(ds.req("test_images")?),
                test_labels: resolve(ds.req("test_labels")?),
                num_classes: ds.opt("num_classes")?,
            },
            "csv" => DatasetSource::Csv {
                train: resolve(ds.req("train")?),
                test: resolve(ds.req("test")?),
                label_column: ds.req("label_column")?,
                num_classes: ds.opt("num_classes")?,
            },
            other => return Err(LabError::config(format!("[dataset] unknown source '{other}'"))),
        };
        ds.finish()?;

        let mut md = raw.take("model");
        let model = ClassifierSpec {
            input_dim: md.get("input_dim", 0)?,
            hidden_dims: md.list("hidden_dims")?.unwrap_or_default(),
            num_classes: md.get("num_classes", 0)?,
            activation: match md.get("activation", "relu".to_string())?.as_str() {
                "relu" => Activation::Relu,
                other => return Err(LabError::config(format!("[model] unknown activation '{other}'"))),
            },
            init_seed: section_seed(seed, "model"),
        };
        md.finish()?;

        let mut tr = raw.take("train");
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            epochs: tr.get("epochs", defaults.epochs)?,
            batch_size: tr.get("batch_size", defaults.batch_size)?,
            learning_rate: tr.get("learning_rate", defaults.learning_rate)?,
            lr_schedule: match tr.get("lr_schedule", "cyclic".to_string())?.as_str() {
                "cyclic" => LrSchedule::Cyclic,
                "constant" => LrSchedule::Constant,
                other => return Err(LabError::config(format!("[train] unknown lr_schedule '{other}'"))),
            },
            momentum: tr.get("momentum", defaults.momentum)?,
            seed: section_seed(seed, "train"),
            patience: tr.opt("patience")?,
        };
        tr.finish()?;
        check(train.validate(), "train")?;

        let mut attacks = Vec::new();
        for name in raw.remaining_sections() {
            let Some(short) = name.strip_prefix("attack.") else { continue };
            let short = short.to_string();
            let mut a = raw.take(&name);
            let kind: AttackKind = a.get("kind", AttackKind::Pgd).map_err(|_| LabError::config(format!("[{name}] unknown attack kind")))?;
            let gamma: f64 = a.req("gamma")?;
            let mut cfg = AttackConfig::evaluation(gamma, section_seed(seed, &name));
            cfg.steps = a.get("steps", cfg.steps)?;
            cfg.step_size = a.opt("step_size")?;
            cfg.random_start = a.get("random_start", cfg.random_start)?;
            cfg.objective = a.get::<Objective>("objective", cfg.objective).map_err(|_| LabError::config(format!("[{name}] unknown objective")))?;
            cfg.kappa = a.get("kappa", cfg.kappa)?;
            a.finish()?;
            check(cfg.validate(), &name)?;
            attacks.push(NamedAttack {
                name: short,
                kind,
                config: cfg,
            });
        }
        if attacks.is_empty() {
            return Err(LabError::config("at least one [attack.NAME] section is required"));
        }

        let mut df = raw.take("defense");
        let base = match df.get("base", "at".to_string())?.as_str() {
            "at" => BaseDefense::At,
            "trades" => BaseDefense::Trades,
            other => return Err(LabError::config(format!("[defense] unknown base '{other}'"))),
        };
        let dseed = section_seed(seed, "defense");
        let gamma: f64 = df.req("gamma")?;
        let mut defense = DefenseConfig::new(
            match base {
                BaseDefense::At => DefenseKind::AdmlOverAt,
                BaseDefense::Trades => DefenseKind::AdmlOverTrades,
            },
            gamma,
            dseed,
        );
        defense.attack.steps = df.get("steps", defense.attack.steps)?;
        defense.attack.step_size = df.opt("step_size")?;
        defense.trades_beta = df.get("trades_beta", defense.trades_beta)?;
        defense.adml_epochs = df.get("adml_epochs", defense.adml_epochs)?;
        defense.adml_learning_rate = df.opt("adml_learning_rate")?;
        defense.split_ratio = df.get("split_ratio", defense.split_ratio)?;
        defense.use_split_crossfit = df.get("use_split_crossfit", defense.use_split_crossfit)?;
        defense.treatment_set = df
            .get::<TreatmentSet>("treatment_set", defense.treatment_set)
            .map_err(|_| LabError::config("[defense] unknown treatment_set"))?;
        defense.tau_source = match df.get("tau_source", "attacked_confidence".to_string())?.as_str() {
            "attacked_confidence" => TauSource::AttackedConfidence,
            "propensity" => TauSource::Propensity {
                restarts: df.get("propensity_restarts", DEFAULT_RESTARTS)?,
            },
            other => return Err(LabError::config(format!("[defense] unknown tau_source '{other}'"))),
        };
        df.finish()?;
        check(defense.validate(), "defense")?;

        let mut cs = raw.take("causal");
        let causal = CausalSection {
            restarts: cs.get("restarts", DEFAULT_RESTARTS)?,
            norm: cs.get::<NormChoice>("norm", NormChoice::MeanAbs).map_err(|_| LabError::config("[causal] unknown norm"))?,
            epsilon: cs.get("epsilon", 1e-4)?,
            attack: cs.get("attack", attacks[0].name.clone())?,
            seed: section_seed(seed, "causal"),
        };
        cs.finish()?;
        if causal.restarts == 0 || !(causal.epsilon > 0.0) {
            return Err(LabError::config("[causal] restarts must be ≥ 1 and epsilon > 0"));
        }
        match attacks.iter().find(|a| a.name == causal.attack) {
            None => return Err(LabError::config(format!("[causal] no attack named '{}'", causal.attack))),
            Some(a) if !a.config.random_start || a.kind != AttackKind::Pgd => {
                return Err(LabError::config("[causal] the treatment attack must be a random-start pgd"))
            }
            Some(_) => {}
        }

        let mut rp = raw.take("report");
        let report = ReportSection {
            out_dir: rp.get("out_dir", PathBuf::from("out"))?,
            formats: rp.list("formats")?.unwrap_or_else(|| vec![ReportFormat::Json, ReportFormat::Csv]),
            svg: rp.get("svg", true)?,
            bottom_k: rp.list("bottom_k")?.unwrap_or_else(|| DEFAULT_BOTTOM_K.to_vec()),
        };
        rp.finish()?;
        if report.bottom_k.iter().any(|&k| !(k > 0.0 && k <= 100.0)) {
            return Err(LabError::config("[report] bottom_k values must lie in (0, 100]"));
        }

        if let Some(extra) = raw.remaining_sections().first() {
            return Err(LabError::config(format!("unknown section [{extra}]")));
        }
        let mut cfg = Self {
            seed,
            dataset_id,
            dataset,
            model,
            train,
            attacks,
            defense,
            causal,
            report,
        };
        cfg.fill_model_dims();
        Ok(cfg)
    }

    /// Synthetic datasets fix the model's input and output sizes when the model
    /// section leaves them at zero.
    fn fill_model_dims(&mut self) {
        if let DatasetSource::Synthetic(s) = &self.dataset {
            if self.model.input_dim == 0 {
                self.model.input_dim = s.input_dim;
            }
            if self.model.num_classes == 0 {
                self.model.num_classes = s.num_classes;
            }
        }
    }

    pub fn attack(&self, name: &str) -> Option<&NamedAttack> {
        self.attacks.iter().find(|a| a.name == name)
    }

    /// Causal treatment attack with the causal section's seed.
    pub fn causal_attack(&self) -> AttackConfig {
        self.attack(&self.causal.attack)
            .expect("validated at parse time")
            .config
            .with_seed(self.causal.seed)
    }
}

fn broadcast<T: Clone>(v: Vec<T>, n: usize) -> Vec<T> {
    if v.len() == 1 {
        vec![v[0].clone(); n]
    } else {
        v
    }
}
