//! The pipeline stages. Each stage reads and writes files under one output
//! directory:
//!
//! ```text
//! data/{train,test}.advd  data/summary.json
//! checkpoints/<name>.advc  history/<name>.csv
//! attacks/<model>_<attack>.{advd,json}
//! theta/<model>.json
//! report/report.{json,csv}  report/{per_class,bottom_k}_<attack>.svg
//! ablation/ablation.{csv,json}  ablation/at.advc
//! ```

use std::path::{Path, PathBuf};

use advcausal_core::attacks::{AttackKind, TreatmentSet};
use advcausal_core::causal::{estimate_theta, finite_diff_theta, relative_ratio, treatment_batch, CausalEstimate};
use advcausal_core::data::{gen_synthetic, LabeledDataset, Split};
use advcausal_core::defenses::{train_adml, train_at, BaseDefense, DefenseConfig, DefenseKind, History};
use advcausal_core::eval::{assemble_evaluation, bottom_k_cumulative, clean_accuracy, ClassAccuracy, RobustnessReport, REPORT_SCHEMA_VERSION};
use advcausal_core::models::Classifier;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, ExperimentConfig};
use crate::container::{load_checkpoint, load_dataset, save_checkpoint, save_dataset};
use crate::csvdata::load_csv;
use crate::error::{self, LabError, LabResult};
use crate::idx::load_idx;
use crate::parallel::{attack_par, robust_accuracy_par};
use crate::report::{emit_report, history_csv, write_json, ReportFormat};
use crate::svg::{emit_plot_svg, Series};

/// Which training stage `train` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTarget {
    At,
    Trades,
    Adml,
}

impl TrainTarget {
    pub fn name(self) -> &'static str {
        match self {
            Self::At => "at",
            Self::Trades => "trades",
            Self::Adml => "adml",
        }
    }
}

impl std::str::FromStr for TrainTarget {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        match s {
            "at" => Ok(Self::At),
            "trades" => Ok(Self::Trades),
            "adml" => Ok(Self::Adml),
            other => Err(LabError::config(format!("unknown defense '{other}', expected at|trades|adml"))),
        }
    }
}

pub struct Pipeline {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub dataset_id: String,
    pub num_classes: usize,
    pub input_dim: usize,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub model_id: String,
    pub attack: String,
    pub kind: AttackKind,
    pub config: advcausal_core::attacks::AttackConfig,
    pub clean: ClassAccuracy,
    pub robust: ClassAccuracy,
    /// Fraction of clean-correct samples whose prediction the attack changed.
    pub flip_rate: f64,
    pub flipped: usize,
    pub max_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub estimate: CausalEstimate,
    /// Directional difference quotient of the interventional expectation, per class.
    pub finite_difference: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub use_split_crossfit: bool,
    pub treatment_set: TreatmentSet,
    pub clean_acc: f64,
    pub robust_acc: f64,
    pub bottom_30: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub attack: String,
    pub baseline_robust_acc: f64,
    pub rows: Vec<AblationRow>,
}

pub fn model_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

impl Pipeline {
    /// `out` overrides the configured output directory.
    pub fn new(config: ExperimentConfig, out: Option<PathBuf>, threads: usize) -> Self {
        let out = out.unwrap_or_else(|| config.report.out_dir.clone());
        Self {
            config,
            out,
            threads: threads.max(1),
        }
    }

    fn dir(&self, name: &str) -> LabResult<PathBuf> {
        let d = self.out.join(name);
        error::create_dir(&d)?;
        Ok(d)
    }

    pub fn train_path(&self) -> PathBuf {
        self.out.join("data").join("train.advd")
    }

    pub fn test_path(&self) -> PathBuf {
        self.out.join("data").join("test.advd")
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        self.out.join("checkpoints").join(format!("{name}.advc"))
    }

    /// Generates or ingests the configured dataset and caches both splits.
    pub fn gen_data(&self) -> LabResult<DataSummary> {
        let (train, test) = match &self.config.dataset {
            DatasetSource::Synthetic(spec) => {
                let tt = gen_synthetic(spec)?;
                (tt.train, tt.test)
            }
            DatasetSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                num_classes,
            } => {
                let train = load_idx(train_images, train_labels, *num_classes, Split::Train)?;
                let test = load_idx(test_images, test_labels, Some(num_classes.unwrap_or(train.num_classes())), Split::Test)?;
                (train, test)
            }
            DatasetSource::Csv {
                train,
                test,
                label_column,
                num_classes,
            } => {
                let tr = load_csv(train, *label_column, *num_classes, None, Split::Train)?;
                let classes = num_classes.unwrap_or(tr.data.num_classes());
                let te = load_csv(test, *label_column, Some(classes), Some(&tr.normalization), Split::Test)?;
                (tr.data, te.data)
            }
        };
        if train.input_dim() != test.input_dim() || train.num_classes() != test.num_classes() {
            return Err(LabError::config("train and test files disagree in shape or class count"));
        }
        let dir = self.dir("data")?;
        save_dataset(&train, &self.train_path())?;
        save_dataset(&test, &self.test_path())?;
        let summary = DataSummary {
            dataset_id: self.config.dataset_id.clone(),
            num_classes: train.num_classes(),
            input_dim: train.input_dim(),
            train_counts: train.class_counts(),
            test_counts: test.class_counts(),
        };
        write_json(&summary, &dir.join("summary.json"))?;
        Ok(summary)
    }

    pub fn load_split(&self, split: Split) -> LabResult<LabeledDataset> {
        let path = match split {
            Split::Train => self.train_path(),
            Split::Test => self.test_path(),
        };
        if !path.exists() {
            return Err(LabError::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset cache missing, run gen-data first"),
            ));
        }
        load_dataset(&path)
    }

    fn model_spec(&self, data: &LabeledDataset) -> LabResult<advcausal_core::models::ClassifierSpec> {
        let mut spec = self.config.model.clone();
        if spec.input_dim == 0 {
            spec.input_dim = data.input_dim();
        }
        if spec.num_classes == 0 {
            spec.num_classes = data.num_classes();
        }
        if spec.input_dim != data.input_dim() || spec.num_classes != data.num_classes() {
            return Err(LabError::config(format!(
                "[model] expects {}→{} but the dataset is {}→{}",
                spec.input_dim,
                spec.num_classes,
                data.input_dim(),
                data.num_classes()
            )));
        }
        Ok(spec)
    }

    fn base_defense(&self, base: BaseDefense) -> DefenseConfig {
        DefenseConfig {
            kind: match base {
                BaseDefense::At => DefenseKind::At,
                BaseDefense::Trades => DefenseKind::Trades,
            },
            ..self.config.defense.clone()
        }
    }

    fn save_trained(&self, name: &str, model: &Classifier, history: &History) -> LabResult<PathBuf> {
        self.dir("checkpoints")?;
        let path = self.checkpoint_path(name);
        save_checkpoint(model, &path)?;
        let hist = self.dir("history")?;
        error::write(&hist.join(format!("{name}.csv")), history_csv(history).as_bytes())?;
        Ok(path)
    }

    /// Trains `target` and returns the checkpoint path. Fine-tuning starts from
    /// `from`, or from the checkpoint of the configured base defense.
    pub fn train(&self, target: TrainTarget, from: Option<&Path>) -> LabResult<PathBuf> {
        let train = self.load_split(Split::Train)?;
        match target {
            TrainTarget::At | TrainTarget::Trades => {
                let base = if target == TrainTarget::At { BaseDefense::At } else { BaseDefense::Trades };
                let model = Classifier::init(self.model_spec(&train)?)?;
                let out = train_at(model, &train, None, &self.config.train, &self.base_defense(base))?;
                self.save_trained(target.name(), &out.model, &out.history)
            }
            TrainTarget::Adml => {
                let default = self.checkpoint_path(match self.config.defense.kind.base() {
                    BaseDefense::At => "at",
                    BaseDefense::Trades => "trades",
                });
                let base_path = from.map_or(default, Path::to_path_buf);
                let base = load_checkpoint(&base_path)?;
                let out = train_adml(base, &train, None, &self.config.train, &self.config.defense)?;
                self.save_trained("adml", &out.model, &out.history)
            }
        }
    }

    fn attack_named(&self, name: &str) -> LabResult<&crate::config::NamedAttack> {
        self.config
            .attack(name)
            .ok_or_else(|| LabError::config(format!("no [attack.{name}] section")))
    }

    /// Attacks the test split and writes the adversarial inputs and flip statistics.
    pub fn attack(&self, checkpoint: &Path, attack: &str) -> LabResult<AttackSummary> {
        let model = load_checkpoint(checkpoint)?;
        let test = self.load_split(Split::Test)?;
        let named = self.attack_named(attack)?;
        let adv = attack_par(&model, &test, named.kind, &named.config, self.threads)?;
        let clean_pred = model.predict(test.inputs())?;
        let adv_pred = model.predict(&adv)?;
        let mut robust = advcausal_core::eval::ClassTally::new(test.num_classes());
        robust.record(&adv_pred, test.labels());
        let correct = clean_pred.iter().zip(test.labels()).filter(|(p, y)| p == y).count();
        let flipped = clean_pred
            .iter()
            .zip(&adv_pred)
            .zip(test.labels())
            .filter(|((c, a), y)| c == y && a != y)
            .count();
        let max_linf = adv.zip_map(test.inputs(), |a, b| (a - b).abs())?.max_abs();
        let id = model_id(checkpoint);
        let summary = AttackSummary {
            model_id: id.clone(),
            attack: attack.to_string(),
            kind: named.kind,
            config: named.config.clone(),
            clean: clean_accuracy(&model, &test)?,
            robust: robust.accuracy(),
            flip_rate: if correct == 0 { 0.0 } else { flipped as f64 / correct as f64 },
            flipped,
            max_linf,
        };
        let dir = self.dir("attacks")?;
        let adv_data = LabeledDataset::new(adv, test.labels().to_vec(), test.num_classes(), Split::Test)?;
        save_dataset(&adv_data, &dir.join(format!("{id}_{attack}.advd")))?;
        write_json(&summary, &dir.join(format!("{id}_{attack}.json")))?;
        Ok(summary)
    }

    /// `θ̂` of a checkpoint on the held-out test split.
    pub fn theta(&self, model: &Classifier, id: &str, test: &LabeledDataset) -> LabResult<ThetaReport> {
        let attack = self.config.causal_attack();
        let (worst, p) = treatment_batch(model, test.inputs(), test.labels(), &attack, self.config.causal.restarts)?;
        let estimate = estimate_theta(&worst, model, &p, self.config.causal.norm)?.with_metadata(
            id,
            &self.config.dataset_id,
            Some(attack),
        );
        let x = worst.clean().expect("treatment batch is nonempty");
        let t = worst.perturbation().expect("treatment batch is nonempty");
        let finite_difference = finite_diff_theta(model, &x, &worst.y, &t, self.config.causal.epsilon, &p)?;
        Ok(ThetaReport {
            estimate,
            finite_difference,
            epsilon: self.config.causal.epsilon,
        })
    }

    pub fn estimate_theta(&self, checkpoint: &Path) -> LabResult<ThetaReport> {
        let model = load_checkpoint(checkpoint)?;
        let test = self.load_split(Split::Test)?;
        let id = model_id(checkpoint);
        let report = self.theta(&model, &id, &test)?;
        write_json(&report, &self.dir("theta")?.join(format!("{id}.json")))?;
        Ok(report)
    }

    /// Evaluates one or two checkpoints under every configured attack. With two,
    /// the first is the baseline and the relative causal ratio is added.
    pub fn report(&self, checkpoints: &[PathBuf]) -> LabResult<RobustnessReport> {
        if checkpoints.is_empty() || checkpoints.len() > 2 {
            return Err(LabError::config("report takes one or two checkpoints"));
        }
        let test = self.load_split(Split::Test)?;
        let ks = &self.config.report.bottom_k;
        let mut models = Vec::new();
        let mut evaluations = Vec::new();
        for path in checkpoints {
            let model = load_checkpoint(path)?;
            let id = model_id(path);
            let clean = clean_accuracy(&model, &test)?;
            let mut results = Vec::new();
            for a in &self.config.attacks {
                let acc = robust_accuracy_par(&model, &test, a.kind, &a.config, self.threads)?;
                results.push((a.kind, a.config.clone(), acc));
            }
            evaluations.push(assemble_evaluation(id.clone(), clean, results, ks)?);
            models.push((id, model));
        }
        let relative = if models.len() == 2 {
            let causal_idx = self
                .config
                .attacks
                .iter()
                .position(|a| a.name == self.config.causal.attack)
                .expect("validated at parse time");
            let at_per_class = &evaluations[0].attacks[causal_idx].accuracy.per_class;
            let base = self.theta(&models[0].1, &models[0].0, &test)?;
            let tuned = self.theta(&models[1].1, &models[1].0, &test)?;
            Some(relative_ratio(&tuned.estimate, &base.estimate, at_per_class, ks)?)
        } else {
            None
        };
        let report = RobustnessReport {
            schema_version: REPORT_SCHEMA_VERSION,
            dataset_id: self.config.dataset_id.clone(),
            num_classes: test.num_classes(),
            seed: self.config.seed,
            models: evaluations,
            relative_ratio: relative,
        };
        let dir = self.dir("report")?;
        for f in &self.config.report.formats {
            let name = match f {
                ReportFormat::Json => "report.json",
                ReportFormat::Csv => "report.csv",
            };
            emit_report(&report, &dir.join(name), *f)?;
        }
        if self.config.report.svg {
            self.plots(&report, &dir)?;
        }
        Ok(report)
    }

    fn plots(&self, report: &RobustnessReport, dir: &Path) -> LabResult<()> {
        let classes: Vec<String> = (0..report.num_classes).map(|c| format!("class {c}")).collect();
        for (i, a) in self.config.attacks.iter().enumerate() {
            let per_class: Vec<Series> = report
                .models
                .iter()
                .map(|m| Series {
                    name: m.model_id.clone(),
                    values: m.attacks[i].accuracy.per_class.clone(),
                })
                .collect();
            emit_plot_svg(
                &format!("Per-class robust accuracy ({})", a.name),
                "accuracy",
                &per_class,
                &classes,
                &dir.join(format!("per_class_{}.svg", a.name)),
            )?;
            let ks: Vec<String> = self.config.report.bottom_k.iter().map(|k| format!("bottom {k}%")).collect();
            let bottom: Vec<Series> = report
                .models
                .iter()
                .map(|m| Series {
                    name: m.model_id.clone(),
                    values: m.attacks[i].bottom_k.iter().map(|b| b.accuracy).collect(),
                })
                .collect();
            emit_plot_svg(
                &format!("Bottom-k robust accuracy ({})", a.name),
                "accuracy",
                &bottom,
                &ks,
                &dir.join(format!("bottom_k_{}.svg", a.name)),
            )?;
        }
        Ok(())
    }

    /// Fine-tunes the baseline under every combination of split/cross-fit on or
    /// off and treatment set, scored by the causal attack on the test split.
    pub fn ablate(&self, from: Option<&Path>) -> LabResult<Ablation> {
        let train = self.load_split(Split::Train)?;
        let test = self.load_split(Split::Test)?;
        let dir = self.dir("ablation")?;
        let base = match from {
            Some(p) => load_checkpoint(p)?,
            None => {
                let model = Classifier::init(self.model_spec(&train)?)?;
                let b = self.config.defense.kind.base();
                let m = train_at(model, &train, None, &self.config.train, &self.base_defense(b))?.model;
                save_checkpoint(&m, &dir.join("at.advc"))?;
                m
            }
        };
        let named = self.attack_named(&self.config.causal.attack)?;
        let score = |m: &Classifier| robust_accuracy_par(m, &test, named.kind, &named.config, self.threads);
        let baseline = score(&base)?;
        let mut rows = Vec::new();
        for split in [true, false] {
            for set in [TreatmentSet::Worst, TreatmentSet::NonWorst, TreatmentSet::All] {
                let cfg = DefenseConfig {
                    use_split_crossfit: split,
                    treatment_set: set,
                    ..self.config.defense.clone()
                };
                let tuned = train_adml(base.clone(), &train, None, &self.config.train, &cfg)?.model;
                let robust = score(&tuned)?;
                rows.push(AblationRow {
                    use_split_crossfit: split,
                    treatment_set: set,
                    clean_acc: clean_accuracy(&tuned, &test)?.overall,
                    robust_acc: robust.overall,
                    bottom_30: bottom_k_cumulative(&robust.per_class, 30.0)?,
                });
            }
        }
        let ablation = Ablation {
            attack: named.name.clone(),
            baseline_robust_acc: baseline.overall,
            rows,
        };
        write_json(&ablation, &dir.join("ablation.json"))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &ablation.rows {
            w.serialize((r.use_split_crossfit, r.treatment_set.name(), r.clean_acc, r.robust_acc, r.bottom_30))
                .expect("in-memory csv write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8");
        let text = format!("use_split_crossfit,treatment_set,clean_acc,robust_acc,bottom_30\n{body}");
        error::write(&dir.join("ablation.csv"), text.as_bytes())?;
        Ok(ablation)
    }
}
