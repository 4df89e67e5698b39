//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its criterion
//! before asserting, so `cargo test --test acceptance -- --nocapture` reads as a
//! checklist.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use advcausal_core::attacks::TreatmentSet;
use advcausal_core::eval::RobustnessReport;
use advcausal_lab::config::ExperimentConfig;
use advcausal_lab::pipeline::{Ablation, Pipeline, TrainTarget};

fn verdict(id: u32, ok: bool, what: &str, elapsed: Duration) -> bool {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {what} ({:.2}s)", elapsed.as_secs_f64());
    ok
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn criterion_01_gradient_oracle() {
    let start = Instant::now();
    let (count, failures) = oracles::gradient_suite(2024, 6, 20);
    let elapsed = start.elapsed();
    let ok = count >= 100 && failures.is_empty() && elapsed < Duration::from_secs(30);
    let what = format!("{count} fixtures, {} mismatches above 1e-4", failures.len());
    assert!(verdict(1, ok, &what, elapsed), "{failures:?}");
}

#[test]
fn criterion_02_attack_fuzz() {
    let start = Instant::now();
    let out = oracles::attack_fuzz(31337, 10_000);
    let elapsed = start.elapsed();
    let ok = out.invocations == 10_000
        && out.errors == 0
        && out.ball_violations == 0
        && out.range_violations == 0
        && out.nondeterministic == 0
        && out.model_mutations == 0
        && elapsed < Duration::from_secs(120);
    assert!(verdict(2, ok, &format!("{out:?}"), elapsed));
}

#[test]
fn criterion_03_pgd_vs_grid() {
    let start = Instant::now();
    let ratios: Vec<f64> = (0..5).map(|s| oracles::pgd_grid_ratio(100 + s, 4)).collect();
    let elapsed = start.elapsed();
    let ok = ratios.iter().all(|&r| r >= 0.99) && elapsed < Duration::from_secs(60);
    assert!(verdict(3, ok, &format!("PGD / grid loss ratios {ratios:.4?}"), elapsed));
}

#[test]
fn criterion_04_theta_closed_form() {
    let start = Instant::now();
    let (err, zero_at_one) = oracles::theta_analytic_error(404, 200);
    let elapsed = start.elapsed();
    let ok = err < 1e-10 && zero_at_one && elapsed < Duration::from_secs(10);
    let what = format!("max abs error {err:.3e}, p = 1 terms exactly zero: {zero_at_one}");
    assert!(verdict(4, ok, &what, elapsed));
}

#[test]
fn criterion_05_interventional_expectation_fixture() {
    let start = Instant::now();
    let err = oracles::ie_fixture_error();
    let degenerate = oracles::ie_degenerate_exact();
    let elapsed = start.elapsed();
    let ok = err < 1e-12 && degenerate && elapsed < Duration::from_secs(1);
    let what = format!("hand fixture error {err:.3e}, degenerate case exact: {degenerate}");
    assert!(verdict(5, ok, &what, elapsed));
}

#[test]
fn criterion_06_finite_difference_consistency() {
    let start = Instant::now();
    let worst = (0..20).map(|s| oracles::finite_diff_relative_error(600 + s, 1e-4)).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let ok = worst < 1e-3 && elapsed < Duration::from_secs(10);
    assert!(verdict(6, ok, &format!("max relative error {worst:.3e} at eps 1e-4"), elapsed));
}

#[test]
fn criterion_07_adml_loss_fixture() {
    let start = Instant::now();
    let four = oracles::adml_fixture_check(&oracles::load_adml_fixture("adml_four.json"));
    let empty = oracles::adml_fixture_check(&oracles::load_adml_fixture("adml_no_worst.json"));
    let elapsed = start.elapsed();
    let matched = (four.l_a - four.expected_l_a).abs() < 1e-12
        && (four.l_b - four.expected_l_b).abs() < 1e-12
        && (four.total - (four.expected_l_a + four.expected_l_b)).abs() < 1e-12;
    let taus = four.treated == 3 && four.taus_seen == [0.0, 1.0, 4.0];
    let empty_ok = empty.treated == 0 && empty.l_b == 0.0 && empty.total == empty.l_a;
    let ok = matched && taus && empty_ok && elapsed < Duration::from_secs(1);
    let what = format!(
        "L_a {:.6} L_b {:.6} taus {:?}, empty worst set L_b = {}",
        four.l_a, four.l_b, four.taus_seen, empty.l_b
    );
    assert!(verdict(7, ok, &what, elapsed));
}

// ------------------------------------------------------ desk-scale benchmark

struct SeedRun {
    seed: u64,
    report: RobustnessReport,
    ablation: Ablation,
}

struct Benchmark {
    runs: Vec<SeedRun>,
    elapsed: Duration,
}

fn pgd_result(report: &RobustnessReport, model: usize) -> &advcausal_core::eval::AttackResult {
    report.models[model]
        .attacks
        .iter()
        .find(|a| a.attack == advcausal_core::attacks::AttackKind::Pgd)
        .expect("benchmark config has a pgd attack")
}

fn bottom_30(report: &RobustnessReport, model: usize) -> f64 {
    pgd_result(report, model)
        .bottom_k
        .iter()
        .find(|b| b.k_percent == 30.0)
        .expect("bottom 30% is reported")
        .accuracy
}

fn split_row(ablation: &Ablation, set: TreatmentSet) -> f64 {
    ablation
        .rows
        .iter()
        .find(|r| r.use_split_crossfit && r.treatment_set == set)
        .expect("ablation covers every treatment set")
        .robust_acc
}

/// Runs the paired AT / ADML-over-AT benchmark once and shares it between the
/// two criteria that read it.
fn benchmark() -> &'static Benchmark {
    static CELL: OnceLock<Benchmark> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let root = tempfile::tempdir().unwrap();
        let runs = (0..5)
            .map(|seed| {
                let config = ExperimentConfig::load(&configs().join("benchmark.conf"), Some(seed)).unwrap();
                let p = Pipeline::new(config, Some(root.path().join(format!("seed{seed}"))), 4);
                p.gen_data().unwrap();
                let at = p.train(TrainTarget::At, None).unwrap();
                let adml = p.train(TrainTarget::Adml, Some(at.as_path())).unwrap();
                let report = p.report(&[at.clone(), adml]).unwrap();
                let ablation = p.ablate(Some(at.as_path())).unwrap();
                SeedRun { seed, report, ablation }
            })
            .collect();
        Benchmark {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_08_directional_robustness() {
    let bench = benchmark();
    let (mut delta, mut bottom, mut order) = (0, 0, 0);
    for r in &bench.runs {
        let (at, adml) = (pgd_result(&r.report, 0), pgd_result(&r.report, 1));
        let d = adml.accuracy.overall - at.accuracy.overall;
        let (b_at, b_adml) = (bottom_30(&r.report, 0), bottom_30(&r.report, 1));
        let (w, a, n) = (
            split_row(&r.ablation, TreatmentSet::Worst),
            split_row(&r.ablation, TreatmentSet::All),
            split_row(&r.ablation, TreatmentSet::NonWorst),
        );
        delta += usize::from(d >= 0.0);
        bottom += usize::from(b_adml > b_at);
        order += usize::from(w >= a && a >= n);
        println!(
            "  seed {}: pgd {:.4} -> {:.4} (delta {:+.4}), bottom-30% {:.4} -> {:.4}, ablation worst {:.4} all {:.4} non-worst {:.4}",
            r.seed, at.accuracy.overall, adml.accuracy.overall, d, b_at, b_adml, w, a, n
        );
    }
    let in_budget = bench.elapsed < Duration::from_secs(15 * 60);
    let ok = delta >= 4 && bottom >= 4 && order >= 3 && in_budget;
    let what = format!(
        "(a) delta >= 0 in {delta}/5, (b) bottom-30% higher in {bottom}/5, (c) worst >= all >= non-worst in {order}/5"
    );
    assert!(verdict(8, ok, &what, bench.elapsed));
}

#[test]
fn criterion_09_relative_causal_ratio() {
    let bench = benchmark();
    let mut below = 0;
    for r in &bench.runs {
        let rho = r.report.relative_ratio.as_ref().expect("paired report carries a ratio").avg;
        below += usize::from(rho < 100.0);
        println!("  seed {}: rho_avg {rho:.2}", r.seed);
    }
    let ok = below >= 4;
    assert!(verdict(9, ok, &format!("rho_avg < 100 in {below}/5 seeds"), bench.elapsed));
}

// ---------------------------------------------------------- reproducibility

fn run_toy(out: &Path) {
    let cfg = configs().join("toy.conf");
    let steps: [&[&str]; 7] = [
        &["gen-data"],
        &["train", "--defense", "at"],
        &["train", "--defense", "adml"],
        &["attack", "--checkpoint", "CK/at.advc", "--attack", "pgd"],
        &["estimate-theta", "--checkpoint", "CK/adml.advc"],
        &["report", "--checkpoints", "CK/at.advc,CK/adml.advc"],
        &["ablate", "--checkpoint", "CK/at.advc"],
    ];
    let ck = out.join("checkpoints");
    for step in steps {
        let args: Vec<String> = step.iter().map(|a| a.replace("CK", ck.to_str().unwrap())).collect();
        let o = Command::new(env!("CARGO_BIN_EXE_advcausal"))
            .arg("--config")
            .arg(&cfg)
            .args(["--threads", "1", "--out"])
            .arg(out)
            .args(&args)
            .env_remove("ADVCAUSAL_OUT")
            .output()
            .unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

fn collect(root: &Path, dir: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, into);
        } else {
            into.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
        }
    }
}

#[test]
fn criterion_10_byte_for_byte_reproducibility() {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_toy(a.path());
    run_toy(b.path());
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    collect(a.path(), a.path(), &mut fa);
    collect(b.path(), b.path(), &mut fb);
    let differing: Vec<&PathBuf> = fa.iter().filter(|(k, v)| fb.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    let svgs = fa.keys().filter(|k| k.extension().is_some_and(|e| e == "svg")).count();
    let ok = !fa.is_empty() && fa.len() == fb.len() && differing.is_empty() && svgs > 0;
    let what = format!("{} files ({svgs} SVG), {} differ", fa.len(), differing.len());
    assert!(verdict(10, ok, &what, start.elapsed()), "{differing:?}");
}
