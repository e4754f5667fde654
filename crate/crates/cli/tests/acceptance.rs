//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use contextspace_core::info::{conditional_mi, interaction_information, mutual_information, DEFAULT_ORACLE_CELL_CAP};
use contextspace_core::selection::greedy_rank;
use contextspace_core::subspace::{build_subspace, domain_from_table, fit_loss_map, predict};
use contextspace_core::synth::{evaluate_pipeline, generate};
use contextspace_core::{discretize, empirical_loss, infer_schema, run_pipeline, PipelineConfig, ScenarioSpec, Var};
use rand::Rng;
use support::*;

const TOL: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn load_spec(name: &str) -> ScenarioSpec {
    ScenarioSpec::from_path(fixture(name)).unwrap()
}

fn mi_and_cmi_match_oracles() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let cards = random_shape(&mut r, 4, 8);
        let n = r.random_range(20..=1000);
        let loss_card = r.random_range(2..=4);
        let signal = r.random_range(0.0..1.0);
        let t = random_table(&mut r, n, &cards, loss_card, signal);
        let l = loss_column(&t);
        let cols: Vec<Vec<u32>> = (0..cards.len()).map(|j| feature_column(&t, j)).collect();
        for a in 0..cards.len() {
            let fast = mutual_information(&t, Var::Loss, Var::Feature(a)).unwrap();
            worst = worst.max((fast - mi_eq5(&l, &cols[a])).abs());
            for b in (0..cards.len()).filter(|&b| b != a) {
                let fast = conditional_mi(&t, Var::Loss, Var::Feature(a), Var::Feature(b)).unwrap();
                worst = worst.max((fast - cmi_eq8(&l, &cols[a], &cols[b])).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= TOL && elapsed < Duration::from_secs(30),
        format!("max |diff| {worst:.2e} over 200 tables in {:.1}s", elapsed.as_secs_f64()),
    )
}

fn interaction_information_matches_expansion() -> Outcome {
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 1..=3 {
        for _ in 0..30 {
            let cards: Vec<usize> = (0..k).map(|_| r.random_range(1..=6)).collect();
            let n = r.random_range(50..=2000);
            let (loss_card, signal) = (r.random_range(2..=3), r.random_range(0.0..1.0));
            let t = random_table(&mut r, n, &cards, loss_card, signal);
            let features: Vec<usize> = (0..k).collect();
            let fast = interaction_information(&t, &features, DEFAULT_ORACLE_CELL_CAP).unwrap();
            let l = loss_column(&t);
            let cols: Vec<Vec<u32>> = features.iter().map(|&j| feature_column(&t, j)).collect();
            let mut all: Vec<&[u32]> = vec![&l];
            all.extend(cols.iter().map(|c| c.as_slice()));
            worst = worst.max((fast - ii_expansion(&all)).abs());
            cases += 1;
        }
    }
    check(worst <= TOL, format!("max |diff| {worst:.2e} over {cases} tables, K <= 3"))
}

fn first_pick_is_argmax_mi() -> Outcome {
    let mut r = rng(103);
    let mut agree = 0;
    for _ in 0..50 {
        let cards = random_shape(&mut r, 6, 8);
        let (n, signal) = (r.random_range(100..=1000), r.random_range(0.0..1.0));
        let t = random_table(&mut r, n, &cards, 2, signal);
        let l = loss_column(&t);
        let oracle: Vec<f64> = (0..cards.len()).map(|j| mi_eq5(&l, &feature_column(&t, j))).collect();
        let ranked = greedy_rank(&t, 1).unwrap();
        if ranked.order[0] == argmax_lowest(&oracle, TOL) {
            agree += 1;
        }
    }
    check(agree == 50, format!("{agree}/50 first picks equal the oracle argmax"))
}

fn appendix_gap_vanishes() -> Outcome {
    let gaps: Vec<f64> = APPENDIX_EPSILONS.iter().map(|&e| appendix_gap(e)).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let last = *gaps.last().unwrap();
    let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.5}")).collect();
    check(monotone && last < 0.01, format!("gaps [{}]", shown.join(", ")))
}

fn two_planted_recovered() -> Outcome {
    let start = Instant::now();
    let base = load_spec("two_planted.toml");
    let mut hits = 0;
    for s in 0..20 {
        let spec = base.clone().with_seed(base.seed + s);
        let (summary, _) = evaluate_pipeline(&spec, &PipelineConfig::default()).unwrap();
        if summary.planted_ranked_top && summary.chosen_k == 2 {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        hits >= 18 && elapsed < Duration::from_secs(120),
        format!("{hits}/20 seeds rank both planted features top and choose K = 2, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn test_domain_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut names = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(fixture("")).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries.iter().filter(|p| p.extension().is_some_and(|e| e == "toml")) {
        let spec = ScenarioSpec::from_path(path).unwrap();
        let g = generate(&spec).unwrap();
        let run = run_pipeline(&g.test, &g.operating, &PipelineConfig::default()).unwrap();
        let empirical = empirical_loss(&run.table);
        worst = worst.max((run.test_prediction.predicted_loss - empirical).abs());

        let all: Vec<usize> = (0..run.table.n_features()).collect();
        let full = build_subspace(run.table.schema(), &all).unwrap();
        let map = fit_loss_map(&run.table, &full).unwrap();
        let p = predict(&map, &domain_from_table(&run.table, &full, "test").unwrap()).unwrap();
        worst = worst.max((p.predicted_loss - empirical).abs());
        names.push(spec.name);
    }
    check(worst <= TOL, format!("max |diff| {worst:.2e} on {}", names.join(", ")))
}

fn bdd_like_error_bands() -> Outcome {
    let spec = load_spec("bdd_like.toml");
    let (summary, _) = evaluate_pipeline(&spec, &PipelineConfig::default()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for d in &summary.domains {
        let band = if d.untested_mass < 0.05 {
            Some(0.02)
        } else if d.untested_mass < 0.20 {
            Some(0.05)
        } else {
            None
        };
        if band.is_some_and(|b| d.abs_error > b) {
            ok = false;
        }
        if d.untested_mass > 0.0 && d.predicted_loss < d.true_loss - 0.01 {
            ok = false;
        }
        parts.push(format!(
            "{} err {:.4} untested {:.3}",
            d.name, d.abs_error, d.untested_mass
        ));
    }
    check(ok, format!("K = {}; {}", summary.chosen_k, parts.join("; ")))
}

fn sixty_cell_map() -> Outcome {
    let g = generate(&load_spec("bdd_like.toml")).unwrap();
    let schema = infer_schema(&g.test, PipelineConfig::default().max_numeric_levels).unwrap();
    let table = discretize(&g.test, &schema, 10).unwrap();
    let names = schema.names();
    let idx: Vec<usize> = ["brightness", "safety_critical", "scene"]
        .iter()
        .map(|n| names.iter().position(|m| m == n).unwrap())
        .collect();
    let sub = build_subspace(table.schema(), &idx).unwrap();
    let map = fit_loss_map(&table, &sub).unwrap();
    let cells = sub.cell_count();
    check(
        sub.dims() == [10, 2, 3] && cells == 60 && map.expected_loss.len() == 60,
        format!("dims {:?}, {cells} cells, {} untested", sub.dims(), map.untested_cells()),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_contextspace"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn cli_pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = dir.join("data");
    let out = dir.join("out");
    let input = s(&data.join("test.csv"));
    cli(&["synth", "--spec", &s(&fixture("bdd_like.toml")), "--out", &s(&data)])?;
    cli(&["rank", "--input", &input, "--out", &s(&out)])?;
    cli(&["select-k", "--input", &input, "--out", &s(&out)])?;
    cli(&["fit", "--input", &input, "--out", &s(&out)])?;
    let domains: Vec<String> = ["dark_dense", "bright_sparse"]
        .iter()
        .map(|d| format!("{d}={}", s(&data.join(format!("operating_{d}.csv")))))
        .collect();
    let mut args = vec!["predict".to_string(), "--out".into(), s(&out)];
    for d in &domains {
        args.extend(["--domain".to_string(), d.clone()]);
    }
    cli(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
    cli(&["report", "--out", &s(&out)])?;

    let mut files = BTreeMap::new();
    for sub in [&data, &out] {
        for entry in fs::read_dir(sub).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let key = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            files.insert(key, fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn cli_runs_are_byte_identical() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = cli_pipeline(a.path())?;
    let second = cli_pipeline(b.path())?;
    let differing: Vec<&String> = first
        .iter()
        .filter(|(k, v)| second.get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let has_core = ["out/ranking.json", "out/dimensionality.json", "out/loss_map.json", "out/report.md"]
        .iter()
        .all(|k| first.contains_key(*k));
    check(
        differing.is_empty() && first.len() == second.len() && has_core,
        format!("{} artifacts compared, differing: {differing:?}", first.len()),
    )
}

fn uninformative_curve_flat() -> Outcome {
    let spec = load_spec("uninformative.toml");
    let (summary, run) = evaluate_pipeline(&spec, &PipelineConfig::default()).unwrap();
    let e = &summary.epsilon_tilde;
    let flat = e.iter().all(|&v| v >= e[0] - 0.005);
    let shown: Vec<String> = e.iter().map(|v| format!("{v:.4}")).collect();
    check(
        flat && run.report.uninformative,
        format!("curve [{}], flagged {}", shown.join(", "), run.report.uninformative),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("fast MI and CMI match literal sums", mi_and_cmi_match_oracles),
        ("recursive interaction information matches expansion", interaction_information_matches_expansion),
        ("first greedy pick is the MI argmax", first_pick_is_argmax_mi),
        ("redundancy-penalized gap to interaction information vanishes", appendix_gap_vanishes),
        ("two planted features recovered with K = 2", two_planted_recovered),
        ("test-domain prediction equals empirical loss", test_domain_identity),
        ("bdd_like prediction error within bands", bdd_like_error_bands),
        ("10 x 2 x 3 subspace has 60 cells", sixty_cell_map),
        ("CLI pipeline is byte-reproducible", cli_runs_are_byte_identical),
        ("uninformative context gives a flat curve", uninformative_curve_flat),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
