use std::path::{Path, PathBuf};

use contextspace_core::data::DEFAULT_MAX_NUMERIC_LEVELS;
use contextspace_core::heatmap::{slices, HeatmapSlice};
use contextspace_core::selection::{default_k_max, greedy_rank, select_dimensionality, DEFAULT_FLAT_TOLERANCE};
use contextspace_core::subspace::{build_subspace, domain_from_marginals, domain_from_samples, domain_from_table, fit_loss_map, predict};
use contextspace_core::synth::generate;
use contextspace_core::{
    discretize, infer_schema, load_contexts, load_samples, write_contexts, write_samples, DomainDistribution,
    MarginalsFile, RankedFeatures, SampleTable, ScenarioSpec, SplitConfig, TOOL_VERSION,
};

use crate::artifacts::*;
use crate::error::{CliError, Result};
use crate::{DataArgs, PredictArgs, SynthArgs};

/// Discretized input table and its greedy ranking.
struct Ranked {
    table: SampleTable,
    ranked: RankedFeatures,
    k_max: usize,
}

fn load_and_rank(args: &DataArgs) -> Result<Ranked> {
    let raw = load_samples(&args.input, &args.loss_column)?;
    let schema = infer_schema(&raw, DEFAULT_MAX_NUMERIC_LEVELS)?;
    let table = discretize(&raw, &schema, args.bins)?;
    let k_max = args.k_max.unwrap_or_else(|| default_k_max(table.n_features()));
    let ranked = greedy_rank(&table, k_max)?;
    Ok(Ranked { table, ranked, k_max })
}

fn names(table: &SampleTable, order: &[usize]) -> Vec<String> {
    order.iter().map(|&f| table.schema().features()[f].name.clone()).collect()
}

fn write_slices(dir: &Path, prefix: &str, slices: &[HeatmapSlice]) -> Result<()> {
    for (i, s) in slices.iter().enumerate() {
        write_text(&dir.join(format!("{prefix}_slice{i}.csv")), &s.to_csv())?;
    }
    Ok(())
}

pub fn rank(args: &DataArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let Ranked { table, ranked, k_max } = load_and_rank(args)?;
    let schema = table.schema();
    write_json(
        &args.out.join(SCHEMA),
        &SchemaArtifact {
            tool_version: TOOL_VERSION.into(),
            seed: args.seed,
            loss_column: args.loss_column.clone(),
            schema: schema.clone(),
        },
    )?;

    let mut csv = String::from("iteration,feature,score,selected\n");
    for (it, candidates) in ranked.per_iteration_scores.iter().enumerate() {
        for c in candidates {
            let selected = c.feature == ranked.order[it];
            csv.push_str(&format!(
                "{},{},{},{}\n",
                it + 1,
                schema.features()[c.feature].name,
                c.score,
                selected as u8
            ));
        }
    }
    write_text(&args.out.join(SCORES), &csv)?;

    write_json(
        &args.out.join(RANKING),
        &RankingArtifact {
            tool_version: TOOL_VERSION.into(),
            seed: args.seed,
            schema: schema.clone(),
            subspace: ranked.order.iter().map(|&f| schema.features()[f].clone()).collect(),
            k_max,
            order: names(&table, &ranked.order),
            scores: ranked.scores.clone(),
            per_iteration_scores: ranked
                .per_iteration_scores
                .iter()
                .map(|it| it.iter().map(|c| ScoredFeature::new(schema, c)).collect())
                .collect(),
            candidate_scorings: ranked.candidate_scorings,
        },
    )
}

struct Selected {
    table: SampleTable,
    ranked: RankedFeatures,
    report: contextspace_core::DimensionalityReport,
}

fn load_and_select(args: &DataArgs) -> Result<Selected> {
    let Ranked { table, ranked, k_max } = load_and_rank(args)?;
    let cfg = SplitConfig {
        iterations: args.iterations,
        split: args.split,
        seed: args.seed,
    };
    let report = select_dimensionality(&table, &ranked, k_max, &cfg, DEFAULT_FLAT_TOLERANCE)?;
    Ok(Selected { table, ranked, report })
}

pub fn select_k(args: &DataArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let Selected { table, ranked, report } = load_and_select(args)?;
    let subspace = build_subspace(table.schema(), &ranked.order[..report.chosen_k])?;

    let mut csv = String::from("k,epsilon_tilde,chosen\n");
    for (k, e) in report.epsilon_tilde.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", k + 1, e, (k + 1 == report.chosen_k) as u8));
    }
    write_text(&args.out.join(EPSILON_CURVE), &csv)?;
    if report.uninformative {
        eprintln!("warning: context uninformative (error curve is flat or rising from K = 1)");
    }
    write_json(
        &args.out.join(DIMENSIONALITY),
        &DimensionalityArtifact {
            tool_version: TOOL_VERSION.into(),
            seed: args.seed,
            schema: table.schema().clone(),
            subspace,
            ranking: names(&table, &ranked.order),
            report,
        },
    )
}

pub fn fit(args: &DataArgs, k: Option<usize>) -> Result<()> {
    ensure_dir(&args.out)?;
    let (table, ranked, chosen_k) = match k {
        Some(k) => {
            let Ranked { table, ranked, .. } = load_and_rank(&DataArgs {
                k_max: Some(args.k_max.unwrap_or(k).max(k)),
                ..args.clone()
            })?;
            (table, ranked, k)
        }
        None => {
            let s = load_and_select(args)?;
            let k = s.report.chosen_k;
            (s.table, s.ranked, k)
        }
    };
    if chosen_k == 0 || chosen_k > ranked.order.len() {
        return Err(CliError::Usage(format!("--k must lie in 1..={}", ranked.order.len())));
    }
    let subspace = build_subspace(table.schema(), &ranked.order[..chosen_k])?;
    let loss_map = fit_loss_map(&table, &subspace)?;
    let test_domain = domain_from_table(&table, &subspace, "test")?;
    let test_prediction = predict(&loss_map, &test_domain)?;

    let g_slices = slices(&subspace, &loss_map.expected_loss);
    write_slices(&args.out, "g", &g_slices)?;
    write_slices(&args.out, "p_test", &slices(&subspace, &test_domain.mass))?;

    write_json(
        &args.out.join(LOSS_MAP),
        &LossMapArtifact {
            tool_version: TOOL_VERSION.into(),
            seed: args.seed,
            schema: table.schema().clone(),
            ranking: names(&table, &ranked.order),
            chosen_k,
            cell_labels: (0..subspace.cell_count()).map(|c| subspace.cell_label(c)).collect(),
            slices: g_slices.iter().map(|s| s.title.clone()).collect(),
            loss_map,
            test_prediction,
        },
    )
}

/// `name=path`, with the name restricted to characters safe in file names.
pub fn parse_domain(arg: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, path) = arg
        .split_once('=')
        .ok_or_else(|| format!("expected <name>=<path>, got `{arg}`"))?;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(format!("domain name `{name}` may only use letters, digits, `_` and `-`"));
    }
    if path.is_empty() {
        return Err(format!("domain `{name}` has no path"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn load_domain(map: &contextspace_core::LossMap, name: &str, path: &Path) -> Result<(DomainDistribution, &'static str)> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let file: MarginalsFile = match read_json(path) {
            Err(CliError::MissingArtifact(p)) => {
                return Err(CliError::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)))
            }
            other => other?,
        };
        let marginals = file.resolve(&map.subspace)?;
        Ok((domain_from_marginals(&marginals, &map.subspace, name)?, "marginals"))
    } else {
        let records = load_contexts(path)?;
        Ok((domain_from_samples(&records, &map.subspace, name)?, "samples"))
    }
}

pub fn predict_domains(args: &PredictArgs) -> Result<()> {
    if args.domain.is_empty() {
        return Err(CliError::Usage("at least one --domain <name>=<path> is required".into()));
    }
    ensure_dir(&args.out)?;
    let map_path = args.loss_map.clone().unwrap_or_else(|| args.out.join(LOSS_MAP));
    let artifact: LossMapArtifact = read_json(&map_path)?;
    for (name, path) in &args.domain {
        let (domain, source) = load_domain(&artifact.loss_map, name, path)?;
        let report = predict(&artifact.loss_map, &domain)?;
        write_slices(&args.out, &format!("p_{name}"), &slices(&domain.subspace, &domain.mass))?;
        write_json(
            &args.out.join(prediction_file(name)),
            &PredictionArtifact {
                tool_version: TOOL_VERSION.into(),
                seed: artifact.seed,
                schema: artifact.schema.clone(),
                subspace: domain.subspace.clone(),
                domain: name.clone(),
                source: source.into(),
                mass: domain.mass,
                report,
            },
        )?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = ScenarioSpec::from_path(&args.spec)?;
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }
    ensure_dir(&args.out)?;
    let g = generate(&spec)?;
    write_samples(args.out.join("test.csv"), &g.test, &args.loss_column)?;
    for (name, records) in &g.operating {
        write_contexts(args.out.join(format!("operating_{name}.csv")), records)?;
    }
    write_json(
        &args.out.join(TRUTH),
        &TruthArtifact {
            tool_version: TOOL_VERSION.into(),
            seed: spec.seed,
            n_test: spec.n_test,
            n_operating: spec.n_operating,
            truth: g.truth,
        },
    )
}
