//! Subcommand implementations. Each command resolves its configuration,
//! runs the stages it needs, writes its reports under the output
//! directory and prints a one-line summary to stdout.

use std::fs;
use std::path::{Path, PathBuf};

use citegap::corpus::MonthIdx;
use citegap::imbalance::{
    delta_stat, median_points_stat, run_family, tally, trend_stat, yearly_overcitation,
    CitationTally, Conditioning, Dataset, EvalCtx, ResampleOpts, Statistic, TallyOptions,
    UnknownMode,
};
use citegap::inference::{
    conditional_overcitation, run_regression, RegressionReport, RegressionSpec,
};
use citegap::network::{CoauthorNetwork, NetworkConfig};
use citegap::report::{
    CellEstimate, ConditionalColumn, ConditionalTable, Manifest, ResultRow,
    MANIFEST_SCHEMA_VERSION,
};
use citegap::synth::{generate, name_table_csv, SynthConfig};
use citegap::GenderCategory;

use crate::config::{RunConfig, StatementArgs, SynthArgs};
use crate::pipeline;
use crate::stage::{at, StageError};
use crate::statement;

fn ensure_out_dir(config: &RunConfig) -> Result<PathBuf, StageError> {
    fs::create_dir_all(&config.output_dir).map_err(|e| {
        StageError::new(
            "report",
            format!("cannot create {}: {e}", config.output_dir.display()),
        )
    })?;
    Ok(config.output_dir.clone())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StageError> {
    fs::write(path, bytes)
        .map_err(|e| StageError::new("report", format!("cannot write {}: {e}", path.display())))
}

fn manifest(config: &RunConfig, model_hash: Option<String>) -> Result<Manifest, StageError> {
    Ok(Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: config.seed,
        bootstrap_replicates: config.bootstrap_replicates,
        null_randomizations: config.null_randomizations,
        self_cite_def: config.self_def()?.map(|def| def.as_str().to_string()),
        imputation: if config.impute_missing { "impute" } else { "exclude" }.to_string(),
        threshold: config.threshold,
        model_hash,
        config: serde_json::to_value(config).map_err(at("cli"))?,
    })
}

pub fn ingest(config: &RunConfig) -> Result<(), StageError> {
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let m = manifest(config, None)?;

    let mut corpus_bytes = Vec::new();
    stage.corpus.write_jsonl(&mut corpus_bytes).map_err(at("report"))?;
    write_file(&out.join("corpus.normalized.jsonl"), &corpus_bytes)?;

    let mut report_bytes = Vec::new();
    stage.report.write_jsonl(&mut report_bytes).map_err(at("report"))?;
    write_file(&out.join("rejections.jsonl"), &report_bytes)?;

    let summary = serde_json::json!({
        "records": stage.corpus.len(),
        "rejections": stage.report.rejections.len(),
        "notes": stage.report.notes.len(),
        "options_hash": m.options_hash(),
    });
    write_file(&out.join("ingest_summary.json"), summary.to_string().as_bytes())?;
    println!(
        "ingest: {} records kept, {} rejected -> {}",
        stage.corpus.len(),
        stage.report.rejections.len(),
        out.display()
    );
    Ok(())
}

pub fn disambiguate(config: &RunConfig) -> Result<(), StageError> {
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let m = manifest(config, None)?;
    let hash = m.options_hash();

    let mut csv = String::from("author_id,display,family,occurrences,options_hash\n");
    for identity in &table.identities {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            identity.id, identity.display, identity.family, identity.occurrences, hash
        ));
    }
    write_file(&out.join("authors.csv"), csv.as_bytes())?;
    let summary = serde_json::json!({
        "identities": table.identities.len(),
        "unresolved_initials": table.unresolved_initials,
        "options_hash": hash,
    });
    write_file(&out.join("disambiguate_summary.json"), summary.to_string().as_bytes())?;
    println!(
        "disambiguate: {} identities ({} unresolved initials) -> {}",
        table.identities.len(),
        table.unresolved_initials,
        out.display()
    );
    Ok(())
}

pub fn gender(config: &RunConfig) -> Result<(), StageError> {
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let genders = pipeline::gender_stage(config, &stage.corpus, &table)?;
    let m = manifest(config, None)?;
    let hash = m.options_hash();

    let dois: Vec<String> = stage.corpus.records().iter().map(|r| r.doi.clone()).collect();
    let mut bytes = Vec::new();
    citegap::report::write_gender_csv(&mut bytes, &dois, &genders.outcome.papers, &hash)
        .map_err(at("report"))?;
    write_file(&out.join("gender.csv"), &bytes)?;

    let mut by_category = [0usize; 4];
    let mut unknown = 0usize;
    for paper in &genders.outcome.papers {
        match paper.category.index() {
            Some(i) => by_category[i] += 1,
            None => unknown += 1,
        }
    }
    let summary = serde_json::json!({
        "papers": genders.outcome.papers.len(),
        "mm": by_category[0], "wm": by_category[1],
        "mw": by_category[2], "ww": by_category[3],
        "unknown": unknown,
        "options_hash": hash,
    });
    write_file(&out.join("gender_summary.json"), summary.to_string().as_bytes())?;
    println!(
        "gender: {} papers categorized, {} unknown -> {}",
        genders.outcome.papers.len() - unknown,
        unknown,
        out.display()
    );
    Ok(())
}

pub fn fit(config: &RunConfig) -> Result<(), StageError> {
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let genders = pipeline::gender_stage(config, &stage.corpus, &table)?;
    let model = pipeline::model_stage(config, &stage.corpus, &table, &genders.outcome)?;
    let m = manifest(config, Some(model.hash.clone()))?;

    write_file(&out.join("model.json"), model.json.as_bytes())?;
    let summary = serde_json::json!({
        "lambda": model.model.lambda,
        "deviance": model.model.deviance,
        "edf": model.model.edf,
        "gcv": model.model.gcv,
        "model_hash": model.hash,
        "options_hash": m.options_hash(),
    });
    write_file(&out.join("fit_summary.json"), summary.to_string().as_bytes())?;
    println!(
        "fit: lambda {}, deviance {:.3} -> {}",
        model.model.lambda,
        model.model.deviance,
        out.display()
    );
    Ok(())
}

/// The citing-team conditionings reported in the main tables, in their
/// published column order.
fn team_conditionings() -> [Conditioning; 6] {
    [
        Conditioning::All,
        Conditioning::Group(GenderCategory::Mm),
        Conditioning::AnyWoman,
        Conditioning::Group(GenderCategory::Wm),
        Conditioning::Group(GenderCategory::Mw),
        Conditioning::Group(GenderCategory::Ww),
    ]
}

fn resample_opts(config: &RunConfig) -> ResampleOpts {
    ResampleOpts {
        bootstrap_replicates: config.bootstrap_replicates,
        null_randomizations: config.null_randomizations,
        seed: config.seed,
        unknowns: if config.impute_missing { UnknownMode::Impute } else { UnknownMode::Exclude },
    }
}

fn observed_tally(ds: &Dataset, opts: &TallyOptions) -> CitationTally {
    tally(&EvalCtx::observed(ds), opts)
}

/// Runs one Holm family and pairs each member with its labels.
fn run_block(
    ds: &Dataset,
    family: Vec<Box<dyn Statistic>>,
    labels: Vec<(String, String, String, f64)>,
    opts: &ResampleOpts,
) -> Result<Vec<ResultRow>, StageError> {
    let refs: Vec<&dyn Statistic> = family.iter().map(|b| b.as_ref()).collect();
    let results = run_family(ds, &refs, opts).map_err(at("imbalance"))?;
    Ok(results
        .into_iter()
        .zip(labels)
        .map(|(result, (statistic, cited, citing, n))| ResultRow {
            statistic,
            cited_group: cited,
            citing_group: citing,
            result,
            n_citations: n,
        })
        .collect())
}

struct AnalysisOutputs {
    rows: Vec<ResultRow>,
    yearly: Vec<(String, String, Vec<citegap::imbalance::YearlyOvercitation>)>,
    regression: Option<RegressionReport>,
    conditional: ConditionalTable,
    stats: Vec<Option<citegap::network::NeighborhoodStats>>,
    network: CoauthorNetwork,
}

fn analysis(
    config: &RunConfig,
    ds: &Dataset,
    corpus: &citegap::corpus::Corpus,
    table: &citegap::authors::AuthorTable,
    genders: &pipeline::GenderStage,
    options_hash: &str,
) -> Result<AnalysisOutputs, StageError> {
    let self_def = config.self_def()?;
    let resample = resample_opts(config);
    let mut rows = Vec::new();

    // Δ per cited category, one Holm family per citing-team block.
    for conditioning in team_conditionings() {
        let opts = TallyOptions { conditioning, self_def };
        let observed = observed_tally(ds, &opts);
        let n: f64 = observed.obs.iter().sum();
        let mut family: Vec<Box<dyn Statistic>> = Vec::new();
        let mut labels = Vec::new();
        for cat in GenderCategory::KNOWN {
            family.push(Box::new(delta_stat(opts, cat)));
            labels.push((
                "delta".to_string(),
                cat.tag().to_string(),
                conditioning.tag().to_string(),
                n,
            ));
        }
        rows.extend(run_block(ds, family, labels, &resample)?);
    }

    // Yearly trend of the first category's overcitation, one family
    // across the citing-team blocks.
    {
        let mut family: Vec<Box<dyn Statistic>> = Vec::new();
        let mut labels = Vec::new();
        for conditioning in team_conditionings() {
            let opts = TallyOptions { conditioning, self_def };
            let observed = observed_tally(ds, &opts);
            family.push(Box::new(trend_stat(
                opts,
                GenderCategory::Mm,
                config.volume_weighted,
            )));
            labels.push((
                "trend".to_string(),
                GenderCategory::Mm.tag().to_string(),
                conditioning.tag().to_string(),
                observed.obs.iter().sum(),
            ));
        }
        rows.extend(run_block(ds, family, labels, &resample)?);
    }

    // Median per-paper overcitation per citing team (the unconditional
    // column of the network table).
    let median_rows = {
        let mut family: Vec<Box<dyn Statistic>> = Vec::new();
        let mut labels = Vec::new();
        for conditioning in team_conditionings() {
            let opts = TallyOptions { conditioning, self_def };
            let observed = observed_tally(ds, &opts);
            family.push(Box::new(median_points_stat(opts, GenderCategory::Mm)));
            labels.push((
                "median_points".to_string(),
                GenderCategory::Mm.tag().to_string(),
                conditioning.tag().to_string(),
                observed.obs.iter().sum(),
            ));
        }
        run_block(ds, family, labels, &resample)?
    };
    rows.extend(median_rows.iter().cloned());

    // Yearly series for plotting: every cited category over all citing
    // papers, plus the first category per citing team.
    let ctx = EvalCtx::observed(ds);
    let mut yearly = Vec::new();
    for cat in GenderCategory::KNOWN {
        let opts = TallyOptions { conditioning: Conditioning::All, self_def };
        yearly.push((
            cat.tag().to_string(),
            Conditioning::All.tag().to_string(),
            yearly_overcitation(&ctx, &opts, cat),
        ));
    }
    for conditioning in team_conditionings().into_iter().skip(1) {
        let opts = TallyOptions { conditioning, self_def };
        yearly.push((
            GenderCategory::Mm.tag().to_string(),
            conditioning.tag().to_string(),
            yearly_overcitation(&ctx, &opts, GenderCategory::Mm),
        ));
    }

    // Network composition and the adjusted regression.
    let categories: Vec<GenderCategory> =
        genders.outcome.papers.iter().map(|p| p.category).collect();
    let network = CoauthorNetwork::build(
        corpus,
        table,
        &genders.labels,
        &categories,
        &NetworkConfig { link_middle_authors: config.link_middle_authors },
    );
    let stats = network.all_stats();
    let regression_opts = TallyOptions { conditioning: Conditioning::All, self_def };
    let regression = match run_regression(
        ds,
        &stats,
        regression_opts,
        RegressionSpec::default(),
        &resample,
    ) {
        Ok(report) => Some(report),
        Err(e) => {
            log::warn!("network regression skipped: {e}");
            None
        }
    };
    if let Some(report) = &regression {
        for (term, result) in citegap::inference::REGRESSION_TERMS.iter().zip(&report.terms) {
            rows.push(ResultRow {
                statistic: format!("regression:{term}"),
                cited_group: GenderCategory::Mm.tag().to_string(),
                citing_group: Conditioning::All.tag().to_string(),
                result: result.clone(),
                n_citations: report.n_rows as f64,
            });
        }
    }

    // The conditional table: median overcitation per team, raw and at a
    // field-representative network.
    let mut columns = Vec::new();
    for (i, conditioning) in team_conditionings().into_iter().enumerate().skip(1) {
        let unconditional = median_rows
            .get(i)
            .and_then(|row| CellEstimate::from_result(&row.result));
        let given_network = match conditioning {
            Conditioning::Group(group) => regression
                .as_ref()
                .and_then(|report| conditional_overcitation(report, group))
                .and_then(CellEstimate::from_result),
            _ => None,
        };
        columns.push(ConditionalColumn {
            citing_group: conditioning.tag().to_string(),
            unconditional,
            given_network,
        });
    }
    let conditional = ConditionalTable {
        outcome: "mm_overcitation_points".to_string(),
        tau: RegressionSpec::default().tau,
        columns,
        options_hash: options_hash.to_string(),
    };

    Ok(AnalysisOutputs { rows, yearly, regression, conditional, stats, network })
}

pub fn analyze(config: &RunConfig) -> Result<(), StageError> {
    citegap::par::configure_workers(config.workers.unwrap_or(0));
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let genders = pipeline::gender_stage(config, &stage.corpus, &table)?;
    let model = pipeline::model_stage(config, &stage.corpus, &table, &genders.outcome)?;
    let data = pipeline::dataset_stage(&stage.corpus, &table, &genders.outcome, &model.probs);
    let m = manifest(config, Some(model.hash.clone()))?;
    let hash = m.options_hash();

    let outputs = analysis(config, &data.dataset, &stage.corpus, &table, &genders, &hash)?;

    let mut bytes = Vec::new();
    citegap::report::write_results_csv(&mut bytes, &outputs.rows, &hash).map_err(at("report"))?;
    write_file(&out.join("results.csv"), &bytes)?;

    let mut bytes = Vec::new();
    citegap::report::write_yearly_csv(&mut bytes, &outputs.yearly, &hash).map_err(at("report"))?;
    write_file(&out.join("yearly.csv"), &bytes)?;

    let mut bytes = Vec::new();
    citegap::report::write_edges_csv(&mut bytes, &outputs.network.edge_list(), &hash)
        .map_err(at("report"))?;
    write_file(&out.join("network_edges.csv"), &bytes)?;

    let dois: Vec<String> = stage.corpus.records().iter().map(|r| r.doi.clone()).collect();
    let mut bytes = Vec::new();
    citegap::report::write_neighborhoods_csv(&mut bytes, &dois, &outputs.stats, &hash)
        .map_err(at("report"))?;
    write_file(&out.join("neighborhoods.csv"), &bytes)?;

    if let Some(report) = &outputs.regression {
        let mut bytes = Vec::new();
        citegap::report::write_coefficients_csv(&mut bytes, report, &hash).map_err(at("report"))?;
        write_file(&out.join("coefficients.csv"), &bytes)?;
    }
    write_file(
        &out.join("conditional_table.json"),
        outputs.conditional.to_json().map_err(at("report"))?.as_bytes(),
    )?;

    let mut bytes = Vec::new();
    citegap::report::write_gender_csv(&mut bytes, &dois, &genders.outcome.papers, &hash)
        .map_err(at("report"))?;
    write_file(&out.join("gender.csv"), &bytes)?;

    write_file(&out.join("model.json"), model.json.as_bytes())?;
    write_file(&out.join("manifest.json"), m.to_json().map_err(at("report"))?.as_bytes())?;

    let mut report_bytes = Vec::new();
    stage.report.write_jsonl(&mut report_bytes).map_err(at("report"))?;
    write_file(&out.join("rejections.jsonl"), &report_bytes)?;

    println!(
        "analyze: {} citing papers, {} candidate citations, {} result rows -> {}",
        data.dataset.n_citing(),
        data.dataset.edges.len(),
        outputs.rows.len(),
        out.display()
    );
    Ok(())
}

pub fn network(config: &RunConfig) -> Result<(), StageError> {
    citegap::par::configure_workers(config.workers.unwrap_or(0));
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let genders = pipeline::gender_stage(config, &stage.corpus, &table)?;
    let m = manifest(config, None)?;
    let hash = m.options_hash();

    let categories: Vec<GenderCategory> =
        genders.outcome.papers.iter().map(|p| p.category).collect();
    let network = CoauthorNetwork::build(
        &stage.corpus,
        &table,
        &genders.labels,
        &categories,
        &NetworkConfig { link_middle_authors: config.link_middle_authors },
    );
    let stats = network.all_stats();

    let mut bytes = Vec::new();
    citegap::report::write_edges_csv(&mut bytes, &network.edge_list(), &hash)
        .map_err(at("report"))?;
    write_file(&out.join("network_edges.csv"), &bytes)?;

    let dois: Vec<String> = stage.corpus.records().iter().map(|r| r.doi.clone()).collect();
    let mut bytes = Vec::new();
    citegap::report::write_neighborhoods_csv(&mut bytes, &dois, &stats, &hash)
        .map_err(at("report"))?;
    write_file(&out.join("neighborhoods.csv"), &bytes)?;

    let horizon = stage
        .corpus
        .records()
        .iter()
        .map(|r| r.month_idx())
        .max()
        .map(|m| MonthIdx(m.0 + 1))
        .unwrap_or(MonthIdx(0));
    let measurable = stats.iter().flatten().count();
    let summary = serde_json::json!({
        "nodes": network.nodes_at(horizon).len(),
        "edges": network.edge_list().len(),
        "pi_m": network.pi_m(horizon),
        "pi_mm": network.pi_mm(horizon),
        "measurable_papers": measurable,
        "options_hash": hash,
    });
    write_file(&out.join("network_summary.json"), summary.to_string().as_bytes())?;
    println!(
        "network: {} edges, {} measurable papers -> {}",
        network.edge_list().len(),
        measurable,
        out.display()
    );
    Ok(())
}

pub fn regress(config: &RunConfig) -> Result<(), StageError> {
    citegap::par::configure_workers(config.workers.unwrap_or(0));
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let genders = pipeline::gender_stage(config, &stage.corpus, &table)?;
    let model = pipeline::model_stage(config, &stage.corpus, &table, &genders.outcome)?;
    let data = pipeline::dataset_stage(&stage.corpus, &table, &genders.outcome, &model.probs);
    let m = manifest(config, Some(model.hash.clone()))?;
    let hash = m.options_hash();

    let categories: Vec<GenderCategory> =
        genders.outcome.papers.iter().map(|p| p.category).collect();
    let network = CoauthorNetwork::build(
        &stage.corpus,
        &table,
        &genders.labels,
        &categories,
        &NetworkConfig { link_middle_authors: config.link_middle_authors },
    );
    let stats = network.all_stats();
    let opts = TallyOptions { conditioning: Conditioning::All, self_def: config.self_def()? };
    let report = run_regression(
        &data.dataset,
        &stats,
        opts,
        RegressionSpec::default(),
        &resample_opts(config),
    )
    .map_err(at("inference"))?;

    let mut bytes = Vec::new();
    citegap::report::write_coefficients_csv(&mut bytes, &report, &hash).map_err(at("report"))?;
    write_file(&out.join("coefficients.csv"), &bytes)?;
    write_file(&out.join("manifest.json"), m.to_json().map_err(at("report"))?.as_bytes())?;
    println!(
        "regress: {} rows, objective {:?} -> {}",
        report.n_rows,
        report.objective,
        out.display()
    );
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), StageError> {
    let mut config = match &args.synth_config {
        None => SynthConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                StageError::new("synth", format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| StageError::new("synth", format!("bad config {}: {e}", path.display())))?
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(papers) = args.papers {
        config.n_papers = papers;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)
        .map_err(|e| StageError::new("report", format!("cannot create {}: {e}", out.display())))?;

    let (corpus, truth) = generate(&config).map_err(at("synth"))?;
    let mut bytes = Vec::new();
    corpus.write_jsonl(&mut bytes).map_err(at("report"))?;
    write_file(&out.join("corpus.jsonl"), &bytes)?;
    let truth_json = serde_json::to_string_pretty(&truth).map_err(at("report"))?;
    write_file(&out.join("ground_truth.json"), truth_json.as_bytes())?;
    write_file(&out.join("name_table.csv"), name_table_csv().as_bytes())?;
    let config_json = serde_json::to_string_pretty(&config).map_err(at("report"))?;
    write_file(&out.join("synth_config.json"), config_json.as_bytes())?;
    println!(
        "synth: {} papers, seed {} -> {}",
        corpus.len(),
        config.seed,
        out.display()
    );
    Ok(())
}

pub fn diversity_statement(
    config: &RunConfig,
    args: &StatementArgs,
) -> Result<(), StageError> {
    let out = ensure_out_dir(config)?;
    let stage = pipeline::load_corpus(config)?;
    let table = pipeline::author_stage(config, &stage.corpus)?;
    let genders = pipeline::gender_stage(config, &stage.corpus, &table)?;
    let m = manifest(config, None)?;
    let hash = m.options_hash();

    let summary = match &args.refs {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                StageError::new("cli", format!("cannot read {}: {e}", path.display()))
            })?;
            let dois: Vec<&str> =
                text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            if dois.is_empty() {
                return Err(StageError::new("cli", "reference list is empty"));
            }
            statement::summarize(dois.iter().map(|doi| {
                stage
                    .corpus
                    .index_of(&citegap::corpus::normalize_doi(doi))
                    .map(|i| genders.outcome.papers[i].category)
            }))
        }
        None => statement::summarize(
            genders.outcome.papers.iter().map(|p| Some(p.category)),
        ),
    };

    write_file(&out.join("diversity_statement.txt"), summary.statement.as_bytes())?;
    let mut value = serde_json::to_value(&summary).map_err(at("report"))?;
    value
        .as_object_mut()
        .expect("summary serializes to an object")
        .insert("options_hash".into(), hash.clone().into());
    write_file(
        &out.join("diversity_statement.json"),
        serde_json::to_string_pretty(&value).map_err(at("report"))?.as_bytes(),
    )?;
    println!("{}", summary.statement);
    Ok(())
}
