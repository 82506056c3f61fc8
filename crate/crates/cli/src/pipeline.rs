//! Shared pipeline stages: corpus loading, author identities, gender
//! assignment, the expectation model and dataset assembly. Each stage
//! maps its module errors onto a stage name for error attribution.

use std::fs::File;
use std::io::BufReader;

use citegap::authors::gender::{assign_all, GenderOutcome, LocalTable, Overrides};
use citegap::authors::{
    build_author_table, AuthorTable, GenderCache, GenderSource, NicknameTable, RemoteService,
};
use citegap::corpus::{parse_corpus, Corpus, CorpusFormat, ParseReport};
use citegap::expectation::{
    build_all_features, fit, CategoryProbabilities, ExpectationModel, LambdaChoice, ModelSpec,
    PaperFeatures,
};
use citegap::imbalance::{flag_self_citations, Dataset};
use citegap::{GenderCategory, GenderLabel};

use crate::config::RunConfig;
use crate::stage::{at, StageError};

/// Environment variable naming the remote name-lookup endpoint.
pub const GENDER_URL_VAR: &str = "CITEGAP_GENDER_URL";
/// Environment variable holding the endpoint's API key.
pub const GENDER_KEY_VAR: &str = "CITEGAP_GENDER_KEY";

pub struct CorpusStage {
    pub corpus: Corpus,
    pub report: ParseReport,
}

pub fn load_corpus(config: &RunConfig) -> Result<CorpusStage, StageError> {
    let path = config
        .corpus
        .as_ref()
        .ok_or_else(|| StageError::new("cli", "corpus path is required (--corpus)"))?;
    let format: CorpusFormat = config.format.parse().map_err(at("cli"))?;
    let file = File::open(path)
        .map_err(|e| StageError::new("corpus", format!("cannot open {}: {e}", path.display())))?;
    let outcome = parse_corpus(BufReader::new(file), format);
    let mut corpus = outcome.corpus.map_err(at("corpus"))?;
    if let Some(window) = config.citing_window {
        corpus.citing_window = window;
    }
    if let Some(window) = config.cited_window {
        corpus.cited_window = window;
    }
    Ok(CorpusStage { corpus, report: outcome.report })
}

pub fn nickname_table(config: &RunConfig) -> Result<NicknameTable, StageError> {
    match &config.nickname_table {
        None => Ok(NicknameTable::builtin()),
        Some(path) => {
            let file = File::open(path).map_err(|e| {
                StageError::new("authors", format!("cannot open {}: {e}", path.display()))
            })?;
            NicknameTable::from_reader(BufReader::new(file)).map_err(at("authors"))
        }
    }
}

pub fn author_stage(config: &RunConfig, corpus: &Corpus) -> Result<AuthorTable, StageError> {
    Ok(build_author_table(corpus, &nickname_table(config)?))
}

pub struct GenderStage {
    pub outcome: GenderOutcome,
    /// One label per author identity.
    pub labels: Vec<GenderLabel>,
}

fn remote_service(config: &RunConfig) -> Result<Option<RemoteService>, StageError> {
    let endpoint = match std::env::var(GENDER_URL_VAR) {
        Ok(url) if !url.is_empty() => url,
        _ => return Ok(None),
    };
    let api_key = std::env::var(GENDER_KEY_VAR).ok();
    let cache = match &config.cache {
        Some(path) => GenderCache::open(path).map_err(at("authors"))?,
        None => GenderCache::in_memory(),
    };
    Ok(Some(RemoteService::new(endpoint, api_key, config.offline, cache)))
}

pub fn gender_stage(
    config: &RunConfig,
    corpus: &Corpus,
    table: &AuthorTable,
) -> Result<GenderStage, StageError> {
    let path = config.gender_table.as_ref().ok_or_else(|| {
        StageError::new("authors", "gender table path is required (--gender-table)")
    })?;
    let file = File::open(path)
        .map_err(|e| StageError::new("authors", format!("cannot open {}: {e}", path.display())))?;
    let local = LocalTable::from_reader(BufReader::new(file)).map_err(at("authors"))?;
    let overrides = match &config.overrides {
        None => Overrides::default(),
        Some(path) => {
            let file = File::open(path).map_err(|e| {
                StageError::new("authors", format!("cannot open {}: {e}", path.display()))
            })?;
            Overrides::from_reader(BufReader::new(file)).map_err(at("authors"))?
        }
    };
    let remote = remote_service(config)?;
    let mut sources: Vec<&dyn GenderSource> = vec![&local];
    if let Some(service) = &remote {
        sources.push(service);
    }
    let outcome = assign_all(corpus, table, &sources, &overrides, config.threshold);
    let labels = outcome.assignments.iter().map(|a| a.label).collect();
    Ok(GenderStage { outcome, labels })
}

pub struct ModelStage {
    pub model: ExpectationModel,
    pub probs: Vec<CategoryProbabilities>,
    /// The model's serialized form and its hash (embedded in the
    /// manifest).
    pub json: String,
    pub hash: String,
}

pub fn model_stage(
    config: &RunConfig,
    corpus: &Corpus,
    table: &AuthorTable,
    outcome: &GenderOutcome,
) -> Result<ModelStage, StageError> {
    let features = build_all_features(corpus, table);
    let model = match &config.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                StageError::new("expectation", format!("cannot read {}: {e}", path.display()))
            })?;
            ExpectationModel::from_json(&text).map_err(at("expectation"))?
        }
        None => {
            let data: Vec<(PaperFeatures, GenderCategory)> = features
                .iter()
                .zip(&outcome.papers)
                .filter(|(_, paper)| paper.category.is_known())
                .map(|(f, paper)| (f.clone(), paper.category))
                .collect();
            let spec = ModelSpec {
                lambda: LambdaChoice::GcvGrid,
                use_subfield: config.subfield_covariate,
                ..ModelSpec::default()
            };
            fit(&spec, &data).map_err(at("expectation"))?
        }
    };
    let probs = model.predict_many(&features);
    let json = model.to_json().map_err(at("expectation"))?;
    let hash = citegap::report::sha256_hex(json.as_bytes());
    Ok(ModelStage { model, probs, json, hash })
}

pub struct DatasetStage {
    pub dataset: Dataset,
    pub edges: Vec<citegap::corpus::CitationEdge>,
    pub per_paper: Vec<citegap::corpus::LinkCounts>,
}

pub fn dataset_stage(
    corpus: &Corpus,
    table: &AuthorTable,
    outcome: &GenderOutcome,
    probs: &[CategoryProbabilities],
) -> DatasetStage {
    let mut link = citegap::corpus::link_references(corpus);
    flag_self_citations(&mut link.edges, table);
    let dataset = Dataset::build(corpus, &link.edges, &outcome.papers, probs);
    DatasetStage { dataset, edges: link.edges, per_paper: link.per_paper }
}
