//! Run configuration: a JSON file with a versioned schema, overridable
//! field-by-field from the command line (flags win). The resolved
//! configuration is serialized verbatim into every output's manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use citegap::corpus::SelfCiteDef;

use crate::stage::StageError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Corpus file (JSON lines or CSV).
    pub corpus: Option<PathBuf>,
    /// `jsonl` or `csv`.
    pub format: String,
    /// Local `name,p_woman,count` table; required for gender stages.
    pub gender_table: Option<PathBuf>,
    /// Nickname/diminutive table; the built-in table when absent.
    pub nickname_table: Option<PathBuf>,
    /// Manual name/paper overrides (JSON).
    pub overrides: Option<PathBuf>,
    /// On-disk cache for remote name lookups.
    pub cache: Option<PathBuf>,
    /// Load this fitted expectation model instead of refitting.
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Citing-paper year window; corpus defaults when absent.
    pub citing_window: Option<(i32, i32)>,
    /// Cited-paper year window; corpus defaults when absent.
    pub cited_window: Option<(i32, i32)>,
    /// Gender-probability threshold for man/woman labels.
    pub threshold: f64,
    /// Drop self-citations under this definition
    /// (`primary|broad-citing|broad-cited|surname`); keep them when
    /// absent.
    pub self_cite_def: Option<String>,
    /// Impute unknown cited categories from the model instead of
    /// excluding them.
    pub impute_missing: bool,
    pub bootstrap_replicates: usize,
    pub null_randomizations: usize,
    pub seed: u64,
    /// Include the subfield column as a model covariate.
    pub subfield_covariate: bool,
    /// Volume-weight trend fits by yearly candidate citations.
    pub volume_weighted: bool,
    /// Also link middle authors already in the network (sensitivity).
    pub link_middle_authors: bool,
    /// Never call the remote name service.
    pub offline: bool,
    /// Worker threads for the resampling layers; library default when
    /// absent.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            corpus: None,
            format: "jsonl".into(),
            gender_table: None,
            nickname_table: None,
            overrides: None,
            cache: None,
            model: None,
            output_dir: PathBuf::from("out"),
            citing_window: None,
            cited_window: None,
            threshold: 0.70,
            self_cite_def: None,
            impute_missing: false,
            bootstrap_replicates: citegap::imbalance::DEFAULT_BOOTSTRAP_REPLICATES,
            null_randomizations: citegap::imbalance::DEFAULT_NULL_RANDOMIZATIONS,
            seed: 0,
            subfield_covariate: false,
            volume_weighted: true,
            link_middle_authors: false,
            offline: false,
            workers: None,
        }
    }
}

impl RunConfig {
    /// The self-citation definition as the library enum, if set.
    pub fn self_def(&self) -> Result<Option<SelfCiteDef>, StageError> {
        self.self_cite_def
            .as_deref()
            .map(parse_self_cite_def)
            .transpose()
    }
}

/// Accepts the flag spellings (`broad-citing`, `surname`) as well as
/// the library's own (`broad_citing`, `surname_strict`).
pub fn parse_self_cite_def(text: &str) -> Result<SelfCiteDef, StageError> {
    let canonical = match text.replace('-', "_").as_str() {
        "surname" => "surname_strict".to_string(),
        other => other.to_string(),
    };
    canonical
        .parse::<SelfCiteDef>()
        .map_err(|e| StageError::new("cli", e))
}

/// Flags shared by the pipeline subcommands. Every flag overrides the
/// corresponding configuration-file field.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON run-configuration file; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Corpus format: jsonl or csv.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long = "gender-table")]
    pub gender_table: Option<PathBuf>,
    #[arg(long = "nickname-table")]
    pub nickname_table: Option<PathBuf>,
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Load this fitted expectation model instead of refitting.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "replicates-bootstrap")]
    pub replicates_bootstrap: Option<usize>,
    #[arg(long = "replicates-null")]
    pub replicates_null: Option<usize>,
    /// Drop self-citations under this definition.
    #[arg(long = "self-cite-def", value_parser = ["primary", "broad-citing", "broad-cited", "surname"])]
    pub self_cite_def: Option<String>,
    /// Impute unknown cited categories from the model.
    #[arg(long = "impute-missing")]
    pub impute_missing: bool,
    /// Never call the remote name service.
    #[arg(long)]
    pub offline: bool,
    /// Worker threads for the resampling layers.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads the configuration file (when given) and applies flags on top.
pub fn resolve(args: &CommonArgs) -> Result<RunConfig, StageError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| StageError::new("cli", format!("cannot read {}: {e}", path.display())))?;
            let parsed: RunConfig = serde_json::from_str(&text)
                .map_err(|e| StageError::new("cli", format!("bad config {}: {e}", path.display())))?;
            if parsed.schema_version != CONFIG_SCHEMA_VERSION {
                return Err(StageError::new(
                    "cli",
                    format!(
                        "config schema version {} is not supported (expected {})",
                        parsed.schema_version, CONFIG_SCHEMA_VERSION
                    ),
                ));
            }
            parsed
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &args.corpus {
        config.corpus = Some(v.clone());
    }
    if let Some(v) = &args.format {
        config.format = v.clone();
    }
    if let Some(v) = &args.gender_table {
        config.gender_table = Some(v.clone());
    }
    if let Some(v) = &args.nickname_table {
        config.nickname_table = Some(v.clone());
    }
    if let Some(v) = &args.overrides {
        config.overrides = Some(v.clone());
    }
    if let Some(v) = &args.cache {
        config.cache = Some(v.clone());
    }
    if let Some(v) = &args.model {
        config.model = Some(v.clone());
    }
    if let Some(v) = args.threshold {
        config.threshold = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.replicates_bootstrap {
        config.bootstrap_replicates = v;
    }
    if let Some(v) = args.replicates_null {
        config.null_randomizations = v;
    }
    if let Some(v) = &args.self_cite_def {
        config.self_cite_def = Some(v.clone());
    }
    if args.impute_missing {
        config.impute_missing = true;
    }
    if args.offline {
        config.offline = true;
    }
    if let Some(v) = args.workers {
        config.workers = Some(v);
    }
    if let Some(v) = &args.out {
        config.output_dir = v.clone();
    }
    config.self_def()?;
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(StageError::new(
            "cli",
            format!("threshold {} is not a probability", config.threshold),
        ));
    }
    Ok(config)
}

/// `synth` flags: a SynthConfig JSON file plus the common overrides.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct SynthArgs {
    /// Generator configuration (JSON form of SynthConfig); generator
    /// defaults when absent.
    #[arg(long = "synth-config")]
    pub synth_config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of papers to generate.
    #[arg(long)]
    pub papers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `diversity-statement` flags.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct StatementArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// File of cited DOIs, one per line; the whole corpus when absent.
    #[arg(long)]
    pub refs: Option<PathBuf>,
}
