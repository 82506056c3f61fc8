//! Result serialization: the run manifest whose hash every output file
//! embeds, plus the CSV/JSON writers shared by the pipeline commands.
//!
//! Writers are pure functions of their inputs — identical inputs
//! produce byte-identical files — so a rerun with the same
//! configuration and seed is verifiable by comparing bytes. Floats are
//! written in Rust's shortest round-trip form.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::imbalance::{StatisticResult, YearlyOvercitation};
use crate::inference::{RegressionReport, REGRESSION_TERMS};
use crate::network::NeighborhoodStats;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Everything that determines a run's numbers, serialized verbatim into
/// the run manifest. The manifest's hash is embedded in every output
/// file so mixed outputs from different runs are detectable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub bootstrap_replicates: usize,
    pub null_randomizations: usize,
    /// Self-citation definition used to drop edges, if any.
    pub self_cite_def: Option<String>,
    /// How unknown cited categories were handled.
    pub imputation: String,
    /// Gender-assignment probability threshold.
    pub threshold: f64,
    /// Hash of the serialized expectation model the run used.
    pub model_hash: Option<String>,
    /// The run configuration exactly as loaded (flags already applied).
    pub config: serde_json::Value,
}

impl Manifest {
    /// Hash over the manifest body itself; 16 hex characters is plenty
    /// to make cross-run mixups visible.
    pub fn options_hash(&self) -> String {
        let body = serde_json::to_string(self).expect("manifest is plain data");
        sha256_hex(body.as_bytes())[..16].to_string()
    }

    /// The manifest document: body plus its own hash.
    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut value = serde_json::to_value(self)?;
        value
            .as_object_mut()
            .expect("manifest serializes to an object")
            .insert("options_hash".into(), self.options_hash().into());
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One line of the main results table.
#[derive(Clone, Debug)]
pub struct ResultRow {
    /// What was estimated: `delta`, `trend`, `regression:<term>`, ...
    pub statistic: String,
    /// Cited-side category the statistic concerns, or `-`.
    pub cited_group: String,
    /// Citing-team conditioning (`ALL`, `MM`, `WuW`, ...).
    pub citing_group: String,
    pub result: StatisticResult,
    /// Candidate citations behind the estimate.
    pub n_citations: f64,
}

/// Pinned column layout:
/// `statistic, cited_group, citing_group, value, ci_low, ci_high,
/// p_raw, p_holm, n_citations, options_hash`.
pub fn write_results_csv<W: Write>(
    mut w: W,
    rows: &[ResultRow],
    options_hash: &str,
) -> Result<(), ReportError> {
    writeln!(
        w,
        "statistic,cited_group,citing_group,value,ci_low,ci_high,p_raw,p_holm,n_citations,options_hash"
    )?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            row.statistic,
            row.cited_group,
            row.citing_group,
            fmt_opt(row.result.value),
            fmt_opt(row.result.ci_low),
            fmt_opt(row.result.ci_high),
            fmt_opt(row.result.p_raw),
            fmt_opt(row.result.p_holm),
            row.n_citations,
            options_hash,
        )?;
    }
    Ok(())
}

/// Plot-ready yearly series, one labelled block per (cited, citing)
/// pair.
pub fn write_yearly_csv<W: Write>(
    mut w: W,
    series: &[(String, String, Vec<YearlyOvercitation>)],
    options_hash: &str,
) -> Result<(), ReportError> {
    writeln!(
        w,
        "cited_group,citing_group,year,obs_total,obs_group,exp_group,delta_points,options_hash"
    )?;
    for (cited, citing, points) in series {
        for p in points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                cited, citing, p.year, p.obs_total, p.obs_group, p.exp_group, p.delta_points, options_hash,
            )?;
        }
    }
    Ok(())
}

pub fn write_edges_csv<W: Write>(
    mut w: W,
    edges: &[(u32, u32, crate::corpus::MonthIdx)],
    options_hash: &str,
) -> Result<(), ReportError> {
    writeln!(w, "author_id_a,author_id_b,first_joint_month,options_hash")?;
    for &(a, b, month) in edges {
        writeln!(w, "{a},{b},{},{options_hash}", month.0)?;
    }
    Ok(())
}

/// Per-paper neighborhood composition; papers without a measurable
/// neighborhood are omitted.
pub fn write_neighborhoods_csv<W: Write>(
    mut w: W,
    dois: &[String],
    stats: &[Option<NeighborhoodStats>],
    options_hash: &str,
) -> Result<(), ReportError> {
    writeln!(
        w,
        "record,doi,n_authors,n_papers,pi_m_local,pi_mm_local,ma_or,mmp_or,options_hash"
    )?;
    for stat in stats.iter().flatten() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            stat.record,
            dois[stat.record as usize],
            stat.n_authors,
            stat.n_papers,
            stat.pi_m_local,
            stat.pi_mm_local,
            stat.ma_or,
            stat.mmp_or,
            options_hash,
        )?;
    }
    Ok(())
}

/// Regression fit report: one line per term.
pub fn write_coefficients_csv<W: Write>(
    mut w: W,
    report: &RegressionReport,
    options_hash: &str,
) -> Result<(), ReportError> {
    writeln!(w, "term,value,ci_low,ci_high,p_raw,p_holm,options_hash")?;
    for (term, result) in REGRESSION_TERMS.iter().zip(&report.terms) {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            term,
            fmt_opt(result.value),
            fmt_opt(result.ci_low),
            fmt_opt(result.ci_high),
            fmt_opt(result.p_raw),
            fmt_opt(result.p_holm),
            options_hash,
        )?;
    }
    Ok(())
}

/// One table cell: an estimate with its interval and (optionally)
/// adjusted significance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellEstimate {
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_raw: Option<f64>,
    pub p_holm: Option<f64>,
}

impl CellEstimate {
    pub fn from_result(result: &StatisticResult) -> Option<CellEstimate> {
        Some(CellEstimate {
            value: result.value?,
            ci_low: result.ci_low,
            ci_high: result.ci_high,
            p_raw: result.p_raw,
            p_holm: result.p_holm,
        })
    }
}

/// One column of the conditional-overcitation table: a citing-team
/// group with its unconditional median overcitation and the same
/// quantity conditional on a field-representative network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalColumn {
    pub citing_group: String,
    pub unconditional: Option<CellEstimate>,
    pub given_network: Option<CellEstimate>,
}

/// The overcitation-given-network table, in the published column order
/// (MM, W∪W pooled, WM, MW, WW).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub outcome: String,
    pub tau: f64,
    pub columns: Vec<ConditionalColumn>,
    pub options_hash: String,
}

impl ConditionalTable {
    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-record gender calls: labels, table probabilities and the derived
/// team category.
pub fn write_gender_csv<W: Write>(
    mut w: W,
    dois: &[String],
    papers: &[crate::authors::gender::PaperGender],
    options_hash: &str,
) -> Result<(), ReportError> {
    writeln!(w, "doi,first_label,last_label,category,options_hash")?;
    for (doi, paper) in dois.iter().zip(papers) {
        writeln!(
            w,
            "{},{},{},{},{}",
            doi,
            label_tag(paper.first),
            label_tag(paper.last),
            paper.category.tag(),
            options_hash,
        )?;
    }
    Ok(())
}

fn label_tag(label: crate::authors::GenderLabel) -> &'static str {
    match label {
        crate::authors::GenderLabel::Man => "man",
        crate::authors::GenderLabel::Woman => "woman",
        crate::authors::GenderLabel::Unknown => "unknown",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::MonthIdx;

    fn manifest() -> Manifest {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            seed: 17,
            bootstrap_replicates: 1_000,
            null_randomizations: 10_000,
            self_cite_def: Some("primary".into()),
            imputation: "exclude".into(),
            threshold: 0.7,
            model_hash: Some("abc123".into()),
            config: serde_json::json!({"corpus": "corpus.jsonl", "seed": 17}),
        }
    }

    fn result(value: f64) -> StatisticResult {
        StatisticResult {
            value: Some(value),
            ci_low: Some(value - 1.0),
            ci_high: Some(value + 1.0),
            boot_redrawn: 0,
            boot_dropped: 0,
            p_raw: Some(0.01),
            p_holm: Some(0.04),
        }
    }

    #[test]
    fn manifest_hash_is_stable_and_sensitive() {
        let a = manifest();
        assert_eq!(a.options_hash(), a.options_hash());
        assert_eq!(a.options_hash().len(), 16);
        let mut b = manifest();
        b.seed = 18;
        assert_ne!(a.options_hash(), b.options_hash());
        let mut c = manifest();
        c.config = serde_json::json!({"corpus": "other.jsonl", "seed": 17});
        assert_ne!(a.options_hash(), c.options_hash());
    }

    #[test]
    fn manifest_document_embeds_its_own_hash() {
        let m = manifest();
        let doc = m.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(
            value["options_hash"].as_str().unwrap(),
            m.options_hash()
        );
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["config"]["corpus"], "corpus.jsonl");
    }

    #[test]
    fn results_csv_layout_is_pinned() {
        let rows = vec![
            ResultRow {
                statistic: "delta".into(),
                cited_group: "MM".into(),
                citing_group: "ALL".into(),
                result: result(11.625),
                n_citations: 512.0,
            },
            ResultRow {
                statistic: "trend".into(),
                cited_group: "MM".into(),
                citing_group: "WuW".into(),
                result: StatisticResult {
                    value: None,
                    ci_low: None,
                    ci_high: None,
                    boot_redrawn: 0,
                    boot_dropped: 0,
                    p_raw: None,
                    p_holm: None,
                },
                n_citations: 0.0,
            },
        ];
        let mut buffer = Vec::new();
        write_results_csv(&mut buffer, &rows, "deadbeefdeadbeef").unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let expected = "statistic,cited_group,citing_group,value,ci_low,ci_high,p_raw,p_holm,n_citations,options_hash\n\
            delta,MM,ALL,11.625,10.625,12.625,0.01,0.04,512,deadbeefdeadbeef\n\
            trend,MM,WuW,,,,,,0,deadbeefdeadbeef\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn yearly_csv_blocks_carry_labels() {
        let series = vec![(
            "MM".to_string(),
            "ALL".to_string(),
            vec![YearlyOvercitation {
                year: 2015,
                obs_total: 100.0,
                obs_group: 60.0,
                exp_group: 55.5,
                delta_points: 4.5,
            }],
        )];
        let mut buffer = Vec::new();
        write_yearly_csv(&mut buffer, &series, "h").unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "cited_group,citing_group,year,obs_total,obs_group,exp_group,delta_points,options_hash\n\
             MM,ALL,2015,100,60,55.5,4.5,h\n"
        );
    }

    #[test]
    fn edge_and_neighborhood_writers_round_trip() {
        let mut buffer = Vec::new();
        write_edges_csv(&mut buffer, &[(0, 3, MonthIdx::new(2013, 5))], "h").unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.ends_with(&format!("0,3,{},h\n", MonthIdx::new(2013, 5).0)));

        let stats = vec![
            None,
            Some(NeighborhoodStats {
                record: 1,
                n_authors: 8,
                n_papers: 4,
                pi_m_local: 0.75,
                pi_mm_local: 0.5,
                ma_or: 0.25,
                mmp_or: -0.125,
            }),
        ];
        let dois = vec!["10.1/a".to_string(), "10.1/b".to_string()];
        let mut buffer = Vec::new();
        write_neighborhoods_csv(&mut buffer, &dois, &stats, "h").unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 2, "None rows are omitted");
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "1,10.1/b,8,4,0.75,0.5,0.25,-0.125,h"
        );
    }

    #[test]
    fn conditional_table_serializes_in_column_order() {
        let table = ConditionalTable {
            outcome: "mm_overcitation_points".into(),
            tau: 0.5,
            columns: vec![
                ConditionalColumn {
                    citing_group: "MM".into(),
                    unconditional: CellEstimate::from_result(&result(5.2)),
                    given_network: CellEstimate::from_result(&result(3.5)),
                },
                ConditionalColumn {
                    citing_group: "WuW".into(),
                    unconditional: None,
                    given_network: None,
                },
            ],
            options_hash: "h".into(),
        };
        let json = table.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["columns"][0]["citing_group"], "MM");
        assert_eq!(value["columns"][0]["given_network"]["value"], 3.5);
        assert!(value["columns"][1]["unconditional"].is_null());
        let back: ConditionalTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back.columns.len(), 2);
    }

    #[test]
    fn writers_are_deterministic() {
        let rows = vec![ResultRow {
            statistic: "delta".into(),
            cited_group: "WW".into(),
            citing_group: "MM".into(),
            result: result(-30.1953125),
            n_citations: 71.0,
        }];
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_results_csv(&mut a, &rows, "h").unwrap();
        write_results_csv(&mut b, &rows, "h").unwrap();
        assert_eq!(a, b);
    }
}
