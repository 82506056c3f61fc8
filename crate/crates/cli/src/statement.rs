//! The citation gender diversity statement: category percentages and
//! counts over a reference list, rendered in the conventional sentence
//! format. Unknown-category works never enter the denominators; they
//! are counted and reported separately.

use citegap::GenderCategory;
use serde::Serialize;

/// Category makeup of one reference list.
#[derive(Clone, Debug, Serialize)]
pub struct StatementSummary {
    /// Known-category counts, ordered MM, WM, MW, WW.
    pub counts: [usize; 4],
    /// Integer percentages of the known total (half rounds away from
    /// zero); zero when nothing is known.
    pub percents: [u32; 4],
    pub n_known: usize,
    /// Works whose category could not be resolved.
    pub n_unknown: usize,
    /// Requested DOIs that are not in the corpus at all.
    pub n_unresolved: usize,
    pub statement: String,
}

/// Integer percentage with half away from zero, the statement's
/// rounding convention.
fn percent(count: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    (100.0 * count as f64 / total as f64).round() as u32
}

/// Renders the statement sentence. Categories with zero counts are
/// omitted; the remainder joins as a list with a serial comma.
pub fn statement_text(counts: &[usize; 4]) -> String {
    let total: usize = counts.iter().sum();
    let clauses: Vec<String> = GenderCategory::KNOWN
        .iter()
        .enumerate()
        .filter(|&(i, _)| counts[i] > 0)
        .map(|(i, cat)| {
            format!(
                "{}% (n = {}) were {}",
                percent(counts[i], total),
                counts[i],
                cat.tag()
            )
        })
        .collect();
    match clauses.len() {
        0 => String::from("no cited works had resolvable author genders"),
        1 => clauses[0].clone(),
        2 => format!("{} and {}", clauses[0], clauses[1]),
        _ => {
            let (last, rest) = clauses.split_last().expect("nonempty");
            format!("{}, and {}", rest.join(", "), last)
        }
    }
}

/// Tallies a reference list. `None` marks a work outside the corpus;
/// `Some(Unknown)` one whose authors could not be resolved.
pub fn summarize<I>(categories: I) -> StatementSummary
where
    I: IntoIterator<Item = Option<GenderCategory>>,
{
    let mut counts = [0usize; 4];
    let mut n_unknown = 0;
    let mut n_unresolved = 0;
    for cat in categories {
        match cat {
            None => n_unresolved += 1,
            Some(c) => match c.index() {
                Some(i) => counts[i] += 1,
                None => n_unknown += 1,
            },
        }
    }
    let n_known: usize = counts.iter().sum();
    let percents =
        [0, 1, 2, 3].map(|i| percent(counts[i], n_known));
    StatementSummary {
        counts,
        percents,
        n_known,
        n_unknown,
        n_unresolved,
        statement: statement_text(&counts),
    }
}
