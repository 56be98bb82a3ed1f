//! Offline evaluation against card-layout relevance judgments.
//!
//! Analysts place each labelled ticket on a 2-D board so that similar
//! tickets sit close together. The 5 nearest cards of a ticket are its
//! relevant set. Each technique recommends 5 tickets from the other members
//! of the same subgroup; precision and at-least-one accuracy are computed per
//! subgroup and averaged with equal weight.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::index::{top_k, Candidate, RetrievalResult};
use crate::techniques::{DocRef, Technique};

/// Number of relevant tickets per query.
pub const RELEVANT_PER_QUERY: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardPosition {
    pub external_id: String,
    pub x: f64,
    pub y: f64,
    pub subgroup: u32,
}

#[derive(Debug, Deserialize)]
struct PositionRow {
    external_id: String,
    x: f64,
    y: f64,
    #[serde(default)]
    subgroup: Option<u32>,
}

/// Reads one positions CSV (`external_id,x,y[,subgroup]`). Rows without a
/// subgroup column get `default_subgroup`.
pub fn load_positions(path: &Path, default_subgroup: u32) -> Result<Vec<CardPosition>> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::malformed(&name, 0, format!("{other:?}")),
        })?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<PositionRow>().enumerate() {
        // header is line 1
        let lineno = i + 2;
        let row = row.map_err(|e| Error::malformed(&name, lineno, e))?;
        if row.external_id.is_empty() || !row.x.is_finite() || !row.y.is_finite() {
            return Err(Error::malformed(&name, lineno, "empty id or non-finite coordinate"));
        }
        if !seen.insert(row.external_id.clone()) {
            return Err(Error::malformed(&name, lineno, Error::DuplicateId(row.external_id)));
        }
        out.push(CardPosition {
            external_id: row.external_id,
            x: row.x,
            y: row.y,
            subgroup: row.subgroup.unwrap_or(default_subgroup),
        });
    }
    Ok(out)
}

/// Reads every `*.csv` in `dir`, one file per subgroup.
///
/// A numeric file stem names the subgroup directly (`0.csv`, `2.csv`);
/// otherwise subgroups are numbered by sorted file name.
pub fn load_positions_dir(dir: &Path) -> Result<Vec<CardPosition>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    let mut all = Vec::new();
    let mut seen = HashSet::new();
    for (i, path) in files.iter().enumerate() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let subgroup = stem.parse::<u32>().unwrap_or(i as u32);
        for p in load_positions(path, subgroup)? {
            if !seen.insert(p.external_id.clone()) {
                return Err(Error::DuplicateId(p.external_id));
            }
            all.push(p);
        }
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub query_id: String,
    pub relevant_ids: BTreeSet<String>,
    pub subgroup: u32,
}

/// For every card, its 5 nearest other cards by Euclidean distance; equal
/// distances go to the smaller id.
pub fn ground_truth(positions: &[CardPosition]) -> Result<Vec<RelevanceJudgment>> {
    if positions.len() <= RELEVANT_PER_QUERY {
        return Err(Error::Invalid(format!(
            "a subgroup needs at least {} cards, got {}",
            RELEVANT_PER_QUERY + 1,
            positions.len()
        )));
    }
    let mut ids = HashSet::new();
    for p in positions {
        if !ids.insert(p.external_id.as_str()) {
            return Err(Error::DuplicateId(p.external_id.clone()));
        }
    }
    let mut out = Vec::with_capacity(positions.len());
    for q in positions {
        let mut others: Vec<(f64, &str)> = positions
            .iter()
            .filter(|p| p.external_id != q.external_id)
            .map(|p| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2), p.external_id.as_str()))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        out.push(RelevanceJudgment {
            query_id: q.external_id.clone(),
            relevant_ids: others[..RELEVANT_PER_QUERY]
                .iter()
                .map(|(_, id)| id.to_string())
                .collect(),
            subgroup: q.subgroup,
        });
    }
    Ok(out)
}

/// Positions grouped by subgroup (ascending), then judged.
pub fn judge_subgroups(positions: &[CardPosition]) -> Result<Vec<Subgroup>> {
    let mut groups: BTreeMap<u32, Vec<CardPosition>> = BTreeMap::new();
    for p in positions {
        groups.entry(p.subgroup).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(id, cards)| {
            if cards.len() != 100 {
                tracing::warn!(subgroup = id, cards = cards.len(), "subgroup does not have 100 cards");
            }
            Ok(Subgroup {
                id,
                judgments: ground_truth(&cards)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgroup {
    pub id: u32,
    pub judgments: Vec<RelevanceJudgment>,
}

fn per_query<'a>(
    judgments: &'a [RelevanceJudgment],
    results: &'a HashMap<String, RetrievalResult>,
) -> Result<Vec<(&'a RelevanceJudgment, &'a RetrievalResult)>> {
    judgments
        .iter()
        .map(|j| {
            results
                .get(&j.query_id)
                .map(|r| (j, r))
                .ok_or_else(|| Error::Invalid(format!("no result for query `{}`", j.query_id)))
        })
        .collect()
}

fn hits(j: &RelevanceJudgment, r: &RetrievalResult) -> usize {
    let recommended: BTreeSet<&str> = r.ids().collect();
    recommended.iter().filter(|id| j.relevant_ids.contains(**id)).count()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean over queries of |relevant ∩ recommended| / |recommended|.
pub fn precision(judgments: &[RelevanceJudgment], results: &HashMap<String, RetrievalResult>) -> Result<f64> {
    Ok(mean(per_query(judgments, results)?.into_iter().map(|(j, r)| {
        let n = r.ids().collect::<BTreeSet<_>>().len();
        if n == 0 {
            0.0
        } else {
            hits(j, r) as f64 / n as f64
        }
    })))
}

/// Mean over queries of |relevant ∩ recommended| / |relevant|.
pub fn recall(judgments: &[RelevanceJudgment], results: &HashMap<String, RetrievalResult>) -> Result<f64> {
    Ok(mean(per_query(judgments, results)?.into_iter().map(|(j, r)| {
        if j.relevant_ids.is_empty() {
            0.0
        } else {
            hits(j, r) as f64 / j.relevant_ids.len() as f64
        }
    })))
}

/// Fraction of queries with at least one relevant recommendation.
pub fn at_least_one_accuracy(
    judgments: &[RelevanceJudgment],
    results: &HashMap<String, RetrievalResult>,
) -> Result<f64> {
    Ok(mean(per_query(judgments, results)?.into_iter().map(|(j, r)| {
        if hits(j, r) > 0 {
            1.0
        } else {
            0.0
        }
    })))
}

/// Reference values for one technique, as published.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperReference {
    pub accuracy_alo: f64,
    pub precision: f64,
    pub time_ms: f64,
}

const PUBLISHED: &[(&str, &[&str], f64, f64, f64)] = &[
    ("bm25", &[], 0.590, 0.237, 258.0),
    (
        "bert-multilingual",
        &["bert", "bert-multi-language"],
        0.500,
        0.172,
        12781.0,
    ),
    ("doc2vec", &[], 0.273, 0.058, 933.0),
    ("lda", &[], 0.663, 0.209, 833.0),
    ("random", &["random-selection"], 0.260, 0.055, 199.0),
    ("sbert-english", &["sentence-bert-english"], 0.743, 0.301, 10601.0),
    (
        "sbert-multilingual",
        &["sentence-bert-multilingual", "sentence-bert-multi-language"],
        0.787,
        0.351,
        6411.0,
    ),
    ("sbert-retrained", &["sentence-bert-retrained"], 0.787, 0.327, 6450.0),
    ("expert", &["expert-system"], 0.427, 0.172, 1101.0),
    ("tfidf", &["tf-idf"], 0.690, 0.297, 672.0),
    ("word2vec-english", &["wordvec-english"], 0.583, 0.234, 49298.0),
    ("word2vec-retrained", &["wordvec-retrained"], 0.687, 0.262, 49590.0),
];

/// Published comparison numbers for a technique name (case-insensitive;
/// spaces and underscores count as hyphens).
pub fn paper_reference(name: &str) -> Option<PaperReference> {
    let key: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '_' { '-' } else { c })
        .collect();
    PUBLISHED
        .iter()
        .find(|(canonical, aliases, ..)| *canonical == key || aliases.contains(&key.as_str()))
        .map(|&(_, _, accuracy_alo, precision, time_ms)| PaperReference {
            accuracy_alo,
            precision,
            time_ms,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportRow {
    pub technique: String,
    pub accuracy_alo: f64,
    pub precision: f64,
    pub time_ms_per_100: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_reference: Option<PaperReference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalReportRow {
    pub fn failed(technique: impl Into<String>, error: &Error) -> Self {
        EvalReportRow {
            technique: technique.into(),
            accuracy_alo: 0.0,
            precision: 0.0,
            time_ms_per_100: 0.0,
            paper_reference: None,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupOutcome {
    pub subgroup: u32,
    pub precision: f64,
    pub accuracy_alo: f64,
    pub elapsed_ms: f64,
    pub results: HashMap<String, RetrievalResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub row: EvalReportRow,
    pub subgroups: Vec<SubgroupOutcome>,
}

/// Runs one technique over every subgroup.
///
/// `load` is called once per subgroup inside the timed region, so model
/// loading counts toward the time and fitting does not. Candidate ties break
/// on the eval corpus recency order.
pub fn evaluate_technique<F>(
    name: &str,
    load: F,
    eval_corpus: &Corpus,
    subgroups: &[Subgroup],
    k: usize,
) -> Result<EvalOutcome>
where
    F: Fn() -> Result<Box<dyn Technique>>,
{
    if subgroups.is_empty() {
        return Err(Error::Invalid("no subgroups to evaluate".into()));
    }
    let recency: HashMap<&str, usize> = eval_corpus
        .recency_order()
        .into_iter()
        .rev()
        .enumerate()
        .map(|(rank, pos)| (eval_corpus.tickets()[pos].external_id.as_str(), rank))
        .collect();

    let mut outcomes = Vec::with_capacity(subgroups.len());
    for group in subgroups {
        for j in &group.judgments {
            if !eval_corpus.contains(&j.query_id) {
                return Err(Error::UnknownId(j.query_id.clone()));
            }
        }
        let started = Instant::now();
        let technique = load()?;
        let mut reps = Vec::with_capacity(group.judgments.len());
        for j in &group.judgments {
            let ticket = eval_corpus.get(&j.query_id).expect("checked above");
            let text = ticket.query_text();
            let rep = technique
                .represent(DocRef::new(Some(&ticket.external_id), &text))
                .map_err(|e| Error::Query {
                    query: j.query_id.clone(),
                    source: Box::new(e),
                })?;
            reps.push(rep);
        }
        let mut results = HashMap::with_capacity(group.judgments.len());
        for (qi, j) in group.judgments.iter().enumerate() {
            let candidates: Vec<Candidate<'_>> = group
                .judgments
                .iter()
                .zip(&reps)
                .enumerate()
                .filter(|(ci, _)| *ci != qi)
                .map(|(_, (cj, rep))| Candidate {
                    external_id: &cj.query_id,
                    representation: rep,
                    recency_rank: recency[cj.query_id.as_str()],
                })
                .collect();
            let result = top_k(&reps[qi], &candidates, k, technique.scorer()).map_err(|e| Error::Query {
                query: j.query_id.clone(),
                source: Box::new(e),
            })?;
            results.insert(j.query_id.clone(), result);
        }
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        outcomes.push(SubgroupOutcome {
            subgroup: group.id,
            precision: precision(&group.judgments, &results)?,
            accuracy_alo: at_least_one_accuracy(&group.judgments, &results)?,
            elapsed_ms: elapsed_ms * 100.0 / group.judgments.len().max(1) as f64,
            results,
        });
    }

    let row = EvalReportRow {
        technique: name.to_string(),
        accuracy_alo: mean(outcomes.iter().map(|o| o.accuracy_alo)),
        precision: mean(outcomes.iter().map(|o| o.precision)),
        time_ms_per_100: mean(outcomes.iter().map(|o| o.elapsed_ms)),
        paper_reference: None,
        error: None,
    };
    Ok(EvalOutcome {
        row,
        subgroups: outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<EvalReportRow>,
}

/// Sorts rows by technique name and optionally attaches published values.
pub fn compare_report(mut rows: Vec<EvalReportRow>, with_paper_refs: bool) -> Result<Report> {
    if rows.is_empty() {
        return Err(Error::Invalid("a report needs at least one row".into()));
    }
    rows.sort_by(|a, b| a.technique.cmp(&b.technique));
    for row in &mut rows {
        row.paper_reference = if with_paper_refs {
            paper_reference(&row.technique)
        } else {
            None
        };
    }
    Ok(Report { rows })
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let with_refs = self.rows.iter().any(|r| r.paper_reference.is_some());
        let mut header = vec!["Name", "Accuracy_alo", "Precision", "Time(ms)"];
        if with_refs {
            header.extend(["Paper Accuracy_alo", "Paper Precision", "Paper Time(ms)"]);
        }
        let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let mut cells = vec![r.technique.clone()];
            match &r.error {
                Some(err) => {
                    cells.extend(["ERROR".to_string(), "-".into(), "-".into()]);
                    if with_refs {
                        cells.extend(["-".to_string(), "-".into(), "-".into()]);
                    }
                    cells.push(err.replace('\n', " "));
                }
                None => {
                    cells.extend([
                        pct(r.accuracy_alo),
                        pct(r.precision),
                        format!("{:.0}", r.time_ms_per_100),
                    ]);
                    if with_refs {
                        match &r.paper_reference {
                            Some(p) => {
                                cells.extend([pct(p.accuracy_alo), pct(p.precision), format!("{:.0}", p.time_ms)])
                            }
                            None => cells.extend(["-".to_string(), "-".into(), "-".into()]),
                        }
                    }
                }
            }
            table.push(cells);
        }
        let columns = header.len();
        let widths: Vec<usize> = (0..columns)
            .map(|c| {
                table
                    .iter()
                    .filter_map(|row| row.get(c))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for (i, row) in table.iter().enumerate() {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                if c == 0 || c >= columns {
                    let _ = write!(line, "{cell:<width$}", width = widths.get(c).copied().unwrap_or(0));
                } else {
                    let _ = write!(line, "{cell:>width$}", width = widths[c]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (columns - 1)));
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::ScoredCandidate;
    use proptest::prelude::*;

    fn card(id: &str, x: f64, y: f64) -> CardPosition {
        CardPosition {
            external_id: id.into(),
            x,
            y,
            subgroup: 0,
        }
    }

    fn judgment(q: &str, rel: &[&str]) -> RelevanceJudgment {
        RelevanceJudgment {
            query_id: q.into(),
            relevant_ids: rel.iter().map(|s| s.to_string()).collect(),
            subgroup: 0,
        }
    }

    fn result(ids: &[&str]) -> RetrievalResult {
        RetrievalResult {
            items: ids
                .iter()
                .map(|id| ScoredCandidate {
                    external_id: id.to_string(),
                    score: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn nearest_five_on_a_line() {
        let cards: Vec<_> = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0]
            .iter()
            .map(|&x| card(&format!("c{x}"), x, 0.0))
            .collect();
        let j = ground_truth(&cards).unwrap();
        let expected: BTreeSet<String> = ["c1", "c2", "c3", "c4", "c5"].iter().map(|s| s.to_string()).collect();
        assert_eq!(j[0].relevant_ids, expected);
        assert!(!j[0].relevant_ids.contains("c0"));
    }

    #[test]
    fn equidistant_cards_break_ties_by_id() {
        // b and a are both at distance 3 from q; only one fits after the 4 closer cards
        let cards = vec![
            card("q", 0.0, 0.0),
            card("n1", 1.0, 0.0),
            card("n2", -1.0, 0.0),
            card("n3", 0.0, 1.0),
            card("n4", 0.0, -1.0),
            card("b", 3.0, 0.0),
            card("a", -3.0, 0.0),
        ];
        let j = ground_truth(&cards).unwrap();
        assert!(j[0].relevant_ids.contains("a"));
        assert!(!j[0].relevant_ids.contains("b"));
    }

    #[test]
    fn too_few_cards() {
        let cards: Vec<_> = (0..5).map(|i| card(&i.to_string(), i as f64, 0.0)).collect();
        assert!(ground_truth(&cards).is_err());
    }

    #[test]
    fn relevance_is_not_symmetric() {
        // the outlier's neighbours include the cluster, but the cluster's neighbours exclude it
        let mut cards: Vec<_> = (0..6).map(|i| card(&format!("c{i}"), i as f64 * 0.1, 0.0)).collect();
        cards.push(card("far", 100.0, 0.0));
        let j = ground_truth(&cards).unwrap();
        let far = j.iter().find(|j| j.query_id == "far").unwrap();
        assert!(far.relevant_ids.contains("c5"));
        let c5 = j.iter().find(|j| j.query_id == "c5").unwrap();
        assert!(!c5.relevant_ids.contains("far"));
    }

    #[test]
    fn metric_examples() {
        let j = vec![judgment("q", &["a", "b", "c", "d", "e"])];
        let mut r = HashMap::new();
        r.insert("q".to_string(), result(&["a", "b", "x", "y", "z"]));
        assert!((precision(&j, &r).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(at_least_one_accuracy(&j, &r).unwrap(), 1.0);

        r.insert("q".to_string(), result(&["a", "b", "c", "d", "e"]));
        assert_eq!(precision(&j, &r).unwrap(), 1.0);
        r.insert("q".to_string(), result(&["v", "w", "x", "y", "z"]));
        assert_eq!(precision(&j, &r).unwrap(), 0.0);
        assert_eq!(at_least_one_accuracy(&j, &r).unwrap(), 0.0);
    }

    #[test]
    fn broken_mouse_counts_as_a_hit() {
        let j = vec![judgment("broken mouse", &["mouse not working", "r1", "r2", "r3", "r4"])];
        let mut r = HashMap::new();
        r.insert(
            "broken mouse".to_string(),
            result(&[
                "lost my mouse",
                "mouse not working",
                "can't log in",
                "air conditioner too cold",
                "password recovery",
            ]),
        );
        assert_eq!(at_least_one_accuracy(&j, &r).unwrap(), 1.0);
        assert!((precision(&j, &r).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn three_of_four_queries_hit() {
        let rel = ["a", "b", "c", "d", "e"];
        let j: Vec<_> = (0..4).map(|i| judgment(&format!("q{i}"), &rel)).collect();
        let mut r = HashMap::new();
        r.insert("q0".into(), result(&["a"]));
        r.insert("q1".into(), result(&["x", "b"]));
        r.insert("q2".into(), result(&["e", "d"]));
        r.insert("q3".into(), result(&["x", "y"]));
        assert_eq!(at_least_one_accuracy(&j, &r).unwrap(), 0.75);
    }

    #[test]
    fn missing_result_is_an_error() {
        let j = vec![judgment("q", &["a"])];
        assert!(precision(&j, &HashMap::new()).is_err());
        assert!(at_least_one_accuracy(&j, &HashMap::new()).is_err());
    }

    #[test]
    fn published_values() {
        let sbert = paper_reference("Sentence-BERT multi-language").unwrap();
        assert_eq!((sbert.accuracy_alo, sbert.precision), (0.787, 0.351));
        assert_eq!(paper_reference("sbert-multilingual"), Some(sbert));
        assert_eq!(paper_reference("TF-IDF").unwrap().precision, 0.297);
        assert_eq!(paper_reference("random").unwrap().precision, 0.055);
        assert!(paper_reference("mystery").is_none());
        assert_eq!(PUBLISHED.len(), 12);
    }

    #[test]
    fn report_renderings_agree() {
        let row = |name: &str, a: f64, p: f64| EvalReportRow {
            technique: name.into(),
            accuracy_alo: a,
            precision: p,
            time_ms_per_100: 12.0,
            paper_reference: None,
            error: None,
        };
        let report = compare_report(
            vec![row("tfidf", 0.69, 0.297), row("sbert-multilingual", 0.8, 0.36)],
            true,
        )
        .unwrap();
        assert_eq!(report.rows[0].technique, "sbert-multilingual");
        let text = report.to_text();
        assert!(text.contains("78.7%") && text.contains("35.1%"), "{text}");
        let json: Report = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        for r in &json.rows {
            assert!(text.contains(&pct(r.accuracy_alo)));
            assert!(text.contains(&pct(r.precision)));
        }
        assert!(compare_report(vec![], false).is_err());
        let single = compare_report(vec![row("lda", 0.5, 0.2)], false).unwrap();
        assert_eq!(single.to_text().lines().count(), 3);
    }

    proptest! {
        #[test]
        fn metric_bounds_hold(hits in proptest::collection::vec(0usize..=5, 1..30)) {
            let rel = ["r0", "r1", "r2", "r3", "r4"];
            let mut judgments = Vec::new();
            let mut results = HashMap::new();
            for (i, h) in hits.iter().enumerate() {
                let q = format!("q{i}");
                judgments.push(judgment(&q, &rel));
                let mut rec: Vec<String> = rel[..*h].iter().map(|s| s.to_string()).collect();
                rec.extend((0..5 - h).map(|n| format!("x{n}")));
                let rec_ref: Vec<&str> = rec.iter().map(String::as_str).collect();
                results.insert(q, result(&rec_ref));
            }
            let p = precision(&judgments, &results).unwrap();
            let a = at_least_one_accuracy(&judgments, &results).unwrap();
            prop_assert!(p <= a + 1e-12);
            prop_assert!(a <= (5.0 * p).min(1.0) + 1e-12);
            prop_assert!((p - recall(&judgments, &results).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ground_truth_is_translation_invariant(
            pts in proptest::collection::vec((-50i32..50, -50i32..50), 6..20),
            dx in -1000i32..1000, dy in -1000i32..1000,
        ) {
            // integer coordinates keep every distance exact after the shift
            let cards: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| card(&format!("{i:02}"), x as f64, y as f64)).collect();
            let moved: Vec<_> = cards.iter().map(|c| card(&c.external_id, c.x + dx as f64, c.y + dy as f64)).collect();
            prop_assert_eq!(ground_truth(&cards).unwrap(), ground_truth(&moved).unwrap());
        }
    }
}
