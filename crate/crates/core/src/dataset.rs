//! Corpus files: JSONL reading, image-level splits, statistics, duplicate
//! removal, human-review sampling, and manifests.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{self, ContentHasher};
use crate::qa::{Category, QAPair, Subtype};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("requested {requested} samples but the corpus has {available} records")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid ratios `{0}`: expected positive numbers like 7:2:1")]
    InvalidRatios(String),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Iterates over the non-blank lines of a JSONL stream, yielding each
/// line's 1-based number and text.
pub fn jsonl_lines<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| line.map(|l| (i + 1, l)))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

/// Deserializes every record of a JSONL stream.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> impl Iterator<Item = Result<T, DatasetError>> {
    jsonl_lines(reader).map(|item| {
        let (line, text) = item?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Json { line, source })
    })
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<QAPair>, DatasetError> {
    read_jsonl(reader).collect()
}

pub fn write_jsonl<'a, W: Write>(mut out: W, records: impl IntoIterator<Item = &'a QAPair>) -> io::Result<usize> {
    let mut n = 0;
    for qa in records {
        writeln!(out, "{}", qa.to_json())?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Ratios {
            train: 7.0,
            val: 2.0,
            test: 1.0,
        }
    }
}

impl FromStr for Ratios {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::InvalidRatios(s.to_owned());
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [train, val, test] if parts.iter().all(|p| p.is_finite() && *p > 0.0) => Ok(Ratios { train, val, test }),
            _ => Err(bad()),
        }
    }
}

impl Ratios {
    /// Bucket sizes for `n` items by largest remainder; each is within one
    /// of its exact share and they sum to `n`.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let weights = [self.train, self.val, self.test];
        let total: f64 = weights.iter().sum();
        let exact = weights.map(|w| n as f64 * w / total);
        let mut sizes = exact.map(|e| e.floor() as usize);
        let mut remaining = n - sizes.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            sizes[i] += 1;
            remaining -= 1;
        }
        sizes
    }
}

/// Image-level bucket assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitAssignment {
    pub images: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn bucket(&self, image_id: &str) -> Option<Split> {
        self.images.get(image_id).copied()
    }

    pub fn image_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
        for s in self.images.values() {
            *counts.entry(*s).or_default() += 1;
        }
        counts
    }

    /// qa_id to bucket for every pair in `corpus`.
    pub fn by_qa<'a>(&self, corpus: &'a [QAPair]) -> BTreeMap<&'a str, Split> {
        corpus
            .iter()
            .filter_map(|qa| self.bucket(&qa.image_id).map(|s| (qa.qa_id.as_str(), s)))
            .collect()
    }
}

/// Assigns image ids to buckets. The ids are sorted first, so the result
/// depends only on the set of ids, the ratios, and the seed.
pub fn assign_images<I, S>(image_ids: I, ratios: Ratios, seed: u64) -> Result<SplitAssignment, DatasetError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let unique: BTreeSet<String> = image_ids.into_iter().map(Into::into).collect();
    if unique.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let mut ids: Vec<String> = unique.into_iter().collect();
    ids.shuffle(&mut digest::rng_for(seed, "split"));
    let [train, val, _] = ratios.sizes(ids.len());
    let images = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let bucket = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            (id, bucket)
        })
        .collect();
    Ok(SplitAssignment { images })
}

/// Splits a corpus so that all pairs of an image land in one bucket.
pub fn split(corpus: &[QAPair], ratios: Ratios, seed: u64) -> Result<SplitAssignment, DatasetError> {
    assign_images(corpus.iter().map(|qa| qa.image_id.as_str()), ratios, seed)
}

/// Category and subtype counts, in the seven-category layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub categories: BTreeMap<Category, usize>,
    pub subtypes: BTreeMap<Subtype, usize>,
    pub total: usize,
}

impl Default for CorpusStats {
    fn default() -> Self {
        CorpusStats {
            categories: Category::ALL.iter().map(|&c| (c, 0)).collect(),
            subtypes: BTreeMap::new(),
            total: 0,
        }
    }
}

impl CorpusStats {
    pub fn add(&mut self, qa: &QAPair) {
        *self.categories.entry(qa.category).or_default() += 1;
        *self.subtypes.entry(qa.subtype).or_default() += 1;
        self.total += 1;
    }

    pub fn category_sum(&self) -> usize {
        self.categories.values().sum()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:>10}", "QA Category", "#QA Pairs");
        let _ = writeln!(s, "{:-<39}", "");
        let _ = writeln!(s, "Perception base QA pairs");
        for c in Category::ALL.iter().filter(|c| c.is_perceptual()) {
            let _ = writeln!(s, "  {:<26} {:>10}", c.title(), self.categories[c]);
        }
        let _ = writeln!(s, "Compositional base QA pairs");
        for c in Category::ALL.iter().filter(|c| !c.is_perceptual()) {
            let _ = writeln!(s, "  {:<26} {:>10}", c.title(), self.categories[c]);
        }
        let _ = writeln!(s, "{:-<39}", "");
        let _ = writeln!(s, "{:<28} {:>10}", "Total Base QA Pairs", self.total);
        if !self.subtypes.is_empty() {
            let _ = writeln!(s, "\n{:<28} {:>10}", "Subtype", "#QA Pairs");
            for (subtype, n) in &self.subtypes {
                let _ = writeln!(s, "  {:<26} {:>10}", subtype.as_str(), n);
            }
        }
        s
    }
}

impl<'a> FromIterator<&'a QAPair> for CorpusStats {
    fn from_iter<T: IntoIterator<Item = &'a QAPair>>(iter: T) -> Self {
        let mut stats = CorpusStats::default();
        for qa in iter {
            stats.add(qa);
        }
        stats
    }
}

/// Streams a JSONL corpus into counts.
pub fn stats<R: BufRead>(reader: R) -> Result<CorpusStats, DatasetError> {
    let mut stats = CorpusStats::default();
    for qa in read_jsonl::<QAPair, _>(reader) {
        stats.add(&qa?);
    }
    Ok(stats)
}

/// Streaming first-occurrence filter on qa_id.
#[derive(Debug, Default)]
pub struct Deduper {
    seen: HashSet<String>,
    pub dropped: usize,
}

impl Deduper {
    /// True the first time `qa_id` is seen.
    pub fn admit(&mut self, qa_id: &str) -> bool {
        if self.seen.contains(qa_id) {
            self.dropped += 1;
            false
        } else {
            self.seen.insert(qa_id.to_owned());
            true
        }
    }
}

/// Keeps the first occurrence of each qa_id; returns the kept pairs and the
/// number dropped.
pub fn dedup(corpus: Vec<QAPair>) -> (Vec<QAPair>, usize) {
    let mut filter = Deduper::default();
    let kept = corpus.into_iter().filter(|qa| filter.admit(&qa.qa_id)).collect();
    (kept, filter.dropped)
}

/// Per-category sample sizes: proportional by largest remainder, with at
/// least one per non-empty category when `n` allows.
fn allocate(counts: &BTreeMap<Category, usize>, n: usize) -> BTreeMap<Category, usize> {
    let total: usize = counts.values().sum();
    let live: Vec<Category> = counts.iter().filter(|(_, &c)| c > 0).map(|(&k, _)| k).collect();
    let mut quota: BTreeMap<Category, usize> = live.iter().map(|&c| (c, 0)).collect();
    let mut remaining = n;
    if n >= live.len() {
        for c in &live {
            quota.insert(*c, 1);
        }
        remaining -= live.len();
    }
    // distribute the rest by share of the remaining capacity
    while remaining > 0 {
        let capacity: Vec<(Category, usize)> = live
            .iter()
            .map(|&c| (c, counts[&c] - quota[&c]))
            .filter(|(_, cap)| *cap > 0)
            .collect();
        let cap_total: usize = capacity.iter().map(|(_, c)| c).sum();
        let mut exact: Vec<(Category, f64)> = capacity
            .iter()
            .map(|&(c, cap)| (c, remaining as f64 * cap as f64 / cap_total as f64))
            .collect();
        let mut given = 0;
        for (c, e) in &exact {
            let add = (e.floor() as usize).min(counts[c] - quota[c]);
            *quota.get_mut(c).unwrap() += add;
            given += add;
        }
        exact.sort_by(|a, b| (b.1 - b.1.floor()).total_cmp(&(a.1 - a.1.floor())).then(a.0.cmp(&b.0)));
        for (c, _) in exact {
            if given == remaining {
                break;
            }
            if quota[&c] < counts[&c] {
                *quota.get_mut(&c).unwrap() += 1;
                given += 1;
            }
        }
        remaining -= given;
    }
    debug_assert!(quota.values().sum::<usize>() == n.min(total));
    quota
}

/// Which records to review, as ordinals within each category (the k-th
/// record of that category in corpus order). Computed from counts alone so
/// the corpus can be streamed twice rather than held in memory.
pub fn plan_review_sample(
    counts: &BTreeMap<Category, usize>,
    n: usize,
    seed: u64,
) -> Result<BTreeMap<Category, BTreeSet<usize>>, DatasetError> {
    let available: usize = counts.values().sum();
    if n > available {
        return Err(DatasetError::SampleTooLarge { requested: n, available });
    }
    Ok(allocate(counts, n)
        .into_iter()
        .map(|(category, k)| {
            let mut rng = digest::rng_for(seed, &format!("review\x1f{category}"));
            let picks = index::sample(&mut rng, counts[&category], k).into_iter().collect();
            (category, picks)
        })
        .collect())
}

/// In-memory variant of [`plan_review_sample`]: the chosen pairs in corpus order.
pub fn sample_for_review(corpus: &[QAPair], n: usize, seed: u64) -> Result<Vec<&QAPair>, DatasetError> {
    let stats: CorpusStats = corpus.iter().collect();
    let plan = plan_review_sample(&stats.categories, n, seed)?;
    let mut seen: BTreeMap<Category, usize> = BTreeMap::new();
    Ok(corpus
        .iter()
        .filter(|qa| {
            let ordinal = seen.entry(qa.category).or_default();
            let keep = plan.get(&qa.category).is_some_and(|s| s.contains(ordinal));
            *ordinal += 1;
            keep
        })
        .collect())
}

/// One row of the human-review sheet. Judgment columns are left blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRow {
    pub qa_id: String,
    pub image_id: String,
    pub category: Category,
    pub subtype: Subtype,
    pub question: String,
    pub base_answer: String,
    pub cot: String,
    pub metadata_accurate: String,
    pub cot_consistent: String,
    pub plausible: String,
}

impl ReviewRow {
    pub fn new(qa: &QAPair, cot: Option<&str>) -> Self {
        ReviewRow {
            qa_id: qa.qa_id.clone(),
            image_id: qa.image_id.clone(),
            category: qa.category,
            subtype: qa.subtype,
            question: qa.question.clone(),
            base_answer: qa.answer.canonical(),
            cot: cot.unwrap_or_default().to_owned(),
            metadata_accurate: String::new(),
            cot_consistent: String::new(),
            plausible: String::new(),
        }
    }
}

pub fn write_review_csv<W: Write>(out: W, rows: &[ReviewRow]) -> Result<(), DatasetError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Description of a written corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub corpus: Vec<String>,
    pub total: usize,
    pub categories: BTreeMap<Category, usize>,
    pub subtypes: BTreeMap<Subtype, usize>,
    /// SHA-256 over the corpus lines, each followed by `\n`, in file order.
    pub content_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tool_version: String,
}

/// Accumulates counts and the content hash while a corpus is written.
#[derive(Default)]
pub struct ManifestBuilder {
    stats: CorpusStats,
    hasher: ContentHasher,
}

impl ManifestBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one pair and its serialized line (without newline).
    pub fn observe(&mut self, qa: &QAPair, line: &str) {
        self.stats.add(qa);
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
    }

    pub fn finish(self, corpus: Vec<String>, seed: Option<u64>) -> DatasetManifest {
        DatasetManifest {
            corpus,
            total: self.stats.total,
            categories: self.stats.categories,
            subtypes: self.stats.subtypes,
            content_hash: self.hasher.finish_hex(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::AnswerValue;
    use crate::qa::{qa_id, QuestionSpec};

    fn pair(image: &str, subtype: Subtype, object: &str) -> QAPair {
        let spec = QuestionSpec::new(subtype).with("object", object);
        QAPair {
            qa_id: qa_id(image, &spec),
            image_id: image.to_owned(),
            category: spec.category,
            subtype,
            params: spec.params,
            question: "q".into(),
            answer: AnswerValue::yes(),
            template_id: None,
        }
    }

    fn images(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img_{i:05}")).collect()
    }

    #[test]
    fn ratios_parse_and_size() {
        let r: Ratios = "7:2:1".parse().unwrap();
        assert_eq!(r, Ratios::default());
        assert_eq!(r.sizes(10), [7, 2, 1]);
        assert_eq!(r.sizes(0), [0, 0, 0]);
        assert_eq!(r.sizes(3).iter().sum::<usize>(), 3);
        assert!("7:2".parse::<Ratios>().is_err());
        assert!("7:0:1".parse::<Ratios>().is_err());
        assert!("a:b:c".parse::<Ratios>().is_err());
    }

    #[test]
    fn ten_images_split_exactly() {
        let a = assign_images(images(10), Ratios::default(), 1).unwrap();
        let counts = a.image_counts();
        assert_eq!(counts[&Split::Train], 7);
        assert_eq!(counts[&Split::Val], 2);
        assert_eq!(counts[&Split::Test], 1);
        assert_eq!(a, assign_images(images(10).into_iter().rev(), Ratios::default(), 1).unwrap());
    }

    #[test]
    fn large_split_is_within_one_image() {
        let n = 100_003;
        let counts = assign_images(images(n), Ratios::default(), 9).unwrap().image_counts();
        for (split, share) in [(Split::Train, 0.7), (Split::Val, 0.2), (Split::Test, 0.1)] {
            assert!((counts[&split] as f64 - share * n as f64).abs() <= 1.0, "{split}");
        }
    }

    #[test]
    fn split_keeps_images_together() {
        let corpus: Vec<QAPair> = (0..20)
            .flat_map(|i| {
                let image = format!("img_{i}");
                vec![pair(&image, Subtype::ObjectCount, "car"), pair(&image, Subtype::ObjectPresence, "bus")]
            })
            .collect();
        let a = split(&corpus, Ratios::default(), 5).unwrap();
        let by_qa = a.by_qa(&corpus);
        assert_eq!(by_qa.len(), corpus.len());
        for qa in &corpus {
            assert_eq!(by_qa[qa.qa_id.as_str()], a.bucket(&qa.image_id).unwrap());
        }
        assert!(matches!(split(&[], Ratios::default(), 5), Err(DatasetError::EmptyCorpus)));
    }

    #[test]
    fn stats_examples() {
        let mut corpus: Vec<QAPair> = (0..3).map(|i| pair(&format!("i{i}"), Subtype::ProportionScalar, "x")).collect();
        corpus.extend((0..2).map(|i| pair(&format!("i{i}"), Subtype::NegationAbsence, "x")));
        let s: CorpusStats = corpus.iter().collect();
        assert_eq!(s.categories[&Category::Proportion], 3);
        assert_eq!(s.categories[&Category::Negation], 2);
        assert_eq!(s.total, 5);
        assert_eq!(s.category_sum(), 5);

        let empty = CorpusStats::default();
        assert_eq!(empty.total, 0);
        assert_eq!(empty.categories.len(), 7);
        assert!(empty.categories.values().all(|&v| v == 0));
        assert!(empty.to_table().contains("Multi-hop"));
    }

    #[test]
    fn dedup_examples() {
        let a = pair("i", Subtype::ObjectCount, "car");
        let b = pair("i", Subtype::ObjectCount, "bus");
        let (kept, dropped) = dedup(vec![a.clone(), b.clone(), a.clone()]);
        assert_eq!(kept, vec![a.clone(), b.clone()]);
        assert_eq!(dropped, 1);
        assert_eq!(dedup(vec![a.clone(), b.clone()]).1, 0);
        assert_eq!(dedup(Vec::new()), (Vec::new(), 0));
    }

    fn mixed_corpus() -> Vec<QAPair> {
        let subtypes = [
            Subtype::ProportionScalar,
            Subtype::DepthBinary,
            Subtype::LayoutBinary,
            Subtype::ObjectCount,
            Subtype::NegationAbsence,
            Subtype::CfCountPerturbation,
            Subtype::MultihopCountCompare,
        ];
        (0..700)
            .map(|i| {
                // skewed: most pairs are proportion
                let s = if i % 10 < 4 { subtypes[0] } else { subtypes[i % 7] };
                pair(&format!("img_{}", i / 7), s, &i.to_string())
            })
            .collect()
    }

    #[test]
    fn review_sample_is_stratified_and_deterministic() {
        let corpus = mixed_corpus();
        let sample = sample_for_review(&corpus, 50, 3).unwrap();
        assert_eq!(sample.len(), 50);
        let cats: BTreeSet<Category> = sample.iter().map(|q| q.category).collect();
        assert_eq!(cats.len(), 7);
        assert_eq!(sample, sample_for_review(&corpus, 50, 3).unwrap());
        assert_ne!(sample, sample_for_review(&corpus, 50, 4).unwrap());

        let small = sample_for_review(&corpus, 7, 3).unwrap();
        assert_eq!(small.iter().map(|q| q.category).collect::<BTreeSet<_>>().len(), 7);
        assert_eq!(sample_for_review(&corpus, corpus.len(), 3).unwrap().len(), corpus.len());
        assert!(matches!(
            sample_for_review(&corpus, corpus.len() + 1, 3),
            Err(DatasetError::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn review_csv_has_blank_judgments() {
        let qa = pair("i", Subtype::ObjectCount, "car");
        let mut buf = Vec::new();
        write_review_csv(&mut buf, &[ReviewRow::new(&qa, Some("Answer: Yes."))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "qa_id,image_id,category,subtype,question,base_answer,cot,metadata_accurate,cot_consistent,plausible"
        );
        assert!(lines.next().unwrap().ends_with(",Answer: Yes.,,,"));
    }

    #[test]
    fn manifest_counts_and_hash() {
        let corpus = mixed_corpus();
        let mut builder = ManifestBuilder::new();
        let mut bytes = Vec::new();
        for qa in &corpus {
            let line = qa.to_json();
            builder.observe(qa, &line);
            bytes.extend_from_slice(line.as_bytes());
            bytes.push(b'\n');
        }
        let m = builder.finish(vec!["qa.jsonl".into()], Some(1));
        assert_eq!(m.total, corpus.len());
        assert_eq!(m.categories.values().sum::<usize>(), m.total);
        assert_eq!(m.content_hash, digest::sha256_hex(&bytes));
    }

    #[test]
    fn jsonl_round_trip_skips_blank_lines() {
        let corpus = mixed_corpus();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &corpus).unwrap();
        buf.extend_from_slice(b"\n\n");
        assert_eq!(read_corpus(&buf[..]).unwrap(), corpus);
        let err = read_corpus(&b"{\"qa_id\": 1}\n"[..]).unwrap_err();
        assert!(matches!(err, DatasetError::Json { line: 1, .. }));
    }
}
