//! Multi-domain retrieval data model: documents, queries, relevance
//! judgments and the train/test partition, with a synthetic generator and a
//! loader for LoTTe-style tab-separated files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub domain: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub domain: String,
    pub split: Split,
}

/// query_id -> set of relevant doc_ids. BTree containers keep iteration
/// order deterministic.
pub type Qrels = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub domains: Vec<String>,
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    /// Train/test assignment per document.
    pub doc_splits: BTreeMap<String, Split>,
}

/// A training triple: query with one relevant and one non-relevant document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub query_id: String,
    pub pos_doc_id: String,
    pub neg_doc_id: String,
}

impl Corpus {
    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == id)
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.query_id == id)
    }

    pub fn doc_split(&self, id: &str) -> Option<Split> {
        self.doc_splits.get(id).copied()
    }

    pub fn docs_of(&self, domain: &str, split: Split) -> Vec<&Document> {
        self.documents
            .iter()
            .filter(|d| d.domain == domain && self.doc_splits.get(&d.doc_id) == Some(&split))
            .collect()
    }

    pub fn queries_of(&self, domain: &str, split: Split) -> Vec<&Query> {
        self.queries.iter().filter(|q| q.domain == domain && q.split == split).collect()
    }

    /// [`Corpus::validate`] plus the requirement that every domain has at
    /// least one train and one test query. The synthetic generator
    /// guarantees this by construction; file ingestion may legitimately
    /// produce sparser corpora.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        for dom in &self.domains {
            for split in [Split::Train, Split::Test] {
                if !self.queries.iter().any(|q| &q.domain == dom && q.split == split) {
                    return Err(Error::Validation(format!("domain {dom} has no {split} queries")));
                }
            }
        }
        Ok(())
    }

    /// Structural invariants: unique ids, known domains, same-split
    /// relevance, train/test disjointness.
    pub fn validate(&self) -> Result<()> {
        let domain_set: BTreeSet<&str> = self.domains.iter().map(|s| s.as_str()).collect();
        let mut doc_ids = BTreeSet::new();
        for d in &self.documents {
            if !doc_ids.insert(d.doc_id.as_str()) {
                return Err(Error::Validation(format!("duplicate doc id {}", d.doc_id)));
            }
            if d.text.trim().is_empty() {
                return Err(Error::Validation(format!("doc {} has empty text", d.doc_id)));
            }
            if !domain_set.contains(d.domain.as_str()) {
                return Err(Error::Validation(format!(
                    "doc {} references unknown domain {}",
                    d.doc_id, d.domain
                )));
            }
            if !self.doc_splits.contains_key(&d.doc_id) {
                return Err(Error::Validation(format!("doc {} has no split assignment", d.doc_id)));
            }
        }
        let mut query_ids = BTreeSet::new();
        for q in &self.queries {
            if !query_ids.insert(q.query_id.as_str()) {
                return Err(Error::Validation(format!("duplicate query id {}", q.query_id)));
            }
            if doc_ids.contains(q.query_id.as_str()) {
                return Err(Error::Validation(format!(
                    "id {} used for both a query and a document",
                    q.query_id
                )));
            }
            if !domain_set.contains(q.domain.as_str()) {
                return Err(Error::Validation(format!(
                    "query {} references unknown domain {}",
                    q.query_id, q.domain
                )));
            }
            let rels = self.qrels.get(&q.query_id).ok_or_else(|| {
                Error::Validation(format!("query {} has no relevance judgments", q.query_id))
            })?;
            if rels.is_empty() {
                return Err(Error::Validation(format!(
                    "query {} has an empty relevance set",
                    q.query_id
                )));
            }
            let same_split = rels.iter().any(|d| self.doc_splits.get(d) == Some(&q.split));
            if !same_split {
                return Err(Error::Validation(format!(
                    "query {} has no relevant document in its own split",
                    q.query_id
                )));
            }
        }
        for (qid, rels) in &self.qrels {
            if !query_ids.contains(qid.as_str()) {
                return Err(Error::Validation(format!("qrels reference unknown query {qid}")));
            }
            for did in rels {
                if !doc_ids.contains(did.as_str()) {
                    return Err(Error::Validation(format!(
                        "qrels for {qid} reference unknown doc {did}"
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    pub n_topics: usize,
    pub train_docs_per_topic: usize,
    pub test_docs_per_topic: usize,
    pub train_queries_per_topic: usize,
    pub test_queries_per_topic: usize,
    /// Signature tokens unique to each topic; queries and their relevant
    /// documents share at least two of them.
    pub signature_tokens_per_topic: usize,
    /// Noise tokens per document drawn from the shared vocabulary.
    pub noise_tokens_per_doc: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub domains: Vec<DomainSpec>,
    /// Size of the cross-domain shared vocabulary noise tokens are drawn from.
    pub shared_vocab_size: usize,
    /// Default seed; `generate_synthetic_corpus` takes an explicit override.
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: SyntheticSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Config("domains: must be non-empty".into()));
        }
        if self.shared_vocab_size == 0 {
            return Err(Error::Config("shared_vocab_size: must be >= 1".into()));
        }
        let mut names = BTreeSet::new();
        for d in &self.domains {
            if !names.insert(&d.name) {
                return Err(Error::Config(format!("domains: duplicate name {}", d.name)));
            }
            let checks = [
                ("n_topics", d.n_topics),
                ("train_docs_per_topic", d.train_docs_per_topic),
                ("test_docs_per_topic", d.test_docs_per_topic),
                ("train_queries_per_topic", d.train_queries_per_topic),
                ("test_queries_per_topic", d.test_queries_per_topic),
            ];
            for (field, v) in checks {
                if v == 0 {
                    return Err(Error::Config(format!("{}.{field}: must be >= 1", d.name)));
                }
            }
            if d.signature_tokens_per_topic < 2 {
                return Err(Error::Config(format!(
                    "{}.signature_tokens_per_topic: must be >= 2",
                    d.name
                )));
            }
        }
        Ok(())
    }
}

/// Deterministically generate a corpus from the spec. Each (domain, topic)
/// pair owns a disjoint set of signature tokens; a document carries all
/// signature tokens of its topic plus noise tokens from the shared
/// vocabulary, and a query carries a sample of at least two signature
/// tokens, so relevance is recoverable by lexical overlap.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared: Vec<String> = (0..spec.shared_vocab_size).map(|j| format!("com{j}")).collect();

    let mut documents = Vec::new();
    let mut queries = Vec::new();
    let mut qrels: Qrels = BTreeMap::new();
    let mut doc_splits = BTreeMap::new();

    for (di, dom) in spec.domains.iter().enumerate() {
        for topic in 0..dom.n_topics {
            let sig: Vec<String> = (0..dom.signature_tokens_per_topic)
                .map(|j| format!("sig{di}x{topic}x{j}"))
                .collect();
            for split in [Split::Train, Split::Test] {
                let (n_docs, n_queries) = match split {
                    Split::Train => (dom.train_docs_per_topic, dom.train_queries_per_topic),
                    Split::Test => (dom.test_docs_per_topic, dom.test_queries_per_topic),
                };
                let mut topic_doc_ids = BTreeSet::new();
                for j in 0..n_docs {
                    let doc_id = format!("{}-{split}-t{topic}-d{j}", dom.name);
                    let mut tokens = sig.clone();
                    for _ in 0..dom.noise_tokens_per_doc {
                        tokens.push(shared[rng.gen_range(0..shared.len())].clone());
                    }
                    tokens.shuffle(&mut rng);
                    documents.push(Document {
                        doc_id: doc_id.clone(),
                        text: tokens.join(" "),
                        domain: dom.name.clone(),
                    });
                    doc_splits.insert(doc_id.clone(), split);
                    topic_doc_ids.insert(doc_id);
                }
                for j in 0..n_queries {
                    let query_id = format!("{}-{split}-t{topic}-q{j}", dom.name);
                    let take = 3.min(sig.len()).max(2);
                    let mut pick: Vec<&String> = sig.iter().collect();
                    pick.shuffle(&mut rng);
                    pick.truncate(take);
                    // queries are signature-only: shared-vocabulary tokens on
                    // the query side let every off-topic document sharing a
                    // noise token compete with the topical ones
                    let tokens: Vec<String> = pick.into_iter().cloned().collect();
                    queries.push(Query {
                        query_id: query_id.clone(),
                        text: tokens.join(" "),
                        domain: dom.name.clone(),
                        split,
                    });
                    qrels.insert(query_id, topic_doc_ids.clone());
                }
            }
        }
    }

    let corpus = Corpus {
        domains: spec.domains.iter().map(|d| d.name.clone()).collect(),
        documents,
        queries,
        qrels,
        doc_splits,
    };
    corpus.validate_strict()?;
    Ok(corpus)
}

// ---------------------------------------------------------------------------
// File ingestion (LoTTe-style TSV + TREC qrels)

/// Load a corpus from a tab-separated collection (`doc_id<TAB>text<TAB>domain`),
/// queries file (`query_id<TAB>text<TAB>domain<TAB>split`) and TREC qrels
/// (`query_id 0 doc_id relevance`). Queries left without a usable relevant
/// document are dropped with a warning. Document splits are derived from the
/// qrels: documents relevant to a train query are train documents, all
/// others are test documents.
pub fn load_lotte_style(
    collection_path: &Path,
    queries_path: &Path,
    qrels_path: &Path,
) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut domains = Vec::new();
    let mut seen_domains = BTreeSet::new();
    for (lineno, line) in BufReader::new(std::fs::File::open(collection_path)?)
        .lines()
        .enumerate()
    {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("collection line needs 3 tab-separated fields, found {}", parts.len()),
            });
        }
        if seen_domains.insert(parts[2].to_string()) {
            domains.push(parts[2].to_string());
        }
        documents.push(Document {
            doc_id: parts[0].to_string(),
            text: parts[1].to_string(),
            domain: parts[2].to_string(),
        });
    }

    let mut queries = Vec::new();
    for (lineno, line) in BufReader::new(std::fs::File::open(queries_path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("queries line needs 4 tab-separated fields, found {}", parts.len()),
            });
        }
        let split = match parts[3] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("unknown split {other:?} (expected train|test)"),
                })
            }
        };
        queries.push(Query {
            query_id: parts[0].to_string(),
            text: parts[1].to_string(),
            domain: parts[2].to_string(),
            split,
        });
    }

    let mut qrels: Qrels = BTreeMap::new();
    for (lineno, line) in BufReader::new(std::fs::File::open(qrels_path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("qrels line needs 4 whitespace-separated fields, found {}", parts.len()),
            });
        }
        let relevance: i64 = parts[3].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("relevance {:?} is not an integer", parts[3]),
        })?;
        if relevance > 0 {
            qrels.entry(parts[0].to_string()).or_default().insert(parts[2].to_string());
        }
    }

    let doc_ids: BTreeSet<&str> = documents.iter().map(|d| d.doc_id.as_str()).collect();
    let query_splits: BTreeMap<&str, Split> =
        queries.iter().map(|q| (q.query_id.as_str(), q.split)).collect();
    for (qid, rels) in &qrels {
        if !query_splits.contains_key(qid.as_str()) {
            return Err(Error::Validation(format!("qrels reference unknown query id {qid}")));
        }
        for did in rels {
            if !doc_ids.contains(did.as_str()) {
                return Err(Error::Validation(format!(
                    "qrels for query {qid} reference unknown doc id {did}"
                )));
            }
        }
    }

    // derive document splits from the qrels of the queries that cite them
    let mut doc_splits: BTreeMap<String, Split> = BTreeMap::new();
    for (qid, rels) in &qrels {
        let split = query_splits[qid.as_str()];
        if split == Split::Train {
            for did in rels {
                doc_splits.insert(did.clone(), Split::Train);
            }
        }
    }
    for d in &documents {
        doc_splits.entry(d.doc_id.clone()).or_insert(Split::Test);
    }

    // drop queries without a usable same-split relevant document
    let before = queries.len();
    queries.retain(|q| {
        qrels
            .get(&q.query_id)
            .map(|rels| rels.iter().any(|d| doc_splits.get(d) == Some(&q.split)))
            .unwrap_or(false)
    });
    let dropped = before - queries.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} queries with no usable relevance judgments");
    }
    let kept: BTreeSet<&str> = queries.iter().map(|q| q.query_id.as_str()).collect();
    qrels.retain(|qid, _| kept.contains(qid.as_str()));

    let corpus = Corpus { domains, documents, queries, qrels, doc_splits };
    corpus.validate()?;
    Ok(corpus)
}

/// Number of queries a loader pass would drop; exposed for diagnostics.
pub fn count_usable_queries(corpus: &Corpus) -> usize {
    corpus.queries.len()
}

// ---------------------------------------------------------------------------
// Directory persistence (same text formats as ingestion)

pub fn save_corpus_dir(corpus: &Corpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut coll = BufWriter::new(std::fs::File::create(dir.join("collection.tsv"))?);
    for d in &corpus.documents {
        writeln!(coll, "{}\t{}\t{}", d.doc_id, d.text, d.domain)?;
    }
    let mut qf = BufWriter::new(std::fs::File::create(dir.join("queries.tsv"))?);
    for q in &corpus.queries {
        writeln!(qf, "{}\t{}\t{}\t{}", q.query_id, q.text, q.domain, q.split)?;
    }
    let mut rf = BufWriter::new(std::fs::File::create(dir.join("qrels.txt"))?);
    for (qid, rels) in &corpus.qrels {
        for did in rels {
            writeln!(rf, "{qid} 0 {did} 1")?;
        }
    }
    Ok(())
}

pub fn load_corpus_dir(dir: &Path) -> Result<Corpus> {
    load_lotte_style(
        &dir.join("collection.tsv"),
        &dir.join("queries.tsv"),
        &dir.join("qrels.txt"),
    )
}

// ---------------------------------------------------------------------------
// Training triples

/// Triples per train query of a domain.
pub const TRIPLES_PER_QUERY: usize = 4;

/// [`TRIPLES_PER_QUERY`] triples per train query of the domain: positives are
/// sampled from the query's relevant train documents, negatives uniformly
/// from the domain's non-relevant train documents. Queries without a usable
/// positive or negative are skipped with a warning.
pub fn make_training_triples(corpus: &Corpus, domain: &str, seed: u64) -> Result<Vec<Triple>> {
    if !corpus.domains.iter().any(|d| d == domain) {
        return Err(Error::Config(format!("unknown domain {domain}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_docs: Vec<&str> = corpus
        .docs_of(domain, Split::Train)
        .iter()
        .map(|d| d.doc_id.as_str())
        .collect();
    let mut triples = Vec::new();
    for q in corpus.queries_of(domain, Split::Train) {
        let empty = BTreeSet::new();
        let rels = corpus.qrels.get(&q.query_id).unwrap_or(&empty);
        let pos_pool: Vec<&str> = train_docs.iter().copied().filter(|d| rels.contains(*d)).collect();
        let neg_pool: Vec<&str> =
            train_docs.iter().copied().filter(|d| !rels.contains(*d)).collect();
        if pos_pool.is_empty() {
            log::warn!("query {} has no relevant train document; skipped", q.query_id);
            continue;
        }
        if neg_pool.is_empty() {
            log::warn!("query {} has no non-relevant train document; skipped", q.query_id);
            continue;
        }
        // several triples per query, each with an independently drawn
        // negative: a single fixed negative per query lets the encoder
        // collapse toward a dominant direction instead of learning topical
        // separation
        for _ in 0..TRIPLES_PER_QUERY {
            let pos = pos_pool[rng.gen_range(0..pos_pool.len())];
            let neg = neg_pool[rng.gen_range(0..neg_pool.len())];
            triples.push(Triple {
                query_id: q.query_id.clone(),
                pos_doc_id: pos.to_string(),
                neg_doc_id: neg.to_string(),
            });
        }
    }
    Ok(triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            domains: (0..2)
                .map(|i| DomainSpec {
                    name: format!("dom{i}"),
                    n_topics: 2,
                    train_docs_per_topic: 2,
                    test_docs_per_topic: 2,
                    train_queries_per_topic: 1,
                    test_queries_per_topic: 1,
                    signature_tokens_per_topic: 4,
                    noise_tokens_per_doc: 3,
                })
                .collect(),
            shared_vocab_size: 20,
            seed: 0,
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let spec = tiny_spec();
        let a = generate_synthetic_corpus(&spec, 7).unwrap();
        let b = generate_synthetic_corpus(&spec, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_synthetic_corpus(&spec, 8).unwrap();
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn synthetic_counts_match_spec() {
        // 2 domains x 2 topics x 2 test docs, 1 test query per topic
        let corpus = generate_synthetic_corpus(&tiny_spec(), 1).unwrap();
        let test_docs: Vec<_> = corpus
            .documents
            .iter()
            .filter(|d| corpus.doc_split(&d.doc_id) == Some(Split::Test))
            .collect();
        assert_eq!(test_docs.len(), 8);
        let test_queries: Vec<_> =
            corpus.queries.iter().filter(|q| q.split == Split::Test).collect();
        assert_eq!(test_queries.len(), 4);
        for q in test_queries {
            assert_eq!(corpus.qrels[&q.query_id].len(), 2);
        }
    }

    #[test]
    fn query_shares_signature_tokens_with_relevant_docs() {
        let corpus = generate_synthetic_corpus(&tiny_spec(), 3).unwrap();
        for q in &corpus.queries {
            let q_tokens: BTreeSet<&str> =
                q.text.split(' ').filter(|t| t.starts_with("sig")).collect();
            for did in &corpus.qrels[&q.query_id] {
                let doc = corpus.document(did).unwrap();
                let d_tokens: BTreeSet<&str> = doc.text.split(' ').collect();
                let overlap = q_tokens.intersection(&d_tokens).count();
                assert!(overlap >= 2, "query {} vs doc {did}: overlap {overlap}", q.query_id);
            }
        }
    }

    /// Token-overlap brute-force ranking recovers relevance for nearly all
    /// generated queries.
    #[test]
    fn lexical_overlap_ranker_oracle() {
        let mut spec = tiny_spec();
        for d in &mut spec.domains {
            d.n_topics = 10;
            d.test_docs_per_topic = 5;
            d.test_queries_per_topic = 3;
        }
        let corpus = generate_synthetic_corpus(&spec, 11).unwrap();
        let mut hits = 0usize;
        let mut total = 0usize;
        for q in corpus.queries.iter().filter(|q| q.split == Split::Test) {
            let q_tokens: BTreeSet<&str> = q.text.split(' ').collect();
            let mut scored: Vec<(usize, &str)> = corpus
                .docs_of(&q.domain, Split::Test)
                .iter()
                .map(|d| {
                    let overlap =
                        d.text.split(' ').collect::<BTreeSet<_>>().intersection(&q_tokens).count();
                    (overlap, d.doc_id.as_str())
                })
                .collect();
            scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
            let rels = &corpus.qrels[&q.query_id];
            if scored.iter().take(5).any(|(_, d)| rels.contains(*d)) {
                hits += 1;
            }
            total += 1;
        }
        assert!(
            hits as f64 >= 0.95 * total as f64,
            "lexical Success@5 {}/{total} below 95%",
            hits
        );
    }

    #[test]
    fn invalid_spec_names_field() {
        let mut spec = tiny_spec();
        spec.domains[1].n_topics = 0;
        let err = generate_synthetic_corpus(&spec, 0).unwrap_err();
        assert!(err.to_string().contains("n_topics"), "{err}");
    }

    #[test]
    fn triples_respect_qrels() {
        let corpus = generate_synthetic_corpus(&tiny_spec(), 5).unwrap();
        for dom in &corpus.domains {
            let triples = make_training_triples(&corpus, dom, 9).unwrap();
            let train_queries = corpus.queries_of(dom, Split::Train);
            assert_eq!(triples.len(), TRIPLES_PER_QUERY * train_queries.len());
            for t in &triples {
                let rels = &corpus.qrels[&t.query_id];
                assert!(rels.contains(&t.pos_doc_id));
                assert!(!rels.contains(&t.neg_doc_id));
                assert_eq!(corpus.doc_split(&t.pos_doc_id), Some(Split::Train));
                assert_eq!(corpus.doc_split(&t.neg_doc_id), Some(Split::Train));
            }
            assert_eq!(triples, make_training_triples(&corpus, dom, 9).unwrap());
        }
    }

    /// Chi-square-style check: negative selection is uniform over candidates.
    #[test]
    fn negative_sampling_uniformity() {
        // one domain, one topic, 1000 train queries, 11 train docs; each
        // query is relevant to exactly one doc, leaving 10 candidates.
        let mut documents = Vec::new();
        let mut queries = Vec::new();
        let mut qrels: Qrels = BTreeMap::new();
        let mut doc_splits = BTreeMap::new();
        for j in 0..11 {
            let id = format!("d{j:02}");
            documents.push(Document { doc_id: id.clone(), text: format!("text {j}"), domain: "x".into() });
            doc_splits.insert(id, Split::Train);
        }
        documents.push(Document { doc_id: "dt".into(), text: "t".into(), domain: "x".into() });
        doc_splits.insert("dt".into(), Split::Test);
        queries.push(Query { query_id: "qt".into(), text: "t".into(), domain: "x".into(), split: Split::Test });
        qrels.insert("qt".into(), BTreeSet::from(["dt".to_string()]));
        for j in 0..1000 {
            let qid = format!("q{j:04}");
            queries.push(Query { query_id: qid.clone(), text: "q".into(), domain: "x".into(), split: Split::Train });
            qrels.insert(qid, BTreeSet::from(["d00".to_string()]));
        }
        let corpus = Corpus { domains: vec!["x".into()], documents, queries, qrels, doc_splits };
        corpus.validate().unwrap();

        let triples = make_training_triples(&corpus, "x", 42).unwrap();
        assert_eq!(triples.len(), TRIPLES_PER_QUERY * 1000);
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &triples {
            *counts.entry(t.neg_doc_id.as_str()).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let n = (TRIPLES_PER_QUERY * 1000) as f64;
        let sigma = (n * 0.1 * 0.9).sqrt();
        for (id, &c) in &counts {
            assert!(
                (c as f64 - n * 0.1).abs() <= 3.0 * sigma,
                "negative {id} count {c} outside 3 sigma"
            );
        }
    }

    #[test]
    fn lotte_loader_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_synthetic_corpus(&tiny_spec(), 13).unwrap();
        save_corpus_dir(&corpus, dir.path()).unwrap();
        let loaded = load_corpus_dir(dir.path()).unwrap();
        assert_eq!(loaded.documents.len(), corpus.documents.len());
        assert_eq!(loaded.queries.len(), corpus.queries.len());
        assert_eq!(loaded.qrels, corpus.qrels);
        assert_eq!(loaded.doc_splits, corpus.doc_splits);

        // dangling qrels id
        std::fs::write(dir.path().join("qrels.txt"), "dom0-test-t0-q0 0 no-such-doc 1\n").unwrap();
        let err = load_corpus_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no-such-doc"), "{err}");

        // empty qrels: all queries dropped, corpus still loads
        std::fs::write(dir.path().join("qrels.txt"), "").unwrap();
        let empty = load_corpus_dir(dir.path()).unwrap();
        assert_eq!(empty.queries.len(), 0);

        // malformed collection line reports the line number
        std::fs::write(dir.path().join("collection.tsv"), "only-one-field\n").unwrap();
        let err = load_corpus_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn minimal_lotte_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("collection.tsv"),
            "d1\talpha beta\tsci\nd2\tgamma\tsci\nd3\tdelta\tsci\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("queries.tsv"),
            "q1\talpha\tsci\ttest\nq2\tgamma\tsci\ttrain\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("qrels.txt"), "q1 0 d1 1\nq2 0 d2 1\n").unwrap();
        let corpus = load_corpus_dir(dir.path()).unwrap();
        assert_eq!(corpus.documents.len(), 3);
        assert_eq!(corpus.queries.len(), 2);
        assert_eq!(corpus.doc_split("d2"), Some(Split::Train));
        assert_eq!(corpus.doc_split("d1"), Some(Split::Test));
        assert_eq!(corpus.doc_split("d3"), Some(Split::Test));
    }
}
