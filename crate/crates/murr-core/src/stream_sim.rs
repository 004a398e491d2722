//! Session assignment for queries and documents. Each domain follows a
//! beta-binomial (or explicit) distribution over sessions; documents that
//! are relevant to an assigned query are drawn from the distribution
//! truncated at the earliest session of any such query, so every relevant
//! document is searchable by the time its query arrives.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_training_triples, Corpus, Split, Triple};
use crate::special::{ln_beta, ln_gamma};
use crate::{derive_seed, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleDist {
    BetaBinomial { alpha: f64, beta: f64 },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n_sessions: usize,
    /// Per-domain session distribution.
    pub schedules: BTreeMap<String, ScheduleDist>,
    /// Training domain per session.
    pub emerging_domain: Vec<String>,
}

impl Scenario {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sc: Scenario = serde_json::from_str(&text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sessions < 2 {
            return Err(Error::Config("n_sessions: must be >= 2".into()));
        }
        if self.emerging_domain.len() != self.n_sessions {
            return Err(Error::Config(format!(
                "emerging_domain: expected {} entries, found {}",
                self.n_sessions,
                self.emerging_domain.len()
            )));
        }
        for dom in &self.emerging_domain {
            if !self.schedules.contains_key(dom) {
                return Err(Error::Config(format!(
                    "emerging_domain references {dom} which has no schedule"
                )));
            }
        }
        for (dom, dist) in &self.schedules {
            match dist {
                ScheduleDist::BetaBinomial { alpha, beta } => {
                    if *alpha <= 0.0 || *beta <= 0.0 {
                        return Err(Error::Config(format!(
                            "schedule for {dom}: alpha and beta must be positive"
                        )));
                    }
                }
                ScheduleDist::Explicit(pmf) => {
                    if pmf.len() != self.n_sessions {
                        return Err(Error::Config(format!(
                            "schedule for {dom}: explicit pmf length {} != n_sessions {}",
                            pmf.len(),
                            self.n_sessions
                        )));
                    }
                    if pmf.iter().any(|&p| p < 0.0) {
                        return Err(Error::Config(format!(
                            "schedule for {dom}: negative probability"
                        )));
                    }
                    let sum: f64 = pmf.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Config(format!(
                            "schedule for {dom}: explicit pmf sums to {sum}, expected 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The session pmf of a domain, length `n_sessions`.
    pub fn pmf_for(&self, domain: &str) -> Result<Vec<f64>> {
        let dist = self
            .schedules
            .get(domain)
            .ok_or_else(|| Error::Config(format!("no schedule for domain {domain}")))?;
        match dist {
            ScheduleDist::Explicit(pmf) => Ok(pmf.clone()),
            ScheduleDist::BetaBinomial { alpha, beta } => {
                let n = self.n_sessions - 1;
                (0..self.n_sessions).map(|k| beta_binomial_pmf(k, n, *alpha, *beta)).collect()
            }
        }
    }
}

/// Beta-binomial pmf: C(n,k) B(k+alpha, n-k+beta) / B(alpha, beta),
/// evaluated through log-gamma.
pub fn beta_binomial_pmf(k: usize, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    if k > n {
        return Err(Error::DomainError(format!("k = {k} out of range 0..={n}")));
    }
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(Error::DomainError("alpha and beta must be positive".into()));
    }
    let (k, n) = (k as f64, n as f64);
    let ln_choose = ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0);
    Ok((ln_choose + ln_beta(k + alpha, n - k + beta) - ln_beta(alpha, beta)).exp())
}

/// Restrict a pmf to sessions `0..=t` and renormalize. Zero mass on that
/// prefix falls back to a point mass at `t`.
pub fn truncated_pmf(pmf: &[f64], t: usize) -> Result<Vec<f64>> {
    if t >= pmf.len() {
        return Err(Error::DomainError(format!("t = {t} out of range 0..{}", pmf.len())));
    }
    let head = &pmf[..=t];
    let mass: f64 = head.iter().sum();
    if mass <= 0.0 {
        log::warn!("pmf has zero mass on sessions 0..={t}; falling back to point mass at {t}");
        let mut out = vec![0.0; t + 1];
        out[t] = 1.0;
        return Ok(out);
    }
    Ok(head.iter().map(|p| p / mass).collect())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionData {
    /// Test query ids arriving this session.
    pub queries: Vec<String>,
    /// Test document ids arriving this session.
    pub documents: Vec<String>,
    /// Training triples from the session's emerging domain.
    pub triples: Vec<Triple>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stream {
    pub scenario: String,
    pub n_sessions: usize,
    pub sessions: Vec<SessionData>,
}

impl Stream {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

fn draw_categorical(rng: &mut ChaCha8Rng, pmf: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    pmf.len() - 1
}

/// Assign test queries and documents to sessions and attach per-session
/// training triples. Deterministic in `(corpus, scenario, seed)`; two
/// scenarios whose schedules evaluate to the same pmfs produce identical
/// streams for the same seed.
pub fn build_stream(corpus: &Corpus, scenario: &Scenario, seed: u64) -> Result<Stream> {
    scenario.validate()?;
    for dom in scenario.schedules.keys() {
        if !corpus.domains.iter().any(|d| d == dom) {
            return Err(Error::Config(format!("scenario references unknown domain {dom}")));
        }
    }
    for dom in &corpus.domains {
        if !scenario.schedules.contains_key(dom) {
            return Err(Error::Config(format!("corpus domain {dom} has no schedule")));
        }
    }

    let mut pmfs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for dom in &corpus.domains {
        pmfs.insert(dom, scenario.pmf_for(dom)?);
    }

    let mut sessions = vec![SessionData::default(); scenario.n_sessions];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5e55));

    // queries first: their sessions constrain relevant documents
    let mut query_session: BTreeMap<&str, usize> = BTreeMap::new();
    for q in corpus.queries.iter().filter(|q| q.split == Split::Test) {
        let s = draw_categorical(&mut rng, &pmfs[q.domain.as_str()]);
        query_session.insert(&q.query_id, s);
        sessions[s].queries.push(q.query_id.clone());
    }

    // earliest session of any query each document is relevant to
    let mut min_query_session: BTreeMap<&str, usize> = BTreeMap::new();
    for (qid, rels) in &corpus.qrels {
        if let Some(&s) = query_session.get(qid.as_str()) {
            for did in rels {
                min_query_session
                    .entry(did)
                    .and_modify(|m| *m = (*m).min(s))
                    .or_insert(s);
            }
        }
    }

    for d in corpus.documents.iter().filter(|d| corpus.doc_split(&d.doc_id) == Some(Split::Test)) {
        let pmf = &pmfs[d.domain.as_str()];
        let s = match min_query_session.get(d.doc_id.as_str()) {
            Some(&t) => draw_categorical(&mut rng, &truncated_pmf(pmf, t)?),
            None => draw_categorical(&mut rng, pmf),
        };
        sessions[s].documents.push(d.doc_id.clone());
    }

    for (s, session) in sessions.iter_mut().enumerate() {
        let dom = &scenario.emerging_domain[s];
        session.triples = make_training_triples(corpus, dom, derive_seed(seed, 0x7121 + s as u64))?;
    }

    Ok(Stream {
        scenario: scenario.name.clone(),
        n_sessions: scenario.n_sessions,
        sessions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, DomainSpec, SyntheticSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(n_domains: usize) -> SyntheticSpec {
        SyntheticSpec {
            domains: (0..n_domains)
                .map(|i| DomainSpec {
                    name: format!("dom{i}"),
                    n_topics: 4,
                    train_docs_per_topic: 3,
                    test_docs_per_topic: 4,
                    train_queries_per_topic: 2,
                    test_queries_per_topic: 2,
                    signature_tokens_per_topic: 4,
                    noise_tokens_per_doc: 2,
                })
                .collect(),
            shared_vocab_size: 30,
            seed: 0,
        }
    }

    fn uniform_scenario(n_domains: usize, n_sessions: usize) -> Scenario {
        Scenario {
            name: "uniform".into(),
            n_sessions,
            schedules: (0..n_domains)
                .map(|i| (format!("dom{i}"), ScheduleDist::BetaBinomial { alpha: 1.0, beta: 1.0 }))
                .collect(),
            emerging_domain: (0..n_sessions).map(|s| format!("dom{}", s % n_domains)).collect(),
        }
    }

    #[test]
    fn uniform_beta_binomial_is_discrete_uniform() {
        // Beta(1,1) prior makes every k equally likely
        for k in 0..5 {
            assert_relative_eq!(beta_binomial_pmf(k, 4, 1.0, 1.0).unwrap(), 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_binomial_closed_form_value() {
        // k=0, n=4, alpha=2, beta=5: B(2,9)/B(2,5) = (1/90)/(1/30) = 1/3
        let p = beta_binomial_pmf(0, 4, 2.0, 5.0).unwrap();
        assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        // quadrature oracle: integrate Binomial(k; n, p) * Beta(p; a, b) dp
        let quad = quadrature_beta_binomial(0, 4, 2.0, 5.0);
        assert_relative_eq!(p, quad, epsilon = 1e-8);
    }

    /// Independent oracle: numerical quadrature of the binomial likelihood
    /// against the beta density (Simpson's rule on a fine grid).
    fn quadrature_beta_binomial(k: usize, n: usize, a: f64, b: f64) -> f64 {
        let choose = {
            let mut c = 1.0;
            for j in 0..k {
                c *= (n - j) as f64 / (j + 1) as f64;
            }
            c
        };
        let beta_norm = (ln_beta(a, b)).exp();
        let f = |p: f64| -> f64 {
            if p <= 0.0 || p >= 1.0 {
                return 0.0;
            }
            choose
                * p.powi(k as i32)
                * (1.0 - p).powi((n - k) as i32)
                * p.powf(a - 1.0)
                * (1.0 - p).powf(b - 1.0)
                / beta_norm
        };
        let m = 20_000;
        let h = 1.0 / m as f64;
        let mut acc = f(0.0) + f(1.0);
        for j in 1..m {
            let x = j as f64 * h;
            acc += if j % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
        }
        acc * h / 3.0
    }

    #[test]
    fn pmf_normalizes() {
        let total: f64 = (0..=4).map(|k| beta_binomial_pmf(k, 4, 2.0, 5.0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_rejects_out_of_range_k() {
        assert!(beta_binomial_pmf(5, 4, 1.0, 1.0).is_err());
    }

    #[test]
    fn truncation_cases() {
        let uniform = vec![0.2; 5];
        assert_eq!(truncated_pmf(&uniform, 1).unwrap(), vec![0.5, 0.5]);
        let point = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(truncated_pmf(&point, 1).unwrap(), vec![0.0, 1.0]);
        let already = vec![0.4, 0.1, 0.5, 0.0, 0.0];
        assert_eq!(truncated_pmf(&already, 2).unwrap(), vec![0.4, 0.1, 0.5]);
    }

    #[test]
    fn point_mass_scenario_isolates_domains() {
        let corpus = generate_synthetic_corpus(&spec(3), 21).unwrap();
        let scenario = Scenario {
            name: "dd".into(),
            n_sessions: 3,
            schedules: (0..3)
                .map(|i| {
                    let mut pmf = vec![0.0; 3];
                    pmf[i] = 1.0;
                    (format!("dom{i}"), ScheduleDist::Explicit(pmf))
                })
                .collect(),
            emerging_domain: (0..3).map(|s| format!("dom{s}")).collect(),
        };
        let stream = build_stream(&corpus, &scenario, 5).unwrap();
        for (s, session) in stream.sessions.iter().enumerate() {
            let dom = format!("dom{s}");
            for qid in &session.queries {
                assert_eq!(corpus.query(qid).unwrap().domain, dom);
            }
            for did in &session.documents {
                assert_eq!(corpus.document(did).unwrap().domain, dom);
            }
        }
    }

    #[test]
    fn relevant_documents_never_arrive_late() {
        let corpus = generate_synthetic_corpus(&spec(2), 3).unwrap();
        let scenario = uniform_scenario(2, 4);
        let stream = build_stream(&corpus, &scenario, 17).unwrap();
        assert_stream_constraint(&corpus, &stream);
    }

    fn assert_stream_constraint(corpus: &Corpus, stream: &Stream) {
        let mut doc_session = BTreeMap::new();
        for (s, session) in stream.sessions.iter().enumerate() {
            for did in &session.documents {
                assert!(
                    doc_session.insert(did.as_str(), s).is_none(),
                    "doc {did} assigned twice"
                );
            }
        }
        for (s, session) in stream.sessions.iter().enumerate() {
            for qid in &session.queries {
                for did in &corpus.qrels[qid] {
                    let ds = doc_session[did.as_str()];
                    assert!(ds <= s, "doc {did} (session {ds}) later than query {qid} (session {s})");
                }
            }
        }
    }

    #[test]
    fn assignment_partitions_test_ids() {
        let corpus = generate_synthetic_corpus(&spec(2), 9).unwrap();
        let stream = build_stream(&corpus, &uniform_scenario(2, 3), 1).unwrap();
        let assigned_q: usize = stream.sessions.iter().map(|s| s.queries.len()).sum();
        let assigned_d: usize = stream.sessions.iter().map(|s| s.documents.len()).sum();
        let test_q = corpus.queries.iter().filter(|q| q.split == Split::Test).count();
        let test_d =
            corpus.documents.iter().filter(|d| corpus.doc_split(&d.doc_id) == Some(Split::Test)).count();
        assert_eq!(assigned_q, test_q);
        assert_eq!(assigned_d, test_d);
    }

    #[test]
    fn explicit_and_beta_binomial_matching_pmfs_agree() {
        let corpus = generate_synthetic_corpus(&spec(2), 4).unwrap();
        let bb = uniform_scenario(2, 5);
        let mut explicit = bb.clone();
        for dist in explicit.schedules.values_mut() {
            *dist = ScheduleDist::Explicit(vec![0.2; 5]);
        }
        let a = build_stream(&corpus, &bb, 99).unwrap();
        let b = build_stream(&corpus, &explicit, 99).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn per_session_counts_track_multinomial() {
        // 2000 queries in one domain under a uniform 5-session schedule
        let spec = SyntheticSpec {
            domains: vec![DomainSpec {
                name: "dom0".into(),
                n_topics: 200,
                train_docs_per_topic: 1,
                test_docs_per_topic: 2,
                train_queries_per_topic: 1,
                test_queries_per_topic: 10,
                signature_tokens_per_topic: 3,
                noise_tokens_per_doc: 1,
            }],
            shared_vocab_size: 50,
            seed: 0,
        };
        let corpus = generate_synthetic_corpus(&spec, 8).unwrap();
        let sigma = (2000.0_f64 * 0.2 * 0.8).sqrt();
        let n_seeds = 10;
        let mut totals = [0.0f64; 5];
        for seed in 0..n_seeds {
            let stream = build_stream(&corpus, &uniform_scenario(1, 5), seed).unwrap();
            for (s, session) in stream.sessions.iter().enumerate() {
                let c = session.queries.len() as f64;
                assert!((c - 400.0).abs() <= 4.0 * sigma, "seed {seed} session count {c} outside 4 sigma");
                totals[s] += c;
            }
        }
        // averaging over seeds shrinks sigma by sqrt(n_seeds)
        let mean_sigma = sigma / (n_seeds as f64).sqrt();
        for (s, &t) in totals.iter().enumerate() {
            let mean = t / n_seeds as f64;
            assert!((mean - 400.0).abs() <= 3.0 * mean_sigma, "session {s} mean {mean} biased");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn stream_constraint_holds_for_random_scenarios(
            seed in any::<u64>(),
            n_sessions in 2usize..6,
            alphas in proptest::collection::vec(0.2f64..5.0, 2),
            betas in proptest::collection::vec(0.2f64..5.0, 2),
        ) {
            let corpus = generate_synthetic_corpus(&spec(2), 42).unwrap();
            let scenario = Scenario {
                name: "prop".into(),
                n_sessions,
                schedules: (0..2)
                    .map(|i| (
                        format!("dom{i}"),
                        ScheduleDist::BetaBinomial { alpha: alphas[i], beta: betas[i] },
                    ))
                    .collect(),
                emerging_domain: (0..n_sessions).map(|s| format!("dom{}", s % 2)).collect(),
            };
            let stream = build_stream(&corpus, &scenario, seed).unwrap();
            assert_stream_constraint(&corpus, &stream);
        }
    }
}
