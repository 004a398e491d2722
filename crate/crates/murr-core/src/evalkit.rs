//! Success@5, macro averaging, relative Success@5 gain across consecutive
//! index accumulations, and the paired t-test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::special::reg_inc_beta;
use crate::vindex::RankedList;
use crate::{Error, Result, Scalar};

pub const SUCCESS_CUTOFF: usize = 5;

/// 1 if any of the first five entries is relevant, else 0.
pub fn success_at_5<F: Scalar>(
    ranked: &RankedList<F>,
    relevant: &std::collections::BTreeSet<String>,
) -> u8 {
    ranked
        .entries
        .iter()
        .take(SUCCESS_CUTOFF)
        .any(|(id, _)| relevant.contains(id)) as u8
}

/// Per-query Success@5 values for query set `query_set` evaluated with the
/// indexes accumulated through session `session`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalCell {
    pub query_set: usize,
    pub session: usize,
    pub per_query: Vec<u8>,
    pub mean: f64,
}

impl EvalCell {
    pub fn new(query_set: usize, session: usize, per_query: Vec<u8>) -> Self {
        assert!(query_set <= session, "query set {query_set} evaluated before session {session}");
        let mean = if per_query.is_empty() {
            0.0
        } else {
            per_query.iter().map(|&v| v as f64).sum::<f64>() / per_query.len() as f64
        };
        Self { query_set, session, per_query, mean }
    }
}

/// Complete lower-triangular grid of cells for all query_set <= session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuccessGrid {
    pub n_sessions: usize,
    pub cells: Vec<EvalCell>,
}

impl SuccessGrid {
    pub fn new(n_sessions: usize, cells: Vec<EvalCell>) -> Result<Self> {
        for i in 0..n_sessions {
            for s in i..n_sessions {
                if !cells.iter().any(|c| c.query_set == i && c.session == s) {
                    return Err(Error::Validation(format!("missing grid cell ({i}, {s})")));
                }
            }
        }
        Ok(Self { n_sessions, cells })
    }

    pub fn cell(&self, query_set: usize, session: usize) -> &EvalCell {
        self.cells
            .iter()
            .find(|c| c.query_set == query_set && c.session == session)
            .expect("complete grid")
    }

    pub fn mean(&self, query_set: usize, session: usize) -> f64 {
        self.cell(query_set, session).mean
    }

    /// Unweighted mean over every (query set, session) cell.
    pub fn macro_average(&self) -> f64 {
        macro_average(&self.cells.iter().map(|c| c.mean).collect::<Vec<_>>())
    }

    /// Per-query values of all cells concatenated in (query_set, session)
    /// order; the pairing basis for cross-strategy t-tests.
    pub fn flattened_per_query(&self) -> Vec<f64> {
        let mut keyed: Vec<&EvalCell> = self.cells.iter().collect();
        keyed.sort_by_key(|c| (c.query_set, c.session));
        keyed.iter().flat_map(|c| c.per_query.iter().map(|&v| v as f64)).collect()
    }
}

/// Unweighted arithmetic mean of per-query-set means.
pub fn macro_average(means: &[f64]) -> f64 {
    assert!(!means.is_empty(), "macro_average: empty input");
    means.iter().sum::<f64>() / means.len() as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainResult {
    pub mean: f64,
    /// Sample standard deviation (n - 1) of the terms.
    pub std: f64,
    pub terms: Vec<f64>,
    /// Terms dropped because the preceding session's Success@5 was zero.
    pub excluded: usize,
}

/// Relative Success@5 gain over consecutive index accumulations, reported
/// as ratio - 1. One term per pair (query_set i, session s) with
/// i < s <= S-1: mean(i, s) / mean(i, s-1) - 1. Zero-denominator terms are
/// excluded and counted.
pub fn relative_gain(grid: &SuccessGrid) -> Result<GainResult> {
    if grid.n_sessions < 2 {
        return Err(Error::Contract("relative_gain requires at least 2 sessions".into()));
    }
    let mut terms = Vec::new();
    let mut excluded = 0usize;
    for s in 1..grid.n_sessions {
        for i in 0..s {
            let prev = grid.mean(i, s - 1);
            let curr = grid.mean(i, s);
            if prev == 0.0 {
                excluded += 1;
            } else {
                terms.push(curr / prev - 1.0);
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::Undefined(
            "all relative-gain terms had zero denominators".into(),
        ));
    }
    let mean = terms.iter().sum::<f64>() / terms.len() as f64;
    let std = if terms.len() < 2 {
        0.0
    } else {
        let var =
            terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (terms.len() - 1) as f64;
        var.sqrt()
    };
    Ok(GainResult { mean, std, terms, excluded })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Two-sided p-value from Student's t with n-1 degrees of freedom.
    pub p: f64,
}

/// Paired t-test on per-query values. Identically-zero differences give
/// t = 0, p = 1.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "paired_t_test: length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Contract("paired_t_test requires at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(TTestResult { t: 0.0, p: 1.0 });
        }
        return Ok(TTestResult { t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }, p: 0.0 });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let p = student_t_two_sided_p(t, df);
    Ok(TTestResult { t, p })
}

/// Two-sided tail probability of Student's t through the regularized
/// incomplete beta function: P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Pairwise significance matrix keyed by strategy identifier.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub pairs: BTreeMap<String, TTestResult>,
}

impl SignificanceMatrix {
    pub fn insert(&mut self, a: &str, b: &str, result: TTestResult) {
        self.pairs.insert(format!("{a} vs {b}"), result);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ranked(ids: &[&str]) -> RankedList<f64> {
        RankedList {
            entries: ids.iter().enumerate().map(|(i, id)| (id.to_string(), -(i as f64))).collect(),
        }
    }

    fn rels(ids: &[&str]) -> std::collections::BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn success_at_5_boundaries() {
        assert_eq!(success_at_5(&ranked(&["r", "a", "b"]), &rels(&["r"])), 1);
        assert_eq!(success_at_5(&ranked(&["a", "b", "c", "d", "r"]), &rels(&["r"])), 1);
        assert_eq!(success_at_5(&ranked(&["a", "b", "c", "d", "e", "r"]), &rels(&["r"])), 0);
        assert_eq!(success_at_5(&ranked(&[]), &rels(&["r"])), 0);
    }

    #[test]
    fn success_agrees_with_full_scan() {
        // brute-force check over the entire list on random instances
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.gen_range(0..12);
            let ids: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
            let relevant = rels(
                &ids.iter().filter(|_| rng.gen::<bool>()).map(|s| s.as_str()).collect::<Vec<_>>(),
            );
            let list = ranked(&ids.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let brute = list
                .entries
                .iter()
                .enumerate()
                .any(|(r, (id, _))| r < 5 && relevant.contains(id)) as u8;
            assert_eq!(success_at_5(&list, &relevant), brute);
        }
    }

    fn grid_from(n_sessions: usize, means: &[(usize, usize, f64)]) -> SuccessGrid {
        // synthesizes per-query vectors of length 20 with the requested mean
        let cells = means
            .iter()
            .map(|&(i, s, mean)| {
                let ones = (mean * 20.0).round() as usize;
                let mut v = vec![1u8; ones];
                v.extend(vec![0u8; 20 - ones]);
                EvalCell::new(i, s, v)
            })
            .collect();
        SuccessGrid::new(n_sessions, cells).unwrap()
    }

    #[test]
    fn constant_grid_has_zero_gain() {
        let grid = grid_from(
            3,
            &[(0, 0, 0.5), (0, 1, 0.5), (0, 2, 0.5), (1, 1, 0.5), (1, 2, 0.5), (2, 2, 0.5)],
        );
        let gain = relative_gain(&grid).unwrap();
        assert_eq!(gain.mean, 0.0);
        assert_eq!(gain.std, 0.0);
        assert_eq!(gain.excluded, 0);
    }

    #[test]
    fn worked_three_session_example() {
        // Q0: 0.5, 0.6, 0.6 and Q1: 0.4, 0.5 give terms {0.2, 0.0, 0.25}
        let grid = grid_from(
            3,
            &[(0, 0, 0.5), (0, 1, 0.6), (0, 2, 0.6), (1, 1, 0.4), (1, 2, 0.5), (2, 2, 1.0)],
        );
        let gain = relative_gain(&grid).unwrap();
        assert_eq!(gain.terms.len(), 3);
        assert_relative_eq!(gain.mean, 0.15, epsilon = 1e-9);
        assert_relative_eq!(gain.std, 0.132287565553, epsilon = 1e-9);
    }

    #[test]
    fn five_sessions_give_ten_terms() {
        let mut means = Vec::new();
        for i in 0..5 {
            for s in i..5 {
                means.push((i, s, 0.5));
            }
        }
        let grid = grid_from(5, &means);
        assert_eq!(relative_gain(&grid).unwrap().terms.len(), 10);
    }

    #[test]
    fn zero_denominators_are_excluded() {
        let grid = grid_from(
            3,
            &[(0, 0, 0.0), (0, 1, 0.5), (0, 2, 0.5), (1, 1, 0.4), (1, 2, 0.5), (2, 2, 1.0)],
        );
        let gain = relative_gain(&grid).unwrap();
        assert_eq!(gain.excluded, 1);
        assert_eq!(gain.terms.len(), 2);

        let all_zero = grid_from(
            2,
            &[(0, 0, 0.0), (0, 1, 0.0), (1, 1, 0.0)],
        );
        assert!(matches!(relative_gain(&all_zero), Err(Error::Undefined(_))));
    }

    #[test]
    fn macro_average_cases() {
        assert_eq!(macro_average(&[0.4, 0.6]), 0.5);
        assert_eq!(macro_average(&[0.7]), 0.7);
    }

    #[test]
    fn t_test_identical_inputs() {
        let a = vec![1.0, 0.0, 1.0, 1.0];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn t_test_hand_value() {
        // differences (1,1,0,0): t = sqrt(3), df = 3, p ~ 0.1817
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let b = vec![0.0, 0.0, 1.0, 1.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert_relative_eq!(r.t, 3.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.p, 0.18169011381621483, epsilon = 1e-6);
        assert!(r.p >= 0.05, "not significant at 95%");
    }

    #[test]
    fn t_test_rejects_tiny_samples() {
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn t_cdf_matches_independent_implementation() {
        // statrs as the independent high-precision oracle over a (t, df) grid
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &df in &[1.0f64, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[0.0f64, 0.1, 0.5, 1.0, 1.732, 2.5, 4.0, 8.0] {
                let oracle = 2.0 * (1.0 - dist.cdf(t));
                assert!(
                    (student_t_two_sided_p(t, df) - oracle).abs() < 1e-6,
                    "t={t}, df={df}"
                );
            }
        }
    }

    #[test]
    fn incomplete_grid_is_rejected() {
        let cells = vec![EvalCell::new(0, 0, vec![1])];
        assert!(SuccessGrid::new(2, cells).is_err());
    }
}
