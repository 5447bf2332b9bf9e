//! Longitudinal panel data, augmented (row-expanded) datasets, and
//! cross-fitting fold assignment.
//!
//! A [`Panel`] holds one row per subject in wide form: per-time covariate
//! columns `L_t`, a discrete treatment column `A_t` with a declared finite
//! support, an at-risk flag per time (absorbing states are encoded by
//! carrying values forward and clearing the flag), and a terminal outcome
//! `Y` bounded in a known interval.
//!
//! An [`AugmentedFrame`] is the panel expanded over hypothetical
//! natural-treatment columns `s_u` for a set of lags (the policy footprint
//! at a given stage of the sequential recursion). Rows are keyed by
//! (subject, footprint tuple) and ordered subject-major with footprint
//! tuples in lexicographic support order, which makes every downstream
//! computation reproducible bit-for-bit.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-role map for CSV ingestion.
///
/// `covariates[t-1]` lists the covariate column names for time `t` (may be
/// empty), `treatments[t-1]` names the `A_t` column, and `at_risk` may name
/// per-time 0/1 flag columns. Times with no flag column default to all
/// subjects at risk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelSchema {
    pub id: String,
    pub covariates: Vec<Vec<String>>,
    pub treatments: Vec<String>,
    #[serde(default)]
    pub at_risk: Option<Vec<String>>,
    pub outcome: String,
}

/// A validated longitudinal panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    subject_ids: Vec<String>,
    covariate_names: Vec<Vec<String>>,
    /// `covariates[t-1][c][i]`: covariate `c` at time `t` for subject `i`.
    covariates: Vec<Vec<Vec<f64>>>,
    /// `treatments[t-1][i]`.
    treatments: Vec<Vec<f64>>,
    /// Declared finite support of `A_t`, sorted ascending.
    supports: Vec<Vec<f64>>,
    /// `at_risk[t-1][i]`: false once the subject has entered an absorbing
    /// state before time `t`; carried values are deterministic from there on.
    at_risk: Vec<Vec<bool>>,
    outcome: Vec<f64>,
    outcome_bounds: (f64, f64),
}

impl Panel {
    /// Assemble a panel from columns, validating supports and bounds.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        subject_ids: Vec<String>,
        covariate_names: Vec<Vec<String>>,
        covariates: Vec<Vec<Vec<f64>>>,
        treatments: Vec<Vec<f64>>,
        supports: Vec<Vec<f64>>,
        at_risk: Option<Vec<Vec<bool>>>,
        outcome: Vec<f64>,
        outcome_bounds: (f64, f64),
    ) -> Result<Panel> {
        let n = subject_ids.len();
        let tau = treatments.len();
        if tau == 0 {
            return Err(Error::EmptyInput("panel must have at least one timepoint".into()));
        }
        if supports.len() != tau || covariates.len() != tau || covariate_names.len() != tau {
            return Err(Error::MalformedInput(format!(
                "per-time column groups disagree on tau: treatments={}, supports={}, covariates={}",
                tau,
                supports.len(),
                covariates.len()
            )));
        }
        let at_risk = at_risk.unwrap_or_else(|| vec![vec![true; n]; tau]);
        let panel = Panel {
            subject_ids,
            covariate_names,
            covariates,
            treatments,
            supports: supports.into_iter().map(sorted_support).collect::<Result<Vec<_>>>()?,
            at_risk,
            outcome,
            outcome_bounds,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        let (lo, hi) = self.outcome_bounds;
        if !(lo < hi) {
            return Err(Error::BoundsViolation(format!("outcome bounds [{lo}, {hi}] are degenerate")));
        }
        if self.outcome.len() != n {
            return Err(Error::MalformedInput("outcome column length differs from subject count".into()));
        }
        for (t0, trt) in self.treatments.iter().enumerate() {
            if trt.len() != n || self.at_risk[t0].len() != n {
                return Err(Error::MalformedInput(format!("column length mismatch at time {}", t0 + 1)));
            }
            for col in &self.covariates[t0] {
                if col.len() != n {
                    return Err(Error::MalformedInput(format!("covariate length mismatch at time {}", t0 + 1)));
                }
            }
            for (i, &a) in trt.iter().enumerate() {
                if !self.supports[t0].iter().any(|&s| s == a) {
                    return Err(Error::SupportViolation(format!(
                        "A_{} = {} for subject {} is not in the declared support {:?}",
                        t0 + 1,
                        a,
                        self.subject_ids[i],
                        self.supports[t0]
                    )));
                }
            }
        }
        for (i, &y) in self.outcome.iter().enumerate() {
            if y < lo || y > hi {
                return Err(Error::BoundsViolation(format!(
                    "Y = {} for subject {} outside [{lo}, {hi}]",
                    y, self.subject_ids[i]
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn tau(&self) -> usize {
        self.treatments.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    /// Treatment value `A_t` for subject `i` (`t` is 1-based).
    pub fn a(&self, t: usize, i: usize) -> f64 {
        self.treatments[t - 1][i]
    }

    pub fn treatment_column(&self, t: usize) -> &[f64] {
        &self.treatments[t - 1]
    }

    /// Declared support of `A_t`, sorted ascending.
    pub fn support(&self, t: usize) -> &[f64] {
        &self.supports[t - 1]
    }

    pub fn supports(&self) -> &[Vec<f64>] {
        &self.supports
    }

    /// Index of a value in the support of `A_t`.
    pub fn support_index(&self, t: usize, value: f64) -> Option<usize> {
        self.supports[t - 1].iter().position(|&s| s == value)
    }

    pub fn covariate_names(&self, t: usize) -> &[String] {
        &self.covariate_names[t - 1]
    }

    pub fn covariate_columns(&self, t: usize) -> &[Vec<f64>] {
        &self.covariates[t - 1]
    }

    /// Covariate vector `L_t` for subject `i`.
    pub fn l(&self, t: usize, i: usize) -> Vec<f64> {
        self.covariates[t - 1].iter().map(|c| c[i]).collect()
    }

    /// Whether subject `i` is still at risk (not absorbed) entering time `t`.
    pub fn at_risk(&self, t: usize, i: usize) -> bool {
        self.at_risk[t - 1][i]
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn y(&self, i: usize) -> f64 {
        self.outcome[i]
    }

    pub fn outcome_bounds(&self) -> (f64, f64) {
        self.outcome_bounds
    }

    /// True when any subject has a cleared at-risk flag at any time.
    pub fn has_absorbing_rows(&self) -> bool {
        self.at_risk.iter().any(|col| col.iter().any(|&r| !r))
    }

    /// Write the canonical wide CSV form: `id`, per-time covariates, `A{t}`,
    /// per-time `R{t}` flags (only when any flag is cleared), then `Y`.
    /// The encoding round-trips bit-exactly through [`load_panel`].
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let flags = self.has_absorbing_rows();
        let mut header = vec!["id".to_string()];
        for t in 1..=self.tau() {
            header.extend(self.covariate_names(t).iter().cloned());
            header.push(format!("A{t}"));
            if flags {
                header.push(format!("R{t}"));
            }
        }
        header.push("Y".to_string());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.subject_ids[i].clone()];
            for t in 1..=self.tau() {
                for col in self.covariate_columns(t) {
                    rec.push(fmt_f64(col[i]));
                }
                rec.push(fmt_f64(self.a(t, i)));
                if flags {
                    rec.push(if self.at_risk(t, i) { "1".into() } else { "0".into() });
                }
            }
            rec.push(fmt_f64(self.y(i)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The canonical schema matching [`Panel::to_csv`] output.
    pub fn canonical_schema(&self) -> PanelSchema {
        let flags = self.has_absorbing_rows();
        PanelSchema {
            id: "id".into(),
            covariates: (1..=self.tau()).map(|t| self.covariate_names(t).to_vec()).collect(),
            treatments: (1..=self.tau()).map(|t| format!("A{t}")).collect(),
            at_risk: flags.then(|| (1..=self.tau()).map(|t| format!("R{t}")).collect()),
            outcome: "Y".into(),
        }
    }
}

/// Shortest round-trip decimal form of a float, stable across runs.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn sorted_support(mut s: Vec<f64>) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Err(Error::EmptySupport("treatment support is empty".into()));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::SupportViolation("treatment support contains a non-finite value".into()));
    }
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.dedup();
    Ok(s)
}

/// Load a panel from CSV given a schema, declared supports, and outcome bounds.
pub fn load_panel<R: Read>(
    source: R,
    schema: &PanelSchema,
    supports: Vec<Vec<f64>>,
    outcome_bounds: (f64, f64),
) -> Result<Panel> {
    let tau = schema.treatments.len();
    if schema.covariates.len() != tau {
        return Err(Error::InvalidConfig(format!(
            "schema declares {} treatment columns but {} covariate groups",
            tau,
            schema.covariates.len()
        )));
    }
    if supports.len() != tau {
        return Err(Error::InvalidConfig(format!(
            "expected {} supports, got {}",
            tau,
            supports.len()
        )));
    }
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedInput(format!("column '{name}' not found in CSV header")))
    };
    let id_idx = col(&schema.id)?;
    let y_idx = col(&schema.outcome)?;
    let mut cov_idx = Vec::with_capacity(tau);
    let mut trt_idx = Vec::with_capacity(tau);
    let mut risk_idx: Vec<Option<usize>> = Vec::with_capacity(tau);
    for t0 in 0..tau {
        cov_idx.push(schema.covariates[t0].iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?);
        trt_idx.push(col(&schema.treatments[t0])?);
        risk_idx.push(match &schema.at_risk {
            Some(names) => Some(col(&names[t0])?),
            None => None,
        });
    }

    let mut subject_ids = Vec::new();
    let mut covariates: Vec<Vec<Vec<f64>>> =
        (0..tau).map(|t0| vec![Vec::new(); cov_idx[t0].len()]).collect();
    let mut treatments: Vec<Vec<f64>> = vec![Vec::new(); tau];
    let mut at_risk: Vec<Vec<bool>> = vec![Vec::new(); tau];
    let mut outcome = Vec::new();

    let parse = |field: &str, what: &str| -> Result<f64> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::MalformedInput(format!("cannot parse {what} value '{field}': {e}")))
    };

    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::MalformedInput(format!("row {} is short", row_no + 1)))
        };
        subject_ids.push(field(id_idx)?.to_string());
        for t0 in 0..tau {
            for (c, &idx) in cov_idx[t0].iter().enumerate() {
                covariates[t0][c].push(parse(field(idx)?, "covariate")?);
            }
            treatments[t0].push(parse(field(trt_idx[t0])?, "treatment")?);
            at_risk[t0].push(match risk_idx[t0] {
                Some(idx) => parse(field(idx)?, "at-risk flag")? != 0.0,
                None => true,
            });
        }
        outcome.push(parse(field(y_idx)?, "outcome")?);
    }

    Panel::new(
        subject_ids,
        schema.covariates.clone(),
        covariates,
        treatments,
        supports,
        Some(at_risk),
        outcome,
        outcome_bounds,
    )
}

/// The row-expanded dataset of the pooled sequential recursion.
///
/// Row `r` corresponds to subject `subjects[r]` and the hypothetical
/// natural-treatment values `s_cols[c][r]` for footprint lag
/// `footprint[c]`. Pseudo-outcome columns attached by the recursion are
/// carried in `q_cols`.
#[derive(Debug, Clone)]
pub struct AugmentedFrame {
    stage: usize,
    footprint: Vec<usize>,
    supports: Vec<Vec<f64>>,
    subjects: Vec<usize>,
    s_cols: Vec<Vec<f64>>,
    q_cols: Vec<(String, Vec<f64>)>,
}

impl AugmentedFrame {
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Sorted footprint lags carried by this frame.
    pub fn footprint(&self) -> &[usize] {
        &self.footprint
    }

    pub fn rows(&self) -> usize {
        self.subjects.len()
    }

    pub fn subject(&self, row: usize) -> usize {
        self.subjects[row]
    }

    pub fn subjects(&self) -> &[usize] {
        &self.subjects
    }

    /// Value of the s-column for `lag` at `row`.
    pub fn s_value(&self, lag: usize, row: usize) -> f64 {
        let c = self.footprint.iter().position(|&u| u == lag).expect("lag not carried by frame");
        self.s_cols[c][row]
    }

    pub fn s_columns(&self) -> &[Vec<f64>] {
        &self.s_cols
    }

    pub fn attach_q(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.rows(), "q column length must match frame rows");
        self.q_cols.push((name.to_string(), values));
    }

    pub fn q_col(&self, name: &str) -> Option<&[f64]> {
        self.q_cols.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn q_cols(&self) -> &[(String, Vec<f64>)] {
        &self.q_cols
    }

    /// Row index for a (subject, footprint tuple) key. Tuple values must be
    /// support members in footprint order.
    pub fn row_of(&self, subject: usize, tuple: &[f64]) -> Option<usize> {
        let mut per_subject = 1usize;
        for s in &self.supports {
            per_subject *= s.len();
        }
        let mut offset = 0usize;
        for (c, &v) in tuple.iter().enumerate() {
            let k = self.supports[c].iter().position(|&s| s == v)?;
            let mut stride = 1usize;
            for s in &self.supports[c + 1..] {
                stride *= s.len();
            }
            offset += k * stride;
        }
        let row = subject * per_subject + offset;
        (row < self.rows()).then_some(row)
    }
}

/// Cartesian expansion of each subject over hypothetical values of the
/// footprint lags, one row per (subject, value tuple), subject-major with
/// tuples in lexicographic support order.
pub fn build_augmented(panel: &Panel, stage: usize, footprint: &[usize]) -> Result<AugmentedFrame> {
    let mut fp: Vec<usize> = footprint.to_vec();
    fp.sort_unstable();
    fp.dedup();
    if let Some(&bad) = fp.iter().find(|&&u| u == 0 || u >= stage) {
        return Err(Error::InvalidConfig(format!(
            "footprint lag {bad} is not in 1..{} for stage {stage}",
            stage.saturating_sub(1)
        )));
    }
    let supports: Vec<Vec<f64>> = fp.iter().map(|&u| panel.support(u).to_vec()).collect();
    if let Some(pos) = supports.iter().position(|s| s.is_empty()) {
        return Err(Error::EmptySupport(format!("support for lag {} is empty", fp[pos])));
    }
    let per_subject: usize = supports.iter().map(|s| s.len()).product();
    let rows = panel.n() * per_subject;
    let mut subjects = Vec::with_capacity(rows);
    let mut s_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(rows); fp.len()];
    for i in 0..panel.n() {
        let mut idx = vec![0usize; fp.len()];
        loop {
            subjects.push(i);
            for (c, &k) in idx.iter().enumerate() {
                s_cols[c].push(supports[c][k]);
            }
            // advance the rightmost digit: lexicographic tuple order
            let mut c = fp.len();
            loop {
                if c == 0 {
                    break;
                }
                c -= 1;
                idx[c] += 1;
                if idx[c] < supports[c].len() {
                    break;
                }
                idx[c] = 0;
                if c == 0 {
                    break;
                }
            }
            if idx.iter().all(|&k| k == 0) {
                break;
            }
        }
    }
    Ok(AugmentedFrame { stage, footprint: fp, supports, subjects, s_cols, q_cols: Vec::new() })
}

/// Keep one row per unique (subject, new-footprint tuple), carrying attached
/// q-columns. The dropped lags must already be marginalized out of every
/// carried q-column; conflicting values signal a pipeline ordering bug.
pub fn collapse_frame(frame: &AugmentedFrame, new_footprint: &[usize]) -> Result<AugmentedFrame> {
    let mut nf: Vec<usize> = new_footprint.to_vec();
    nf.sort_unstable();
    nf.dedup();
    for &u in &nf {
        if !frame.footprint.contains(&u) {
            return Err(Error::InvalidConfig(format!(
                "new footprint lag {u} is not carried by the current frame"
            )));
        }
    }
    let keep: Vec<usize> =
        nf.iter().map(|&u| frame.footprint.iter().position(|&v| v == u).unwrap()).collect();
    let supports: Vec<Vec<f64>> = keep.iter().map(|&c| frame.supports[c].clone()).collect();

    let mut seen: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut subjects = Vec::new();
    let mut s_cols: Vec<Vec<f64>> = vec![Vec::new(); keep.len()];
    let mut q_cols: Vec<(String, Vec<f64>)> =
        frame.q_cols.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();

    for row in 0..frame.rows() {
        let key: Vec<u64> = keep.iter().map(|&c| frame.s_cols[c][row].to_bits()).collect();
        let subject = frame.subjects[row];
        match seen.get(&(subject, key.clone())) {
            Some(&out_row) => {
                for (qc, (name, vals)) in frame.q_cols.iter().enumerate() {
                    let a = vals[row];
                    let b = q_cols[qc].1[out_row];
                    let scale = a.abs().max(b.abs()).max(1.0);
                    if (a - b).abs() > 1e-9 * scale {
                        return Err(Error::NonUniqueAfterCollapse(format!(
                            "q-column '{name}' disagrees across collapsed rows of subject {subject} ({a} vs {b})"
                        )));
                    }
                }
            }
            None => {
                let out_row = subjects.len();
                seen.insert((subject, key), out_row);
                subjects.push(subject);
                for (out_c, &c) in keep.iter().enumerate() {
                    s_cols[out_c].push(frame.s_cols[c][row]);
                }
                for (qc, (_, vals)) in frame.q_cols.iter().enumerate() {
                    q_cols[qc].1.push(vals[row]);
                }
            }
        }
    }
    Ok(AugmentedFrame {
        stage: frame.stage,
        footprint: nf,
        supports,
        subjects,
        s_cols,
        q_cols,
    })
}

/// A partition of subjects into cross-fitting folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    j: usize,
    membership: Vec<usize>,
    seed: u64,
}

impl FoldAssignment {
    pub fn fold_count(&self) -> usize {
        self.j
    }

    /// Fold index of subject `i`.
    pub fn fold_of(&self, i: usize) -> usize {
        self.membership[i]
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Subjects in the validation set of fold `j`.
    pub fn validation(&self, j: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&i| self.membership[i] == j).collect()
    }

    /// A single pseudo-fold containing every subject, for unsplit fits.
    pub fn pooled(n: usize) -> FoldAssignment {
        FoldAssignment { j: 1, membership: vec![0; n], seed: 0 }
    }
}

/// Uniform random partition of `{0..n}` into `J` folds whose sizes differ by
/// at most one; deterministic for a fixed seed.
pub fn assign_folds(n: usize, j: usize, seed: u64) -> Result<FoldAssignment> {
    if j < 2 || j > n {
        return Err(Error::InvalidFoldCount(format!("J = {j} must satisfy 2 <= J <= n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut membership = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        membership[i] = pos % j;
    }
    Ok(FoldAssignment { j, membership, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_panel(n: usize, tau: usize) -> Panel {
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        let cov_names = vec![vec!["L".to_string()]; tau];
        let covs = (0..tau).map(|t| vec![(0..n).map(|i| (i + t) as f64).collect()]).collect();
        let trts = (0..tau).map(|t| (0..n).map(|i| ((i + t) % 2) as f64).collect()).collect();
        let sup = vec![vec![0.0, 1.0]; tau];
        let y = (0..n).map(|i| (i % 2) as f64).collect();
        Panel::new(ids, cov_names, covs, trts, sup, None, y, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn load_rejects_support_violation() {
        let csv = "id,L1,A1,L2,A2,Y\n1,0.5,0,0.1,1,0.2\n2,0.3,2,0.2,0,0.4\n";
        let schema = PanelSchema {
            id: "id".into(),
            covariates: vec![vec!["L1".into()], vec!["L2".into()]],
            treatments: vec!["A1".into(), "A2".into()],
            at_risk: None,
            outcome: "Y".into(),
        };
        let err = load_panel(csv.as_bytes(), &schema, vec![vec![0.0, 1.0]; 2], (0.0, 1.0));
        assert!(matches!(err, Err(Error::SupportViolation(_))), "{err:?}");
    }

    #[test]
    fn load_wellformed_two_subjects() {
        let csv = "id,L1,A1,L2,A2,Y\n1,0.5,0,0.1,1,0.2\n2,0.3,1,0.2,0,0.4\n";
        let schema = PanelSchema {
            id: "id".into(),
            covariates: vec![vec!["L1".into()], vec!["L2".into()]],
            treatments: vec!["A1".into(), "A2".into()],
            at_risk: None,
            outcome: "Y".into(),
        };
        let p = load_panel(csv.as_bytes(), &schema, vec![vec![0.0, 1.0]; 2], (0.0, 1.0)).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.tau(), 2);
        assert_eq!(p.a(2, 0), 1.0);
    }

    #[test]
    fn load_rejects_garbage() {
        let csv = "id,A1,Y\n1,zero,0.2\n";
        let schema = PanelSchema {
            id: "id".into(),
            covariates: vec![vec![]],
            treatments: vec!["A1".into()],
            at_risk: None,
            outcome: "Y".into(),
        };
        let err = load_panel(csv.as_bytes(), &schema, vec![vec![0.0, 1.0]], (0.0, 1.0));
        assert!(matches!(err, Err(Error::MalformedInput(_))));
    }

    #[test]
    fn load_rejects_outcome_outside_bounds() {
        let csv = "id,A1,Y\n1,0,1.5\n";
        let schema = PanelSchema {
            id: "id".into(),
            covariates: vec![vec![]],
            treatments: vec!["A1".into()],
            at_risk: None,
            outcome: "Y".into(),
        };
        let err = load_panel(csv.as_bytes(), &schema, vec![vec![0.0, 1.0]], (0.0, 1.0));
        assert!(matches!(err, Err(Error::BoundsViolation(_))));
    }

    #[test]
    fn csv_roundtrip_is_byte_stable() {
        let p = toy_panel(5, 3);
        let mut buf1 = Vec::new();
        p.to_csv(&mut buf1).unwrap();
        let schema = p.canonical_schema();
        let p2 = load_panel(buf1.as_slice(), &schema, p.supports().to_vec(), p.outcome_bounds()).unwrap();
        assert_eq!(p, p2);
        let mut buf2 = Vec::new();
        p2.to_csv(&mut buf2).unwrap();
        assert_eq!(buf1, buf2);
    }

    #[test]
    fn augment_row_counts_match_fig_schematic() {
        // tau = 3, binary A, footprint {1,2}: four combinations per subject.
        let p = toy_panel(2, 3);
        let f = build_augmented(&p, 3, &[1, 2]).unwrap();
        assert_eq!(f.rows(), 8);
        assert_eq!(f.footprint(), &[1, 2]);
        // subject-major, lexicographic tuples
        let tuples: Vec<(usize, f64, f64)> =
            (0..8).map(|r| (f.subject(r), f.s_value(1, r), f.s_value(2, r))).collect();
        assert_eq!(
            tuples,
            vec![
                (0, 0.0, 0.0),
                (0, 0.0, 1.0),
                (0, 1.0, 0.0),
                (0, 1.0, 1.0),
                (1, 0.0, 0.0),
                (1, 0.0, 1.0),
                (1, 1.0, 0.0),
                (1, 1.0, 1.0),
            ]
        );
    }

    #[test]
    fn empty_footprint_gives_one_row_per_subject() {
        let p = toy_panel(4, 2);
        let f = build_augmented(&p, 2, &[]).unwrap();
        assert_eq!(f.rows(), 4);
        assert!(f.footprint().is_empty());
    }

    #[test]
    fn collapse_halves_and_carries_q() {
        let p = toy_panel(3, 3);
        let mut f = build_augmented(&p, 3, &[1, 2]).unwrap();
        // q depends only on s_1, so collapsing over s_2 is legal
        let q: Vec<f64> = (0..f.rows()).map(|r| 10.0 * f.subject(r) as f64 + f.s_value(1, r)).collect();
        f.attach_q("q2", q);
        let c = collapse_frame(&f, &[1]).unwrap();
        assert_eq!(c.rows(), 6);
        assert_eq!(c.q_col("q2").unwrap().len(), 6);
        // final collapse to one row per subject must fail: q still varies in s_1
        let err = collapse_frame(&c, &[]);
        assert!(matches!(err, Err(Error::NonUniqueAfterCollapse(_))));
    }

    #[test]
    fn collapse_with_unchanged_footprint_is_identity() {
        let p = toy_panel(3, 3);
        let f = build_augmented(&p, 3, &[1, 2]).unwrap();
        let c = collapse_frame(&f, &[1, 2]).unwrap();
        assert_eq!(c.rows(), f.rows());
        assert_eq!(c.subjects(), f.subjects());
        assert_eq!(c.s_columns(), f.s_columns());
    }

    #[test]
    fn collapse_to_empty_keeps_one_row_per_subject() {
        let p = toy_panel(3, 3);
        let mut f = build_augmented(&p, 3, &[1]).unwrap();
        let q = vec![1.25; f.rows()];
        f.attach_q("q1", q);
        let c = collapse_frame(&f, &[]).unwrap();
        assert_eq!(c.rows(), 3);
    }

    #[test]
    fn row_of_finds_rows() {
        let p = toy_panel(3, 3);
        let f = build_augmented(&p, 3, &[1, 2]).unwrap();
        for r in 0..f.rows() {
            let tuple = [f.s_value(1, r), f.s_value(2, r)];
            assert_eq!(f.row_of(f.subject(r), &tuple), Some(r));
        }
        assert_eq!(f.row_of(0, &[0.5, 0.0]), None);
    }

    #[test]
    fn folds_split_exactly() {
        let f = assign_folds(4, 2, 7).unwrap();
        let sizes: Vec<usize> = (0..2).map(|j| f.validation(j).len()).collect();
        assert_eq!(sizes, vec![2, 2]);
    }

    #[test]
    fn folds_sizes_differ_by_at_most_one() {
        let f = assign_folds(10, 3, 123).unwrap();
        let mut sizes: Vec<usize> = (0..3).map(|j| f.validation(j).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn folds_deterministic() {
        let a = assign_folds(37, 5, 99).unwrap();
        let b = assign_folds(37, 5, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fold_count_validated() {
        assert!(matches!(assign_folds(3, 1, 0), Err(Error::InvalidFoldCount(_))));
        assert!(matches!(assign_folds(3, 4, 0), Err(Error::InvalidFoldCount(_))));
    }

    proptest! {
        #[test]
        fn augmented_row_count_formula(n in 1usize..6, tau in 1usize..4, seed in 0u64..100) {
            let p = toy_panel(n, tau);
            let mut lags: Vec<usize> = (1..tau).filter(|u| (seed >> u) & 1 == 1).collect();
            if tau > 1 && lags.is_empty() && seed % 2 == 0 { lags.push(1); }
            let stage = tau;
            let lags: Vec<usize> = lags.into_iter().filter(|&u| u < stage).collect();
            let f = build_augmented(&p, stage, &lags).unwrap();
            let expect: usize = lags.iter().map(|&u| p.support(u).len()).product::<usize>() * n;
            prop_assert_eq!(f.rows(), expect);
            // keys unique
            let mut keys: Vec<(usize, Vec<u64>)> = (0..f.rows())
                .map(|r| (f.subject(r), f.footprint().iter().map(|&u| f.s_value(u, r).to_bits()).collect()))
                .collect();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), f.rows());
        }

        #[test]
        fn folds_partition_everyone(n in 2usize..40, j in 2usize..6, seed in 0u64..50) {
            prop_assume!(j <= n);
            let f = assign_folds(n, j, seed).unwrap();
            let mut count = vec![0usize; j];
            for i in 0..n { count[f.fold_of(i)] += 1; }
            prop_assert_eq!(count.iter().sum::<usize>(), n);
            let max = *count.iter().max().unwrap();
            let min = *count.iter().min().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}
