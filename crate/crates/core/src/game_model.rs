//! The original finite N-agent game: spaces, kernels, cost, and the affine
//! mean-field coupling.
//!
//! Mean-field dependence is affine in the state distribution `d`:
//!
//! ```text
//! q(s'|s,a,d) = sum_k d(k) Q_k(s'|s,a)        (Q_base when no coupling)
//! m(s,a,d)    = m0(s,a) + sum_k d(k) m1(s,a,k)
//! ```
//!
//! A convex combination of stochastic rows is stochastic, and an affine
//! function on the simplex attains its extrema at the vertices, so checking
//! the vertices `d = delta_k` is enough for both properties.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{self, SIMPLEX_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    /// `[s][a][s']`
    pub transition_base: Vec<Vec<Vec<f64>>>,
    /// `[k][s][a][s']`, one kernel per coupling state `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_couple: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `[s][y]`
    pub observation_kernel: Vec<Vec<f64>>,
    /// `[s][a]`
    pub cost_base: Vec<Vec<f64>>,
    /// `[s][a][k]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_couple: Option<Vec<Vec<Vec<f64>>>>,
    pub beta: f64,
    pub lambda: f64,
    #[serde(rename = "horizon_T")]
    pub horizon_t: usize,
    pub kappa0: Vec<f64>,
}

/// A distribution over original states.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField(pub Vec<f64>);

impl Deref for MeanField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: String) {
        self.violations.push(msg);
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Labels key policy histories in files, joined by `/`.
fn check_labels(report: &mut ValidationReport, what: &str, labels: &[String]) {
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() || l.contains('/') {
            report.push(format!("{what}[{i}]: label {l:?} must be nonempty and free of '/'"));
        }
        if labels[..i].contains(l) {
            report.push(format!("{what}[{i}]: duplicate label {l:?}"));
        }
    }
}

fn check_row(report: &mut ValidationReport, name: String, row: &[f64], len: usize) {
    if row.len() != len {
        report.push(format!("{name}: expected {len} entries, found {}", row.len()));
        return;
    }
    if let Some(x) = row.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        report.push(format!("{name}: negative or non-finite entry {x}"));
        return;
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        report.push(format!("{name}: row sums to {sum}, expected 1"));
    }
}

impl GameSpec {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    pub fn has_transition_coupling(&self) -> bool {
        self.transition_couple.is_some()
    }

    pub fn has_cost_coupling(&self) -> bool {
        self.cost_couple.is_some()
    }

    /// True when neither kernel nor cost depends on the mean field.
    pub fn is_decoupled(&self) -> bool {
        !self.has_transition_coupling() && !self.has_cost_coupling()
    }

    /// Checks every structural and stochasticity invariant. Never fails;
    /// an empty report means the spec is usable.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let (ns, na, ny) = (self.n_states(), self.n_actions(), self.n_obs());
        if ns == 0 {
            r.push("states: empty".into());
        }
        if na == 0 {
            r.push("actions: empty".into());
        }
        if ny == 0 {
            r.push("observations: empty".into());
        }
        for (what, labels) in [("states", &self.states), ("actions", &self.actions), ("observations", &self.observations)] {
            check_labels(&mut r, what, labels);
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            r.push(format!("beta: {} not in (0, 1]", self.beta));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            r.push(format!("lambda: {} must be positive", self.lambda));
        }
        check_row(&mut r, "kappa0".into(), &self.kappa0, ns);

        if self.transition_base.len() != ns {
            r.push(format!(
                "transition_base: expected {ns} state blocks, found {}",
                self.transition_base.len()
            ));
        } else {
            for (s, block) in self.transition_base.iter().enumerate() {
                if block.len() != na {
                    r.push(format!("transition_base[{s}]: expected {na} action rows"));
                    continue;
                }
                for (a, row) in block.iter().enumerate() {
                    check_row(&mut r, format!("transition_base[{s}][{a}]"), row, ns);
                }
            }
        }

        if let Some(tc) = &self.transition_couple {
            if tc.len() != ns {
                r.push(format!(
                    "transition_couple: expected {ns} vertex kernels, found {}",
                    tc.len()
                ));
            } else {
                for (k, kernel) in tc.iter().enumerate() {
                    if kernel.len() != ns {
                        r.push(format!("transition_couple[{k}]: expected {ns} state blocks"));
                        continue;
                    }
                    for (s, block) in kernel.iter().enumerate() {
                        if block.len() != na {
                            r.push(format!("transition_couple[{k}][{s}]: expected {na} action rows"));
                            continue;
                        }
                        for (a, row) in block.iter().enumerate() {
                            check_row(&mut r, format!("transition_couple[{k}][{s}][{a}]"), row, ns);
                        }
                    }
                }
            }
        }

        if self.observation_kernel.len() != ns {
            r.push(format!(
                "observation_kernel: expected {ns} rows, found {}",
                self.observation_kernel.len()
            ));
        } else {
            for (s, row) in self.observation_kernel.iter().enumerate() {
                check_row(&mut r, format!("observation_kernel[{s}]"), row, ny);
            }
        }

        let cost_shape_ok = self.cost_base.len() == ns && self.cost_base.iter().all(|row| row.len() == na);
        if !cost_shape_ok {
            r.push(format!("cost_base: expected shape [{ns}][{na}]"));
        } else {
            for (s, row) in self.cost_base.iter().enumerate() {
                for (a, &c) in row.iter().enumerate() {
                    if !(c.is_finite() && c >= 0.0) {
                        r.push(format!("cost_base[{s}][{a}]: negative or non-finite cost {c}"));
                    }
                }
            }
        }
        if let Some(cc) = &self.cost_couple {
            let shape_ok = cc.len() == ns
                && cc.iter().all(|b| b.len() == na && b.iter().all(|row| row.len() == ns));
            if !shape_ok {
                r.push(format!("cost_couple: expected shape [{ns}][{na}][{ns}]"));
            } else if cost_shape_ok {
                for s in 0..ns {
                    for a in 0..na {
                        for k in 0..ns {
                            let m1 = cc[s][a][k];
                            let v = self.cost_base[s][a] + m1;
                            if !m1.is_finite() || v < 0.0 {
                                r.push(format!(
                                    "cost_couple[{s}][{a}][{k}]: vertex cost m({s},{a},delta_{k}) = {v} is negative"
                                ));
                            }
                        }
                    }
                }
            }
        }
        r
    }

    /// Validates, then rescales every stochastic row to sum to exactly 1
    /// (up to rounding) so text round-trip noise does not accumulate.
    pub fn validated(mut self) -> Result<Self> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidSpec(report.to_string().trim_end().to_string()));
        }
        simplex::normalize(&mut self.kappa0);
        self.transition_base
            .iter_mut()
            .flatten()
            .for_each(|row| simplex::normalize(row));
        if let Some(tc) = &mut self.transition_couple {
            tc.iter_mut()
                .flatten()
                .flatten()
                .for_each(|row| simplex::normalize(row));
        }
        self.observation_kernel
            .iter_mut()
            .for_each(|row| simplex::normalize(row));
        Ok(self)
    }

    fn check_sa(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                size: self.n_states(),
            });
        }
        if a >= self.n_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                size: self.n_actions(),
            });
        }
        Ok(())
    }

    fn check_field(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.n_states() {
            return Err(Error::InvalidArgument(format!(
                "mean field has {} entries, expected {}",
                d.len(),
                self.n_states()
            )));
        }
        Ok(())
    }

    /// `q(.|s,a,d)`.
    pub fn eval_transition(&self, s: usize, a: usize, d: &[f64]) -> Result<Vec<f64>> {
        self.check_sa(s, a)?;
        self.check_field(d)?;
        Ok(self.transition_unchecked(s, a, d))
    }

    pub(crate) fn transition_unchecked(&self, s: usize, a: usize, d: &[f64]) -> Vec<f64> {
        match &self.transition_couple {
            None => self.transition_base[s][a].clone(),
            Some(tc) => {
                let mut out = vec![0.0; self.n_states()];
                for (k, &w) in d.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &p) in out.iter_mut().zip(&tc[k][s][a]) {
                        *o += w * p;
                    }
                }
                out
            }
        }
    }

    /// `m(s,a,d)`.
    pub fn eval_cost(&self, s: usize, a: usize, d: &[f64]) -> Result<f64> {
        self.check_sa(s, a)?;
        self.check_field(d)?;
        Ok(self.cost_unchecked(s, a, d))
    }

    pub(crate) fn cost_unchecked(&self, s: usize, a: usize, d: &[f64]) -> f64 {
        let base = self.cost_base[s][a];
        match &self.cost_couple {
            None => base,
            Some(cc) => {
                let coupled: f64 = cc[s][a].iter().zip(d).map(|(m, w)| m * w).sum();
                // affine in d with nonnegative vertices; clamp rounding below zero
                (base + coupled).max(0.0)
            }
        }
    }

    /// `K`: the largest one-stage cost over all `(s, a)` and simplex vertices.
    pub fn cost_sup(&self) -> f64 {
        let mut k: f64 = 0.0;
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                let base = self.cost_base[s][a];
                match &self.cost_couple {
                    None => k = k.max(base),
                    Some(cc) => {
                        for m1 in &cc[s][a] {
                            k = k.max(base + m1);
                        }
                    }
                }
            }
        }
        k
    }

    /// Upper bound on the accumulated discounted cost over stages `0..=T`.
    pub fn accumulated_cost_bound(&self) -> f64 {
        let k = self.cost_sup();
        let n = self.horizon_t as f64 + 1.0;
        if self.beta >= 1.0 {
            k * n
        } else {
            k * (1.0 - self.beta.powf(n)) / (1.0 - self.beta)
        }
    }

    /// `(L_q, L_m)` of the affine coupling.
    ///
    /// `L_q` is the largest total-variation distance between two vertex
    /// kernels at the same `(s, a)`; it bounds
    /// `TV(q(.|s,a,d), q(.|s,a,d')) <= L_q * TV(d, d')`.
    /// `L_m` is `max |m1(s,a,k)|`; it bounds
    /// `|m(s,a,d) - m(s,a,d')| <= L_m * ||d - d'||_1`.
    pub fn lipschitz_moduli(&self) -> (f64, f64) {
        let (ns, na) = (self.n_states(), self.n_actions());
        let mut lq: f64 = 0.0;
        if let Some(tc) = &self.transition_couple {
            for s in 0..ns {
                for a in 0..na {
                    for k in 0..ns {
                        for j in (k + 1)..ns {
                            lq = lq.max(simplex::total_variation(&tc[k][s][a], &tc[j][s][a]));
                        }
                    }
                }
            }
        }
        let lm = self
            .cost_couple
            .as_ref()
            .map(|cc| cc.iter().flatten().flatten().fold(0.0_f64, |acc, m| acc.max(m.abs())))
            .unwrap_or(0.0);
        (lq, lm)
    }
}

/// Empirical distribution of `n_states`-valued labels.
pub fn empirical_distribution(states: &[usize], n_states: usize) -> Result<MeanField> {
    if states.is_empty() {
        return Err(Error::EmptyStateList);
    }
    let mut counts = vec![0usize; n_states];
    for &s in states {
        if s >= n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                size: n_states,
            });
        }
        counts[s] += 1;
    }
    Ok(MeanField(counts_to_distribution(&counts, states.len())))
}

pub(crate) fn counts_to_distribution(counts: &[usize], n: usize) -> Vec<f64> {
    let n = n as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}
