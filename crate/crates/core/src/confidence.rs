//! Empirical transition models with per-destination Bernstein-style radii.

use crate::error::{Error, Result};
use crate::mdp::{CountTable, TabularMdp, TransitionModel};

/// Slack allowed when the greedy allocation should exhaust the unit mass.
const MASS_SLACK: f64 = 1e-9;

/// `ln(2 / delta)`.
pub fn iota(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok((2.0 / delta).ln())
}

/// Set of transition kernels `p` with `|p(s') - p_hat(s')| <= b(s')` for
/// every destination, intersected with the simplex, independently per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    num_states: usize,
    num_actions: usize,
    iota: f64,
    center: Vec<f64>,
    radius: Vec<f64>,
    /// Lower and upper box ends clamped to `[0, 1]`.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Builds the set from visit counts. Unvisited pairs use `N(s,a) = 1`, so
/// their center is zero and their radius `5 * iota` covers the simplex.
pub fn build_confidence(counts: &CountTable, delta: f64) -> Result<ConfidenceSet> {
    let iota = iota(delta)?;
    let (s_n, a_n) = (counts.num_states(), counts.num_actions());
    let mut center = Vec::with_capacity(s_n * a_n * s_n);
    let mut radius = Vec::with_capacity(s_n * a_n * s_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let n = counts.pair_count(s, a) as f64;
            for &c in counts.row(s, a) {
                let c = c as f64;
                center.push(c / n);
                radius.push((4.0 * c * iota).sqrt() / n + 5.0 * iota / n);
            }
        }
    }
    Ok(ConfidenceSet::assemble(s_n, a_n, iota, center, radius))
}

impl ConfidenceSet {
    fn assemble(
        num_states: usize,
        num_actions: usize,
        iota: f64,
        center: Vec<f64>,
        radius: Vec<f64>,
    ) -> Self {
        let lo = center
            .iter()
            .zip(&radius)
            .map(|(c, b)| (c - b).max(0.0))
            .collect();
        let hi = center
            .iter()
            .zip(&radius)
            .map(|(c, b)| (c + b).min(1.0))
            .collect();
        Self {
            num_states,
            num_actions,
            iota,
            center,
            radius,
            lo,
            hi,
        }
    }

    /// Explicit center and radii, e.g. a zero-radius set around a known model.
    pub fn from_parts(center: &TransitionModel, radius: Vec<f64>, iota: f64) -> Result<Self> {
        if radius.len() != center.as_slice().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} radii for {} transition entries",
                radius.len(),
                center.as_slice().len()
            )));
        }
        if radius.iter().any(|b| b.is_nan() || *b < 0.0) {
            return Err(Error::InvalidMdp("radii must be nonnegative".into()));
        }
        Ok(Self::assemble(
            center.num_states(),
            center.num_actions(),
            iota,
            center.as_slice().to_vec(),
            radius,
        ))
    }

    /// Zero-radius set: the singleton `{model}`.
    pub fn exact(model: &TransitionModel) -> Self {
        Self::assemble(
            model.num_states(),
            model.num_actions(),
            0.0,
            model.as_slice().to_vec(),
            vec![0.0; model.as_slice().len()],
        )
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    fn span(&self, s: usize, a: usize) -> std::ops::Range<usize> {
        let start = (s * self.num_actions + a) * self.num_states;
        start..start + self.num_states
    }

    pub fn center(&self, s: usize, a: usize) -> &[f64] {
        &self.center[self.span(s, a)]
    }

    pub fn radius(&self, s: usize, a: usize) -> &[f64] {
        &self.radius[self.span(s, a)]
    }

    /// Membership of a distribution in the set for `(s, a)`.
    /// Membership up to `1e-12` rounding, so the boundary points chosen by
    /// [`Self::optimistic_backup`] count as inside.
    pub fn contains(&self, s: usize, a: usize, p: &[f64]) -> bool {
        if p.len() != self.num_states || p.iter().any(|&x| x < 0.0) {
            return false;
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return false;
        }
        p.iter()
            .zip(self.center(s, a))
            .zip(self.radius(s, a))
            .all(|((x, c), b)| (x - c).abs() <= *b + 1e-12)
    }

    /// Whether every row of `model` lies in the set.
    pub fn contains_model(&self, model: &TransitionModel) -> bool {
        model.num_states() == self.num_states
            && model.num_actions() == self.num_actions
            && (0..self.num_states)
                .all(|s| (0..self.num_actions).all(|a| self.contains(s, a, model.row(s, a))))
    }

    /// `max_{p in P(s,a)} p . v` together with a maximizer.
    pub fn optimistic_backup(&self, s: usize, a: usize, v: &[f64]) -> (f64, Vec<f64>) {
        let order = descending_order(v);
        let mut p = vec![0.0; self.num_states];
        let value = self.allocate(s, a, v, &order, Some(&mut p));
        (value, p)
    }

    /// Value of [`Self::optimistic_backup`] given `order`, the states sorted
    /// by `v` descending with ties to the lowest index.
    #[inline]
    pub fn optimistic_value(&self, s: usize, a: usize, v: &[f64], order: &[usize]) -> f64 {
        self.allocate(s, a, v, order, None)
    }

    fn allocate(
        &self,
        s: usize,
        a: usize,
        v: &[f64],
        order: &[usize],
        mut out: Option<&mut [f64]>,
    ) -> f64 {
        let span = self.span(s, a);
        let lo = &self.lo[span.clone()];
        let hi = &self.hi[span];
        let mut remaining = 1.0 - lo.iter().sum::<f64>();
        let mut value: f64 = lo.iter().zip(v).map(|(p, x)| p * x).sum();
        if let Some(p) = out.as_deref_mut() {
            p.copy_from_slice(lo);
        }
        for &i in order {
            if remaining <= 0.0 {
                break;
            }
            let add = (hi[i] - lo[i]).min(remaining);
            remaining -= add;
            value += add * v[i];
            if let Some(p) = out.as_deref_mut() {
                p[i] += add;
            }
        }
        assert!(
            remaining <= MASS_SLACK,
            "confidence set for ({s},{a}) cannot hold a distribution"
        );
        value
    }
}

/// State indices sorted by `v` descending, ties to the lowest index.
pub fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
    order
}

/// Deviation bounds defining the good event, for one transition entry.
pub fn event_g_bound(truth: f64, estimate: f64, n: f64, iota: f64) -> f64 {
    let bennett = (2.0 * truth * iota / n).sqrt() + iota / (3.0 * n);
    let empirical = (4.0 * estimate * iota / n).sqrt() + 5.0 * iota / n;
    bennett.min(empirical)
}

/// Whether every empirical frequency is within its deviation bound of the
/// true kernel. Diagnostic only: it reads the ground truth.
pub fn check_event_g(counts: &CountTable, truth: &TabularMdp, delta: f64) -> Result<bool> {
    let iota = iota(delta)?;
    let model = truth.transition();
    if counts.num_states() != model.num_states() || counts.num_actions() != model.num_actions() {
        return Err(Error::DimensionMismatch(
            "count table and model have different shapes".into(),
        ));
    }
    for s in 0..counts.num_states() {
        for a in 0..counts.num_actions() {
            let n = counts.pair_count(s, a) as f64;
            for (&c, &p) in counts.row(s, a).iter().zip(model.row(s, a)) {
                let estimate = c as f64 / n;
                if (p - estimate).abs() > event_g_bound(p, estimate, n, iota) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Set whose only interesting row is `(0, 0)`; other states self-loop.
    fn set_1d(center: Vec<f64>, radius: Vec<f64>) -> ConfidenceSet {
        let n = center.len();
        let mut probs = vec![0.0; n * n];
        probs[..n].copy_from_slice(&center);
        for s in 1..n {
            probs[s * n + s] = 1.0;
        }
        let model = TransitionModel::new(n, 1, probs).unwrap();
        let mut radii = radius;
        radii.resize(n * n, 0.0);
        ConfidenceSet::from_parts(&model, radii, 1.0).unwrap()
    }

    #[test]
    fn radius_matches_formula() {
        let mut counts = CountTable::new(2, 1);
        counts.set(0, 0, 0, 48);
        counts.set(0, 0, 1, 16);
        let set = build_confidence(&counts, 2.0 / 1f64.exp()).unwrap();
        assert!((set.iota() - 1.0).abs() < 1e-15);
        assert!((set.radius(0, 0)[1] - 0.203125).abs() < 1e-15);
        assert_eq!(set.center(0, 0), &[0.75, 0.25]);
    }

    #[test]
    fn unvisited_pair_covers_simplex() {
        let counts = CountTable::new(3, 1);
        let set = build_confidence(&counts, 2.0 / 1f64.exp()).unwrap();
        assert_eq!(set.center(1, 0), &[0.0, 0.0, 0.0]);
        for b in set.radius(1, 0) {
            assert!((b - 5.0).abs() < 1e-14);
        }
        assert!(set.contains(1, 0, &[0.2, 0.3, 0.5]));
    }

    #[test]
    fn scaling_counts_scales_radius_terms() {
        let mut small = CountTable::new(2, 1);
        small.set(0, 0, 0, 9);
        small.set(0, 0, 1, 7);
        let mut big = small.clone();
        big.set(0, 0, 0, 36);
        big.set(0, 0, 1, 28);
        let delta = 0.05;
        let iota = iota(delta).unwrap();
        let b1 = build_confidence(&small, delta).unwrap().radius(0, 0)[1];
        let b4 = build_confidence(&big, delta).unwrap().radius(0, 0)[1];
        let (sqrt1, add1) = ((4.0 * 7.0 * iota).sqrt() / 16.0, 5.0 * iota / 16.0);
        assert!((b1 - (sqrt1 + add1)).abs() < 1e-14);
        assert!((b4 - (sqrt1 / 2.0 + add1 / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn delta_must_be_a_probability() {
        let counts = CountTable::new(1, 1);
        assert!(matches!(
            build_confidence(&counts, 1.0),
            Err(Error::DeltaOutOfRange(_))
        ));
        assert!(build_confidence(&counts, 0.0).is_err());
    }

    #[test]
    fn backup_shifts_mass_to_high_values() {
        let set = set_1d(vec![0.5, 0.5], vec![0.2, 0.2]);
        let (value, p) = set.optimistic_backup(0, 0, &[0.0, 1.0]);
        assert!((value - 0.7).abs() < 1e-15);
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);
        assert!(set.contains(0, 0, &p));
    }

    #[test]
    fn backup_of_constant_values_is_that_constant() {
        let set = set_1d(vec![0.2, 0.3, 0.5], vec![0.4, 0.1, 0.3]);
        let (value, _) = set.optimistic_backup(0, 0, &[0.6, 0.6, 0.6]);
        assert!((value - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_radius_backup_is_expectation() {
        let set = set_1d(vec![0.2, 0.3, 0.5], vec![0.0, 0.0, 0.0]);
        let (value, p) = set.optimistic_backup(0, 0, &[0.1, 0.9, 0.4]);
        assert!((value - (0.02 + 0.27 + 0.2)).abs() < 1e-15);
        assert_eq!(p, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn order_breaks_ties_by_index() {
        assert_eq!(descending_order(&[0.5, 1.0, 0.5, 1.0]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn exact_expectations_satisfy_event_g() {
        let p = TransitionModel::from_nested(&[
            vec![vec![0.25, 0.75]],
            vec![vec![0.5, 0.5]],
        ])
        .unwrap();
        let mdp = TabularMdp::new(p, vec![0.0, 0.0], 2, vec![1.0, 0.0]).unwrap();
        let counts = CountTable::from_counts(2, 1, vec![25, 75, 50, 50]).unwrap();
        assert!(check_event_g(&counts, &mdp, 0.1).unwrap());
    }

    #[test]
    fn single_impossible_observation_still_within_bounds() {
        let p = TransitionModel::from_nested(&[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]]).unwrap();
        let mdp = TabularMdp::new(p, vec![0.0, 0.0], 2, vec![1.0, 0.0]).unwrap();
        let counts = CountTable::from_counts(2, 1, vec![0, 1, 0, 0]).unwrap();
        // iota / 3 > 1 once iota > 3.
        assert!(check_event_g(&counts, &mdp, 0.05).unwrap());
    }

    #[test]
    fn large_deviation_breaks_event_g() {
        let p = TransitionModel::from_nested(&[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]]).unwrap();
        let mdp = TabularMdp::new(p, vec![0.0, 0.0], 2, vec![1.0, 0.0]).unwrap();
        let counts = CountTable::from_counts(2, 1, vec![500, 500, 0, 0]).unwrap();
        assert!(!check_event_g(&counts, &mdp, 0.1).unwrap());
    }
}
