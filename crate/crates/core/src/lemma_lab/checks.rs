use rand::Rng;

use super::report::{Check, LemmaReport, Method};
use crate::error::{Error, Result};
use crate::mdp::{sample_index, Policy, StationaryPolicy, TransitionModel};
use crate::planning::{
    cut, discounted_value, evaluate_finite, max_reach_probability, optimal_value_finite,
    policy_value_finite, reach_probability, state_occupancy, AsModel, ClippedMdp, GeneralReward,
    Target,
};

/// Largest number of stationary policies enumerated by the exact checks.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// Absolute tolerance of the finite-horizon checks.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// Tolerance of checks that involve a converged discounted evaluation.
pub const DISCOUNTED_TOLERANCE: f64 = 1e-8;

/// Smallest number of Monte Carlo trials accepted by [`verify_concentration`].
pub const MIN_TRIALS: usize = 10_000;

fn unit(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

fn check_state(model: &TransitionModel, s: usize, a: usize) -> Result<()> {
    if s >= model.num_states() || a >= model.num_actions() {
        return Err(Error::DimensionMismatch(format!(
            "pair ({s},{a}) outside a {}x{} model",
            model.num_states(),
            model.num_actions()
        )));
    }
    Ok(())
}

fn check_pinned(policy: &StationaryPolicy, s: usize, a: usize) -> Result<()> {
    if policy.get(s) != a {
        return Err(Error::Config(format!("policy must play {a} in state {s}")));
    }
    Ok(())
}

fn describe(model: &TransitionModel, extra: &str) -> String {
    format!("S={} A={} {extra}", model.num_states(), model.num_actions())
}

/// `max` over stationary policies of `W_d(1_{s,a}, P, 1_s)`, by enumeration.
pub fn max_stationary_visits<M: AsModel + ?Sized>(
    model: &M,
    s: usize,
    a: usize,
    d: usize,
) -> Result<(f64, StationaryPolicy)> {
    let m = model.model();
    check_state(m, s, a)?;
    let (n, a_n) = (m.num_states(), m.num_actions());
    let needed = (a_n as f64).powi(n as i32);
    if needed > ENUMERATION_CAP as f64 {
        return Err(Error::EnumerationBudget {
            needed,
            cap: ENUMERATION_CAP,
        });
    }
    let reward = GeneralReward::pair_indicator(n, a_n, s, a);
    let init = unit(n, s);
    let mut best = (f64::NEG_INFINITY, StationaryPolicy::constant(n, 0));
    for policy in StationaryPolicy::enumerate(n, a_n) {
        let w = policy_value_finite(m, &policy, &reward, d, &init)?;
        if w > best.0 {
            best = (w, policy);
        }
    }
    Ok(best)
}

fn max_all_visits(m: &TransitionModel, s: usize, a: usize, d: usize) -> Result<f64> {
    let reward = GeneralReward::pair_indicator(m.num_states(), m.num_actions(), s, a);
    let (values, _) = optimal_value_finite(m, &reward, d)?;
    Ok(values[s])
}

/// Stationary policies over `d` steps capture a `1/(6k)` share of what any
/// policy collects over `k d` steps.
pub fn verify_approx_power<M: AsModel + ?Sized>(
    mdp: &M,
    s: usize,
    a: usize,
    k: usize,
    d: usize,
) -> Result<LemmaReport> {
    let m = mdp.model();
    let lhs = max_all_visits(m, s, a, k * d)?;
    let (rhs, _) = max_stationary_visits(m, s, a, d)?;
    Ok(LemmaReport::new(
        "approx-power",
        describe(m, &format!("s={s} a={a} k={k} d={d}")),
        Method::Exact,
        vec![Check::le("max_all(kd) <= 6k max_sta(d)", lhs, 6.0 * k as f64, rhs, EXACT_TOLERANCE)],
    ))
}

/// Same horizon: `max_all W_d <= 6 max_sta W_d`.
pub fn verify_stationary_vs_all<M: AsModel + ?Sized>(
    mdp: &M,
    s: usize,
    a: usize,
    d: usize,
) -> Result<LemmaReport> {
    let m = mdp.model();
    let lhs = max_all_visits(m, s, a, d)?;
    let (rhs, _) = max_stationary_visits(m, s, a, d)?;
    Ok(LemmaReport::new(
        "stationary-vs-all",
        describe(m, &format!("s={s} a={a} d={d}")),
        Method::Exact,
        vec![Check::le("max_all(d) <= 6 max_sta(d)", lhs, 6.0, rhs, EXACT_TOLERANCE)],
    ))
}

/// Monte Carlo estimate of `Pr[N >= W/4]` where `N` counts visits to
/// `(s, a)` in `d` steps from `s` and `W` is its exact expectation.
pub fn verify_concentration<M: AsModel + ?Sized, R: Rng + ?Sized>(
    mdp: &M,
    policy: &StationaryPolicy,
    s: usize,
    a: usize,
    d: usize,
    trials: usize,
    rng: &mut R,
) -> Result<LemmaReport> {
    let m = mdp.model();
    check_state(m, s, a)?;
    check_pinned(policy, s, a)?;
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let (n, a_n) = (m.num_states(), m.num_actions());
    let reward = GeneralReward::pair_indicator(n, a_n, s, a);
    let w = policy_value_finite(m, policy, &reward, d, &unit(n, s))?;
    let threshold = w / 4.0;
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut state = s;
        let mut visits = 0u64;
        for _ in 0..d {
            let action = policy.get(state);
            if state == s && action == a {
                visits += 1;
            }
            state = sample_index(m.row(state, action), rng);
        }
        if visits as f64 >= threshold {
            hits += 1;
        }
    }
    let estimate = hits as f64 / trials as f64;
    let sigma = (0.25 / trials as f64).sqrt();
    let floor = 0.5 - 3.0 * sigma;
    let mut check = Check::le("1/2 - 3 sigma <= Pr[N >= W/4]", floor, 1.0, estimate, 0.0);
    check.pass = estimate >= floor;
    Ok(LemmaReport::new(
        "concentration",
        describe(m, &format!("s={s} a={a} d={d} W={w}")),
        Method::MonteCarlo {
            trials,
            estimate,
            sigma,
        },
        vec![check],
    ))
}

/// Smallest `eps` with `e^-eps q <= p <= e^eps q` entrywise, or `None`
/// when the supports differ.
pub fn closeness(p: &TransitionModel, q: &TransitionModel) -> Option<f64> {
    if p.num_states() != q.num_states() || p.num_actions() != q.num_actions() {
        return None;
    }
    let mut eps = 0.0f64;
    for (&x, &y) in p.as_slice().iter().zip(q.as_slice()) {
        match (x > 0.0, y > 0.0) {
            (false, false) => {}
            (true, true) => eps = eps.max((x / y).ln().abs()),
            _ => return None,
        }
    }
    Some(eps)
}

/// Multiplies every positive entry by `e^u` with `u` uniform in
/// `[-eps, eps]` and renormalizes. Returns the model and the closeness it
/// actually achieves.
pub fn perturb<R: Rng + ?Sized>(
    model: &TransitionModel,
    eps: f64,
    rng: &mut R,
) -> (TransitionModel, f64) {
    let (n, a_n) = (model.num_states(), model.num_actions());
    let mut out = model.clone();
    for s in 0..n {
        for a in 0..a_n {
            let row = out.row_mut(s, a);
            for p in row.iter_mut().filter(|p| **p > 0.0) {
                let u: f64 = if eps > 0.0 { rng.random_range(-eps..=eps) } else { 0.0 };
                *p *= u.exp();
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
    }
    let realized = closeness(model, &out).expect("perturbation keeps the support");
    (out, realized)
}

/// `e^{-4 S eps} W(P') <= W(P'') <= e^{4 S eps} W(P')` for a stationary
/// policy and nonnegative reward.
#[allow(clippy::too_many_arguments)]
pub fn verify_mpdl(
    p1: &TransitionModel,
    p2: &TransitionModel,
    eps: f64,
    policy: &StationaryPolicy,
    reward: &GeneralReward,
    d: usize,
    init: &[f64],
) -> Result<LemmaReport> {
    match closeness(p1, p2) {
        Some(actual) if actual <= eps * (1.0 + 1e-12) + 1e-15 => {}
        Some(actual) => {
            return Err(Error::NotClose {
                epsilon: eps,
                reason: format!("entry ratios reach e^{actual}"),
            })
        }
        None => {
            return Err(Error::NotClose {
                epsilon: eps,
                reason: "shapes or supports differ".into(),
            })
        }
    }
    let w1 = policy_value_finite(p1, policy, reward, d, init)?;
    let w2 = policy_value_finite(p2, policy, reward, d, init)?;
    let factor = (4.0 * p1.num_states() as f64 * eps).exp();
    Ok(LemmaReport::new(
        "mpdl",
        describe(p1, &format!("d={d} eps={eps}")),
        Method::Exact,
        vec![
            Check::le("W(P'') <= e^{4S eps} W(P')", w2, factor, w1, EXACT_TOLERANCE),
            Check::le("W(P') <= e^{4S eps} W(P'')", w1, factor, w2, EXACT_TOLERANCE),
        ],
    ))
}

/// `max X_{(S+2) d} (O) <= S^2 max X_{(S+1) d} (O)`.
pub fn verify_reach_horizon<M: AsModel + ?Sized>(
    mdp: &M,
    pairs: &[(usize, usize)],
    d: usize,
    init: &[f64],
) -> Result<LemmaReport> {
    let m = mdp.model();
    let n = m.num_states();
    if (n + 2) * d > 10_000 {
        return Err(Error::Config(format!("horizon (S+2)d = {} exceeds 10^4", (n + 2) * d)));
    }
    for &(s, a) in pairs {
        check_state(m, s, a)?;
    }
    let target = Target::Pairs(pairs.to_vec());
    let (lhs, _) = max_reach_probability(m, &target, (n + 2) * d, init)?;
    let (rhs, _) = max_reach_probability(m, &target, (n + 1) * d, init)?;
    Ok(LemmaReport::new(
        "reach-horizon",
        describe(m, &format!("|O|={} d={d}", pairs.len())),
        Method::Exact,
        vec![Check::le("X_(S+2)d <= S^2 X_(S+1)d", lhs, (n * n) as f64, rhs, EXACT_TOLERANCE)],
    ))
}

/// Finite versus discounted values with `gamma = 1 - 1/d2`, all from `1_s`.
pub fn verify_discount_bounds<M: AsModel + ?Sized>(
    mdp: &M,
    policy: &StationaryPolicy,
    s: usize,
    a: usize,
    d1: usize,
    d2: usize,
    reward: &GeneralReward,
) -> Result<LemmaReport> {
    let m = mdp.model();
    check_state(m, s, a)?;
    if d2 == 0 || d1 == 0 {
        return Err(Error::Config("d1 and d2 must be positive".into()));
    }
    let (n, a_n) = (m.num_states(), m.num_actions());
    let gamma = 1.0 - 1.0 / d2 as f64;
    let init = unit(n, s);
    let pair = GeneralReward::pair_indicator(n, a_n, s, a);
    let pair_d2 = policy_value_finite(m, policy, &pair, d2, &init)?;
    let pair_gamma = discounted_value(m, policy, &pair, gamma, &init)?;
    let r_d1 = policy_value_finite(m, policy, reward, d1, &init)?;
    let r_d2 = policy_value_finite(m, policy, reward, d2, &init)?;
    let r_gamma = discounted_value(m, policy, reward, gamma, &init)?;
    let tol = DISCOUNTED_TOLERANCE;
    let mut checks = vec![
        Check::le("W_d2(1_sa) <= 3 W_gamma(1_sa)", pair_d2, 3.0, pair_gamma, tol),
        Check::le("W_gamma(1_sa) <= 3 W_d2(1_sa)", pair_gamma, 3.0, pair_d2, tol),
        Check::le("W_d2(r) <= 3 W_gamma(r)", r_d2, 3.0, r_gamma, tol),
    ];
    let name = "W_gamma(r) <= 10 W_d1(r)";
    let needed = 10.0 * n as f64 * (n as f64).ln() * d2 as f64;
    if n < 3 {
        checks.push(Check::skipped(name, "needs S >= 3"));
    } else if (d1 as f64) < needed {
        checks.push(Check::skipped(name, &format!("needs d1 >= {needed:.3}")));
    } else {
        checks.push(Check::le(name, r_gamma, 10.0, r_d1, tol));
    }
    Ok(LemmaReport::new(
        "discount-bounds",
        describe(m, &format!("s={s} a={a} d1={d1} d2={d2}")),
        Method::Exact,
        checks,
    ))
}

fn check_base_state(model: &ClippedMdp, s: usize) -> Result<()> {
    if s >= model.base_states() {
        return Err(Error::DimensionMismatch(format!(
            "state {s} is not a base state of a model with {} base states",
            model.base_states()
        )));
    }
    Ok(())
}

/// Probability of having entered `z` within `d` steps.
fn z_visits<P: Policy + ?Sized>(model: &ClippedMdp, policy: &P, d: usize, init: &[f64]) -> Result<f64> {
    let reward = GeneralReward::z_indicator(model);
    policy_value_finite(model, policy, &reward, d, init)
}

/// `(1 - W_d(1_z, p, 1_s)) W_d(1_sa, cut p, 1_s) <= W_d(1_sa, p, 1_s)
/// <= W_d(1_sa, cut p, 1_s)`.
pub fn verify_cut_bounds(
    model: &ClippedMdp,
    policy: &StationaryPolicy,
    s: usize,
    a: usize,
    d: usize,
) -> Result<LemmaReport> {
    check_base_state(model, s)?;
    check_state(model.model(), s, a)?;
    check_pinned(policy, s, a)?;
    let cut_model = cut(model);
    let n = model.model().num_states();
    let init = unit(n, s);
    let pair = GeneralReward::pair_indicator(n, model.model().num_actions(), s, a);
    let w = policy_value_finite(model, policy, &pair, d, &init)?;
    let w_cut = policy_value_finite(&cut_model, policy, &pair, d, &init)?;
    let w_z = z_visits(model, policy, d, &init)?;
    Ok(LemmaReport::new(
        "cut-bounds",
        describe(model.model(), &format!("s={s} a={a} d={d}")),
        Method::Exact,
        vec![
            Check::le("(1 - W_d(1_z)) W_d(cut) <= W_d", (1.0 - w_z) * w_cut, 1.0, w, EXACT_TOLERANCE),
            Check::le("W_d <= W_d(cut)", w, 1.0, w_cut, EXACT_TOLERANCE),
        ],
    ))
}

/// `X_d({s}, p, mu) >= X_d({s}, cut p, mu) - W_d(1_z, p, mu)`.
pub fn verify_cut_reach<P: Policy + ?Sized>(
    model: &ClippedMdp,
    policy: &P,
    s: usize,
    d: usize,
    init: &[f64],
) -> Result<LemmaReport> {
    check_base_state(model, s)?;
    let cut_model = cut(model);
    let target = Target::States(vec![s]);
    let x = reach_probability(model, &target, policy, d, init)?;
    let x_cut = reach_probability(&cut_model, &target, policy, d, init)?;
    let w_z = z_visits(model, policy, d, init)?;
    Ok(LemmaReport::new(
        "cut-reach",
        describe(model.model(), &format!("s={s} d={d}")),
        Method::Exact,
        vec![Check::le("X_d(cut) - W_d(1_z) <= X_d", x_cut - w_z, 1.0, x, EXACT_TOLERANCE)],
    ))
}

/// Occupancy-weighted one-step differences against the DP difference.
pub fn verify_policy_difference<P: Policy + ?Sized>(
    p: &TransitionModel,
    q: &TransitionModel,
    policy: &P,
    reward: &GeneralReward,
    d: usize,
    init: &[f64],
) -> Result<LemmaReport> {
    if p.num_states() != q.num_states() || p.num_actions() != q.num_actions() {
        return Err(Error::DimensionMismatch("the two models differ in shape".into()));
    }
    let direct = policy_value_finite(p, policy, reward, d, init)?
        - policy_value_finite(q, policy, reward, d, init)?;
    let tail = evaluate_finite(q, policy, reward, d)?;
    let occupancy = state_occupancy(p, policy, d, init)?;
    let mut sum = 0.0;
    for (h, dist) in occupancy.iter().enumerate() {
        // Continuation values of the tail policy, `W_{d-h-1}` under `q`.
        let next = tail.row(h + 1);
        for (st, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let act = policy.action(h, st);
            let diff: f64 = p
                .row(st, act)
                .iter()
                .zip(q.row(st, act))
                .zip(next)
                .map(|((x, y), v)| (x - y) * v)
                .sum();
            sum += mass * diff;
        }
    }
    Ok(LemmaReport::new(
        "policy-difference",
        describe(p, &format!("d={d}")),
        Method::Exact,
        vec![Check::eq("W(p) - W(p') = occupancy sum", direct, sum, EXACT_TOLERANCE)],
    ))
}

/// `W_2d <= exp(5 S ln S) W_d` for stationary policies when `d >= S >= 5`.
pub fn verify_doubling<M: AsModel + ?Sized>(
    mdp: &M,
    policy: &StationaryPolicy,
    reward: &GeneralReward,
    d: usize,
    init: &[f64],
) -> Result<LemmaReport> {
    let m = mdp.model();
    let n = m.num_states();
    let name = "W_2d <= exp(5 S ln S) W_d";
    let check = if n < 5 || d < n {
        Check::skipped(name, "needs d >= S >= 5")
    } else {
        let w_2d = policy_value_finite(m, policy, reward, 2 * d, init)?;
        let w_d = policy_value_finite(m, policy, reward, d, init)?;
        let factor = (5.0 * n as f64 * (n as f64).ln()).exp();
        Check::le(name, w_2d, factor, w_d, EXACT_TOLERANCE)
    };
    Ok(LemmaReport::new(
        "doubling",
        describe(m, &format!("d={d}")),
        Method::Exact,
        vec![check],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{substream, Lane};
    use crate::planning::clip;

    /// Every pair of an `n`-state model loops on itself.
    fn self_loops(n: usize, a_n: usize) -> TransitionModel {
        let mut p = TransitionModel::zeros(n, a_n);
        for s in 0..n {
            for a in 0..a_n {
                p.row_mut(s, a)[s] = 1.0;
            }
        }
        p
    }

    #[test]
    fn approx_power_on_a_self_loop_counts_steps() {
        let r = verify_approx_power(&self_loops(2, 2), 1, 0, 3, 4).unwrap();
        assert!(r.pass);
        assert_eq!((r.primary().lhs, r.primary().rhs), (12.0, 4.0));
        let r = verify_stationary_vs_all(&self_loops(2, 2), 1, 1, 5).unwrap();
        assert_eq!((r.primary().lhs, r.primary().rhs), (5.0, 5.0));
    }

    #[test]
    fn enumeration_beyond_the_cap_is_refused() {
        let err = verify_stationary_vs_all(&self_loops(21, 2), 0, 0, 2);
        assert!(matches!(err, Err(Error::EnumerationBudget { cap: ENUMERATION_CAP, .. })));
    }

    #[test]
    fn deterministic_visits_concentrate_surely() {
        // 0 -> 1 -> 0 -> ... visits (0, 0) every other step.
        let p = TransitionModel::from_nested(&[vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]]).unwrap();
        let policy = StationaryPolicy::constant(2, 0);
        let mut rng = substream(1, 0, Lane::Aux);
        let r = verify_concentration(&p, &policy, 0, 0, 9, MIN_TRIALS, &mut rng).unwrap();
        assert!(r.pass);
        assert!(matches!(r.method, Method::MonteCarlo { estimate, .. } if estimate == 1.0));
        assert!(verify_concentration(&p, &policy, 0, 0, 9, 10, &mut rng).is_err());
        assert!(verify_concentration(&p, &policy, 0, 1, 9, MIN_TRIALS, &mut rng).is_err());
    }

    #[test]
    fn mpdl_identity_and_small_perturbation() {
        let p = TransitionModel::from_nested(&[
            vec![vec![0.2, 0.8, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0.5, 0.25, 0.25], vec![0.0, 1.0, 0.0]],
            vec![vec![0.1, 0.1, 0.8], vec![1.0, 0.0, 0.0]],
        ])
        .unwrap();
        let reward = GeneralReward::new(3, 2, vec![0.0, 0.3, 0.2, 0.0, 1.0, 0.5]).unwrap();
        let policy = StationaryPolicy::new(vec![0, 1, 0]);
        let same = verify_mpdl(&p, &p, 0.0, &policy, &reward, 10, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(same.checks[0].lhs, same.checks[0].rhs);
        assert!(same.pass);

        let mut q = p.clone();
        let row = q.row_mut(1, 0);
        let (x, y) = (row[0], row[1]);
        row[0] = x * 0.05f64.exp();
        row[1] = y - (row[0] - x);
        let eps = closeness(&p, &q).unwrap();
        assert!(eps > 0.0);
        assert!(verify_mpdl(&p, &q, eps, &policy, &reward, 10, &[1.0, 0.0, 0.0]).unwrap().pass);
        assert!(matches!(
            verify_mpdl(&p, &q, eps / 2.0, &policy, &reward, 10, &[1.0, 0.0, 0.0]),
            Err(Error::NotClose { .. })
        ));
    }

    #[test]
    fn perturbation_reports_realized_closeness() {
        let mut rng = substream(3, 0, Lane::Aux);
        let p = crate::lemma_lab::instances::random_model(4, 2, &mut rng);
        let (q, eps) = perturb(&p, 0.1, &mut rng);
        assert_eq!(closeness(&p, &q), Some(eps));
        assert!(q.max_row_error() < 1e-12);
    }

    #[test]
    fn reach_horizon_extremes() {
        let r = verify_reach_horizon(&self_loops(3, 1), &[(0, 0)], 2, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((r.primary().lhs, r.primary().rhs), (1.0, 1.0));
        let r = verify_reach_horizon(&self_loops(3, 1), &[(2, 0)], 2, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((r.primary().lhs, r.primary().rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn discount_bounds_on_a_self_loop() {
        let p = self_loops(1, 1);
        let reward = GeneralReward::new(1, 1, vec![1.0]).unwrap();
        let policy = StationaryPolicy::constant(1, 0);
        let r = verify_discount_bounds(&p, &policy, 0, 0, 4, 4, &reward).unwrap();
        assert!(r.pass);
        assert_eq!(r.checks[0].lhs, 4.0);
        assert!((r.checks[0].rhs - 4.0).abs() < 1e-9);
        assert!(r.checks[3].skipped.is_some());

        let zero = GeneralReward::zeros(1, 1);
        let r = verify_discount_bounds(&p, &policy, 0, 0, 4, 4, &zero).unwrap();
        assert_eq!(r.checks[2].lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn cut_without_z_mass_is_exact() {
        let model = clip(&self_loops(2, 2), &Target::Pairs(vec![]));
        let policy = StationaryPolicy::new(vec![1, 0, 0, 0]);
        let r = verify_cut_bounds(&model, &policy, 0, 1, 6).unwrap();
        assert!(r.pass);
        assert_eq!(r.checks[1].lhs, r.checks[1].rhs);
        let r = verify_cut_reach(&model, &policy, 1, 6, &[0.5, 0.5]).unwrap();
        assert_eq!(r.primary().lhs, r.primary().rhs);
    }

    #[test]
    fn cut_of_a_fully_clipped_start_pair() {
        let model = clip(&self_loops(2, 2), &Target::Pairs(vec![(0, 1)]));
        let policy = StationaryPolicy::new(vec![1, 0, 0, 0]);
        let r = verify_cut_bounds(&model, &policy, 0, 1, 5).unwrap();
        assert!(r.pass);
        assert_eq!((r.checks[1].lhs, r.checks[1].rhs), (1.0, 1.0));
        assert!(verify_cut_reach(&model, &policy, 1, 5, &[1.0]).unwrap().pass);
    }

    #[test]
    fn policy_difference_identity() {
        let p = TransitionModel::from_nested(&[
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            vec![vec![0.2, 0.8], vec![0.0, 1.0]],
        ])
        .unwrap();
        let mut q = p.clone();
        q.row_mut(0, 0).copy_from_slice(&[0.3, 0.7]);
        let reward = GeneralReward::new(2, 2, vec![0.0, 0.1, 1.0, 0.4]).unwrap();
        let policy = StationaryPolicy::new(vec![0, 1]);
        let r = verify_policy_difference(&p, &q, &policy, &reward, 3, &[1.0, 0.0]).unwrap();
        assert!((r.primary().lhs - r.primary().rhs).abs() < 1e-12);
        assert!(r.primary().lhs != 0.0);
        let r = verify_policy_difference(&p, &p, &policy, &reward, 3, &[1.0, 0.0]).unwrap();
        assert_eq!((r.primary().lhs, r.primary().rhs), (0.0, 0.0));
    }

    #[test]
    fn doubling_on_a_self_loop() {
        let p = self_loops(5, 1);
        let policy = StationaryPolicy::constant(5, 0);
        let reward = GeneralReward::new(5, 1, vec![1.0; 5]).unwrap();
        let r = verify_doubling(&p, &policy, &reward, 5, &[1.0]).unwrap();
        assert_eq!(r.primary().lhs / r.primary().rhs, 2.0);
        assert!(r.pass);
        let small = verify_doubling(&self_loops(2, 1), &StationaryPolicy::constant(2, 0), &GeneralReward::zeros(2, 1), 5, &[1.0]).unwrap();
        assert!(small.primary().skipped.is_some());
    }
}
