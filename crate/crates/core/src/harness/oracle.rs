//! Exact dynamic-programming oracle for the soft value recursions.
//!
//! For a tiny instance and a fixed memoryless stochastic policy, the joint
//! process over (true state, observed battery) is a finite Markov chain. The
//! oracle builds its exact transition kernel from the pure environment
//! transition, then computes the soft state- and action-values along two
//! independent routes:
//!
//! 1. solving the recursive (Bellman-style) linear system by Gauss-Seidel to
//!    near machine precision, and
//! 2. directly evaluating the defining discounted series, truncated where
//!    the tail is provably below 1e-9.
//!
//! The maximum discrepancy between the two routes is the report.

use std::collections::HashMap;

use thiserror::Error;

use crate::actspace::{build_action_spaces, validate_action, ValidAction};
use crate::env::{reset, transition, EnvError, EnvState, NetworkConfig, ObsBattery};

const MAX_STATES: usize = 100_000;
const SERIES_TAIL: f64 = 1e-9;
const GS_TOL: f64 = 1e-12;

/// A memoryless stochastic policy over explicitly listed valid actions.
#[derive(Debug, Clone)]
pub struct FixedPolicy {
    pub actions: Vec<(ValidAction, f64)>,
}

impl FixedPolicy {
    /// Policy entropy, -sum p log p.
    pub fn entropy(&self) -> f64 {
        self.actions.iter().map(|(_, p)| if *p > 0.0 { -p * p.ln() } else { 0.0 }).sum()
    }
}

/// With probability `p` schedule the first qualified subset of every CSP;
/// otherwise stay silent.
pub fn two_point_policy(config: &NetworkConfig, p: f64) -> Result<FixedPolicy, OracleError> {
    let spaces = build_action_spaces(config).map_err(|e| OracleError::BadPolicy(e.to_string()))?;
    let proto = crate::actspace::ProtoAction(vec![1; config.k]);
    let schedule = crate::actspace::map_to_valid(&proto, &spaces);
    Ok(FixedPolicy {
        actions: vec![(ValidAction::zero(config.n()), 1.0 - p), (schedule, p)],
    })
}

/// The tiny reference instance: one CSP, one sensor whose importance equals
/// the threshold, unit channel, battery capacity 2, arrival probability 0.5,
/// failure probability 0.2, caps at 8, discount 0.9.
pub fn tiny_oracle_config() -> NetworkConfig {
    NetworkConfig {
        k: 1,
        sensor_sets: vec![vec![0]],
        m: 1,
        failure_prob: vec![0.2],
        eh_prob: vec![0.5],
        battery_cap: vec![2],
        importance: vec![1.0],
        threshold: vec![1.0],
        g_max: 8,
        x_max: 8,
        aoci_max: 8,
        discount: 0.9,
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("joint chain exceeds {MAX_STATES} states")]
    StateSpaceTooLarge,
    #[error("invalid policy: {0}")]
    BadPolicy(String),
    #[error("Gauss-Seidel failed to reach {GS_TOL:e} within {0} sweeps")]
    NoConvergence(usize),
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub states: usize,
    pub horizon: usize,
    pub gs_sweeps: usize,
    pub max_v_discrepancy: f64,
    pub max_q_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Soft state value of the reset state (linear route).
    pub v_start: f64,
    /// Soft action values of the reset state, one per policy action.
    pub q_start: Vec<f64>,
}

impl OracleReport {
    pub fn discrepancy(&self) -> f64 {
        self.max_v_discrepancy.max(self.max_q_discrepancy)
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} joint states, horizon {}, {} sweeps: max |V| gap {:.3e}, max |Q| gap {:.3e} vs tol {:.1e}: {}",
            self.states,
            self.horizon,
            self.gs_sweeps,
            self.max_v_discrepancy,
            self.max_q_discrepancy,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Joint chain node: the true state plus the agent-visible battery report.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JointState {
    state: EnvState,
    obs_battery: Vec<ObsBattery>,
}

/// Sparse kernel entry: (next state index, probability).
type Row = Vec<(usize, f64)>;

struct Chain {
    /// Per state, per action: transition row.
    kernel: Vec<Vec<Row>>,
    /// Per state, per action: expected one-step reward.
    reward: Vec<Vec<f64>>,
    states: usize,
}

fn build_chain(config: &NetworkConfig, policy: &FixedPolicy) -> Result<Chain, OracleError> {
    let total_p: f64 = policy.actions.iter().map(|(_, p)| p).sum();
    if policy.actions.is_empty() || (total_p - 1.0).abs() > 1e-12 {
        return Err(OracleError::BadPolicy(format!("action probabilities sum to {total_p}")));
    }
    for (a, p) in &policy.actions {
        if *p < 0.0 {
            return Err(OracleError::BadPolicy("negative probability".into()));
        }
        if !validate_action(a, config) {
            return Err(OracleError::BadPolicy("policy emits an invalid action".into()));
        }
    }

    let (s0, o0) = reset(config)?;
    let start = JointState { state: s0, obs_battery: o0.battery };
    let mut index: HashMap<JointState, usize> = HashMap::new();
    let mut order: Vec<JointState> = Vec::new();
    index.insert(start.clone(), 0);
    order.push(start);
    let mut kernel: Vec<Vec<Row>> = Vec::new();
    let mut reward: Vec<Vec<f64>> = Vec::new();

    let n = config.n();
    let mut frontier = 0usize;
    while frontier < order.len() {
        let joint = order[frontier].clone();
        let mut state_rows = Vec::with_capacity(policy.actions.len());
        let mut state_rewards = Vec::with_capacity(policy.actions.len());
        for (action, _) in &policy.actions {
            // Only activated sensors consult the success draw, and arrivals
            // only matter below capacity; everything else is marginalized.
            let activated: Vec<usize> = (0..n)
                .filter(|&s| action.mask[s] && joint.state.battery[s] >= 1)
                .collect();
            let relevant_eh: Vec<usize> = (0..n)
                .filter(|&s| {
                    let residual = joint.state.battery[s] - activated.contains(&s) as u32;
                    residual < config.battery_cap[s]
                })
                .collect();
            let mut row: HashMap<usize, f64> = HashMap::new();
            let mut exp_reward = 0.0;
            for succ_bits in 0..(1u32 << activated.len()) {
                let mut success = vec![false; n];
                let mut p_succ = 1.0;
                for (i, &s) in activated.iter().enumerate() {
                    let ok = succ_bits >> i & 1 == 1;
                    success[s] = ok;
                    p_succ *= if ok { 1.0 - config.failure_prob[s] } else { config.failure_prob[s] };
                }
                for eh_bits in 0..(1u32 << relevant_eh.len()) {
                    let mut eh = vec![false; n];
                    let mut p_eh = 1.0;
                    for (i, &s) in relevant_eh.iter().enumerate() {
                        let arrive = eh_bits >> i & 1 == 1;
                        eh[s] = arrive;
                        p_eh *= if arrive { config.eh_prob[s] } else { 1.0 - config.eh_prob[s] };
                    }
                    let p = p_succ * p_eh;
                    if p == 0.0 {
                        continue;
                    }
                    let (next_state, out) = transition(&joint.state, action, &success, &eh, config)?;
                    let next =
                        JointState { state: next_state, obs_battery: out.next_obs.battery.clone() };
                    let next_idx = match index.get(&next) {
                        Some(&i) => i,
                        None => {
                            let i = order.len();
                            if i >= MAX_STATES {
                                return Err(OracleError::StateSpaceTooLarge);
                            }
                            index.insert(next.clone(), i);
                            order.push(next);
                            i
                        }
                    };
                    *row.entry(next_idx).or_insert(0.0) += p;
                    exp_reward += p * out.reward as f64;
                }
            }
            let mut row: Row = row.into_iter().collect();
            row.sort_unstable_by_key(|&(i, _)| i);
            state_rows.push(row);
            state_rewards.push(exp_reward);
        }
        kernel.push(state_rows);
        reward.push(state_rewards);
        frontier += 1;
    }
    Ok(Chain { kernel, reward, states: order.len() })
}

/// Computes soft values along both routes and reports the gap.
pub fn oracle_soft_values(
    config: &NetworkConfig,
    policy: &FixedPolicy,
    gamma: f64,
    alpha: f64,
    tolerance: f64,
) -> Result<OracleReport, OracleError> {
    let chain = build_chain(config, policy)?;
    let n = chain.states;
    let probs: Vec<f64> = policy.actions.iter().map(|(_, p)| *p).collect();
    let entropy = policy.entropy();
    let u_max = config.aoci_max as f64;

    // Policy-averaged reward and kernel.
    let mut r_bar = vec![0.0; n];
    let mut p_bar: Vec<Row> = vec![Vec::new(); n];
    for s in 0..n {
        let mut row: HashMap<usize, f64> = HashMap::new();
        for (a, &pa) in probs.iter().enumerate() {
            r_bar[s] += pa * chain.reward[s][a];
            for &(next, p) in &chain.kernel[s][a] {
                *row.entry(next).or_insert(0.0) += pa * p;
            }
        }
        let mut row: Row = row.into_iter().collect();
        row.sort_unstable_by_key(|&(i, _)| i);
        p_bar[s] = row;
    }

    // Route 1: Gauss-Seidel on V = R + alpha*H + gamma * P V.
    let mut v = vec![0.0; n];
    let mut sweeps = 0usize;
    let max_sweeps = 2_000_000;
    loop {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let mut acc = r_bar[s] + alpha * entropy;
            if gamma != 0.0 {
                let mut exp_next = 0.0;
                for &(next, p) in &p_bar[s] {
                    exp_next += p * v[next];
                }
                acc += gamma * exp_next;
            }
            delta = delta.max((acc - v[s]).abs());
            v[s] = acc;
        }
        sweeps += 1;
        if delta < GS_TOL {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(OracleError::NoConvergence(sweeps));
        }
    }
    // Q(s, a) = R(s, a) + gamma * E[V(next)].
    let q_lin: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..probs.len())
                .map(|a| {
                    let mut acc = chain.reward[s][a];
                    for &(next, p) in &chain.kernel[s][a] {
                        acc += gamma * p * v[next];
                    }
                    acc
                })
                .collect()
        })
        .collect();

    // Route 2: truncated series. u_l = E[U at lag l under the policy];
    // V_series = sum_{l=0..h} gamma^l (u_l + alpha*H).
    let mut horizon = 0usize;
    while gamma.powi(horizon as i32) * u_max >= SERIES_TAIL {
        horizon += 1;
        if horizon > 2_000 {
            break;
        }
    }
    let mut u_l = r_bar.clone();
    let mut v_series = vec![0.0; n];
    let mut z = vec![0.0; n]; // sum_{l=0..h-1} gamma^l u_l
    let mut gpow = 1.0;
    for l in 0..=horizon {
        for s in 0..n {
            v_series[s] += gpow * (u_l[s] + alpha * entropy);
        }
        if l < horizon {
            for s in 0..n {
                z[s] += gpow * u_l[s];
            }
            // u_{l+1} = P u_l
            let mut next_u = vec![0.0; n];
            for s in 0..n {
                let mut acc = 0.0;
                for &(next, p) in &p_bar[s] {
                    acc += p * u_l[next];
                }
                next_u[s] = acc;
            }
            u_l = next_u;
            gpow *= gamma;
        }
    }
    // Entropy tail for Q: alpha*H * sum_{l=1..h} gamma^l.
    let mut ent_sum = 0.0;
    let mut gp = gamma;
    for _ in 1..=horizon {
        ent_sum += gp;
        gp *= gamma;
    }
    let q_series: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..probs.len())
                .map(|a| {
                    let mut acc = chain.reward[s][a] + alpha * entropy * ent_sum;
                    for &(next, p) in &chain.kernel[s][a] {
                        acc += gamma * p * z[next];
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let mut max_v: f64 = 0.0;
    for s in 0..n {
        max_v = max_v.max((v[s] - v_series[s]).abs());
    }
    let mut max_q: f64 = 0.0;
    for s in 0..n {
        for a in 0..probs.len() {
            max_q = max_q.max((q_lin[s][a] - q_series[s][a]).abs());
        }
    }
    Ok(OracleReport {
        states: n,
        horizon,
        gs_sweeps: sweeps,
        max_v_discrepancy: max_v,
        max_q_discrepancy: max_q,
        tolerance,
        pass: max_v.max(max_q) <= tolerance,
        v_start: v[0],
        q_start: q_lin[0].clone(),
    })
}
