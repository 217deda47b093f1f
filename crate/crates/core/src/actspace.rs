//! Valid-action machinery: per-CSP qualified-subset subspaces, canonical
//! indexing, discretization of primitive actions, and the proto-to-valid
//! mapping that collapses partially idle proto-actions to the all-zero
//! action.
//!
//! Canonical subspace ordering: element 0 is the all-zero vector; the
//! qualified subsets follow ordered by subset size, then lexicographically by
//! sorted sensor indices. The ordering is frozen so checkpoints and metrics
//! replay across runs.

use thiserror::Error;

use crate::env::NetworkConfig;

/// One CSP's action subspace: the all-zero vector plus every subset of at
/// most M sensors whose total importance reaches the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub csp_index: usize,
    /// Indicator vectors over the set's local sensor positions.
    pub elements: Vec<Vec<bool>>,
}

impl Subspace {
    pub fn size(&self) -> usize {
        self.elements.len()
    }
}

/// All K subspaces plus the global bookkeeping needed to assemble valid
/// actions. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpaces {
    pub subspaces: Vec<Subspace>,
    /// Global sensor indices per CSP, mirroring the config.
    pub sensor_sets: Vec<Vec<usize>>,
    /// Total sensor count.
    pub n: usize,
    /// |A|: product over CSPs of (subspace size - 1), plus the all-zero action.
    pub total_valid: u64,
}

/// The policy's continuous output, component k in the open interval
/// (0, size_k).
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveAction(pub Vec<f64>);

/// Discretized subspace indices, component k in {0, .., size_k - 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtoAction(pub Vec<usize>);

/// Per-sensor scheduling indicators over all N sensors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValidAction {
    pub mask: Vec<bool>,
}

impl ValidAction {
    pub fn zero(n: usize) -> Self {
        ValidAction { mask: vec![false; n] }
    }

    pub fn is_zero(&self) -> bool {
        self.mask.iter().all(|&b| !b)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActSpaceError {
    #[error("set {set}: no subset of at most {m} sensors reaches threshold {threshold}")]
    NoQualifiedSubset { set: usize, m: usize, threshold: f64 },
    #[error("empty sensor set")]
    EmptySet,
    #[error("m must be at least 1")]
    ZeroChannels,
}

/// Enumerates one CSP's subspace in canonical order.
pub fn enumerate_subspace(
    csp_index: usize,
    importances: &[f64],
    m: usize,
    threshold: f64,
) -> Result<Subspace, ActSpaceError> {
    if importances.is_empty() {
        return Err(ActSpaceError::EmptySet);
    }
    if m == 0 {
        return Err(ActSpaceError::ZeroChannels);
    }
    let len = importances.len();
    let mut elements = vec![vec![false; len]];
    for size in 1..=m.min(len) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let total: f64 = combo.iter().map(|&i| importances[i]).sum();
            if total >= threshold {
                let mut ind = vec![false; len];
                for &i in &combo {
                    ind[i] = true;
                }
                elements.push(ind);
            }
            // Next combination in lexicographic order.
            let mut pos = size;
            while pos > 0 {
                pos -= 1;
                if combo[pos] != pos + len - size {
                    combo[pos] += 1;
                    for j in pos + 1..size {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if pos == 0 {
                    combo.clear();
                }
            }
            if combo.is_empty() {
                break;
            }
        }
    }
    if elements.len() == 1 {
        return Err(ActSpaceError::NoQualifiedSubset { set: csp_index, m, threshold });
    }
    Ok(Subspace { csp_index, elements })
}

/// Builds every subspace and the total valid-action count. The count uses
/// the product formula; the full space is never materialized.
pub fn build_action_spaces(config: &NetworkConfig) -> Result<ActionSpaces, ActSpaceError> {
    let mut subspaces = Vec::with_capacity(config.k);
    for (k, set) in config.sensor_sets.iter().enumerate() {
        let imp: Vec<f64> = set.iter().map(|&s| config.importance[s]).collect();
        subspaces.push(enumerate_subspace(k, &imp, config.m, config.threshold[k])?);
    }
    let total_valid = subspaces.iter().map(|s| (s.size() - 1) as u64).product::<u64>() + 1;
    Ok(ActionSpaces {
        subspaces,
        sensor_sets: config.sensor_sets.clone(),
        n: config.n(),
        total_valid,
    })
}

/// Componentwise floor, clamped to the last index of each subspace.
pub fn discretize(primitive: &PrimitiveAction, spaces: &ActionSpaces) -> ProtoAction {
    let idx = primitive
        .0
        .iter()
        .zip(spaces.subspaces.iter())
        .map(|(&v, sub)| (v.floor().max(0.0) as usize).min(sub.size() - 1))
        .collect();
    ProtoAction(idx)
}

/// Maps a proto-action into the valid-action space: any zero component
/// collapses the whole decision to keeping all sensors silent, otherwise the
/// indexed subsets are concatenated.
pub fn map_to_valid(proto: &ProtoAction, spaces: &ActionSpaces) -> ValidAction {
    assert_eq!(proto.0.len(), spaces.subspaces.len());
    if proto.0.iter().any(|&i| i == 0) {
        return ValidAction::zero(spaces.n);
    }
    let mut mask = vec![false; spaces.n];
    for (k, &idx) in proto.0.iter().enumerate() {
        let element = &spaces.subspaces[k].elements[idx];
        for (local, &on) in element.iter().enumerate() {
            if on {
                mask[spaces.sensor_sets[k][local]] = true;
            }
        }
    }
    ValidAction { mask }
}

/// Checks the channel constraint per set and the all-or-nothing
/// qualification condition, using the expected importance of the scheduled
/// sensors.
pub fn validate_action(action: &ValidAction, config: &NetworkConfig) -> bool {
    if action.mask.len() != config.n() {
        return false;
    }
    if action.is_zero() {
        return true;
    }
    for (k, set) in config.sensor_sets.iter().enumerate() {
        let scheduled: usize = set.iter().filter(|&&s| action.mask[s]).count();
        if scheduled > config.m {
            return false;
        }
        let f: f64 = set.iter().filter(|&&s| action.mask[s]).map(|&s| config.importance[s]).sum();
        if f < config.threshold[k] {
            return false;
        }
    }
    true
}

/// Canonical flat index over the valid-action space: 0 is the all-zero
/// action; indices 1.. enumerate nonzero subspace choices in mixed radix with
/// CSP 0 as the most significant digit.
pub fn encode_flat(proto: &ProtoAction, spaces: &ActionSpaces) -> u64 {
    if proto.0.iter().any(|&i| i == 0) {
        return 0;
    }
    let mut idx: u64 = 0;
    for (k, &i) in proto.0.iter().enumerate() {
        let radix = (spaces.subspaces[k].size() - 1) as u64;
        idx = idx * radix + (i as u64 - 1);
    }
    idx + 1
}

/// Inverse of [`encode_flat`].
pub fn decode_flat(index: u64, spaces: &ActionSpaces) -> ProtoAction {
    let k = spaces.subspaces.len();
    if index == 0 {
        return ProtoAction(vec![0; k]);
    }
    let mut rem = index - 1;
    let mut digits = vec![0usize; k];
    for i in (0..k).rev() {
        let radix = (spaces.subspaces[i].size() - 1) as u64;
        digits[i] = (rem % radix) as usize + 1;
        rem /= radix;
    }
    ProtoAction(digits)
}
