//! Random baseline: an independently uniform nonzero subset per CSP, so the
//! emitted action is always a qualified, nonzero valid action.

use rand::Rng;

use crate::actspace::{map_to_valid, ActionSpaces, ProtoAction, ValidAction};

pub fn random_act(spaces: &ActionSpaces, rng: &mut impl Rng) -> ValidAction {
    let proto =
        ProtoAction(spaces.subspaces.iter().map(|sub| rng.gen_range(1..sub.size())).collect());
    map_to_valid(&proto, spaces)
}
