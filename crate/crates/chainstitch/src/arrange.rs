//! Cyclic arrangement of colored items so that neighbors always differ.
//!
//! The mechanisms hand each hospital's selected paths to a stitcher as one
//! interleaved sequence; hospitals must alternate so that consecutive paths
//! belong to different owners. Abstractly: given colored balls where the
//! largest color class is no larger than all the others combined, produce a
//! cyclic order with no two adjacent balls sharing a color.
//!
//! Construction: sort balls by color class size (largest first), deal them
//! round-robin into as many stacks as the largest class has balls, then
//! concatenate the stacks. Every stack holds at least two balls, stack bottoms
//! all carry the largest color, and stack tops never do, so both within-stack
//! and cross-stack neighbors differ.

use std::cmp::Reverse;
use std::collections::HashMap;

use crate::{Error, Result};

/// Arrange `items` (color, payload) into a valid cyclic alternating order and
/// rotate it so the item at input index `first` leads. Fails when the largest
/// color class outnumbers the rest combined, or fewer than two items exist.
pub fn arrange_alternating<T>(items: Vec<(u32, T)>, first: usize) -> Result<Vec<(u32, T)>> {
    let n = items.len();
    if first >= n {
        return Err(Error::Precondition(format!(
            "rotation index {first} out of range for {n} items"
        )));
    }
    let mut class_size: HashMap<u32, usize> = HashMap::new();
    for (color, _) in &items {
        *class_size.entry(*color).or_insert(0) += 1;
    }
    let n1 = class_size.values().copied().max().unwrap_or(0);
    if n1 > n - n1 {
        return Err(Error::Precondition(format!(
            "largest color class has {n1} of {n} items; cyclic alternation impossible"
        )));
    }
    // Stable sort by class size descending, then color id; ties keep input order.
    let mut order: Vec<(u32, usize, T)> = items
        .into_iter()
        .enumerate()
        .map(|(i, (c, t))| (c, i, t))
        .collect();
    order.sort_by_key(|(c, _, _)| (Reverse(class_size[c]), *c));
    // Deal round-robin into n1 stacks, then concatenate.
    let mut stacks: Vec<Vec<(u32, usize, T)>> = (0..n1).map(|_| Vec::new()).collect();
    for (pos, ball) in order.into_iter().enumerate() {
        stacks[pos % n1].push(ball);
    }
    let mut cyclic: Vec<(u32, usize, T)> = stacks.into_iter().flatten().collect();
    let lead = cyclic
        .iter()
        .position(|(_, i, _)| *i == first)
        .expect("every input index appears once");
    cyclic.rotate_left(lead);
    Ok(cyclic.into_iter().map(|(c, _, t)| (c, t)).collect())
}
