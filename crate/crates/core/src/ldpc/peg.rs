//! Progressive edge growth for regular (3,6) codes.
//!
//! Variable nodes are processed in index order. The first edge of each
//! variable goes to a lowest-degree check; every further edge goes to a
//! lowest-degree check among those farthest from the variable in the
//! current Tanner graph, which avoids short cycles greedily. Checks that
//! already hold six edges are never candidates, so the result is exactly
//! (3,6)-regular. Ties are broken with a seeded RNG.

use rand::Rng;

use super::ParityCheckMatrix;
use crate::rng::rng_from;
use crate::{Error, Result};

const VAR_DEGREE: usize = 3;
const CHECK_DEGREE: usize = 6;

pub fn build_parity_matrix(n: usize, seed: u64) -> Result<ParityCheckMatrix> {
    // 3n variable edges must equal 6 * (n / 2) check edges, so n even suffices.
    if n < 24 || n % 2 != 0 {
        return Err(Error::config(format!(
            "regular (3,6) code length must be even and at least 24, got {n}"
        )));
    }
    let m = n / 2;
    let mut rng = rng_from(seed);
    let mut check_vars: Vec<Vec<usize>> = vec![Vec::with_capacity(CHECK_DEGREE); m];
    let mut var_checks: Vec<Vec<usize>> = vec![Vec::with_capacity(VAR_DEGREE); n];

    let mut reached = vec![false; m];
    let mut seen_var = vec![false; n];

    for v in 0..n {
        for edge in 0..VAR_DEGREE {
            let candidates: Vec<usize> = if edge == 0 {
                (0..m).filter(|&c| check_vars[c].len() < CHECK_DEGREE).collect()
            } else {
                farthest_checks(v, &check_vars, &var_checks, &mut reached, &mut seen_var)
            };
            let Some(min_deg) = candidates.iter().map(|&c| check_vars[c].len()).min() else {
                return Err(Error::config(format!(
                    "PEG construction stalled at variable {v} (n = {n}, seed = {seed}); try another seed"
                )));
            };
            let lowest: Vec<usize> = candidates
                .into_iter()
                .filter(|&c| check_vars[c].len() == min_deg)
                .collect();
            let c = lowest[rng.random_range(0..lowest.len())];
            check_vars[c].push(v);
            var_checks[v].push(c);
        }
    }

    ParityCheckMatrix::from_rows(n, check_vars)
}

/// Open checks outside the deepest BFS layer that still leaves some open
/// check unreached (or all unreachable open checks if the tree saturates).
fn farthest_checks(
    v: usize,
    check_vars: &[Vec<usize>],
    var_checks: &[Vec<usize>],
    reached: &mut [bool],
    seen_var: &mut [bool],
) -> Vec<usize> {
    reached.iter_mut().for_each(|r| *r = false);
    seen_var.iter_mut().for_each(|s| *s = false);
    let is_open = |c: usize| check_vars[c].len() < CHECK_DEGREE;

    seen_var[v] = true;
    let mut frontier: Vec<usize> = var_checks[v].clone();
    for &c in &frontier {
        reached[c] = true;
    }
    let mut previous: Option<Vec<usize>> = None;

    loop {
        let unreached: Vec<usize> = (0..check_vars.len())
            .filter(|&c| !reached[c] && is_open(c))
            .collect();
        if unreached.is_empty() {
            // Every open check sits within the current depth: fall back to
            // those that were still outside one layer earlier.
            return previous.unwrap_or_default();
        }

        let mut next = Vec::new();
        for &c in &frontier {
            for &u in &check_vars[c] {
                if seen_var[u] {
                    continue;
                }
                seen_var[u] = true;
                for &c2 in &var_checks[u] {
                    if !reached[c2] {
                        reached[c2] = true;
                        next.push(c2);
                    }
                }
            }
        }
        if next.is_empty() {
            return unreached;
        }
        previous = Some(unreached);
        frontier = next;
    }
}
